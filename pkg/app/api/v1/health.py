"""Health check endpoints."""

import logging
import math
from datetime import datetime, timezone

import duckdb
from fastapi import APIRouter

from app.config import get_settings
from app.models.responses import HealthResponse
from app.services.special_functions import owens_t, std_normal_cdf

router = APIRouter()
logger = logging.getLogger(__name__)
settings = get_settings()


def check_numerics_status() -> dict:
    """Evaluate two closed-form identities of the special-function layer."""
    try:
        cdf_ok = std_normal_cdf(0.0) == 0.5
        owen_ok = math.isclose(owens_t(0.0, 1.0), 0.125, rel_tol=1e-10)
    except Exception as e:
        logger.error(f"Numerical self-check failed: {e}")
        return {"ok": False, "message": str(e)}
    ok = cdf_ok and owen_ok
    return {
        "ok": ok,
        "singular_policy": settings.singular_policy,
        "trunc_halfwidth": settings.trunc_halfwidth,
        "message": "Self-check passed" if ok else "Self-check mismatch",
    }


def check_database_status() -> dict:
    """Check that an in-memory DuckDB connection can be opened."""
    try:
        conn = duckdb.connect(":memory:")
        conn.execute("SELECT 1").fetchone()
        conn.close()
    except duckdb.Error as e:
        return {"connected": False, "message": str(e)}
    return {"connected": True, "version": duckdb.__version__, "message": "DuckDB available"}


@router.get("/health", response_model=HealthResponse)
async def health_check() -> HealthResponse:
    """Check the health status of all system components."""
    numerics_status = check_numerics_status()
    database_status = check_database_status()

    if numerics_status["ok"] and database_status["connected"]:
        overall_status = "healthy"
    elif numerics_status["ok"]:
        overall_status = "degraded"
    else:
        overall_status = "unhealthy"

    return HealthResponse(
        status=overall_status,
        numerics=numerics_status,
        database=database_status,
        timestamp=datetime.now(timezone.utc),
    )


@router.get("/health/ready")
async def readiness_check():
    """Kubernetes-style readiness probe."""
    if not check_numerics_status()["ok"]:
        return {"ready": False, "reason": "Numerical self-check failed"}
    return {"ready": True}


@router.get("/health/live")
async def liveness_check():
    """Kubernetes-style liveness probe."""
    return {"alive": True}
