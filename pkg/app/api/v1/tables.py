"""Asymptotic efficiency and contiguous power tables."""

import logging
import time
from typing import List, Optional

from fastapi import APIRouter, HTTPException, Query
from starlette.concurrency import run_in_threadpool

from app.config import get_settings
from app.dependencies import to_http_error
from app.exceptions import SnRobustError
from app.models.domain import SnParams
from app.models.responses import TableResponse
from app.services import report_service
from app.services.asymptotics import are_table
from app.services.hypothesis import parse_hypothesis, power_table

router = APIRouter(prefix="/tables")
logger = logging.getLogger(__name__)
settings = get_settings()

TABLE_ALPHAS = [0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0]
ARE_THETAS = ["0,1,1", "0,1,0", "0,1,-1"]
POWER_DISTANCES = [3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0, 7.0, 8.0, 9.0]


def _theta(text: str) -> SnParams:
    try:
        values = [float(part) for part in text.split(",")]
        if len(values) != 3:
            raise ValueError(f"expected mu,sigma,gamma, got {text!r}")
        return SnParams.from_array(values)
    except (ValueError, SnRobustError) as e:
        raise HTTPException(status_code=400, detail=str(e))


def _alphas(values: Optional[List[float]]) -> List[float]:
    alphas = values or TABLE_ALPHAS
    if any(a < 0 for a in alphas):
        raise HTTPException(status_code=400, detail="alpha values must be nonnegative")
    return alphas


@router.get("/are", response_model=TableResponse)
async def get_are_table(
    theta: Optional[List[str]] = Query(default=None, description="Repeatable mu,sigma,gamma"),
    alpha: Optional[List[float]] = Query(default=None, description="Repeatable alpha"),
) -> TableResponse:
    """ARE (percent) of the MDPDE relative to the MLE for each theta, parameter and alpha."""
    started = time.time()
    thetas = [_theta(text) for text in (theta or ARE_THETAS)]
    alphas = _alphas(alpha)
    try:
        table = await run_in_threadpool(
            are_table,
            thetas,
            alphas,
            settings.quadrature_spec(),
            settings.trunc_halfwidth,
            settings.cond_limit,
            settings.singular_policy,
        )
        return TableResponse(
            table="are",
            alphas=table.alphas,
            rows=report_service.to_serializable(report_service.are_rows(table), settings.significant_digits),
            metadata={"singular_policy": settings.singular_policy},
            execution_time=time.time() - started,
        )

    except HTTPException:
        raise
    except SnRobustError as e:
        logger.error(f"ARE table failed: {e}")
        raise to_http_error(e)
    except Exception as e:
        logger.error(f"ARE table error: {e}")
        raise HTTPException(status_code=500, detail=str(e))


@router.get("/power", response_model=TableResponse)
async def get_power_table(
    theta0: str = Query(default="0,1,0", description="Null parameter mu,sigma,gamma"),
    hypothesis: str = Query(default="gamma=0"),
    d: Optional[List[float]] = Query(default=None, description="Repeatable distance"),
    alpha: Optional[List[float]] = Query(default=None, description="Repeatable alpha"),
    tau0: float = Query(default=0.05, gt=0, lt=1),
) -> TableResponse:
    """Asymptotic contiguous power at theta0 + d / sqrt(n) along the restriction."""
    started = time.time()
    theta = _theta(theta0)
    alphas = _alphas(alpha)
    try:
        hyp = parse_hypothesis(hypothesis)
        table = await run_in_threadpool(
            power_table,
            theta,
            hyp,
            d or POWER_DISTANCES,
            alphas,
            tau0,
            settings.quadrature_spec(),
            settings.trunc_halfwidth,
            settings.singular_policy,
        )
        return TableResponse(
            table="power",
            alphas=table.alphas,
            rows=report_service.to_serializable(report_service.power_rows(table), settings.significant_digits),
            metadata={
                "theta0": theta.as_dict(),
                "hypothesis": table.hypothesis,
                "tau0": table.tau0,
                "marginal": {f"{a:g}": flag for a, flag in table.marginal.items()},
            },
            execution_time=time.time() - started,
        )

    except HTTPException:
        raise
    except SnRobustError as e:
        logger.error(f"Power table failed: {e}")
        raise to_http_error(e)
    except Exception as e:
        logger.error(f"Power table error: {e}")
        raise HTTPException(status_code=500, detail=str(e))
