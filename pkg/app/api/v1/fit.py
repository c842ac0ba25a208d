"""Fit and test endpoints over an uploaded CSV column."""

import logging
import os
import tempfile
import time
from typing import List, Optional, Tuple

from fastapi import APIRouter, Depends, File, Form, HTTPException, UploadFile
from starlette.concurrency import run_in_threadpool

from app.config import get_settings
from app.dependencies import get_analysis_service, get_data_service, to_http_error
from app.exceptions import SnRobustError
from app.models.domain import Sample
from app.models.responses import AnalysisResponse
from app.services import report_service
from app.services.analysis_service import AnalysisService, GridAnalysis
from app.services.data_service import DataService
from app.services.hypothesis import parse_hypothesis

router = APIRouter()
logger = logging.getLogger(__name__)
settings = get_settings()


def parse_alphas(text: Optional[str]) -> List[float]:
    """Comma-separated alphas, defaulting to the configured grid."""
    if not text:
        return list(settings.alpha_grid)
    try:
        alphas = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise HTTPException(status_code=400, detail=f"invalid alpha list {text!r}")
    if not alphas or any(a < 0 for a in alphas):
        raise HTTPException(status_code=400, detail="alphas must be a nonempty list of nonnegative numbers")
    return alphas


async def _ingest(file: UploadFile, column: str, data_service: DataService) -> Tuple[Sample, int]:
    content = await file.read()
    if len(content) > settings.max_upload_mb * 1024 * 1024:
        raise HTTPException(status_code=413, detail=f"upload exceeds {settings.max_upload_mb:g} MB")

    with tempfile.NamedTemporaryFile(suffix=".csv", delete=False) as tmp:
        tmp.write(content)
    try:
        sample, skipped = data_service.ingest_csv(tmp.name, column)
    finally:
        os.unlink(tmp.name)
    return Sample(values=sample.values, label=column, source=f"{file.filename}:{column}"), skipped


def _response(analysis: GridAnalysis, skipped: int, started: float) -> AnalysisResponse:
    analysis.skipped = skipped
    record = report_service.to_serializable(analysis.as_record(), settings.significant_digits)
    return AnalysisResponse(success=not analysis.failed, execution_time=time.time() - started, **record)


@router.post("/fit", response_model=AnalysisResponse)
async def fit_column(
    file: UploadFile = File(..., description="CSV file with a header row"),
    column: str = Form(..., description="Column holding the observations"),
    alphas: Optional[str] = Form(default=None, description="Comma-separated alphas"),
    drop_outliers: bool = Form(default=False),
    optimizer: str = Form(default="gd", pattern="^(gd|ga)$"),
    seed: int = Form(default=0, ge=0),
    analysis_service: AnalysisService = Depends(get_analysis_service),
    data_service: DataService = Depends(get_data_service),
) -> AnalysisResponse:
    """
    Fit the skew-normal model at each alpha (alpha = 0 by maximum likelihood).

    With drop_outliers the box-plot-filtered sample is fitted too and the
    relative differences are reported.
    """
    started = time.time()
    alpha_list = parse_alphas(alphas)
    try:
        sample, skipped = await _ingest(file, column, data_service)
        analysis = await run_in_threadpool(
            analysis_service.fit_grid, sample, alpha_list, drop_outliers, optimizer, seed
        )
        return _response(analysis, skipped, started)

    except HTTPException:
        raise
    except SnRobustError as e:
        logger.error(f"Fit request failed: {e}")
        raise to_http_error(e)
    except Exception as e:
        logger.error(f"Fit request error: {e}")
        raise HTTPException(status_code=500, detail=str(e))


@router.post("/test", response_model=AnalysisResponse)
async def test_column(
    file: UploadFile = File(..., description="CSV file with a header row"),
    column: str = Form(..., description="Column holding the observations"),
    hypothesis: str = Form(..., description="gamma=<v>, sigma=<v> or mu=<v>"),
    alphas: Optional[str] = Form(default=None, description="Comma-separated alphas"),
    drop_outliers: bool = Form(default=False),
    analysis_service: AnalysisService = Depends(get_analysis_service),
    data_service: DataService = Depends(get_data_service),
) -> AnalysisResponse:
    """Wald-type test of the hypothesis at each alpha, with p-values."""
    started = time.time()
    alpha_list = parse_alphas(alphas)
    try:
        hyp = parse_hypothesis(hypothesis)
        sample, skipped = await _ingest(file, column, data_service)
        analysis = await run_in_threadpool(analysis_service.test_grid, sample, alpha_list, hyp, drop_outliers)
        return _response(analysis, skipped, started)

    except HTTPException:
        raise
    except SnRobustError as e:
        logger.error(f"Test request failed: {e}")
        raise to_http_error(e)
    except Exception as e:
        logger.error(f"Test request error: {e}")
        raise HTTPException(status_code=500, detail=str(e))
