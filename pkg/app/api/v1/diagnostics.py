"""Influence-function diagnostics endpoint."""

import logging
import time

import numpy as np
from fastapi import APIRouter, HTTPException
from starlette.concurrency import run_in_threadpool

from app.config import get_settings
from app.dependencies import to_http_error
from app.exceptions import SnRobustError
from app.models.domain import IfKind, SnParams
from app.models.requests import InfluenceRequest
from app.models.responses import InfluenceResponse
from app.services import report_service
from app.services.hypothesis import parse_hypothesis
from app.services.robustness import if_curve

router = APIRouter(prefix="/diagnostics")
logger = logging.getLogger(__name__)
settings = get_settings()


@router.post("/influence", response_model=InfluenceResponse)
async def influence_curve(request: InfluenceRequest) -> InfluenceResponse:
    """
    Evaluate an influence function on an evenly spaced grid, one curve per alpha.

    test_if2 and test_pif default to the null gamma = <theta gamma>; test_pif
    defaults to the direction 4 along the restriction.
    """
    started = time.time()
    try:
        theta = SnParams(request.theta.mu, request.theta.sigma, request.theta.gamma)
        kind = IfKind(request.kind)
        grid = np.arange(request.start, request.stop + 0.5 * request.step, request.step)
        hyp, direction = None, request.d
        if kind is not IfKind.ESTIMATOR_IF:
            hyp = parse_hypothesis(request.hypothesis or f"gamma={theta.gamma:g}")
        if kind is IfKind.TEST_PIF and direction is None:
            direction = (4.0 * np.asarray(hyp.jacobian(theta), dtype=float).reshape(3)).tolist()

        def evaluate():
            return [
                if_curve(
                    kind,
                    theta,
                    alpha,
                    grid,
                    hyp,
                    direction,
                    request.tau0,
                    settings.quadrature_spec(),
                    settings.trunc_halfwidth,
                    settings.singular_policy,
                )
                for alpha in request.alphas
            ]

        curves = await run_in_threadpool(evaluate)
        rows = report_service.if_curve_rows(curves)
        return InfluenceResponse(
            kind=kind.value,
            theta=theta.as_dict(),
            rows=report_service.to_serializable(rows, settings.significant_digits),
            execution_time=time.time() - started,
        )

    except HTTPException:
        raise
    except SnRobustError as e:
        logger.error(f"Influence request failed: {e}")
        raise to_http_error(e)
    except Exception as e:
        logger.error(f"Influence request error: {e}")
        raise HTTPException(status_code=500, detail=str(e))
