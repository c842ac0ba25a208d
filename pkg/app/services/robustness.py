"""Influence-function diagnostics for the MDPDE and its Wald-type tests."""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import special, stats

from app.exceptions import ConditioningError, NumericalError, ParameterError
from app.models.domain import (
    AsymptoticCovariance,
    HypothesisSpec,
    IfCurve,
    IfKind,
    QuadratureSpec,
    SnParams,
)
from app.services.asymptotics import DEFAULT_COND_LIMIT, SingularPolicy, covariance
from app.services.dpd_core import DEFAULT_HALFWIDTH, xi
from app.services.hypothesis import critical_value, q_matrix
from app.services.skew_normal import logpdf_array, score_array
from app.services.special_functions import DEFAULT_QUAD

logger = logging.getLogger(__name__)

SERIES_REL_TOL = 1e-14
SERIES_MAX_TERMS = 500


def _inverse_j(cov: AsymptoticCovariance) -> np.ndarray:
    if cov.marginal:
        return np.diag(1.0 / np.diag(cov.j_matrix))
    if cov.condition_number > DEFAULT_COND_LIMIT:
        raise ConditioningError(
            f"J is singular at {cov.at_theta} (condition number {cov.condition_number:.3e})",
            condition_number=cov.condition_number,
        )
    return np.linalg.inv(cov.j_matrix)


def estimator_if_array(
    y: Sequence[float],
    theta: SnParams,
    alpha: float,
    quad: QuadratureSpec = DEFAULT_QUAD,
    trunc_halfwidth: float = DEFAULT_HALFWIDTH,
    singular_policy: SingularPolicy = "raise",
) -> np.ndarray:
    """J^-1 [u_theta(y) f_theta(y)^alpha - xi_alpha(theta)] for each y, as an (m, 3) array."""
    if alpha < 0:
        raise ParameterError(f"alpha must be nonnegative, got {alpha}")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    cov = covariance(theta, alpha, quad, trunc_halfwidth, DEFAULT_COND_LIMIT, singular_policy)
    weighted = score_array(theta, y) * np.exp(alpha * logpdf_array(theta, y))[:, None]
    centred = weighted - xi(theta, alpha, quad, trunc_halfwidth)
    return centred @ _inverse_j(cov).T


def estimator_if(
    y: float,
    theta: SnParams,
    alpha: float,
    quad: QuadratureSpec = DEFAULT_QUAD,
    trunc_halfwidth: float = DEFAULT_HALFWIDTH,
    singular_policy: SingularPolicy = "raise",
) -> np.ndarray:
    """Influence function of the MDPDE functional at contamination point y."""
    return estimator_if_array([y], theta, alpha, quad, trunc_halfwidth, singular_policy)[0]


def _test_q(theta0: SnParams, alpha: float, hyp: HypothesisSpec, quad, trunc_halfwidth, singular_policy) -> np.ndarray:
    m0 = np.asarray(hyp.restriction(theta0), dtype=float)
    if np.max(np.abs(m0)) > 1e-8:
        raise ParameterError(f"theta0={theta0} does not satisfy '{hyp.description}'")
    cov = covariance(theta0, alpha, quad, trunc_halfwidth, DEFAULT_COND_LIMIT, singular_policy)
    return q_matrix(cov, hyp, theta0)


def test_if2_array(
    y: Sequence[float],
    theta0: SnParams,
    alpha: float,
    hyp: HypothesisSpec,
    quad: QuadratureSpec = DEFAULT_QUAD,
    trunc_halfwidth: float = DEFAULT_HALFWIDTH,
    singular_policy: SingularPolicy = "raise",
) -> np.ndarray:
    influence = estimator_if_array(y, theta0, alpha, quad, trunc_halfwidth, singular_policy)
    q = _test_q(theta0, alpha, hyp, quad, trunc_halfwidth, singular_policy)
    return np.maximum(0.0, 2.0 * np.einsum("mi,ij,mj->m", influence, q, influence))


def test_if2(
    y: float,
    theta0: SnParams,
    alpha: float,
    hyp: HypothesisSpec,
    quad: QuadratureSpec = DEFAULT_QUAD,
    trunc_halfwidth: float = DEFAULT_HALFWIDTH,
    singular_policy: SingularPolicy = "raise",
) -> float:
    """Second-order influence function 2 IF^T Q IF of the Wald-type statistic."""
    return float(test_if2_array([y], theta0, alpha, hyp, quad, trunc_halfwidth, singular_policy)[0])


@dataclass(frozen=True)
class SeriesSum:
    value: float
    last_term: float
    terms: int


def c_star_series(s: float, r: int, tau0: float) -> SeriesSum:
    """
    C*_r(s) = e^{-s/2} sum_v s^{v-1} 2^{-v} (2v - s) P(chi2_{r+2v} > c) / v!,  c = chi2_{r, tau0}.

    The v = 0 term simplifies to -e^{-s/2} P(chi2_r > c). Summation stops once a term
    past the Poisson mode is below 1e-14 of the partial sum.
    """
    if s < 0 or r < 1:
        raise ParameterError(f"invalid series arguments s={s}, r={r}")
    crit = critical_value(r, tau0)
    if s == 0:
        last = float(stats.chi2.sf(crit, r + 2))
        return SeriesSum(last - float(stats.chi2.sf(crit, r)), last, 2)

    log_s, half_s = math.log(s), 0.5 * s
    total = -math.exp(-half_s) * float(stats.chi2.sf(crit, r))
    for v in range(1, SERIES_MAX_TERMS):
        log_mag = -half_s + (v - 1) * log_s - v * math.log(2.0) - float(special.gammaln(v + 1))
        term = math.exp(log_mag) * (2.0 * v - s) * float(stats.chi2.sf(crit, r + 2 * v))
        total += term
        if v > half_s and abs(term) < SERIES_REL_TOL * abs(total):
            return SeriesSum(total, term, v + 1)
    raise NumericalError(f"C*_{r}({s}) series did not converge within {SERIES_MAX_TERMS} terms")


def c_star(s: float, r: int, tau0: float) -> float:
    return c_star_series(s, r, tau0).value


def test_pif_array(
    y: Sequence[float],
    theta0: SnParams,
    alpha: float,
    hyp: HypothesisSpec,
    d: Sequence[float],
    tau0: float = 0.05,
    quad: QuadratureSpec = DEFAULT_QUAD,
    trunc_halfwidth: float = DEFAULT_HALFWIDTH,
    singular_policy: SingularPolicy = "raise",
) -> np.ndarray:
    if not 0 < tau0 < 1:
        raise ParameterError(f"tau0 must lie in (0, 1), got {tau0}")
    direction = np.asarray(d, dtype=float).reshape(3)
    if not np.any(direction):
        raise ParameterError("the contiguous direction d must be nonzero")
    q = _test_q(theta0, alpha, hyp, quad, trunc_halfwidth, singular_policy)
    factor = c_star(max(0.0, float(direction @ q @ direction)), hyp.r, tau0)
    influence = estimator_if_array(y, theta0, alpha, quad, trunc_halfwidth, singular_policy)
    return factor * influence @ (q @ direction)


def test_pif(
    y: float,
    theta0: SnParams,
    alpha: float,
    hyp: HypothesisSpec,
    d: Sequence[float],
    tau0: float = 0.05,
    quad: QuadratureSpec = DEFAULT_QUAD,
    trunc_halfwidth: float = DEFAULT_HALFWIDTH,
    singular_policy: SingularPolicy = "raise",
) -> float:
    """Power influence function C*_r(d^T Q d) d^T Q IF(y)."""
    return float(test_pif_array([y], theta0, alpha, hyp, d, tau0, quad, trunc_halfwidth, singular_policy)[0])


def if_curve(
    kind: IfKind,
    theta: SnParams,
    alpha: float,
    grid: Sequence[float],
    hyp: Optional[HypothesisSpec] = None,
    d: Optional[Sequence[float]] = None,
    tau0: float = 0.05,
    quad: QuadratureSpec = DEFAULT_QUAD,
    trunc_halfwidth: float = DEFAULT_HALFWIDTH,
    singular_policy: SingularPolicy = "raise",
) -> IfCurve:
    """Evaluate one of the influence functions on an increasing grid."""
    kind = IfKind(kind)
    points = np.asarray(grid, dtype=float)
    if points.ndim != 1 or points.size == 0:
        raise ParameterError("grid must be a nonempty list of reals")
    if np.any(np.diff(points) <= 0):
        raise ParameterError("grid must be strictly increasing")

    if kind is IfKind.ESTIMATOR_IF:
        values = estimator_if_array(points, theta, alpha, quad, trunc_halfwidth, singular_policy)
    elif hyp is None:
        raise ParameterError(f"{kind.value} needs a hypothesis")
    elif kind is IfKind.TEST_IF2:
        values = test_if2_array(points, theta, alpha, hyp, quad, trunc_halfwidth, singular_policy)
    else:
        if d is None:
            raise ParameterError("test_pif needs a contiguous direction d")
        values = test_pif_array(points, theta, alpha, hyp, d, tau0, quad, trunc_halfwidth, singular_policy)

    points.setflags(write=False)
    return IfCurve(alpha=alpha, at_theta=theta, grid=points, values=values, kind=kind)
