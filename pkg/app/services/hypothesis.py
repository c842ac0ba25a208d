"""Wald-type tests built on the MDPDE, p-values and asymptotic contiguous power."""

import logging
import math
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import stats

from app.exceptions import ConditioningError, ConfigurationError, NumericalError, ParameterError, UsageError
from app.models.domain import (
    PARAMETER_NAMES,
    AsymptoticCovariance,
    FitResult,
    GdConfig,
    HypothesisSpec,
    QuadratureSpec,
    Sample,
    SnParams,
    WaldTestResult,
)
from app.services.asymptotics import DEFAULT_COND_LIMIT, SingularPolicy, covariance
from app.services.dpd_core import DEFAULT_HALFWIDTH
from app.services.estimation import fit_gd, fit_mle
from app.services.special_functions import DEFAULT_QUAD

logger = logging.getLogger(__name__)

DEFAULT_LEVELS = (0.01, 0.05, 0.10)
NEAR_SINGULAR_COND = 1e6
_HYPOTHESIS_PATTERN = re.compile(r"^\s*(mu|sigma|gamma)\s*=\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*$")


def parameter_restriction(name: str, value: float) -> HypothesisSpec:
    """H0: <name> = value with the other two parameters free."""
    if name not in PARAMETER_NAMES:
        raise ParameterError(f"unknown parameter {name!r}")
    if not math.isfinite(value) or (name == "sigma" and value <= 0):
        raise ParameterError(f"invalid null value {value!r} for {name}")
    index = PARAMETER_NAMES.index(name)
    column = np.zeros((3, 1))
    column[index, 0] = 1.0

    return HypothesisSpec(
        restriction=lambda theta: np.array([theta.as_array()[index] - value]),
        jacobian=lambda theta: column.copy(),
        r=1,
        description=f"{name}={value:g}",
    )


def point_restriction(theta0: SnParams) -> HypothesisSpec:
    """Simple null theta = theta0 (r = 3)."""
    target = theta0.as_array()
    return HypothesisSpec(
        restriction=lambda theta: theta.as_array() - target,
        jacobian=lambda theta: np.eye(3),
        r=3,
        description=f"theta=({theta0.mu:g},{theta0.sigma:g},{theta0.gamma:g})",
    )


def parse_hypothesis(text: str) -> HypothesisSpec:
    """Parse ``gamma=<v>``, ``sigma=<v>`` or ``mu=<v>``."""
    match = _HYPOTHESIS_PATTERN.match(text or "")
    if not match:
        raise UsageError(f"malformed hypothesis {text!r}; expected gamma=<v>, sigma=<v> or mu=<v>")
    try:
        return parameter_restriction(match.group(1), float(match.group(2)))
    except ParameterError as e:
        raise UsageError(str(e)) from e


def check_hypothesis(hyp: HypothesisSpec, theta: SnParams, step: float = 1e-6, tol: float = 1e-5) -> None:
    """Verify rank(M) = r and that M matches finite differences of m at theta."""
    jac = np.asarray(hyp.jacobian(theta), dtype=float).reshape(3, hyp.r)
    if np.linalg.matrix_rank(jac) != hyp.r:
        raise ConfigurationError(f"Jacobian of '{hyp.description}' is rank deficient at {theta}")
    base = theta.as_array()
    for k in range(3):
        forward, backward = base.copy(), base.copy()
        forward[k] += step
        backward[k] -= step
        diff = (np.asarray(hyp.restriction(SnParams.from_array(forward)))
                - np.asarray(hyp.restriction(SnParams.from_array(backward)))) / (2 * step)
        if np.max(np.abs(diff - jac[k])) > tol:
            raise ConfigurationError(f"restriction and Jacobian of '{hyp.description}' disagree along {PARAMETER_NAMES[k]}")


def _middle_inverse(cov: AsymptoticCovariance, jac: np.ndarray) -> np.ndarray:
    middle = jac.T @ cov.sigma_matrix @ jac
    cond = float(np.linalg.cond(middle))
    if not np.isfinite(cond) or cond > DEFAULT_COND_LIMIT:
        raise ConditioningError(f"M^T Sigma M is singular (condition number {cond:.3e})", condition_number=cond)
    return np.linalg.inv(middle)


def q_matrix(cov: AsymptoticCovariance, hyp: HypothesisSpec, theta: SnParams) -> np.ndarray:
    """Q = M (M^T Sigma M)^-1 M^T."""
    jac = np.asarray(hyp.jacobian(theta), dtype=float).reshape(3, hyp.r)
    return jac @ _middle_inverse(cov, jac) @ jac.T


def wald_statistic(theta_hat: SnParams, cov: AsymptoticCovariance, n: int, hyp: HypothesisSpec) -> float:
    """n m(theta_hat)^T [M^T Sigma M]^-1 m(theta_hat)."""
    m = np.asarray(hyp.restriction(theta_hat), dtype=float).reshape(hyp.r)
    jac = np.asarray(hyp.jacobian(theta_hat), dtype=float).reshape(3, hyp.r)
    return max(0.0, float(n * m @ _middle_inverse(cov, jac) @ m))


def noncentral_chisq_sf(
    x: float,
    df: int,
    noncentrality: float,
    tail: float = 1e-15,
    max_terms: int = 5000,
) -> float:
    """
    Survival function of the noncentral chi-square as a Poisson mixture.

    P(X > x) = sum_v Pois(v; delta/2) P(chi2_{df+2v} > x), summed over the
    Poisson range holding all but ``2 * tail`` of the mixing mass.
    """
    if x < 0 or df < 1 or noncentrality < 0:
        raise ParameterError(f"invalid arguments x={x}, df={df}, noncentrality={noncentrality}")
    if noncentrality == 0:
        return float(stats.chi2.sf(x, df))
    rate = 0.5 * noncentrality
    lo = max(0, int(stats.poisson.ppf(tail, rate)))
    hi = int(stats.poisson.isf(tail, rate)) + 1
    if hi - lo + 1 > max_terms:
        raise NumericalError(f"noncentral chi-square series needs {hi - lo + 1} terms (cap {max_terms})")
    terms = np.arange(lo, hi + 1)
    value = float(np.sum(stats.poisson.pmf(terms, rate) * stats.chi2.sf(x, df + 2 * terms)))
    return min(1.0, max(0.0, value))


def critical_value(df: int, tau0: float) -> float:
    """Upper tau0 quantile of the central chi-square, from its survival function."""
    if not 0 < tau0 < 1:
        raise ParameterError(f"significance level must lie in (0, 1), got {tau0}")
    return float(stats.chi2.isf(tau0, df))


def wald_from_fit(
    fit: FitResult,
    hyp: HypothesisSpec,
    levels: Sequence[float] = DEFAULT_LEVELS,
) -> WaldTestResult:
    """Wald-type test from an unrestricted fit (plug-in covariance at theta_hat)."""
    if fit.covariance is None:
        raise ConditioningError(f"no covariance at the fitted value {fit.params}; cannot form the Wald statistic")
    statistic = wald_statistic(fit.params, fit.covariance, fit.n, hyp)
    return _result(statistic, hyp, fit, levels)


def _result(statistic: float, hyp: HypothesisSpec, fit: FitResult, levels: Sequence[float]) -> WaldTestResult:
    p_value = float(stats.chi2.sf(statistic, hyp.r))
    warnings: List[str] = list(fit.warnings)
    if not fit.converged:
        warnings.append(f"fit did not converge: {fit.message}")
    if fit.covariance is not None and fit.covariance.condition_number > NEAR_SINGULAR_COND:
        warnings.append(f"near-singular information (condition number {fit.covariance.condition_number:.3e})")
    return WaldTestResult(
        statistic=statistic,
        df=hyp.r,
        p_value=p_value,
        alpha=fit.alpha,
        fit=fit,
        reject_at={float(level): p_value < level for level in levels},
        hypothesis=hyp.description,
        warnings=tuple(warnings),
    )


def _fit(
    data: Sample,
    alpha: float,
    fit_cfg: Optional[GdConfig],
    quad: QuadratureSpec,
    trunc_halfwidth: float,
    singular_policy: SingularPolicy,
) -> FitResult:
    if alpha == 0:
        return fit_mle(data, fit_cfg, None, quad, trunc_halfwidth, singular_policy)
    return fit_gd(data, alpha, fit_cfg, None, quad, trunc_halfwidth, singular_policy)


def wald_test(
    data: Sample,
    alpha: float,
    hyp: HypothesisSpec,
    fit_cfg: Optional[GdConfig] = None,
    quad: QuadratureSpec = DEFAULT_QUAD,
    trunc_halfwidth: float = DEFAULT_HALFWIDTH,
    levels: Sequence[float] = DEFAULT_LEVELS,
    singular_policy: SingularPolicy = "raise",
) -> WaldTestResult:
    """
    Fit at ``alpha`` (MLE when alpha = 0) and test m(theta) = 0.

    Args:
        data: Sample
        alpha: DPD tuning parameter
        hyp: Null hypothesis
        fit_cfg: Gradient-descent settings for the unrestricted fit
        quad: Quadrature tolerances
        trunc_halfwidth: Standardized integration window
        levels: Significance levels reported in ``reject_at``
        singular_policy: Covariance policy at the estimate

    Returns:
        WaldTestResult
    """
    fit = _fit(data, alpha, fit_cfg, quad, trunc_halfwidth, singular_policy)
    result = wald_from_fit(fit, hyp, levels)
    logger.info(f"Wald test {hyp.description} at alpha={alpha:g}: W={result.statistic:.6g}, p={result.p_value:.4g}")
    return result


def symmetry_test(
    data: Sample,
    alpha: float,
    gamma0: float = 0.0,
    fit_cfg: Optional[GdConfig] = None,
    quad: QuadratureSpec = DEFAULT_QUAD,
    trunc_halfwidth: float = DEFAULT_HALFWIDTH,
    levels: Sequence[float] = DEFAULT_LEVELS,
    singular_policy: SingularPolicy = "raise",
) -> WaldTestResult:
    """H0: gamma = gamma0 through W = n (gamma_hat - gamma0)^2 / Sigma_33."""
    hyp = parameter_restriction("gamma", gamma0)
    fit = _fit(data, alpha, fit_cfg, quad, trunc_halfwidth, singular_policy)
    if fit.covariance is None:
        raise ConditioningError(f"no covariance at the fitted value {fit.params}; cannot form the Wald statistic")
    sigma_33 = float(fit.covariance.sigma_matrix[2, 2])
    if not sigma_33 > 0:
        raise ConditioningError(f"Sigma_33 = {sigma_33} is not positive")
    statistic = fit.n * (fit.params.gamma - gamma0) ** 2 / sigma_33
    return _result(statistic, hyp, fit, levels)


def contiguous_power(
    theta0: SnParams,
    alpha: float,
    hyp: HypothesisSpec,
    d: Sequence[float],
    tau0: float = 0.05,
    quad: QuadratureSpec = DEFAULT_QUAD,
    trunc_halfwidth: float = DEFAULT_HALFWIDTH,
    singular_policy: SingularPolicy = "raise",
) -> float:
    """Asymptotic power 1 - G_{chi2_{r, delta}}(chi2_{r, tau0}) under theta0 + d / sqrt(n)."""
    m0 = np.asarray(hyp.restriction(theta0), dtype=float)
    if np.max(np.abs(m0)) > 1e-8:
        raise ParameterError(f"theta0={theta0} does not satisfy '{hyp.description}'")
    direction = np.asarray(d, dtype=float).reshape(3)
    cov = covariance(theta0, alpha, quad, trunc_halfwidth, DEFAULT_COND_LIMIT, singular_policy)
    delta = float(direction @ q_matrix(cov, hyp, theta0) @ direction)
    if delta < 0:
        logger.warning(f"negative noncentrality {delta:.3e} clamped to zero")
        delta = 0.0
    return noncentral_chisq_sf(critical_value(hyp.r, tau0), hyp.r, delta)


@dataclass
class PowerTable:
    """Contiguous power, rows d (distance along the restriction), columns alpha."""

    theta0: SnParams
    hypothesis: str
    tau0: float
    alphas: List[float]
    d_values: List[float]
    values: List[List[float]] = field(default_factory=list)
    marginal: Dict[float, bool] = field(default_factory=dict)

    def as_records(self) -> List[Dict[str, float]]:
        records = []
        for d, row in zip(self.d_values, self.values):
            record: Dict[str, float] = {"d": d}
            for alpha, value in zip(self.alphas, row):
                record[f"alpha={alpha:g}"] = value
            records.append(record)
        return records


def power_table(
    theta0: SnParams,
    hyp: HypothesisSpec,
    d_values: Sequence[float],
    alphas: Sequence[float],
    tau0: float = 0.05,
    quad: QuadratureSpec = DEFAULT_QUAD,
    trunc_halfwidth: float = DEFAULT_HALFWIDTH,
    singular_policy: SingularPolicy = "raise",
) -> PowerTable:
    """Contiguous power along the unit direction of a single restriction's Jacobian."""
    if hyp.r != 1:
        raise ConfigurationError("power tables need a single restriction (r = 1)")
    column = np.asarray(hyp.jacobian(theta0), dtype=float).reshape(3)
    unit = column / np.linalg.norm(column)
    table = PowerTable(
        theta0=theta0,
        hypothesis=hyp.description,
        tau0=tau0,
        alphas=[float(a) for a in alphas],
        d_values=[float(d) for d in d_values],
    )
    logger.info(f"Computing power table for {hyp.description}: {len(d_values)} distances x {len(alphas)} alphas")
    for alpha in table.alphas:
        cov = covariance(theta0, alpha, quad, trunc_halfwidth, DEFAULT_COND_LIMIT, singular_policy)
        table.marginal[alpha] = cov.marginal
    for d in table.d_values:
        table.values.append([
            contiguous_power(theta0, alpha, hyp, d * unit, tau0, quad, trunc_halfwidth, singular_policy)
            for alpha in table.alphas
        ])
    return table
