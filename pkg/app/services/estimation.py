"""MDPDE and MLE computation: gradient descent, a real-coded genetic algorithm, moment initialization.

Optimization runs in eta = (mu, log sigma, gamma) so every iterate has sigma > 0;
gradients reported in results are taken with respect to (mu, sigma, gamma).
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from app.exceptions import (
    BoundaryError,
    ConditioningError,
    ConfigurationError,
    DegenerateDataError,
    IntegrationError,
    ParameterError,
)
from app.models.domain import (
    DpdConfig,
    FitMethod,
    FitResult,
    GaConfig,
    GdConfig,
    ParameterBox,
    QuadratureSpec,
    Sample,
    SnParams,
)
from app.services import dpd_core
from app.services.asymptotics import DEFAULT_COND_LIMIT, SingularPolicy, covariance, standard_errors
from app.services.dpd_core import DEFAULT_HALFWIDTH
from app.services.skew_normal import MAX_SKEWNESS, SQRT_2_OVER_PI
from app.services.special_functions import DEFAULT_QUAD

logger = logging.getLogger(__name__)

SKEWNESS_CLAMP = 0.99
SIGMA_FLOOR_FRACTION = 1e-6


@dataclass
class _Problem:
    value: Callable[[SnParams], float]
    gradient: Callable[[SnParams], np.ndarray]


@dataclass
class _Descent:
    theta: SnParams
    value: float
    gradient_norm: float
    iterations: int
    converged: bool
    message: str
    diverged: bool = False
    trace: List[float] = field(default_factory=list)


def _check_data(data: Sample) -> float:
    """Return the sample sd, rejecting samples that cannot identify a scale."""
    if data.n < 2 or float(np.ptp(data.values)) == 0.0:
        raise DegenerateDataError(f"sample '{data.label}' has zero variance; the scale is not identifiable")
    return float(np.std(data.values))


def _to_eta(theta: SnParams) -> np.ndarray:
    return np.array([theta.mu, math.log(theta.sigma), theta.gamma])


def _from_eta(eta: np.ndarray) -> SnParams:
    return SnParams(float(eta[0]), math.exp(float(eta[1])), float(eta[2]))


def _safe_value(problem: _Problem, eta: np.ndarray) -> Tuple[Optional[SnParams], float]:
    try:
        theta = _from_eta(eta)
        value = problem.value(theta)
    except (ParameterError, IntegrationError, OverflowError, FloatingPointError):
        return None, math.inf
    return theta, value if math.isfinite(value) else math.inf


def _descend(problem: _Problem, start: SnParams, cfg: GdConfig, sigma_floor: float) -> _Descent:
    """
    Steepest descent with Armijo backtracking.

    The trial step is lambda (``fixed``) or the Barzilai-Borwein step of the last
    move (``barzilai_borwein``); it is halved until the Armijo condition holds,
    down to ``step_floor``. Stops when the relative objective change is below
    ``rel_obj_tol`` and the gradient norm below ``grad_tol``.
    """
    theta = start
    value = problem.value(theta)
    grad = problem.gradient(theta)
    grad_norm = float(np.linalg.norm(grad))
    trace = [value]

    if grad_norm < cfg.grad_tol:
        return _Descent(theta, value, grad_norm, 0, True, "initial point is stationary", trace=trace)

    eta = _to_eta(theta)
    g_eta = grad * np.array([1.0, theta.sigma, 1.0])
    step = cfg.step_size

    for iteration in range(1, cfg.max_iters + 1):
        slope = float(g_eta @ g_eta)
        trial = step
        candidate, cand_value = None, math.inf
        while trial >= cfg.step_floor:
            cand_eta = eta - trial * g_eta
            candidate, cand_value = _safe_value(problem, cand_eta)
            if cand_value <= value - cfg.armijo_c * trial * slope:
                break
            trial *= 0.5
        else:
            converged = grad_norm <= cfg.grad_tol
            return _Descent(
                theta, value, grad_norm, iteration - 1, converged,
                "step size fell below the floor" + ("" if converged else " before the gradient vanished"),
                trace=trace,
            )

        if candidate.sigma < sigma_floor:
            raise BoundaryError(f"sigma driven to the boundary ({candidate.sigma:.3e}) at iteration {iteration}")

        cand_grad = problem.gradient(candidate)
        cand_g_eta = cand_grad * np.array([1.0, candidate.sigma, 1.0])
        rel_change = abs(cand_value - value) / max(abs(value), 1e-300)

        if cfg.step_rule == "barzilai_borwein":
            s, y = cand_eta - eta, cand_g_eta - g_eta
            sy = float(s @ y)
            step = min(max(float(s @ s) / sy, cfg.step_floor), cfg.max_step) if sy > 0 else min(2.0 * trial, cfg.max_step)
        else:
            step = cfg.step_size

        theta, value, grad, eta, g_eta = candidate, cand_value, cand_grad, cand_eta, cand_g_eta
        grad_norm = float(np.linalg.norm(grad))
        trace.append(value)

        if iteration % cfg.log_every == 0:
            logger.debug(f"iteration {iteration}: objective={value:.12g} |grad|={grad_norm:.3e} step={trial:.3e}")

        if abs(theta.gamma) > cfg.gamma_limit:
            return _Descent(
                theta, value, grad_norm, iteration, False,
                f"|gamma| exceeded {cfg.gamma_limit:g}; the shape estimate diverges",
                diverged=True, trace=trace,
            )
        if rel_change < cfg.rel_obj_tol and grad_norm < cfg.grad_tol:
            return _Descent(theta, value, grad_norm, iteration, True, "converged", trace=trace)

    return _Descent(theta, value, grad_norm, cfg.max_iters, False, f"no convergence in {cfg.max_iters} iterations", trace=trace)


def _finish(
    run: _Descent,
    data: Sample,
    alpha: float,
    method: FitMethod,
    quad: QuadratureSpec,
    trunc_halfwidth: float,
    singular_policy: SingularPolicy,
    trace: Optional[List[float]] = None,
    iterations: Optional[int] = None,
    message: Optional[str] = None,
) -> FitResult:
    warnings: List[str] = []
    cov, errors = None, None
    try:
        cov = covariance(run.theta, alpha, quad, trunc_halfwidth, DEFAULT_COND_LIMIT, singular_policy)
        errors = standard_errors(cov, data.n)
        if cov.marginal:
            warnings.append("singular information: marginal standard errors reported")
    except (ConditioningError, IntegrationError) as e:
        logger.warning(f"No covariance at {run.theta} (alpha={alpha}): {e}")
        warnings.append(f"covariance unavailable: {e}")
    if run.diverged:
        warnings.append(run.message)

    return FitResult(
        params=run.theta,
        alpha=alpha,
        std_errors=errors,
        covariance=cov,
        objective_value=run.value,
        gradient_norm=run.gradient_norm,
        iterations=run.iterations if iterations is None else iterations,
        converged=run.converged,
        method=method,
        n=data.n,
        trace=tuple(run.trace if trace is None else trace),
        message=run.message if message is None else message,
        diverged=run.diverged,
        warnings=tuple(warnings),
    )


def _dpd_problem(data: Sample, cfg: DpdConfig) -> _Problem:
    return _Problem(
        value=lambda theta: dpd_core.objective(theta, data, cfg),
        gradient=lambda theta: dpd_core.objective_gradient(theta, data, cfg),
    )


def _likelihood_problem(data: Sample) -> _Problem:
    return _Problem(
        value=lambda theta: dpd_core.negative_log_likelihood(theta, data),
        gradient=lambda theta: dpd_core.negative_log_likelihood_gradient(theta, data),
    )


def default_init(data: Sample) -> SnParams:
    """
    Moment-matched starting value.

    Solves mean, variance and skewness equations of the family for (mu, sigma,
    gamma), with the sample skewness clamped to 0.99 of the family's maximum.
    """
    values = data.values
    mean = float(values.mean())
    sd = float(values.std())
    if sd == 0.0:
        raise DegenerateDataError(f"sample '{data.label}' has zero variance")
    skew = float(np.mean(((values - mean) / sd) ** 3))
    limit = SKEWNESS_CLAMP * MAX_SKEWNESS
    skew = min(max(skew, -limit), limit)

    if abs(skew) < 1e-8:
        return SnParams(mean, sd, 0.0)

    # skew = (4 - pi)/2 * b^3 / (1 - b^2)^{3/2} with b = delta * sqrt(2/pi)
    ratio = (2.0 * abs(skew) / (4.0 - math.pi)) ** (1.0 / 3.0)
    b = math.copysign(ratio / math.sqrt(1.0 + ratio * ratio), skew)
    delta = b / SQRT_2_OVER_PI
    gamma = delta / math.sqrt(1.0 - delta * delta)
    sigma = sd / math.sqrt(1.0 - b * b)
    return SnParams(mean - sigma * b, sigma, gamma)


def default_bounds(data: Sample) -> ParameterBox:
    """mu in [min - 2 sd, max + 2 sd], sigma in [sd/100, 10 sd], gamma in [-50, 50]."""
    sd = _check_data(data)
    values = data.values
    return ParameterBox(
        mu=(float(values.min()) - 2.0 * sd, float(values.max()) + 2.0 * sd),
        sigma=(sd / 100.0, 10.0 * sd),
        gamma=(-50.0, 50.0),
    )


def fit_gd(
    data: Sample,
    alpha: float,
    cfg: Optional[GdConfig] = None,
    init: Optional[SnParams] = None,
    quad: QuadratureSpec = DEFAULT_QUAD,
    trunc_halfwidth: float = DEFAULT_HALFWIDTH,
    singular_policy: SingularPolicy = "raise",
) -> FitResult:
    """
    Minimize H_n by gradient descent.

    Args:
        data: Sample with positive variance
        alpha: DPD tuning parameter, strictly positive
        cfg: Descent settings
        init: Starting point (moment-matched when omitted)
        quad: Quadrature tolerances
        trunc_halfwidth: Standardized integration window
        singular_policy: Covariance policy at the estimate

    Returns:
        FitResult with plug-in standard errors

    Raises:
        BoundaryError: If sigma collapses towards zero
    """
    cfg = cfg or GdConfig()
    if alpha <= 0:
        raise ConfigurationError("fit_gd needs alpha > 0; use fit_mle for alpha = 0")
    sd = _check_data(data)
    dpd_cfg = DpdConfig(alpha=alpha, quad=quad, trunc_halfwidth=trunc_halfwidth)
    start = init or default_init(data)

    started = time.time()
    run = _descend(_dpd_problem(data, dpd_cfg), start, cfg, SIGMA_FLOOR_FRACTION * sd)
    logger.info(
        f"MDPDE alpha={alpha:g} on '{data.label}' (n={data.n}): {run.message} after {run.iterations} iterations "
        f"in {time.time() - started:.2f}s, theta={run.theta}"
    )
    return _finish(run, data, alpha, FitMethod.GRADIENT_DESCENT, quad, trunc_halfwidth, singular_policy)


def fit_mle(
    data: Sample,
    cfg: Optional[GdConfig] = None,
    init: Optional[SnParams] = None,
    quad: QuadratureSpec = DEFAULT_QUAD,
    trunc_halfwidth: float = DEFAULT_HALFWIDTH,
    singular_policy: SingularPolicy = "raise",
) -> FitResult:
    """Maximum likelihood by gradient ascent on the mean log-likelihood (alpha recorded as 0)."""
    cfg = cfg or GdConfig()
    sd = _check_data(data)
    start = init or default_init(data)

    run = _descend(_likelihood_problem(data), start, cfg, SIGMA_FLOOR_FRACTION * sd)
    # objective_value reports the mean log-likelihood itself
    run.value = -run.value
    run.trace = [-v for v in run.trace]
    if run.diverged:
        logger.warning(f"MLE on '{data.label}': {run.message}")
    logger.info(f"MLE on '{data.label}' (n={data.n}): {run.message} after {run.iterations} iterations, theta={run.theta}")
    return _finish(run, data, 0.0, FitMethod.MLE, quad, trunc_halfwidth, singular_policy)


def _ga_fitness(data: Sample, alpha: float, quad: QuadratureSpec, trunc_halfwidth: float) -> Callable[[np.ndarray], float]:
    if alpha > 0:
        problem = _dpd_problem(data, DpdConfig(alpha=alpha, quad=quad, trunc_halfwidth=trunc_halfwidth))
    else:
        problem = _likelihood_problem(data)

    def fitness(individual: np.ndarray) -> float:
        try:
            value = problem.value(SnParams.from_array(individual))
        except (ParameterError, IntegrationError, OverflowError, FloatingPointError):
            return math.inf
        return value if math.isfinite(value) else math.inf

    return fitness


def _select(fitness: np.ndarray, cfg: GaConfig, rng: np.random.Generator) -> int:
    size = fitness.size
    if cfg.selection == "tournament":
        contenders = rng.choice(size, size=min(cfg.tournament_size, size), replace=False)
        return int(contenders[np.argmin(fitness[contenders])])
    # fitness-proportionate on ranks: best gets weight N, worst 1
    ranks = np.empty(size, dtype=int)
    ranks[np.argsort(fitness, kind="stable")] = np.arange(size)
    weights = (size - ranks).astype(float)
    return int(rng.choice(size, p=weights / weights.sum()))


def fit_ga(
    data: Sample,
    alpha: float,
    cfg: Optional[GaConfig] = None,
    quad: QuadratureSpec = DEFAULT_QUAD,
    trunc_halfwidth: float = DEFAULT_HALFWIDTH,
    singular_policy: SingularPolicy = "raise",
) -> FitResult:
    """
    Minimize H_n (alpha > 0) or the negative log-likelihood (alpha = 0) with a real-coded GA.

    Elites pass unchanged to the next generation; the other children come from
    selected parents by blend crossover and Gaussian mutation, clipped to the box.
    The fittest individual is then polished by gradient descent. The trace holds
    the best fitness of every generation.
    """
    cfg = cfg or GaConfig()
    if alpha < 0:
        raise ConfigurationError(f"alpha must be nonnegative, got {alpha}")
    _check_data(data)
    box = cfg.bounds or default_bounds(data)
    box.validate_nonempty()
    lower, upper = box.lower, box.upper
    width = upper - lower
    rng = np.random.default_rng(cfg.rng_seed)
    fitness_of = _ga_fitness(data, alpha, quad, trunc_halfwidth)

    population = lower + rng.random((cfg.population, 3)) * width
    if cfg.seed_with_init:
        population[0] = np.clip(default_init(data).as_array(), lower, upper)
    fitness = np.array([fitness_of(individual) for individual in population])

    history = [float(fitness.min())]
    best_value = history[0]
    stall = 0
    generation = 0
    started = time.time()
    for generation in range(1, cfg.max_generations + 1):
        order = np.argsort(fitness, kind="stable")
        elite_idx = order[: cfg.elites]
        children = []
        while len(children) < cfg.population - cfg.elites:
            first = population[_select(fitness, cfg, rng)]
            second = population[_select(fitness, cfg, rng)]
            if rng.random() < cfg.crossover_prob:
                weight = rng.random()
                child = weight * first + (1.0 - weight) * second
            else:
                child = first.copy()
            mutate = rng.random(3) < cfg.mutation_prob
            child = child + mutate * rng.normal(0.0, cfg.mutation_scale * width)
            children.append(np.clip(child, lower, upper))

        children = np.array(children).reshape(-1, 3)
        population = np.vstack([population[elite_idx], children])
        fitness = np.concatenate([fitness[elite_idx], [fitness_of(child) for child in children]])

        current = float(fitness.min())
        history.append(current)
        if current < best_value - 1e-12 * (abs(best_value) + 1.0):
            best_value, stall = current, 0
        else:
            stall += 1
        if generation % 100 == 0:
            logger.debug(f"GA generation {generation}: best fitness {current:.12g}")
        if stall >= cfg.stall_generations:
            break

    best = SnParams.from_array(population[int(np.argmin(fitness))])
    logger.info(
        f"GA alpha={alpha:g} on '{data.label}': {generation} generations in {time.time() - started:.2f}s, "
        f"best fitness {best_value:.12g} at {best}"
    )

    if cfg.polish is not None:
        if alpha > 0:
            polished = fit_gd(data, alpha, cfg.polish, best, quad, trunc_halfwidth, singular_policy)
        else:
            polished = fit_mle(data, cfg.polish, best, quad, trunc_halfwidth, singular_policy)
        return FitResult(
            params=polished.params,
            alpha=alpha,
            std_errors=polished.std_errors,
            covariance=polished.covariance,
            objective_value=polished.objective_value,
            gradient_norm=polished.gradient_norm,
            iterations=generation + polished.iterations,
            converged=polished.converged,
            method=FitMethod.GENETIC,
            n=data.n,
            trace=tuple(history),
            message=f"{generation} generations, polish: {polished.message}",
            diverged=polished.diverged,
            warnings=polished.warnings,
        )

    if alpha > 0:
        problem = _dpd_problem(data, DpdConfig(alpha=alpha, quad=quad, trunc_halfwidth=trunc_halfwidth))
    else:
        problem = _likelihood_problem(data)
    grad_norm = float(np.linalg.norm(problem.gradient(best)))
    value = best_value if alpha > 0 else -best_value
    run = _Descent(best, value, grad_norm, generation, grad_norm <= GdConfig().grad_tol, f"{generation} generations, no polish")
    return _finish(run, data, alpha, FitMethod.GENETIC, quad, trunc_halfwidth, singular_policy, trace=history)
