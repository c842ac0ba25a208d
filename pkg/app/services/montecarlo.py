"""Simulation studies under contamination and the real-data robustness metrics.

Every replication owns a generator seeded from
``SeedSequence(seed).generate_state(reps)[i]``; replications run in a process
pool when ``workers > 1`` and are reduced in replication order, so sequential
and parallel runs give the same report.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.exceptions import DataError, DegenerateDataError, ParameterError, SnRobustError
from app.models.domain import (
    PARAMETER_NAMES,
    ContaminationScheme,
    FitResult,
    GdConfig,
    QuadratureSpec,
    Sample,
    SimulationReport,
    SnParams,
)
from app.services.dpd_core import DEFAULT_HALFWIDTH
from app.services.estimation import fit_gd, fit_mle
from app.services.hypothesis import symmetry_test
from app.services.skew_normal import draw
from app.services.special_functions import DEFAULT_QUAD

logger = logging.getLogger(__name__)

FAILURE_WARNING_FRACTION = 0.05
RD_GUARD = 1e-8

# Contaminating distributions of the bias/MSE study, by name
CONTAMINANTS: Dict[str, SnParams] = {
    "right": SnParams(10.0, 1.0, 5.0),
    "left": SnParams(-10.0, 1.0, 5.0),
    "scale": SnParams(0.0, 5.0, 5.0),
    "shape": SnParams(0.0, 1.0, 1.0),
}
LEVEL_CONTAMINANT = SnParams(0.0, 1.0, 3.0)
POWER_CONTAMINANT = SnParams(0.0, 1.0, -3.0)


def _draw_contaminated(scheme: ContaminationScheme, n: int, rng: np.random.Generator) -> np.ndarray:
    k = scheme.contaminated_count(n)
    values = np.concatenate([draw(scheme.base, n - k, rng), draw(scheme.contaminant, k, rng)])
    return rng.permutation(values)


def contaminated_sample(scheme: ContaminationScheme, n: int, seed: int) -> Sample:
    """n - floor(eps n) base draws and floor(eps n) contaminant draws, shuffled."""
    if n < 2:
        raise ParameterError(f"n must be at least 2, got {n}")
    rng = np.random.default_rng(seed)
    return Sample(
        values=_draw_contaminated(scheme, n, rng),
        label=f"eps={scheme.epsilon:g}",
        source=f"simulated:seed={seed}",
    )


def replication_seeds(seed: int, reps: int) -> List[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(reps)]


def _fit_at(sample: Sample, alpha: float, fit_cfg: Optional[GdConfig], quad: QuadratureSpec, trunc_halfwidth: float) -> FitResult:
    if alpha == 0:
        return fit_mle(sample, fit_cfg, None, quad, trunc_halfwidth)
    return fit_gd(sample, alpha, fit_cfg, None, quad, trunc_halfwidth)


def _bias_mse_replication(args: Tuple) -> List[Optional[Tuple[float, float, float]]]:
    scheme, n, seed, alphas, fit_cfg, quad, trunc_halfwidth = args
    sample = Sample(values=_draw_contaminated(scheme, n, np.random.default_rng(seed)))
    estimates: List[Optional[Tuple[float, float, float]]] = []
    for alpha in alphas:
        try:
            fit = _fit_at(sample, alpha, fit_cfg, quad, trunc_halfwidth)
        except SnRobustError as e:
            logger.debug(f"replication seed={seed} alpha={alpha}: {e}")
            estimates.append(None)
            continue
        estimates.append((fit.params.mu, fit.params.sigma, fit.params.gamma) if fit.converged else None)
    return estimates


def _level_power_replication(args: Tuple) -> List[Tuple[Optional[bool], Optional[bool]]]:
    null_scheme, alt_scheme, n, seed, alphas, gamma0, tau0, fit_cfg, quad, trunc_halfwidth = args
    rng = np.random.default_rng(seed)
    null_sample = Sample(values=_draw_contaminated(null_scheme, n, rng))
    alt_sample = Sample(values=_draw_contaminated(alt_scheme, n, rng))
    outcomes = []
    for alpha in alphas:
        pair = []
        for sample in (null_sample, alt_sample):
            try:
                result = symmetry_test(
                    sample, alpha, gamma0, fit_cfg, quad, trunc_halfwidth, levels=(tau0,), singular_policy="marginal"
                )
                pair.append(result.reject_at[tau0] if result.fit.converged else None)
            except SnRobustError as e:
                logger.debug(f"replication seed={seed} alpha={alpha}: {e}")
                pair.append(None)
        outcomes.append((pair[0], pair[1]))
    return outcomes


def _run(task: Callable, jobs: List[Tuple], workers: int) -> List:
    if workers <= 1:
        return [task(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(task, jobs))


def bias_mse_study(
    scheme: ContaminationScheme,
    n: int,
    reps: int,
    alpha_grid: Sequence[float],
    fit_cfg: Optional[GdConfig] = None,
    seed: int = 0,
    workers: int = 1,
    quad: QuadratureSpec = DEFAULT_QUAD,
    trunc_halfwidth: float = DEFAULT_HALFWIDTH,
) -> SimulationReport:
    """
    Empirical bias and MSE of the MDPDE (MLE at alpha = 0) against ``scheme.base``.

    Args:
        scheme: Base law and contamination
        n: Sample size
        reps: Number of replications (>= 2)
        alpha_grid: Tuning parameters fitted on every replication
        fit_cfg: Gradient-descent settings
        seed: Master seed
        workers: Process pool size; 1 runs sequentially

    Returns:
        SimulationReport with one metrics row per (alpha, parameter)
    """
    if reps < 2:
        raise ParameterError(f"reps must be at least 2, got {reps}")
    alphas = [float(a) for a in alpha_grid]
    seeds = replication_seeds(seed, reps)
    started = time.time()
    logger.info(f"Bias/MSE study: n={n}, reps={reps}, eps={scheme.epsilon:g}, alphas={alphas}, workers={workers}")

    jobs = [(scheme, n, s, alphas, fit_cfg, quad, trunc_halfwidth) for s in seeds]
    results = _run(_bias_mse_replication, jobs, workers)

    truth = scheme.base.as_array()
    metrics: List[Dict[str, float]] = []
    failures: Dict[float, int] = {}
    warnings: List[str] = []
    for column, alpha in enumerate(alphas):
        estimates = np.array([r[column] for r in results if r[column] is not None]).reshape(-1, 3)
        failures[alpha] = reps - estimates.shape[0]
        if failures[alpha] > FAILURE_WARNING_FRACTION * reps:
            message = f"alpha={alpha:g}: {failures[alpha]} of {reps} fits failed"
            logger.warning(message)
            warnings.append(message)
        errors = estimates - truth
        for k, name in enumerate(PARAMETER_NAMES):
            if estimates.shape[0] == 0:
                bias = mse = math.nan
            else:
                bias = float(errors[:, k].mean())
                mse = float((errors[:, k] ** 2).mean())
            metrics.append({"alpha": alpha, "parameter": name, "bias": bias, "mse": mse})

    return SimulationReport(
        design="bias_mse",
        n=n,
        replications=reps,
        alpha_grid=alphas,
        scheme=scheme,
        metrics=metrics,
        seeds=seeds,
        runtime_seconds=time.time() - started,
        failures=failures,
        warnings=warnings,
        settings={"seed": seed, "fit": (fit_cfg or GdConfig()).model_dump(), "quad": quad.model_dump()},
    )


def level_power_study(
    null_theta: SnParams,
    alt_theta: SnParams,
    n: int,
    reps: int,
    alpha_grid: Sequence[float],
    epsilon: float = 0.0,
    null_contaminant: SnParams = LEVEL_CONTAMINANT,
    alt_contaminant: SnParams = POWER_CONTAMINANT,
    gamma0: float = 0.0,
    tau0: float = 0.05,
    fit_cfg: Optional[GdConfig] = None,
    seed: int = 0,
    workers: int = 1,
    quad: QuadratureSpec = DEFAULT_QUAD,
    trunc_halfwidth: float = DEFAULT_HALFWIDTH,
) -> SimulationReport:
    """Rejection rates of the gamma = gamma0 test under the null and the alternative law."""
    if reps < 2:
        raise ParameterError(f"reps must be at least 2, got {reps}")
    null_scheme = ContaminationScheme(base=null_theta, contaminant=null_contaminant, epsilon=epsilon)
    alt_scheme = ContaminationScheme(base=alt_theta, contaminant=alt_contaminant, epsilon=epsilon)
    alphas = [float(a) for a in alpha_grid]
    seeds = replication_seeds(seed, reps)
    started = time.time()
    logger.info(f"Level/power study: n={n}, reps={reps}, eps={epsilon:g}, alphas={alphas}, workers={workers}")

    jobs = [(null_scheme, alt_scheme, n, s, alphas, gamma0, tau0, fit_cfg, quad, trunc_halfwidth) for s in seeds]
    results = _run(_level_power_replication, jobs, workers)

    metrics: List[Dict[str, float]] = []
    failures: Dict[float, int] = {}
    warnings: List[str] = []
    for column, alpha in enumerate(alphas):
        null_rejections = [r[column][0] for r in results if r[column][0] is not None]
        alt_rejections = [r[column][1] for r in results if r[column][1] is not None]
        failures[alpha] = 2 * reps - len(null_rejections) - len(alt_rejections)
        if failures[alpha] > FAILURE_WARNING_FRACTION * 2 * reps:
            message = f"alpha={alpha:g}: {failures[alpha]} of {2 * reps} tests failed"
            logger.warning(message)
            warnings.append(message)
        metrics.append({
            "alpha": alpha,
            "level": float(np.mean(null_rejections)) if null_rejections else math.nan,
            "power": float(np.mean(alt_rejections)) if alt_rejections else math.nan,
        })

    return SimulationReport(
        design="level_power",
        n=n,
        replications=reps,
        alpha_grid=alphas,
        scheme=null_scheme,
        alt_scheme=alt_scheme,
        metrics=metrics,
        seeds=seeds,
        runtime_seconds=time.time() - started,
        failures=failures,
        warnings=warnings,
        settings={
            "seed": seed,
            "gamma0": gamma0,
            "tau0": tau0,
            "fit": (fit_cfg or GdConfig()).model_dump(),
            "quad": quad.model_dump(),
        },
    )


def relative_difference(fit_full: FitResult, fit_clean: FitResult) -> np.ndarray:
    """
    Percentage change |full - clean| / |full| * 100 per parameter.

    Components whose full-data estimate is below 1e-8 in magnitude are
    returned as ``inf`` (flagged) instead of being divided.
    """
    if fit_full.alpha != fit_clean.alpha:
        raise ParameterError(f"fits at different alphas ({fit_full.alpha} vs {fit_clean.alpha})")
    full, clean = fit_full.params.as_array(), fit_clean.params.as_array()
    rd = np.full(3, math.inf)
    safe = np.abs(full) >= RD_GUARD
    rd[safe] = np.abs(full[safe] - clean[safe]) / np.abs(full[safe]) * 100.0
    return rd


@dataclass(frozen=True)
class OutlierFilterResult:
    sample: Sample
    removed_indices: Tuple[int, ...]
    lower_fence: float
    upper_fence: float


def outlier_filter_boxplot(data: Sample) -> OutlierFilterResult:
    """Drop points outside [Q1 - 1.5 IQR, Q3 + 1.5 IQR] (type-7 quantiles)."""
    if data.n < 5:
        raise DataError(f"box-plot filter needs at least 5 values, got {data.n}")
    q1, q3 = np.quantile(data.values, [0.25, 0.75], method="linear")
    iqr = q3 - q1
    lower, upper = float(q1 - 1.5 * iqr), float(q3 + 1.5 * iqr)
    keep = (data.values >= lower) & (data.values <= upper)
    if not np.any(keep):
        raise DegenerateDataError("box-plot filter removed every observation")
    removed = tuple(int(i) for i in np.flatnonzero(~keep))
    logger.info(f"Box-plot filter on '{data.label}': removed {len(removed)} of {data.n} points outside [{lower:.6g}, {upper:.6g}]")
    cleaned = Sample(values=data.values[keep], label=f"{data.label} (outliers removed)", source=data.source)
    return OutlierFilterResult(sample=cleaned, removed_indices=removed, lower_fence=lower, upper_fence=upper)


@dataclass(frozen=True)
class SensitivityRow:
    alpha: float
    fit_full: FitResult
    fit_clean: FitResult
    rd: np.ndarray


def outlier_sensitivity(
    data: Sample,
    alpha_grid: Sequence[float],
    fit_cfg: Optional[GdConfig] = None,
    quad: QuadratureSpec = DEFAULT_QUAD,
    trunc_halfwidth: float = DEFAULT_HALFWIDTH,
) -> Tuple[OutlierFilterResult, List[SensitivityRow]]:
    """Full-data and outlier-deleted fits with their relative differences, per alpha."""
    filtered = outlier_filter_boxplot(data)
    rows = []
    for alpha in alpha_grid:
        full = _fit_at(data, float(alpha), fit_cfg, quad, trunc_halfwidth)
        clean = _fit_at(filtered.sample, float(alpha), fit_cfg, quad, trunc_halfwidth)
        rows.append(SensitivityRow(alpha=float(alpha), fit_full=full, fit_clean=clean, rd=relative_difference(full, clean)))
    return filtered, rows
