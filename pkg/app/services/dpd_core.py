"""Density power divergence machinery for the skew-normal model.

All model integrals are computed in the standardized variable z = (x - mu)/sigma
on [-trunc_halfwidth, trunc_halfwidth]. With g_beta(z) = phi(z)^beta Phi(gamma z)^beta:

    int f^beta dx           = sigma^(1-beta) 2^beta int g_beta dz
    int u f^beta dx         = sigma^(1-beta) 2^beta S * int a(z) g_beta dz
    int u u^T f^beta dx     = sigma^(1-beta) 2^beta S S^T * int a a^T g_beta dz

where a(z) is the score with the 1/sigma factors removed and S = (1/sigma, 1/sigma, 1).
The z-integrals depend on (gamma, beta) only and are cached on that key.
"""

import logging
import math
from functools import lru_cache
from typing import Callable, Tuple

import numpy as np
from scipy import special

from app.exceptions import ConfigurationError, IntegrationError, ParameterError
from app.models.domain import DpdConfig, QuadratureSpec, Sample, SnParams
from app.services.skew_normal import LOG_2, logpdf_array, score_array
from app.services.special_functions import (
    DEFAULT_QUAD,
    LOG_SQRT_2PI,
    integrate_scalar,
    integrate_vector,
)

logger = logging.getLogger(__name__)

DEFAULT_HALFWIDTH = 15.0
_UPPER_PAIRS: Tuple[Tuple[int, int], ...] = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


def _log_kernel(z: float, gamma: float, beta: float) -> float:
    return beta * (-0.5 * z * z - LOG_SQRT_2PI + float(special.log_ndtr(gamma * z)))


def _reduced_score(z: float, gamma: float) -> Tuple[float, float, float]:
    w = gamma * z
    ratio = math.exp(-0.5 * w * w - LOG_SQRT_2PI - float(special.log_ndtr(w)))
    return (z - gamma * ratio, z * z - gamma * z * ratio - 1.0, z * ratio)


@lru_cache(maxsize=4096)
def _power_kernel(gamma: float, beta: float, quad: QuadratureSpec, halfwidth: float) -> float:
    return integrate_scalar(
        lambda z: math.exp(_log_kernel(z, gamma, beta)),
        -halfwidth,
        halfwidth,
        quad,
        points=(0.0,),
    )


@lru_cache(maxsize=4096)
def _score_kernel(gamma: float, beta: float, quad: QuadratureSpec, halfwidth: float) -> Tuple[float, ...]:
    def integrand(z: float) -> np.ndarray:
        return np.array(_reduced_score(z, gamma)) * math.exp(_log_kernel(z, gamma, beta))

    return tuple(integrate_vector(integrand, -halfwidth, halfwidth, quad, points=(0.0,)))


@lru_cache(maxsize=1024)
def _outer_kernel(gamma: float, beta: float, quad: QuadratureSpec, halfwidth: float) -> Tuple[float, ...]:
    def integrand(z: float) -> np.ndarray:
        a = _reduced_score(z, gamma)
        weight = math.exp(_log_kernel(z, gamma, beta))
        return np.array([a[i] * a[j] for i, j in _UPPER_PAIRS]) * weight

    return tuple(integrate_vector(integrand, -halfwidth, halfwidth, quad, points=(0.0,)))


def _prefactor(theta: SnParams, beta: float) -> float:
    return math.exp((1.0 - beta) * math.log(theta.sigma) + beta * LOG_2)


def _score_scale(theta: SnParams) -> np.ndarray:
    return np.array([1.0 / theta.sigma, 1.0 / theta.sigma, 1.0])


def power_integral(
    theta: SnParams,
    beta: float,
    quad: QuadratureSpec = DEFAULT_QUAD,
    trunc_halfwidth: float = DEFAULT_HALFWIDTH,
) -> float:
    """int f_theta(x)^beta dx."""
    if not beta > 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    return _prefactor(theta, beta) * _power_kernel(theta.gamma, float(beta), quad, float(trunc_halfwidth))


def weighted_score_integral(
    theta: SnParams,
    beta: float,
    quad: QuadratureSpec = DEFAULT_QUAD,
    trunc_halfwidth: float = DEFAULT_HALFWIDTH,
) -> np.ndarray:
    """int u_theta(x) f_theta(x)^beta dx as a 3-vector."""
    kernel = np.array(_score_kernel(theta.gamma, float(beta), quad, float(trunc_halfwidth)))
    return _prefactor(theta, beta) * _score_scale(theta) * kernel


def weighted_outer_integral(
    theta: SnParams,
    beta: float,
    quad: QuadratureSpec = DEFAULT_QUAD,
    trunc_halfwidth: float = DEFAULT_HALFWIDTH,
) -> np.ndarray:
    """int u_theta(x) u_theta(x)^T f_theta(x)^beta dx as a symmetric 3x3 matrix."""
    kernel = _outer_kernel(theta.gamma, float(beta), quad, float(trunc_halfwidth))
    matrix = np.empty((3, 3))
    for value, (i, j) in zip(kernel, _UPPER_PAIRS):
        matrix[i, j] = matrix[j, i] = value
    scale = _score_scale(theta)
    return _prefactor(theta, beta) * matrix * np.outer(scale, scale)


def xi(
    theta: SnParams,
    alpha: float,
    quad: QuadratureSpec = DEFAULT_QUAD,
    trunc_halfwidth: float = DEFAULT_HALFWIDTH,
) -> np.ndarray:
    """xi_alpha(theta) = int u_theta f_theta^(1+alpha) dx."""
    if alpha < 0:
        raise ParameterError(f"alpha must be nonnegative, got {alpha}")
    return weighted_score_integral(theta, 1.0 + alpha, quad, trunc_halfwidth)


def _positive_alpha(cfg: DpdConfig) -> float:
    if cfg.alpha <= 0:
        raise ConfigurationError("the DPD objective needs alpha > 0; alpha = 0 is the likelihood path")
    return cfg.alpha


def objective(theta: SnParams, data: Sample, cfg: DpdConfig) -> float:
    """H_n(theta) = int f^(1+alpha) - (1 + 1/alpha) mean(f(X_i)^alpha)."""
    alpha = _positive_alpha(cfg)
    weights = np.exp(alpha * logpdf_array(theta, data.values))
    first = power_integral(theta, 1.0 + alpha, cfg.quad, cfg.trunc_halfwidth)
    return first - (1.0 + 1.0 / alpha) * float(weights.mean())


def psi(theta: SnParams, x: np.ndarray, cfg: DpdConfig) -> np.ndarray:
    """M-estimation function u_theta(x) f_theta(x)^alpha - xi_alpha(theta), one row per point."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    weights = np.exp(cfg.alpha * logpdf_array(theta, x))
    return score_array(theta, x) * weights[:, None] - xi(theta, cfg.alpha, cfg.quad, cfg.trunc_halfwidth)


def objective_gradient(theta: SnParams, data: Sample, cfg: DpdConfig) -> np.ndarray:
    """(1 + alpha) [xi_alpha(theta) - mean(u_theta(X_i) f_theta(X_i)^alpha)]."""
    alpha = _positive_alpha(cfg)
    return -(1.0 + alpha) * psi(theta, data.values, cfg).mean(axis=0)


def negative_log_likelihood(theta: SnParams, data: Sample) -> float:
    """-(1/n) sum log f_theta(X_i); the alpha -> 0 limit of H_n up to constants."""
    return -float(logpdf_array(theta, data.values).mean())


def negative_log_likelihood_gradient(theta: SnParams, data: Sample) -> np.ndarray:
    return -score_array(theta, data.values).mean(axis=0)


def dpd_divergence(
    g_pdf: Callable[[float], float],
    f_pdf: Callable[[float], float],
    alpha: float,
    quad: QuadratureSpec = DEFAULT_QUAD,
    window: Tuple[float, float] = (-50.0, 50.0),
    mass_tol: float = 1e-6,
) -> float:
    """
    Density power divergence d_alpha(g, f) between two densities on the real line.

    Args:
        g_pdf: True (data) density
        f_pdf: Model density
        alpha: Tuning parameter; 0 gives the Kullback-Leibler divergence
        quad: Quadrature tolerances
        window: Finite integration window
        mass_tol: Largest tolerated missing probability mass of either density

    Returns:
        The divergence (nonnegative)

    Raises:
        IntegrationError: If the window loses more than ``mass_tol`` of either density
    """
    if alpha < 0:
        raise ParameterError(f"alpha must be nonnegative, got {alpha}")
    lower, upper = window
    for name, density in (("g", g_pdf), ("f", f_pdf)):
        mass = integrate_scalar(density, lower, upper, quad, points=(0.0,))
        if abs(mass - 1.0) > mass_tol:
            raise IntegrationError(f"window {window} holds mass {mass:.10f} of {name}; widen it")

    if alpha == 0:
        def integrand(x: float) -> float:
            g = g_pdf(x)
            if g <= 0.0:
                return 0.0
            f = f_pdf(x)
            if f <= 0.0:
                raise IntegrationError(f"model density vanishes at {x} where the data density does not")
            return g * (math.log(g) - math.log(f))
    else:
        def integrand(x: float) -> float:
            g, f = g_pdf(x), f_pdf(x)
            return f ** (1.0 + alpha) - (1.0 + 1.0 / alpha) * g * f**alpha + g ** (1.0 + alpha) / alpha

    return max(0.0, integrate_scalar(integrand, lower, upper, quad, points=(0.0,)))


def clear_caches() -> None:
    """Drop the cached standardized integrals."""
    _power_kernel.cache_clear()
    _score_kernel.cache_clear()
    _outer_kernel.cache_clear()
