"""The SN(mu, sigma, gamma) model: density, distribution function, score, moments, sampling.

Scalar entry points validate their arguments; the ``*_array`` variants are the
vectorized kernels the divergence and estimation layers call in their loops.
"""

import logging
import math
from typing import Optional, Union

import numpy as np
from scipy import special

from app.exceptions import DomainError, ParameterError
from app.models.domain import QuadratureSpec, Sample, SnMoments, SnParams
from app.services.special_functions import DEFAULT_QUAD, LOG_SQRT_2PI, owens_t, std_normal_cdf

logger = logging.getLogger(__name__)

LOG_2 = math.log(2.0)
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
# Largest |skewness| attainable by the family (delta -> 1)
MAX_SKEWNESS = 0.5 * (4.0 - math.pi) * (2.0 / (math.pi - 2.0)) ** 1.5


def _check(theta: SnParams) -> None:
    if not isinstance(theta, SnParams):
        raise ParameterError(f"expected SnParams, got {type(theta).__name__}")


def _check_x(x: float) -> None:
    if not math.isfinite(x):
        raise DomainError(f"x must be finite, got {x!r}")


def logpdf_array(theta: SnParams, x: np.ndarray) -> np.ndarray:
    """log f_theta(x) = log 2 - log sigma + log phi(z) + log Phi(gamma z)."""
    z = (np.asarray(x, dtype=float) - theta.mu) / theta.sigma
    return LOG_2 - math.log(theta.sigma) - 0.5 * z * z - LOG_SQRT_2PI + special.log_ndtr(theta.gamma * z)


def mills_array(w: np.ndarray) -> np.ndarray:
    """Vectorized phi(w)/Phi(w) in log space."""
    return np.exp(-0.5 * w * w - LOG_SQRT_2PI - special.log_ndtr(w))


def score_array(theta: SnParams, x: np.ndarray) -> np.ndarray:
    """Score vectors d log f / d(mu, sigma, gamma) as an (n, 3) array."""
    sigma, gamma = theta.sigma, theta.gamma
    z = (np.asarray(x, dtype=float) - theta.mu) / sigma
    ratio = mills_array(gamma * z)
    u = np.empty(z.shape + (3,), dtype=float)
    u[..., 0] = (z - gamma * ratio) / sigma
    u[..., 1] = (z * z - gamma * z * ratio - 1.0) / sigma
    u[..., 2] = z * ratio
    return u


def pdf(theta: SnParams, x: float) -> float:
    """Density (2/sigma) phi(z) Phi(gamma z)."""
    _check(theta)
    _check_x(x)
    return float(np.exp(logpdf_array(theta, np.array(x))))


def logpdf(theta: SnParams, x: float) -> float:
    _check(theta)
    _check_x(x)
    return float(logpdf_array(theta, np.array(x)))


def cdf(theta: SnParams, x: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Distribution function Phi(z) - 2 T(z, gamma)."""
    _check(theta)
    _check_x(x)
    z = (x - theta.mu) / theta.sigma
    value = std_normal_cdf(z) - 2.0 * owens_t(z, theta.gamma, quad)
    return min(1.0, max(0.0, value))


def score(theta: SnParams, x: float) -> np.ndarray:
    """Score vector at a single observation."""
    _check(theta)
    _check_x(x)
    return score_array(theta, np.array(x))


def moments(theta: SnParams) -> SnMoments:
    _check(theta)
    gamma = theta.gamma
    delta = gamma / math.sqrt(1.0 + gamma * gamma)
    mean_shift = SQRT_2_OVER_PI * delta
    variance = theta.sigma**2 * (1.0 - mean_shift * mean_shift)
    # (4 - pi)/2 * b^3 / (1 - b^2)^{3/2} with b = delta * sqrt(2/pi)
    skewness = 0.5 * (4.0 - math.pi) * mean_shift**3 / (1.0 - mean_shift * mean_shift) ** 1.5
    return SnMoments(
        mean=theta.mu + theta.sigma * mean_shift,
        variance=variance,
        skewness=skewness,
        delta=delta,
    )


def draw(theta: SnParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """n draws via X = mu + sigma (delta |Z0| + sqrt(1 - delta^2) Z1)."""
    delta = theta.gamma / math.sqrt(1.0 + theta.gamma**2)
    z0 = np.abs(rng.standard_normal(n))
    z1 = rng.standard_normal(n)
    return theta.mu + theta.sigma * (delta * z0 + math.sqrt(1.0 - delta * delta) * z1)


def sample(
    theta: SnParams,
    n: int,
    rng_seed: Union[int, np.random.Generator, None] = None,
    label: Optional[str] = None,
) -> Sample:
    """Draw an i.i.d. sample; a fixed integer seed reproduces it bit for bit."""
    _check(theta)
    if n < 1:
        raise ParameterError(f"sample size must be at least 1, got {n}")
    if isinstance(rng_seed, np.random.Generator):
        rng, source = rng_seed, "simulated"
    else:
        rng, source = np.random.default_rng(rng_seed), f"simulated:seed={rng_seed}"
    return Sample(
        values=draw(theta, n, rng),
        label=label or f"SN({theta.mu:g},{theta.sigma:g},{theta.gamma:g})",
        source=source,
    )
