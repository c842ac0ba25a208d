"""Scalar special functions and the quadrature wrappers every integral uses."""

import logging
import math
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, special

from app.exceptions import DomainError, IntegrationError
from app.models.domain import QuadratureSpec

logger = logging.getLogger(__name__)

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

DEFAULT_QUAD = QuadratureSpec()


def _require_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise DomainError(f"{name} must be finite, got {value!r}")


def std_normal_pdf(z: float) -> float:
    """Standard normal density."""
    _require_finite(z=z)
    return INV_SQRT_2PI * math.exp(-0.5 * z * z)


def std_normal_logpdf(z: float) -> float:
    _require_finite(z=z)
    return -0.5 * z * z - LOG_SQRT_2PI


def std_normal_cdf(z: float) -> float:
    """Standard normal distribution function (scipy's ``ndtr``, full double precision)."""
    _require_finite(z=z)
    return float(special.ndtr(z))


def std_normal_logcdf(z: float) -> float:
    _require_finite(z=z)
    return float(special.log_ndtr(z))


def mills_ratio(z: float) -> float:
    """phi(z) / Phi(z), evaluated in log space so neither tail under- or overflows."""
    _require_finite(z=z)
    return math.exp(-0.5 * z * z - LOG_SQRT_2PI - float(special.log_ndtr(z)))


def integrate_scalar(
    func: Callable[[float], float],
    lower: float,
    upper: float,
    quad: QuadratureSpec = DEFAULT_QUAD,
    points: Optional[Sequence[float]] = None,
) -> float:
    """
    Adaptive Gauss-Kronrod quadrature of a scalar integrand.

    Args:
        func: Integrand
        lower: Lower limit (finite)
        upper: Upper limit (finite)
        quad: Tolerances and subdivision limit
        points: Interior breakpoints where the integrand changes character

    Returns:
        The integral value

    Raises:
        IntegrationError: If the requested tolerance was not reached
    """
    inner = None
    if points:
        inner = [p for p in points if lower < p < upper] or None
    result = integrate.quad(
        func,
        lower,
        upper,
        epsabs=quad.abs_tol,
        epsrel=quad.rel_tol,
        limit=quad.max_subdivisions,
        points=inner,
        full_output=1,
    )
    # quad appends a message only when it did not converge
    if len(result) > 3:
        value, abserr = result[0], result[1]
        raise IntegrationError(f"quadrature on [{lower}, {upper}] did not converge (estimate {value}, error {abserr}): {result[3]}")
    value = float(result[0])
    if not math.isfinite(value):
        raise IntegrationError(f"quadrature on [{lower}, {upper}] produced {value}")
    return value


def integrate_vector(
    func: Callable[[float], np.ndarray],
    lower: float,
    upper: float,
    quad: QuadratureSpec = DEFAULT_QUAD,
    points: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """Adaptive quadrature of a vector-valued integrand (``scipy.integrate.quad_vec``)."""
    inner = None
    if points:
        inner = [p for p in points if lower < p < upper] or None
    value, _, info = integrate.quad_vec(
        func,
        lower,
        upper,
        epsabs=quad.abs_tol,
        epsrel=quad.rel_tol,
        limit=quad.max_subdivisions,
        points=inner,
        full_output=True,
    )
    if not info.success:
        raise IntegrationError(f"vector quadrature on [{lower}, {upper}] failed: {info.message}")
    value = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(value)):
        raise IntegrationError(f"vector quadrature on [{lower}, {upper}] produced non-finite values")
    return value


def _owens_t_integral(h: float, a: float, quad: QuadratureSpec) -> float:
    """Defining integral of T(h, a) for h >= 0 and 0 <= a <= 1."""
    half_h2 = 0.5 * h * h

    def integrand(x: float) -> float:
        one_plus = 1.0 + x * x
        return math.exp(-half_h2 * one_plus) / one_plus

    return integrate_scalar(integrand, 0.0, a, quad) / (2.0 * math.pi)


def owens_t(h: float, a: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """
    Owen's T function, (1/2pi) * int_0^a exp(-h^2 (1+x^2)/2) / (1+x^2) dx.

    The arguments are reduced to h >= 0 and 0 <= a <= 1 through
    T(-h, a) = T(h, a), T(h, -a) = -T(h, a) and, for a > 1,
    T(h, a) = (Phi(h) Q(ah) + Phi(ah) Q(h)) / 2 - T(ah, 1/a), Q = 1 - Phi.
    """
    _require_finite(h=h, a=a)
    if a == 0.0:
        return 0.0
    if a < 0.0:
        return -owens_t(h, -a, quad)
    h = abs(h)
    if a <= 1.0:
        return _owens_t_integral(h, a, quad)

    ah = a * h
    cdf_h, sf_h = float(special.ndtr(h)), float(special.ndtr(-h))
    cdf_ah, sf_ah = float(special.ndtr(ah)), float(special.ndtr(-ah))
    return 0.5 * (cdf_h * sf_ah + cdf_ah * sf_h) - _owens_t_integral(ah, 1.0 / a, quad)
