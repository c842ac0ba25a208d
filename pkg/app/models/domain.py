"""Domain types shared by the numerical services.

Configuration-like types are frozen pydantic models (validated, hashable so
they can key the integral caches). Value types that carry numpy arrays are
frozen dataclasses, validated in ``__post_init__``.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.exceptions import ConfigurationError, DataError, ParameterError


class QuadratureSpec(BaseModel):
    """Tolerances for adaptive Gauss-Kronrod quadrature."""

    model_config = ConfigDict(frozen=True)

    abs_tol: float = Field(default=1e-10, gt=0, description="Absolute tolerance")
    rel_tol: float = Field(default=1e-10, gt=0, description="Relative tolerance")
    max_subdivisions: int = Field(default=200, ge=1, description="Subinterval limit")


@dataclass(frozen=True)
class SnParams:
    """Skew-normal parameters (location mu, scale sigma, shape gamma)."""

    mu: float
    sigma: float
    gamma: float

    def __post_init__(self):
        for name in ("mu", "sigma", "gamma"):
            value = getattr(self, name)
            if not isinstance(value, (int, float, np.floating, np.integer)) or not math.isfinite(value):
                raise ParameterError(f"{name} must be a finite real, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.sigma <= 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.sigma, self.gamma], dtype=float)

    @classmethod
    def from_array(cls, values) -> "SnParams":
        mu, sigma, gamma = (float(v) for v in values)
        return cls(mu, sigma, gamma)

    def as_dict(self) -> Dict[str, float]:
        return {"mu": self.mu, "sigma": self.sigma, "gamma": self.gamma}


PARAMETER_NAMES: Tuple[str, str, str] = ("mu", "sigma", "gamma")


@dataclass(frozen=True)
class SnMoments:
    """Mean, variance, skewness and delta of a skew-normal law."""

    mean: float
    variance: float
    skewness: float
    delta: float


class DpdConfig(BaseModel):
    """Density power divergence tuning: alpha plus the integration setup."""

    model_config = ConfigDict(frozen=True)

    alpha: float = Field(..., ge=0, description="DPD tuning parameter")
    quad: QuadratureSpec = Field(default_factory=QuadratureSpec)
    trunc_halfwidth: float = Field(default=15.0, ge=8, description="Standardized window half-width")


@dataclass(frozen=True)
class Sample:
    """Ordered finite observations with provenance."""

    values: np.ndarray
    label: str = "sample"
    source: str = ""

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        if values.size == 0:
            raise DataError("sample must be nonempty")
        if not np.all(np.isfinite(values)):
            raise DataError("sample values must all be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.n


class GdConfig(BaseModel):
    """Gradient descent settings (fixed or Barzilai-Borwein steps with Armijo backtracking)."""

    model_config = ConfigDict(frozen=True)

    step_size: float = Field(default=0.04, gt=0, description="Initial step lambda")
    max_iters: int = Field(default=10000, ge=1)
    rel_obj_tol: float = Field(default=1e-10, gt=0)
    grad_tol: float = Field(default=1e-6, gt=0)
    step_floor: float = Field(default=1e-8, gt=0, description="Smallest step tried by backtracking")
    max_step: float = Field(default=1e4, gt=0, description="Cap on Barzilai-Borwein trial steps")
    armijo_c: float = Field(default=1e-4, gt=0, lt=1)
    step_rule: Literal["fixed", "barzilai_borwein"] = "barzilai_borwein"
    gamma_limit: float = Field(default=50.0, gt=0, description="|gamma| beyond this counts as divergence")
    log_every: int = Field(default=100, ge=1)


class ParameterBox(BaseModel):
    """Closed search box in (mu, sigma, gamma) space."""

    model_config = ConfigDict(frozen=True)

    mu: Tuple[float, float]
    sigma: Tuple[float, float]
    gamma: Tuple[float, float]

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.mu[0], self.sigma[0], self.gamma[0]], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.mu[1], self.sigma[1], self.gamma[1]], dtype=float)

    def validate_nonempty(self) -> None:
        """Raise when any side is empty or sigma is not strictly positive."""
        lo, hi = self.lower, self.upper
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ConfigurationError("search box bounds must be finite")
        if np.any(hi <= lo):
            raise ConfigurationError(f"empty search box: lower={lo.tolist()} upper={hi.tolist()}")
        if self.sigma[0] <= 0:
            raise ConfigurationError("sigma lower bound must be positive")


class GaConfig(BaseModel):
    """Real-coded genetic algorithm settings."""

    model_config = ConfigDict(frozen=True)

    population: int = Field(default=50, ge=2)
    elites: int = Field(default=2, ge=0)
    crossover_prob: float = Field(default=0.8, ge=0, le=1)
    mutation_prob: float = Field(default=0.1, ge=0, le=1)
    max_generations: int = Field(default=5000, ge=1)
    rng_seed: int = 0
    bounds: Optional[ParameterBox] = None
    selection: Literal["proportionate", "tournament"] = "proportionate"
    tournament_size: int = Field(default=3, ge=2)
    mutation_scale: float = Field(default=0.1, gt=0, description="Mutation sd as a fraction of the box width")
    stall_generations: int = Field(default=200, ge=1, description="Stop after this many generations without improvement")
    seed_with_init: bool = True
    polish: Optional[GdConfig] = Field(default_factory=GdConfig, description="Gradient-descent refinement; None skips it")

    @model_validator(mode="after")
    def _check_elites(self) -> "GaConfig":
        if self.elites >= self.population:
            raise ValueError("elites must be smaller than population")
        return self


@dataclass(frozen=True)
class AsymptoticCovariance:
    """Sandwich covariance J^-1 K J^-1 of the MDPDE at a parameter value.

    ``marginal`` marks the singular-information fallback, where each diagonal
    entry is K_kk / J_kk^2 and off-diagonals are zero.
    """

    j_matrix: np.ndarray
    k_matrix: np.ndarray
    sigma_matrix: np.ndarray
    alpha: float
    at_theta: SnParams
    condition_number: float
    marginal: bool = False


class FitMethod(str, Enum):
    GRADIENT_DESCENT = "gradient_descent"
    GENETIC = "genetic"
    MLE = "mle"


@dataclass(frozen=True)
class FitResult:
    """Point estimate, plug-in covariance and optimizer diagnostics."""

    params: SnParams
    alpha: float
    std_errors: Optional[np.ndarray]
    covariance: Optional[AsymptoticCovariance]
    objective_value: float
    gradient_norm: float
    iterations: int
    converged: bool
    method: FitMethod
    n: int
    trace: Tuple[float, ...] = ()
    message: str = ""
    diverged: bool = False
    warnings: Tuple[str, ...] = ()


class IfKind(str, Enum):
    ESTIMATOR_IF = "estimator_if"
    TEST_IF2 = "test_if2"
    TEST_PIF = "test_pif"


@dataclass(frozen=True)
class IfCurve:
    """Influence function evaluated on a grid (3 columns for estimator_if, 1 otherwise)."""

    alpha: float
    at_theta: SnParams
    grid: np.ndarray
    values: np.ndarray
    kind: IfKind


@dataclass(frozen=True)
class HypothesisSpec:
    """Composite null m(theta) = 0 with Jacobian M(theta) of shape 3 x r."""

    restriction: Callable[[SnParams], np.ndarray]
    jacobian: Callable[[SnParams], np.ndarray]
    r: int
    description: str

    def __post_init__(self):
        if self.r not in (1, 2, 3):
            raise ConfigurationError(f"restriction count must be 1, 2 or 3, got {self.r}")


@dataclass(frozen=True)
class WaldTestResult:
    statistic: float
    df: int
    p_value: float
    alpha: float
    fit: FitResult
    reject_at: Dict[float, bool]
    hypothesis: str
    warnings: Tuple[str, ...] = ()


@dataclass(frozen=True)
class ContaminationScheme:
    """Replace floor(epsilon * n) base draws by contaminant draws."""

    base: SnParams
    contaminant: SnParams
    epsilon: float = 0.0
    placement: Literal["deterministic_count"] = "deterministic_count"

    def __post_init__(self):
        if not (0.0 <= self.epsilon < 0.5):
            raise ConfigurationError(f"epsilon must lie in [0, 0.5), got {self.epsilon}")
        if self.placement != "deterministic_count":
            raise ConfigurationError(f"unsupported placement {self.placement!r}")

    def contaminated_count(self, n: int) -> int:
        return int(math.floor(self.epsilon * n + 1e-9))


@dataclass
class SimulationReport:
    """Monte Carlo table with its replication metadata.

    ``metrics`` rows are dicts: ``{alpha, parameter, bias, mse}`` for bias/MSE
    designs, ``{alpha, level, power}`` for level/power designs.
    """

    design: str
    n: int
    replications: int
    alpha_grid: List[float]
    scheme: ContaminationScheme
    metrics: List[Dict[str, float]]
    seeds: List[int]
    runtime_seconds: float
    failures: Dict[float, int] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)
    alt_scheme: Optional[ContaminationScheme] = None
    settings: Dict[str, object] = field(default_factory=dict)
