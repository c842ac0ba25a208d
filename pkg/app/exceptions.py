"""Error hierarchy shared by the services, the CLI and the API.

Every error carries the process exit code the CLI reports for it:
1 usage, 2 IO/data, 3 numerical/convergence.
"""

from typing import Optional


class SnRobustError(Exception):
    """Base class for all library errors."""

    exit_code: int = 3


class DomainError(SnRobustError, ValueError):
    """Non-finite or out-of-domain argument to a special function."""

    exit_code = 1


class ParameterError(SnRobustError, ValueError):
    """Invalid skew-normal parameters or incompatible arguments."""

    exit_code = 1


class ConfigurationError(SnRobustError, ValueError):
    """Invalid configuration (empty search box, alpha out of range, ...)."""

    exit_code = 1


class UsageError(SnRobustError):
    """Malformed command-line options or hypothesis strings."""

    exit_code = 1


class DataSourceError(SnRobustError, OSError):
    """Missing or unreadable input file or column."""

    exit_code = 2


class DataError(SnRobustError, ValueError):
    """Input data unusable for estimation."""

    exit_code = 2


class DegenerateDataError(DataError):
    """Data with zero variance, or emptied by filtering."""


class IntegrationError(SnRobustError, ArithmeticError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class ConditioningError(SnRobustError, ArithmeticError):
    """A matrix that must be inverted is singular or badly conditioned."""

    def __init__(self, message: str, condition_number: Optional[float] = None):
        super().__init__(message)
        self.condition_number = condition_number


class BoundaryError(SnRobustError, ArithmeticError):
    """The optimizer drove the scale parameter to the boundary."""


class NumericalError(SnRobustError, ArithmeticError):
    """A series or iteration exceeded its cap."""
