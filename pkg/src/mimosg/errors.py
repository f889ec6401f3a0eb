"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration problems exit 2,
numerical failures exit 3, a failed validation gate exits 4.
"""


class MimosgError(Exception):
    """Base class for all package errors."""


class ConfigError(MimosgError, ValueError):
    """Invalid or inconsistent configuration (bad frame split, units, flags)."""


class DomainError(MimosgError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class NumericalError(MimosgError, RuntimeError):
    """A numerical routine produced a non-finite or inconsistent result."""


class QuadratureError(NumericalError):
    """Adaptive quadrature failed to converge.

    Carries diagnostics: the best estimate so far, the error estimate and
    the subdivision count at failure.
    """

    def __init__(self, message, estimate=None, error=None, intervals=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error
        self.intervals = intervals

    def __str__(self):
        base = super().__str__()
        if self.estimate is not None:
            base += (f" [estimate={self.estimate!r}, err={self.error!r}, "
                     f"intervals={self.intervals!r}]")
        return base


class RealizationError(MimosgError, RuntimeError):
    """A sampled network realization is unusable (e.g. no base stations)."""


class EstimationError(MimosgError, RuntimeError):
    """A Monte Carlo run produced no usable samples."""
