"""Exception types shared across the package."""


class HadexpError(Exception):
    """Base class for all package errors."""


class DomainError(HadexpError):
    """A point lies outside the model's coordinate box."""


class RegimeError(HadexpError):
    """An operation was requested outside its validity regime
    (e.g. function-regime evaluation below the regularity threshold)."""


class UnsupportedOrderError(HadexpError):
    """A derivative order beyond the supported maximum was requested."""


class QuadratureError(HadexpError):
    """Adaptive quadrature failed to reach the requested tolerance.

    Carries the best available estimate and its error estimate.
    """

    def __init__(self, message, estimate=None, error_estimate=None):
        super().__init__(message)
        self.estimate = estimate
        self.error_estimate = error_estimate


class CFLError(HadexpError):
    """Finite-difference time step violates the stability bound."""


class GridError(HadexpError):
    """Finite-difference grid is too small for the requested solve."""


class ConfigError(HadexpError):
    """Run configuration is malformed."""
