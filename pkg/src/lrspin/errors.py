"""Exception types shared across the package."""


class LrspinError(Exception):
    """Base class for all package-specific failures."""


class InvalidAlpha(LrspinError):
    """Decay exponent is outside the range a builder or formula accepts."""


class TooLarge(LrspinError):
    """Requested chain length exceeds the dense simulation cap."""


class TooLargeForDense(LrspinError):
    """Full superoperator treatment was requested above the dense cap."""


class TooLargeReduced(LrspinError):
    """Reduced density matrix would exceed the correlation-search cap."""


class SupportViolation(LrspinError):
    """An operator or term does not live where the caller claimed."""


class DimensionMismatch(LrspinError):
    """Matrix shape is inconsistent with the declared number of sites."""


class EmptyRegion(LrspinError):
    """A region argument must contain at least one site."""


class OverlapError(LrspinError):
    """Two regions that must be disjoint share a site."""


class StepFailure(LrspinError):
    """Adaptive integrator could not reach the requested time."""


class SingularSteadyState(LrspinError):
    """Steady state has (numerically) zero eigenvalues, modular maps undefined."""


class NotReversible(LrspinError):
    """Detailed-balance check failed for an operation that requires it."""


class NonPrimitive(LrspinError):
    """Generator has a degenerate fixed space where a unique one is required."""


class RegimeInvalid(LrspinError):
    """Envelope regime is incompatible with the supplied parameters."""


class NoDecay(LrspinError):
    """Requested optimization has no decaying solution for these parameters."""


class OutsideValidity(LrspinError):
    """Point (r, t) lies outside the validity window of the bound."""
