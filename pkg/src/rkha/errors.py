"""Exception hierarchy shared by every rkha module."""


class RKHAError(Exception):
    """Base class for all errors raised by this package."""


class RadiusMismatch(RKHAError, ValueError):
    pass


class LatticeKindMismatch(RKHAError, ValueError):
    pass


class NonPositiveWeight(RKHAError, ValueError):
    pass


class ProbeOutOfRange(RKHAError, IndexError):
    pass


class WeightMismatch(RKHAError, ValueError):
    pass


class NoConvergence(RKHAError, RuntimeError):
    pass


class GridTooCoarse(RKHAError, ValueError):
    pass


class ZeroElement(RKHAError, ValueError):
    pass


class TensorTooLarge(RKHAError, MemoryError):
    pass


class PointSetMismatch(RKHAError, ValueError):
    pass


class PhiOutOfRange(RKHAError, LookupError):
    pass


class SingularGram(RKHAError, ValueError):
    pass


class DimensionMismatch(RKHAError, ValueError):
    pass


class InfeasibleConstraints(RKHAError, ValueError):
    pass


class NotPositiveSemidefinite(RKHAError, ValueError):
    """Raised when a Gram matrix fails the Hermitian/PSD validation.

    ``min_eigenvalue`` carries the offending eigenvalue when known.
    """

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class SpecError(RKHAError, ValueError):
    """Malformed weight spec or run configuration; ``field`` names the culprit."""

    def __init__(self, message, field=None):
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field
