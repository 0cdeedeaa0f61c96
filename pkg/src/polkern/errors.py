"""Exception hierarchy shared by every polkern module."""


class PolkernError(Exception):
    """Base class for all errors raised by polkern."""


class NotHermitian(PolkernError, ValueError):
    pass


class NotPositiveDefinite(PolkernError, ValueError):
    pass


class SingularMatrix(PolkernError, ArithmeticError):
    """A 3x3 matrix whose determinant is too small to invert.

    Usually means a degenerate region estimate (too few pixels) or, for the
    Chi-Square distance, one of its inner difference matrices.
    """


class NonFiniteResult(PolkernError, ArithmeticError):
    pass


class LooksMismatch(PolkernError, ValueError):
    pass


class InsufficientPixels(PolkernError, ValueError):
    pass


class SingularEstimate(PolkernError, ArithmeticError):
    pass


class QuadratureFailure(PolkernError, RuntimeError):
    pass


class TauViolation(PolkernError, ValueError):
    def __init__(self, message, pair=None, value=None, tau=None):
        super().__init__(message)
        self.pair = pair
        self.value = value
        self.tau = tau


class OneClassOnly(PolkernError, ValueError):
    pass


class DimensionMismatch(PolkernError, ValueError):
    pass


class EmptyClass(PolkernError, ValueError):
    pass


class InfeasibleSpec(PolkernError, ValueError):
    pass


class DegenerateMarginals(PolkernError, ArithmeticError):
    pass


class InsufficientSamples(PolkernError, ValueError):
    pass


class FormatError(PolkernError, ValueError):
    """Malformed or inconsistent file content."""
