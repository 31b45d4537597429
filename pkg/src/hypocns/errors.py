"""Exception types raised across the package."""


class HypoCNSError(Exception):
    """Base class for all package errors."""


class NegativeOrderOnNonzeroMean(HypoCNSError, ValueError):
    pass


class GridMismatch(HypoCNSError, ValueError):
    pass


class DomainViolation(HypoCNSError, ValueError):
    """A pointwise map or the solver met a state outside its domain (vacuum)."""


class JOutOfRange(HypoCNSError, IndexError):
    pass


class MeanModeNotZero(HypoCNSError, ValueError):
    pass


class NoAdmissibleTheta(HypoCNSError, ValueError):
    pass


class ZeroField(HypoCNSError, ValueError):
    pass


class NegativeTime(HypoCNSError, ValueError):
    pass


class QuadratureNotConverged(HypoCNSError, ArithmeticError):
    pass


class CflViolation(HypoCNSError, ValueError):
    pass


class NonMonotoneTime(HypoCNSError, ValueError):
    pass


class SigmaTooLarge(HypoCNSError, ValueError):
    pass


class InsufficientSamples(HypoCNSError, ValueError):
    pass


class NonPositiveValue(HypoCNSError, ValueError):
    pass


class MalformedReport(HypoCNSError, ValueError):
    pass
