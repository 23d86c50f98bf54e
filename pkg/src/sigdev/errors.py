"""Exception hierarchy shared by every module of the package."""


class SigdevError(Exception):
    """Base class for all errors raised by sigdev."""


class DimensionMismatch(SigdevError, ValueError):
    pass


class DegenerateFit(SigdevError, ValueError):
    pass


class EmptyPath(SigdevError, ValueError):
    pass


class InvalidPath(SigdevError, ValueError):
    """Malformed path data (zero direction, nonpositive length, bad JSON)."""


class InvalidSignature(SigdevError, ValueError):
    """Malformed signature data."""


class LevelCapExceeded(SigdevError):
    """Dense storage for the requested level would exceed the coefficient cap."""


class NotInvertible(SigdevError, ArithmeticError):
    pass


class PrecisionTooLow(SigdevError):
    pass


class NotOnHyperboloid(SigdevError, ValueError):
    pass


class TailTooLarge(SigdevError):
    """Truncated development series is not accurate enough at this lambda."""

    def __init__(self, message, lam=None, tail_bound=None):
        super().__init__(message)
        self.lam = lam
        self.tail_bound = tail_bound


class StepTooCoarse(SigdevError):
    pass


class NotAxisSignature(SigdevError):
    pass


class LevelInsufficient(SigdevError):
    pass


class DecayNotObserved(SigdevError):
    pass


class InsufficientJet(SigdevError, ValueError):
    pass


class IllConditionedFit(SigdevError):
    pass
