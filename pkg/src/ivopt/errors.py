"""Exception hierarchy shared across the package."""


class IvoptError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(IvoptError, ValueError):
    pass


class ParseError(IvoptError, ValueError):
    """Raised by the expression and problem-file parsers.

    ``line`` and ``col`` are 1-based and point at the offending character.
    """

    def __init__(self, message: str, line: int = 1, col: int = 1, source: str | None = None):
        self.message = message
        self.line = line
        self.col = col
        self.source = source
        where = f"{source}:" if source else ""
        super().__init__(f"{where}{line}:{col}: {message}")


class NonConvexError(IvoptError):
    """An operation that needs a convexity certificate got an uncertified expression."""


class ConjugateUnavailable(IvoptError):
    """No closed-form conjugate is known for the expression."""


class UnsupportedAtomForMembership(IvoptError):
    """The epsilon-subdifferential of the expression has no closed-form set."""


class NonSmoothAtPoint(IvoptError):
    pass


class LowerExceedsUpper(IvoptError, ValueError):
    """The lower objective exceeds the upper objective at some point."""

    def __init__(self, point, lower: float, upper: float):
        self.point = point
        self.lower = lower
        self.upper = upper
        coords = ", ".join(f"{float(v):.12g}" for v in point)
        super().__init__(f"fL(x) = {lower:.12g} exceeds fU(x) = {upper:.12g} at x = ({coords})")


class InfeasiblePoint(IvoptError, ValueError):
    pass


class EpsilonError(IvoptError, ValueError):
    pass


class PreconditionError(IvoptError):
    pass


class StrictConvexityNotCertified(PreconditionError):
    pass


class CCNotAsserted(PreconditionError):
    """The closedness condition must be asserted by the caller."""


class NoFeasiblePointFound(IvoptError):
    pass
