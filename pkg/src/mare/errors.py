"""Exception hierarchy shared by every module."""


class MareError(Exception):
    """Base class for all errors raised by :mod:`mare`."""


class SingularMatrix(MareError):
    pass


class NoConvergence(MareError):
    pass


class ReorderFailure(MareError):
    pass


class NearSingularOperator(MareError):
    """The Sylvester operator ``X -> PX + XQ`` is numerically singular."""


class NullSpaceDimension(MareError):
    pass


class SignFailure(MareError):
    pass


class NotZ(MareError):
    pass


class NotMMatrix(MareError):
    pass


class NotRegular(MareError):
    """K admits no v > 0 with Kv >= 0."""


class BadDimensions(MareError):
    pass


class ShapeMismatch(MareError):
    pass


class IllDefined(MareError):
    pass


class MaxIterExceeded(MareError):
    """Iteration cap reached; the partial convergence log is attached."""

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = log


class SplitsConjugatePair(MareError):
    pass


class SingularY1(MareError):
    pass


class SingularBlock(MareError):
    pass


class NearSingularIGH(MareError):
    pass


class GenerationFailure(MareError):
    pass


class ParseError(MareError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class AmbiguousInvariantSubspace(MareError):
    """The zero eigenvalue cluster does not single out one invariant subspace."""


class DegenerateNullSpace(NullSpaceDimension):
    """The null space of K (or K^T) is not one-dimensional."""
