"""Exception types shared across the package.

Errors fall into two groups.  ``UsageError`` subclasses signal bad input
(wrong dimension, malformed file).  ``DegeneracyError`` subclasses signal a
mathematically non-generic draw; the command line maps them to exit code 2.
"""


class CharvarError(Exception):
    """Base class for every error raised by the package."""


class UsageError(CharvarError, ValueError):
    """Input does not satisfy an operation's preconditions."""


class InvalidDimension(UsageError):
    pass


class InvalidPair(UsageError):
    pass


class MalformedParams(UsageError):
    pass


class NumericalFailure(CharvarError, RuntimeError):
    """A numerical kernel (SVD, linear solve) failed to produce a result."""


class DegeneracyError(CharvarError):
    """The parameters violate a non-degeneracy requirement.

    ``where`` holds the offending index tuple (1-based) when one exists.
    """

    def __init__(self, message, where=None, detail=None):
        super().__init__(message)
        self.where = where
        self.detail = detail


class DegeneratePair(DegeneracyError):
    pass


class DegenerateTriple(DegeneracyError):
    pass


class DegenerateQuadruple(DegeneracyError):
    pass


class GenericityFailure(DegeneracyError):
    pass


class NoConvergence(DegeneracyError):
    pass


class LemmaHypothesisFailure(DegeneracyError):
    pass


class NotFound(DegeneracyError):
    pass


class GaussMismatch(DegeneracyError):
    pass


class SelectionDegenerate(DegeneracyError):
    pass


class ConsistencyFailure(DegeneracyError):
    pass


class InvalidCurvature(UsageError):
    pass


class IllConditionedFrame(DegeneracyError):
    pass


class HNotInvertible(DegeneracyError):
    pass
