"""Exception hierarchy.

Input problems derive from :class:`InvalidInput` (a ``ValueError``), numerical
breakdowns from :class:`NumericalFailure` (an ``ArithmeticError``). The CLI maps
the two families to distinct exit codes.
"""


class IRBError(Exception):
    """Base class for every error raised by irbkit."""


class InvalidInput(IRBError, ValueError):
    pass


class NumericalFailure(IRBError, ArithmeticError):
    pass


class NotHermitian(InvalidInput):
    pass


class TraceNotOne(InvalidInput):
    pass


class NotPSD(InvalidInput):
    pass


class NotSymmetric(InvalidInput):
    pass


class NotAntisymmetric(InvalidInput):
    pass


class DimMismatch(InvalidInput):
    pass


class NotSorted(InvalidInput):
    pass


class NotNormalized(InvalidInput):
    pass


class UmaxDegenerate(InvalidInput):
    """Only one population is nonzero, so the cohesion index is meaningless."""


class BadLambda(InvalidInput):
    pass


class IndexOutOfRange(InvalidInput):
    pass


class EmptySector(InvalidInput):
    pass


class NegativeRate(InvalidInput):
    pass


class NonMonotoneTimes(InvalidInput):
    pass


class NotDoublyStochastic(InvalidInput):
    pass


class BadEpsilon(InvalidInput):
    pass


class ZeroRate(InvalidInput):
    pass


class AlreadyClassical(InvalidInput):
    pass


class UndefinedPc(InvalidInput):
    pass


class BadDim(InvalidInput):
    pass


class NotSelective(IRBError):
    """Generator fails the commutation test; carries the certificate."""

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class DegenerateGap(IRBError):
    """Population gap too small for a per-vector frame-angle bound.

    ``report`` holds the block-level report that was still computed.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class StepTooCoarse(NumericalFailure):
    pass
