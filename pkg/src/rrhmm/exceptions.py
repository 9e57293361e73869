"""Exception hierarchy for the rrhmm package."""


class RRHMMError(Exception):
    """Base class for all errors raised by rrhmm."""


class UsageError(RRHMMError, ValueError):
    """A caller asked for something the inputs cannot support (CLI exit code 2)."""


class NotStochastic(RRHMMError, ValueError):
    pass


class RankMismatch(RRHMMError, ValueError):
    pass


class NoConvergence(RRHMMError, RuntimeError):
    pass


class NonStationaryPrior(RRHMMError, ValueError):
    pass


class SymbolOutOfRange(RRHMMError, ValueError):
    pass


class ZeroProbabilitySequence(RRHMMError, ValueError):
    pass


class InconsistentFactorization(RRHMMError, RuntimeError):
    """The full-state and low-rank joint probability routes disagree."""


class EmptyDataset(RRHMMError, ValueError):
    pass


class SequenceTooShort(RRHMMError, ValueError):
    pass


class EventSpaceTooLarge(UsageError):
    pass


class SequenceSpaceTooLarge(UsageError):
    pass


class RankTooLarge(UsageError):
    pass


class DegenerateMoments(RRHMMError, ValueError):
    """The k-th singular value of the bigram matrix is numerically zero."""

    def __init__(self, message, singular_values=None):
        super().__init__(message)
        self.singular_values = singular_values


class NotInvertible(RRHMMError, ValueError):
    pass


class DegenerateDenominator(RRHMMError, ArithmeticError):
    pass


class DimensionMismatch(RRHMMError, ValueError):
    pass


class NotNormalized(RRHMMError, ValueError):
    pass
