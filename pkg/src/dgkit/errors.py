"""Exception hierarchy shared by every dgkit module."""


class DgError(Exception):
    """Base class for all domain errors raised by dgkit."""


class ParseError(DgError):
    pass


class InvariantError(DgError):
    pass


class DimensionMismatch(DgError):
    pass


class IntervalEdgePresent(DgError):
    pass


class ConvergenceError(DgError):
    pass


class NotPsd(DgError):
    pass


class RankExceedsK(DgError):
    pass


class TooLarge(DgError):
    pass


class UnsupportedDimension(DgError):
    pass


class DegenerateCenters(DgError):
    pass


class DegenerateHyperplane(DgError):
    pass


class NotDiscretizable(DgError):
    pass


class InfeasibleInitialClique(DgError):
    pass


class NotDmdgp(DgError):
    pass


class InvalidSeedSolution(DgError):
    pass


class BadCardinality(DgError):
    pass


class IncompleteAssignment(DgError):
    pass


class TooShort(DgError):
    pass


class NotAWitness(DgError):
    pass


class InvalidRealization(DgError):
    pass


class MetricViolation(DgError):
    pass


class BadEpsilon(DgError):
    pass
