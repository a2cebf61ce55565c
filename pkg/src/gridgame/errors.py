"""Exception hierarchy shared by all gridgame modules."""


class GridGameError(Exception):
    """Base class for all errors raised by this package."""


class DuplicateBus(GridGameError):
    pass


class UnknownBus(GridGameError):
    pass


class UnknownTarget(GridGameError):
    pass


class DisconnectedNetwork(GridGameError):
    pass


class SingularMatrix(GridGameError):
    pass


class DimensionMismatch(GridGameError):
    pass


class SingularReducedSystem(GridGameError):
    pass


class NoConvergentActiveSet(GridGameError):
    pass


class MaxIterationsExceeded(GridGameError):
    pass


class InfeasibleInitial(GridGameError):
    pass


class ValidationError(GridGameError):
    """A scenario or domain object violates a named invariant."""


class ParseError(GridGameError):
    """A scenario file is not syntactically valid."""
