"""Exception hierarchy shared by all modules."""


class EnfError(Exception):
    """Base class for package errors."""


class NotUnderdamped(EnfError, ValueError):
    pass


class NonPositiveParameter(EnfError, ValueError):
    pass


class InvalidScenario(EnfError, ValueError):
    pass


class Unstable(EnfError, RuntimeError):
    pass


class EmptyTrajectory(EnfError, ValueError):
    pass


class WindowMismatch(EnfError, ValueError):
    pass


class NoFeasibleStart(EnfError, ValueError):
    pass


class NoFittedNeighbor(EnfError, LookupError):
    pass


class ZeroDeviation(EnfError, ValueError):
    pass


class BracketError(EnfError, RuntimeError):
    pass


class MonotonicityError(EnfError, RuntimeError):
    pass


class KeyMismatch(EnfError, KeyError):
    pass


class NoComparableCase(EnfError, LookupError):
    pass


class EmptyNeighborSet(EnfError, ValueError):
    pass


class ConfigError(EnfError, ValueError):
    pass
