"""Exception types raised across the package."""


class LipextError(ValueError):
    """Base class for every input or contract error raised by lipext."""


class MalformedElementError(LipextError):
    """Element data does not match its space descriptor."""


class MetricError(LipextError):
    """Distance matrix violates a metric axiom."""


class DimensionMismatchError(LipextError):
    pass


class WrongTargetError(LipextError):
    """An operation was called with a target space it does not support."""


class UnderdeterminedQuadratureError(LipextError):
    pass


class InvalidProjectionError(LipextError):
    pass


class OutOfRangeError(LipextError):
    pass
