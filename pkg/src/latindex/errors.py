"""Exception hierarchy shared by all latindex modules."""


class LatIndexError(Exception):
    """Base class for every error raised by latindex."""


class UnsupportedDimension(LatIndexError):
    pass


class OddDimension(LatIndexError):
    pass


class InvalidDescriptor(LatIndexError):
    pass


class SpacingTooCoarse(LatIndexError):
    pass


class RoughField(LatIndexError):
    pass


class NonUnitaryGauge(LatIndexError):
    pass


class DimensionMismatch(LatIndexError):
    pass


class UnsupportedBackground(LatIndexError):
    pass


class RoughBackground(LatIndexError):
    pass


class AmbiguousKernel(LatIndexError):
    pass


class NearZeroMode(LatIndexError):
    pass


class EndpointKernel(LatIndexError):
    pass


class MethodMismatch(LatIndexError):
    pass


class SignUndefined(LatIndexError):
    pass


class NonIntegerTrace(LatIndexError):
    pass


class QuadratureTooCoarse(LatIndexError):
    pass


class GapClosed(LatIndexError):
    def __init__(self, message, m=None, t=None, gap=None):
        super().__init__(message)
        self.m = m
        self.t = t
        self.gap = gap


class ConfigError(LatIndexError):
    pass
