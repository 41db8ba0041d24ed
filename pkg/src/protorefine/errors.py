"""Exception types raised across the package."""


class ProtoRefineError(Exception):
    pass


class ZeroVector(ProtoRefineError, ValueError):
    pass


class NonPositiveTemperature(ProtoRefineError, ValueError):
    pass


class DimensionMismatch(ProtoRefineError, ValueError):
    pass


class LengthMismatch(ProtoRefineError, ValueError):
    pass


class TooFewSeeds(ProtoRefineError, ValueError):
    pass


class HeterogeneousHeads(ProtoRefineError, ValueError):
    pass


class IndexOutOfRange(ProtoRefineError, IndexError):
    pass


class UninitializedPrototypes(ProtoRefineError, RuntimeError):
    pass


class InvalidConfig(ProtoRefineError, ValueError):
    pass
