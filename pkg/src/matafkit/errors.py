"""Exception hierarchy.

Three families map onto CLI exit codes: configuration problems (2), bad input
data (3) and numeric failures (4).
"""


class MatafError(Exception):
    exit_code = 1


class ConfigError(MatafError):
    exit_code = 2


class DataError(MatafError):
    exit_code = 3


class NumericError(MatafError):
    exit_code = 4


# geometry
class InsufficientPairs(DataError):
    pass


class DegenerateConfiguration(NumericError):
    pass


class PointAtInfinity(NumericError):
    pass


class SingularMap(NumericError):
    pass


# tracks
class OutOfRange(DataError):
    pass


class TooFewKeyframes(DataError):
    pass


class GateNotCrossed(DataError):
    pass


# density
class GridMismatch(DataError):
    pass


class EmptyInput(DataError):
    pass


class BadPalette(ConfigError):
    pass


class UnknownGate(ConfigError):
    pass


# analytics
class TooFewSamples(DataError):
    pass


class NoOverlap(DataError):
    pass


class EmptyReference(DataError):
    pass


class EmptyRing(DataError):
    pass


# synth
class InvalidScenario(ConfigError):
    pass


class UnknownPreset(ConfigError):
    pass


class FormatVersionError(ConfigError):
    pass
