"""Exception types shared across the package."""


class MarginetError(Exception):
    """Base class for all errors raised by this package."""


class CycleDetected(MarginetError):
    pass


class UnassignedParent(MarginetError):
    pass


class InvalidConfig(MarginetError):
    pass


class NetworkFormatError(MarginetError):
    """A network file failed validation; the message names the offending entry."""


class UnknownNode(MarginetError):
    pass


class TooLarge(MarginetError):
    """Network exceeds the exact-inference node limit."""


class ImpossibleEvidence(MarginetError):
    """The conditioning event has probability (numerically) zero."""


class InvalidArchitecture(MarginetError):
    pass


class ShapeMismatch(MarginetError):
    pass


class NonFiniteGradient(MarginetError):
    pass


class CorruptFile(MarginetError):
    pass


class VersionMismatch(MarginetError):
    pass


class ModelMissing(MarginetError):
    pass


class AllZeroWeights(MarginetError):
    """Every sample landed on a zero-probability path."""


class LengthMismatch(MarginetError):
    pass


class DegenerateInput(MarginetError):
    pass


class EmptyInput(MarginetError):
    pass
