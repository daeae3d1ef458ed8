"""Exception hierarchy shared by every module."""


class FlatWeightsError(ValueError):
    """Base class for all input and domain errors raised by the toolkit."""


class SizeMismatch(FlatWeightsError):
    pass


class NonPositiveValue(FlatWeightsError):
    pass


class NonFinite(FlatWeightsError):
    pass


class CubeOutOfBounds(FlatWeightsError):
    pass


class ExponentOverflow(FlatWeightsError, ArithmeticError):
    pass


class NoAdmissibleCube(FlatWeightsError):
    pass


class InvalidThreshold(FlatWeightsError):
    pass


class EpsilonOutOfRange(FlatWeightsError):
    pass


class EmptySubset(FlatWeightsError):
    pass


class DegenerateWeight(FlatWeightsError):
    pass


class InvalidConstant(FlatWeightsError):
    pass


class AlphaOutOfRange(FlatWeightsError):
    pass


class ExponentBlowup(FlatWeightsError):
    pass


class DegenerateFunction(FlatWeightsError):
    pass


class DivisionDegenerate(FlatWeightsError):
    pass


class InvalidParameter(FlatWeightsError):
    pass
