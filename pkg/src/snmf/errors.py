"""Exception hierarchy.

Every error carries a short ``category`` string that the command-line front
end prints as a single machine-parsable line.
"""


class SnmfError(Exception):
    category = "Error"


class ShapeMismatch(SnmfError, ValueError):
    category = "ShapeMismatch"


class DimensionMismatch(ShapeMismatch):
    category = "DimensionMismatch"


class ZeroDenominator(SnmfError, ZeroDivisionError):
    category = "ZeroDenominator"


class NonPositiveVariance(SnmfError, ValueError):
    category = "NonPositiveVariance"


class NonFiniteValue(SnmfError, ValueError):
    category = "NonFiniteValue"


class NonFiniteObjective(SnmfError, FloatingPointError):
    category = "NonFiniteObjective"


class RankTooLarge(SnmfError, ValueError):
    category = "RankTooLarge"


class ZeroMatrix(SnmfError, ValueError):
    category = "ZeroMatrix"


class NegativeEntry(SnmfError, ValueError):
    category = "NegativeEntry"


class LossDegenerate(SnmfError, ValueError):
    category = "LossDegenerate"


class SingleClass(SnmfError, ValueError):
    category = "SingleClass"


class EmptyClassAfterSplit(SnmfError, ValueError):
    category = "EmptyClassAfterSplit"


class TooFewSamples(SnmfError, ValueError):
    category = "TooFewSamples"


class InvalidConfig(SnmfError, ValueError):
    category = "InvalidConfig"


class GridParseError(InvalidConfig):
    category = "GridParseError"


class DatasetError(SnmfError, ValueError):
    category = "DatasetError"


class IoError(SnmfError, OSError):
    category = "IoError"
