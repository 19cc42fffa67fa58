"""Domain errors.

Every error carries a stable ``code`` (its class name) which the command line
prints as ``error: <code>: <message>``.
"""
from typing import Optional


class ColmaxError(ValueError):
    @property
    def code(self) -> str:
        return type(self).__name__


class InvalidArgument(ColmaxError):
    pass


class EmptyTokens(ColmaxError):
    pass


class DimMismatch(ColmaxError):
    def __init__(self, message: str = "", index: Optional[int] = None):
        super().__init__(message or f"dimension mismatch at token {index}")
        self.index = index


class NonFiniteValue(ColmaxError):
    def __init__(self, index: int, coordinate: int):
        super().__init__(
            f"non-finite value at token {index}, coordinate {coordinate}"
        )
        self.index = index
        self.coordinate = coordinate


class ZeroVector(ColmaxError):
    pass


class EmptyIndex(ColmaxError):
    pass


class DuplicateId(ColmaxError):
    pass


class BinaryDimNotByteAligned(ColmaxError):
    pass


class IoFailure(ColmaxError):
    pass


class InvalidIndexFormat(ColmaxError):
    pass


class InsufficientSample(ColmaxError):
    pass


class InsufficientTargetReduction(ColmaxError):
    pass


class RankDeficient(ColmaxError):
    pass


class MissingPositiveScore(ColmaxError):
    pass


class NonPositiveK(ColmaxError):
    pass


class KTooLarge(ColmaxError):
    pass


class DegenerateData(ColmaxError):
    pass


class ShapeMismatch(ColmaxError):
    def __init__(self, name: str, message: str = ""):
        super().__init__(message or f"shape mismatch for parameter '{name}'")
        self.name = name


class NameSetMismatch(ColmaxError):
    pass


class DuplicateJudgment(ColmaxError):
    pass


class NoJudgedQueries(ColmaxError):
    pass
