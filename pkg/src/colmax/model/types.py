"""Shared domain types: token vectors, multi-vectors, precisions."""
from dataclasses import dataclass
from math import ceil
from typing import Sequence, Union

import numpy as np
from strenum import StrEnum

from ..errors import (
    DimMismatch,
    EmptyTokens,
    InvalidArgument,
    NonFiniteValue,
    ZeroVector,
)

# a single token embedding; always a finite 1-D float array
Vector = np.ndarray

ArrayLike = Union[np.ndarray, Sequence[Sequence[float]]]


class Precision(StrEnum):
    FP32 = "fp32"
    FP16 = "fp16"
    INT8 = "int8"
    BINARY = "binary"

    @classmethod
    def parse(cls, value: Union[str, "Precision"]) -> "Precision":
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidArgument(
                f"unknown precision '{value}' "
                f"(expected one of {', '.join(p.value for p in cls)})"
            )

    @property
    def code(self) -> int:
        """On-disk precision code."""
        return _PRECISION_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "Precision":
        for precision, c in _PRECISION_CODES.items():
            if c == code:
                return precision
        raise InvalidArgument(f"unknown precision code {code}")

    @property
    def bytes_per_element(self) -> float:
        return _BYTES_PER_ELEMENT[self]

    def bytes_per_token(self, dim: int) -> int:
        """Payload bytes per token (INT8 includes its fp32 scale)."""
        if self == Precision.FP32:
            return 4 * dim
        if self == Precision.FP16:
            return 2 * dim
        if self == Precision.INT8:
            return dim + 4
        return ceil(dim / 8)

    def payload_bytes(self, n_tokens: int, dim: int) -> int:
        return n_tokens * self.bytes_per_token(dim)


_PRECISION_CODES = {
    Precision.FP32: 0,
    Precision.FP16: 1,
    Precision.INT8: 2,
    Precision.BINARY: 3,
}
_BYTES_PER_ELEMENT = {
    Precision.FP32: 4.0,
    Precision.FP16: 2.0,
    Precision.INT8: 1.0,
    Precision.BINARY: 0.125,
}


class SimilarityKind(StrEnum):
    DOT = "dot"
    COSINE = "cosine"

    @classmethod
    def parse(cls, value: Union[str, "SimilarityKind"]) -> "SimilarityKind":
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidArgument(f"unknown similarity '{value}'")


@dataclass(frozen=True)
class MultiVector:
    """A page or query as an ordered (tokens x dim) matrix of embeddings.

    Tokens keep float32/float64 precision as given (other dtypes become
    float64) and the matrix is made read-only. Construction validates, so an
    existing MultiVector always satisfies :func:`validate_multivector`.
    """

    id: str
    tokens: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tokens", _as_token_matrix(self.tokens))
        validate_multivector(self)

    @property
    def dim(self) -> int:
        return self.tokens.shape[1]

    @property
    def n_tokens(self) -> int:
        return self.tokens.shape[0]

    def __len__(self) -> int:
        return self.n_tokens

    def __repr__(self):
        return (
            f"MultiVector({self.id!r}, tokens={self.n_tokens}, dim={self.dim})"
        )

    def with_tokens(self, tokens: ArrayLike) -> "MultiVector":
        return MultiVector(self.id, tokens)

    def normalized(self) -> "MultiVector":
        return MultiVector(self.id, l2_normalize_rows(self.tokens))


def validate_multivector(mv: MultiVector) -> bool:
    """True when ``mv`` is well formed, otherwise raise the matching error."""
    if not isinstance(mv.id, str) or not mv.id:
        raise InvalidArgument("multi-vector id must be a non-empty string")
    tokens = mv.tokens
    if tokens.ndim != 2 or tokens.shape[0] == 0:
        raise EmptyTokens(f"{mv.id}: multi-vector has no tokens")
    if tokens.shape[1] == 0:
        raise DimMismatch(f"{mv.id}: zero-dimensional tokens", index=0)
    finite = np.isfinite(tokens)
    if not finite.all():
        index, coordinate = np.argwhere(~finite)[0]
        raise NonFiniteValue(int(index), int(coordinate))
    return True


def validate_vector(values) -> Vector:
    vector = np.asarray(values)
    if vector.ndim != 1 or vector.shape[0] == 0:
        raise InvalidArgument("a vector must be 1-D with dim >= 1")
    if not np.issubdtype(vector.dtype, np.floating):
        vector = vector.astype(np.float64)
    bad = np.flatnonzero(~np.isfinite(vector))
    if len(bad):
        raise NonFiniteValue(0, int(bad[0]))
    return vector


def l2_normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """Unit-normalise each row; a zero row raises ZeroVector."""
    norms = np.linalg.norm(matrix, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ZeroVector("cannot normalise a zero vector")
    return matrix / norms


def _as_token_matrix(tokens: ArrayLike) -> np.ndarray:
    if isinstance(tokens, np.ndarray) and tokens.ndim == 2:
        matrix = tokens
    else:
        rows = [np.asarray(t) for t in tokens]
        if not rows:
            raise EmptyTokens("multi-vector has no tokens")
        dim = rows[0].shape
        for i, row in enumerate(rows):
            if row.ndim != 1:
                raise DimMismatch(f"token {i} is not a 1-D vector", index=i)
            if row.shape != dim:
                raise DimMismatch(
                    f"token {i} has dim {row.shape[0]}, expected {dim[0]}",
                    index=i,
                )
        matrix = np.stack(rows)
    if matrix.dtype not in (np.float32, np.float64):
        matrix = matrix.astype(np.float64)
    matrix = np.array(matrix, copy=True) if matrix.flags.writeable else matrix
    matrix.flags.writeable = False
    return matrix
