"""Linear dimensionality reduction of token embeddings.

``fit_projection`` fits the leading principal directions of a token sample;
``truncate_dims`` is the prefix-slicing alternative for embeddings trained
to be truncatable.
"""
import hashlib
import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from ..errors import (
    DimMismatch,
    InsufficientSample,
    InsufficientTargetReduction,
    IoFailure,
    RankDeficient,
)
from ..file_management import ensure_parent_dir
from ..logger import LOGGER_NAME
from ..model import MultiVector, l2_normalize_rows

logger = logging.getLogger(LOGGER_NAME)


@dataclass(frozen=True)
class ProjectionMatrix:
    """Orthonormal-row projection, applied as R·(x − mean)."""

    entries: np.ndarray
    mean: np.ndarray
    fitted_on: str

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    def project(self, vectors: np.ndarray) -> np.ndarray:
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.shape[-1] != self.cols:
            raise DimMismatch(
                f"vectors have dim {vectors.shape[-1]}, "
                f"projection expects {self.cols}"
            )
        return (vectors - self.mean) @ self.entries.T

    def save(self, fpath: str) -> str:
        ensure_parent_dir(fpath)
        try:
            np.savez(
                fpath,
                entries=self.entries,
                mean=self.mean,
                fitted_on=np.array(self.fitted_on),
            )
        except OSError as e:
            raise IoFailure(f"cannot write {fpath}: {e}") from e
        return fpath

    @classmethod
    def load(cls, fpath: str) -> "ProjectionMatrix":
        try:
            with np.load(fpath) as data:
                return cls(
                    entries=data["entries"],
                    mean=data["mean"],
                    fitted_on=str(data["fitted_on"]),
                )
        except (OSError, KeyError, ValueError) as e:
            raise IoFailure(f"cannot read {fpath}: {e}") from e


def fit_projection(
    sample: Union[np.ndarray, Sequence[np.ndarray]], target_dim: int
) -> ProjectionMatrix:
    """Top ``target_dim`` principal components of the mean-centred sample.

    Each row's largest-magnitude entry is made positive so the result is
    deterministic. Fewer than ``target_dim`` non-zero singular values is an
    error rather than a padded matrix.
    """
    X = np.asarray(sample, dtype=np.float64)
    if X.ndim != 2:
        raise InsufficientSample("sample must be a (n, dim) matrix")
    n, source_dim = X.shape
    if target_dim < 1 or target_dim >= source_dim:
        raise InsufficientTargetReduction(
            f"target dim {target_dim} must be in [1, {source_dim})"
        )
    if n <= target_dim:
        raise InsufficientSample(
            f"need more than {target_dim} sample vectors, got {n}"
        )

    mean = X.mean(axis=0)
    _, singular_values, vt = np.linalg.svd(X - mean, full_matrices=False)
    tol = (
        singular_values.max(initial=0.0)
        * max(n, source_dim)
        * np.finfo(np.float64).eps
    )
    rank = int(np.sum(singular_values > tol))
    if rank < target_dim:
        raise RankDeficient(
            f"sample has rank {rank} < target dim {target_dim}"
        )

    entries = vt[:target_dim].copy()
    pivots = np.argmax(np.abs(entries), axis=1)
    signs = np.sign(entries[np.arange(target_dim), pivots])
    entries *= signs[:, None]
    explained = (singular_values[:target_dim] ** 2).sum() / (
        singular_values**2
    ).sum()
    logger.info(
        f"Fitted {source_dim}->{target_dim} projection on {n} vectors "
        f"({100 * explained:.1f}% variance kept)"
    )
    return ProjectionMatrix(
        entries=entries, mean=mean, fitted_on=_fingerprint(X)
    )


def apply_projection(
    mv: MultiVector, P: ProjectionMatrix, renormalize: bool = False
) -> MultiVector:
    if mv.dim != P.cols:
        raise DimMismatch(
            f"{mv.id} has dim {mv.dim}, projection expects {P.cols}"
        )
    tokens = P.project(mv.tokens)
    if renormalize:
        tokens = l2_normalize_rows(tokens)
    return MultiVector(mv.id, tokens)


def truncate_dims(
    mv: MultiVector, target_dim: int, renormalize: bool = True
) -> MultiVector:
    """Keep the first ``target_dim`` coordinates of every token."""
    if not 1 <= target_dim < mv.dim:
        raise DimMismatch(
            f"cannot truncate dim {mv.dim} to {target_dim}"
        )
    tokens = np.asarray(mv.tokens, dtype=np.float64)[:, :target_dim]
    if renormalize:
        tokens = l2_normalize_rows(tokens)
    return MultiVector(mv.id, tokens)


def _fingerprint(X: np.ndarray) -> str:
    digest = hashlib.sha1(np.ascontiguousarray(X).tobytes())
    return f"{X.shape[0]}x{X.shape[1]}:{digest.hexdigest()[:16]}"
