"""Late-interaction (MaxSim) scoring.

For every query token take the best-matching document token, then sum those
maxima over the query tokens. All scoring, single document or a block of many,
goes through :func:`maxsim_block` so a document's score never depends on
which block it was scored in.
"""
import numpy as np

from ..errors import DimMismatch, ZeroVector
from ..model import MultiVector, SimilarityKind, Vector, l2_normalize_rows

# doc tokens scored per block (bounds the size of the query x tokens matrix)
DEFAULT_BLOCK_TOKENS = 1 << 16


def prepare_query(query: MultiVector, sim: SimilarityKind) -> np.ndarray:
    q = np.asarray(query.tokens, dtype=np.float64)
    if sim == SimilarityKind.COSINE:
        q = l2_normalize_rows(q)
    return q


def maxsim_block(
    q: np.ndarray,
    doc_tokens: np.ndarray,
    offsets: np.ndarray,
    sim: SimilarityKind = SimilarityKind.DOT,
) -> np.ndarray:
    """Scores of consecutive documents stored in one token block.

    :param q: prepared (Tq x D) float64 query tokens
    :param doc_tokens: (sum of doc tokens x D) matrix
    :param offsets: start row of each document inside ``doc_tokens``
    """
    d = np.asarray(doc_tokens, dtype=np.float64)
    if sim == SimilarityKind.COSINE:
        d = l2_normalize_rows(d)
    sims = q @ d.T
    per_token_max = np.maximum.reduceat(sims, offsets, axis=1)
    # accumulate in query-token order; pairwise summation would make the
    # rounding depend on the block shape
    total = per_token_max[0].copy()
    for row in per_token_max[1:]:
        total += row
    return total


def maxsim_score(
    query: MultiVector,
    doc: MultiVector,
    sim: SimilarityKind = SimilarityKind.DOT,
) -> float:
    """Σ_i max_j sim(q_i, d_j)."""
    if query.dim != doc.dim:
        raise DimMismatch(
            f"query dim {query.dim} != doc dim {doc.dim} ({doc.id})"
        )
    q = prepare_query(query, sim)
    return float(maxsim_block(q, doc.tokens, np.array([0]), sim)[0])


def pooled_embedding(mv: MultiVector) -> Vector:
    """L2-normalised mean of the token vectors (bi-encoder representation)."""
    mean = np.asarray(mv.tokens, dtype=np.float64).mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm == 0:
        raise ZeroVector(f"{mv.id}: mean token vector is zero")
    return mean / norm
