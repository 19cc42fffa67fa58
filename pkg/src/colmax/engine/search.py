"""Exhaustive top-k retrieval over a loaded index."""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..errors import DimMismatch, EmptyIndex, InvalidArgument
from ..logger import LOGGER_NAME
from ..model import MultiVector, SimilarityKind
from ..store import IndexHandle
from ..utils import parallel_map
from .maxsim import (
    DEFAULT_BLOCK_TOKENS,
    maxsim_block,
    pooled_embedding,
    prepare_query,
)

logger = logging.getLogger(LOGGER_NAME)

DEFAULT_FIRST_STAGE_K = 50


@dataclass(frozen=True)
class ScoredDoc:
    doc_id: str
    score: float

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise InvalidArgument(f"non-finite score for {self.doc_id}")


@dataclass
class SearchResult:
    query_id: str
    k: int
    hits: List[ScoredDoc] = field(default_factory=list)

    def __len__(self):
        return len(self.hits)

    @property
    def doc_ids(self) -> List[str]:
        return [h.doc_id for h in self.hits]

    @property
    def top1(self) -> Optional[str]:
        return self.hits[0].doc_id if self.hits else None

    def to_dict(self) -> Dict:
        return dict(
            query_id=self.query_id,
            k=self.k,
            hits=[dict(doc_id=h.doc_id, score=h.score) for h in self.hits],
        )


def _check_query(query: MultiVector, index: IndexHandle, k: int):
    if k < 1:
        raise InvalidArgument(f"k must be >= 1 (got {k})")
    if index.doc_count == 0:
        raise EmptyIndex("index has no documents")
    if query.dim != index.dim:
        raise DimMismatch(
            f"query {query.id} has dim {query.dim}, index dim is {index.dim}"
        )


def _top_k(
    query_id: str,
    index: IndexHandle,
    scores: np.ndarray,
    k: int,
    candidates: Optional[np.ndarray] = None,
) -> SearchResult:
    """Highest ``scores`` first, ties by ascending doc id."""
    if candidates is None:
        candidates = np.arange(len(scores))
    order = np.lexsort((index.id_rank[candidates], -scores))[:k]
    hits = [
        ScoredDoc(index.doc_ids[candidates[i]], float(scores[i]))
        for i in order
    ]
    return SearchResult(query_id=query_id, k=k, hits=hits)


def maxsim_scores(
    query: MultiVector,
    index: IndexHandle,
    sim: SimilarityKind = SimilarityKind.DOT,
    workers: int = 1,
    block_tokens: int = DEFAULT_BLOCK_TOKENS,
) -> np.ndarray:
    """MaxSim score of ``query`` against every document, in index order."""
    q = prepare_query(query, sim)

    def _score_block(block):
        tokens, offsets = index.block_tokens(*block)
        return maxsim_block(q, tokens, offsets, sim)

    blocks = index.blocks(block_tokens)
    return np.concatenate(parallel_map(_score_block, blocks, workers))


def search(
    query: MultiVector,
    index: IndexHandle,
    k: int,
    sim: SimilarityKind = SimilarityKind.DOT,
    workers: int = 1,
    block_tokens: int = DEFAULT_BLOCK_TOKENS,
) -> SearchResult:
    """Top-``k`` documents by MaxSim over the whole corpus."""
    sim = SimilarityKind.parse(sim)
    _check_query(query, index, k)
    scores = maxsim_scores(query, index, sim, workers, block_tokens)
    return _top_k(query.id, index, scores, k)


def search_many(
    queries: Sequence[MultiVector],
    index: IndexHandle,
    k: int,
    sim: SimilarityKind = SimilarityKind.DOT,
    workers: int = 1,
) -> List[SearchResult]:
    """One :func:`search` per query, in input order."""
    logger.info(f"Searching {len(queries)} queries over {index}")
    return parallel_map(
        lambda q: search(q, index, k, sim),
        list(queries),
        workers,
        desc="Searching",
    )


def pooled_scores(query: MultiVector, index: IndexHandle) -> np.ndarray:
    return index.pooled_matrix() @ pooled_embedding(query)


def pooled_search(
    query: MultiVector, index: IndexHandle, k: int
) -> SearchResult:
    """Single-vector baseline: DOT of pooled query against pooled docs."""
    _check_query(query, index, k)
    return _top_k(query.id, index, pooled_scores(query, index), k)


def retrieve_then_rerank(
    query: MultiVector,
    index: IndexHandle,
    first_stage_k: int = DEFAULT_FIRST_STAGE_K,
    final_k: int = 10,
    sim: SimilarityKind = SimilarityKind.DOT,
) -> SearchResult:
    """Pooled first stage, MaxSim re-scoring of its top ``first_stage_k``."""
    _check_query(query, index, final_k)
    if final_k > first_stage_k:
        raise InvalidArgument(
            f"final_k ({final_k}) must not exceed "
            f"first_stage_k ({first_stage_k})"
        )
    sim = SimilarityKind.parse(sim)
    pooled = pooled_scores(query, index)
    stage1 = _top_k(query.id, index, pooled, first_stage_k)
    candidates = np.array(
        [index.position(h.doc_id) for h in stage1.hits], dtype=np.int64
    )
    q = prepare_query(query, sim)
    scores = np.array(
        [
            maxsim_block(q, *index.block_tokens(i, i + 1), sim)[0]
            for i in candidates
        ]
    )
    return _top_k(query.id, index, scores, final_k, candidates)
