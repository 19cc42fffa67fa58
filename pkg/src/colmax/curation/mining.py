"""Positive-aware hard-negative mining.

A candidate is kept as a negative only when its teacher similarity is
strictly below a cutoff derived from the positive's similarity:

* ``perc``: cutoff = threshold * sim(positive)   (default, threshold 0.95)
* ``abs``:  cutoff = sim(positive) - margin

Candidates above the cutoff are treated as likely false negatives.
"""
import json
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Protocol, Sequence

import numpy as np
from strenum import StrEnum

from ..config import DEFAULT_MINING_THRESHOLD
from ..engine.search import maxsim_scores
from ..errors import (
    InvalidArgument,
    IoFailure,
    MissingPositiveScore,
    NonPositiveK,
)
from ..file_management import ensure_parent_dir
from ..logger import LOGGER_NAME
from ..model import MultiVector, SimilarityKind
from ..store import IndexHandle
from ..utils import parallel_map

logger = logging.getLogger(LOGGER_NAME)


class MarginType(StrEnum):
    PERC = "perc"
    ABS = "abs"


@dataclass
class TrainingTriplet:
    query_id: str
    positive_id: str
    negative_ids: List[str]
    teacher_scores: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.positive_id in self.negative_ids:
            raise InvalidArgument(
                f"{self.query_id}: positive {self.positive_id} "
                "listed as a negative"
            )
        missing = [
            d
            for d in [self.positive_id, *self.negative_ids]
            if d not in self.teacher_scores
        ]
        if missing:
            raise MissingPositiveScore(
                f"{self.query_id}: no teacher score for {missing}"
            )

    def to_dict(self) -> Dict:
        return dict(
            query_id=self.query_id,
            positive_id=self.positive_id,
            negative_ids=list(self.negative_ids),
            scores=dict(self.teacher_scores),
        )

    @classmethod
    def from_dict(cls, d: Dict) -> "TrainingTriplet":
        return cls(
            query_id=d["query_id"],
            positive_id=d["positive_id"],
            negative_ids=list(d["negative_ids"]),
            teacher_scores={k: float(v) for k, v in d["scores"].items()},
        )


def mining_cutoff(
    positive_score: float,
    threshold: float = DEFAULT_MINING_THRESHOLD,
    margin_type: MarginType = MarginType.PERC,
) -> float:
    margin_type = MarginType(margin_type)
    if margin_type == MarginType.PERC:
        if not 0 < threshold <= 1:
            raise InvalidArgument(
                f"threshold must be in (0, 1] (got {threshold})"
            )
        return threshold * positive_score
    if threshold < 0:
        raise InvalidArgument(f"abs margin must be >= 0 (got {threshold})")
    return positive_score - threshold


def mine_hard_negatives(
    query_id: str,
    positive_id: str,
    candidates: Mapping[str, float],
    k: int,
    threshold: float = DEFAULT_MINING_THRESHOLD,
    margin_type: MarginType = MarginType.PERC,
) -> TrainingTriplet:
    """The ``k`` most similar candidates that stay strictly below the cutoff.

    Negatives are ordered by descending similarity, ties by ascending id.
    """
    if k < 1:
        raise NonPositiveK(f"k must be >= 1 (got {k})")
    if positive_id not in candidates:
        raise MissingPositiveScore(
            f"{query_id}: positive {positive_id} has no teacher score"
        )
    for doc_id, score in candidates.items():
        if not np.isfinite(score):
            raise InvalidArgument(f"non-finite teacher score for {doc_id}")
    cutoff = mining_cutoff(candidates[positive_id], threshold, margin_type)
    pool = sorted(
        (
            (-float(s), d)
            for d, s in candidates.items()
            if d != positive_id and s < cutoff
        )
    )
    negatives = [d for _, d in pool[:k]]
    logger.debug(
        f"{query_id}: cutoff {cutoff:.4f}, {len(pool)} eligible, "
        f"kept {len(negatives)}"
    )
    return TrainingTriplet(
        query_id=query_id,
        positive_id=positive_id,
        negative_ids=negatives,
        teacher_scores={
            d: float(candidates[d]) for d in [positive_id, *negatives]
        },
    )


class QueryTransformer(Protocol):
    """Hook producing the query variants to mine for (e.g. translations).

    Variants must keep the embedding dim of the original query.
    """

    def transform(self, query: MultiVector) -> List[MultiVector]:
        ...


class IdentityQueryTransformer:
    def transform(self, query: MultiVector) -> List[MultiVector]:
        return [query]


def mine_from_index(
    query: MultiVector,
    positive_id: str,
    index: IndexHandle,
    k: int,
    threshold: float = DEFAULT_MINING_THRESHOLD,
    margin_type: MarginType = MarginType.PERC,
    sim: SimilarityKind = SimilarityKind.DOT,
) -> TrainingTriplet:
    """Mine with MaxSim over ``index`` as the teacher scorer."""
    scores = maxsim_scores(query, index, SimilarityKind.parse(sim))
    candidates = dict(zip(index.doc_ids, scores.tolist()))
    return mine_hard_negatives(
        query.id, positive_id, candidates, k, threshold, margin_type
    )


def mine_many(
    queries: Sequence[MultiVector],
    positives: Mapping[str, str],
    index: IndexHandle,
    k: int,
    threshold: float = DEFAULT_MINING_THRESHOLD,
    margin_type: MarginType = MarginType.PERC,
    transformer: Optional[QueryTransformer] = None,
    workers: int = 1,
) -> List[TrainingTriplet]:
    """One triplet per (transformed) query; ``positives`` maps the original
    query id to its positive doc id."""
    transformer = transformer or IdentityQueryTransformer()
    jobs = []
    for query in queries:
        if query.id not in positives:
            raise MissingPositiveScore(f"no positive for query {query.id}")
        for variant in transformer.transform(query):
            jobs.append((variant, positives[query.id]))
    logger.info(f"Mining {k} negatives for {len(jobs)} queries")
    return parallel_map(
        lambda job: mine_from_index(
            job[0], job[1], index, k, threshold, margin_type
        ),
        jobs,
        workers,
        desc="Mining",
    )


def write_triplets(path: str, triplets: Sequence[TrainingTriplet]) -> str:
    ensure_parent_dir(path)
    try:
        with open(path, "w") as f:
            for t in triplets:
                f.write(json.dumps(t.to_dict()) + "\n")
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e
    logger.info(f"Saved {len(triplets)} triplets to {path}")
    return path


def read_triplets(path: str) -> List[TrainingTriplet]:
    try:
        with open(path) as f:
            lines = [line for line in f if line.strip()]
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e
    try:
        return [TrainingTriplet.from_dict(json.loads(line)) for line in lines]
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise IoFailure(f"malformed triplet file {path}: {e}") from e
