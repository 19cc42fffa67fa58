"""NDCG@k with exponential gain (2^rel - 1) and log2(rank + 1) discount."""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List

import numpy as np

from ..data import Qrels, RunResult
from ..errors import InvalidArgument, NoJudgedQueries
from ..logger import LOGGER_NAME
from ..utils import round_half_up

logger = logging.getLogger(LOGGER_NAME)


@dataclass
class NdcgReport:
    k: int
    per_query: Dict[str, float] = field(default_factory=dict)

    @property
    def mean(self) -> float:
        """Mean over judged queries, folded in query-id order."""
        total = 0.0
        for q in sorted(self.per_query):
            total += self.per_query[q]
        return total / len(self.per_query)

    @property
    def n_queries(self) -> int:
        return len(self.per_query)

    def __str__(self):
        return f"NDCG@{self.k} = {self.mean:.4f} ({self.n_queries} queries)"

    def to_dict(self) -> Dict:
        return dict(
            k=self.k,
            mean=self.mean,
            n_queries=self.n_queries,
            per_query=dict(sorted(self.per_query.items())),
        )


def _discounts(n: int) -> np.ndarray:
    return 1.0 / np.log2(np.arange(2, n + 2))


def dcg(grades: Iterable[int]) -> float:
    gains = np.power(2.0, np.asarray(list(grades), dtype=np.float64)) - 1.0
    return float(np.sum(gains * _discounts(len(gains))))


def query_ndcg(ranked_doc_ids: List[str], judged: Dict[str, int], k: int):
    ideal = sorted((r for r in judged.values() if r > 0), reverse=True)[:k]
    idcg = dcg(ideal)
    if idcg == 0:
        return None
    return dcg([judged.get(d, 0) for d in ranked_doc_ids[:k]]) / idcg


def ndcg_at_k(run: RunResult, qrels: Qrels, k: int = 10) -> NdcgReport:
    """Per-query NDCG@k over every query with at least one relevant doc.

    A judged query missing from the run scores 0.
    """
    if k < 1:
        raise InvalidArgument(f"k must be >= 1 (got {k})")
    report = NdcgReport(k=k)
    for query_id in qrels:
        value = query_ndcg(run.doc_ids(query_id), qrels[query_id], k)
        if value is not None:
            report.per_query[query_id] = value
    if not report.per_query:
        raise NoJudgedQueries("no query has a relevant judgment")
    logger.debug(str(report))
    return report


def ndcg_pct(ndcg: float, baseline_ndcg: float) -> float:
    """``100 * ndcg / baseline`` rounded half up to two decimals."""
    if baseline_ndcg <= 0:
        raise InvalidArgument("baseline NDCG must be positive")
    return round_half_up(100 * ndcg / baseline_ndcg, 2)


def top1_agreement(run_a: RunResult, run_b: RunResult) -> float:
    """Fraction of shared queries whose top-ranked doc is the same."""
    shared = [q for q in run_a if q in run_b]
    if not shared:
        raise InvalidArgument("runs share no queries")
    same = sum(run_a.top1(q) == run_b.top1(q) for q in shared)
    return same / len(shared)
