"""Retrieval pipelines compared by the benchmark: exhaustive MaxSim, the
pooled single-vector baseline, and pooled retrieval with MaxSim reranking."""
import logging
from typing import Sequence

from strenum import StrEnum

from ..data import RunResult
from ..engine import pooled_search, retrieve_then_rerank, search
from ..engine.search import DEFAULT_FIRST_STAGE_K
from ..logger import LOGGER_NAME
from ..model import MultiVector, SimilarityKind
from ..store import IndexHandle
from ..utils import parallel_map

logger = logging.getLogger(LOGGER_NAME)


class Pipeline(StrEnum):
    MAXSIM = "maxsim"
    POOLED = "pooled"
    RERANK = "rerank"


def run_pipeline(
    queries: Sequence[MultiVector],
    index: IndexHandle,
    pipeline: Pipeline = Pipeline.MAXSIM,
    k: int = 10,
    first_stage_k: int = DEFAULT_FIRST_STAGE_K,
    sim: SimilarityKind = SimilarityKind.DOT,
    workers: int = 1,
) -> RunResult:
    pipeline = Pipeline(pipeline)
    if pipeline == Pipeline.MAXSIM:
        fn = lambda q: search(q, index, k, sim)  # noqa: E731
    elif pipeline == Pipeline.POOLED:
        index.pooled_matrix()  # build the cache before fanning out
        fn = lambda q: pooled_search(q, index, k)  # noqa: E731
    else:
        index.pooled_matrix()
        fn = lambda q: retrieve_then_rerank(  # noqa: E731
            q, index, first_stage_k, k, sim
        )
    logger.info(f"Running {pipeline.value} over {len(queries)} queries")
    results = parallel_map(fn, list(queries), workers, desc=pipeline.value)
    return RunResult.from_search_results(results)
