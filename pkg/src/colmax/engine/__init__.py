from .maxsim import maxsim_score, pooled_embedding
from .search import (
    ScoredDoc,
    SearchResult,
    maxsim_scores,
    pooled_search,
    retrieve_then_rerank,
    search,
    search_many,
)
