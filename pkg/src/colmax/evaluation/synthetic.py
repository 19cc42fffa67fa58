"""Synthetic multi-vector retrieval benchmark with planted positives.

Tokens live near a low-dimensional latent subspace (``dim // 4`` by default)
spanned by a random orthonormal basis, plus a little ambient noise. Every
document mixes a few topics (Gaussian clusters in the latent space), so many
documents share topics and ranking is nontrivial. A query is a perturbed
subset of its positive document's tokens.
"""
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np
from strenum import StrEnum

from ..data import Qrels, load_json, save_json
from ..errors import InvalidArgument
from ..file_management import (
    CORPUS_INDEX_FNAME,
    QRELS_FNAME,
    QUERIES_INDEX_FNAME,
    mkdir,
)
from ..logger import LOGGER_NAME
from ..model import MultiVector, Precision, l2_normalize_rows
from ..store import build_index, load_index
from ..utils import rng_for

logger = logging.getLogger(LOGGER_NAME)

BENCHMARK_CONFIG_FNAME = "benchmark.json"
POSITIVE_GRADE = 2
EXTRA_POSITIVE_GRADE = 1
# expected norm of the noise added to each query token
DEFAULT_QUERY_NOISE = 2.0


class TokenKind(StrEnum):
    GAUSSIAN = "gaussian"
    SIGN = "sign"  # every coordinate +-1/sqrt(dim)


@dataclass
class TokenCountDistribution:
    """Tokens per document: Poisson(mean) clipped to ``[minimum, maximum]``,
    or exactly ``round(mean)`` when ``kind == "fixed"``."""

    mean: float = 50.0
    minimum: int = 8
    maximum: Optional[int] = None
    kind: str = "poisson"

    def __post_init__(self):
        if self.kind not in ("poisson", "fixed"):
            raise InvalidArgument(f"unknown token count kind '{self.kind}'")
        if self.mean <= 0 or self.minimum < 1:
            raise InvalidArgument("token counts must be positive")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "fixed":
            return np.full(n, max(int(round(self.mean)), self.minimum))
        counts = rng.poisson(self.mean, size=n)
        return np.clip(counts, self.minimum, self.maximum)


@dataclass
class PlantedStructureConfig:
    n_topics: int = 32
    topics_per_doc: int = 2
    topic_spread: float = 1.0
    latent_dim: Optional[int] = None  # default dim // 4
    ambient_noise: float = 0.05
    query_tokens: int = 8
    query_noise: float = DEFAULT_QUERY_NOISE
    extra_positives: int = 0
    token_kind: TokenKind = TokenKind.GAUSSIAN

    def __post_init__(self):
        self.token_kind = TokenKind(self.token_kind)
        if self.n_topics < 1 or not 1 <= self.topics_per_doc <= self.n_topics:
            raise InvalidArgument(
                "need 1 <= topics_per_doc <= n_topics "
                f"(got {self.topics_per_doc}, {self.n_topics})"
            )
        if self.query_tokens < 1:
            raise InvalidArgument("queries need at least one token")
        if min(self.query_noise, self.ambient_noise, self.topic_spread) < 0:
            raise InvalidArgument("noise levels must be >= 0")
        if self.extra_positives < 0:
            raise InvalidArgument("extra_positives must be >= 0")


@dataclass
class SyntheticBenchmark:
    corpus: List[MultiVector]
    queries: List[MultiVector]
    qrels: Qrels
    seed: int
    config: Dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.corpus[0].dim

    def positives(self) -> Dict[str, str]:
        return {q.id: self.qrels.best_positive(q.id) for q in self.queries}

    def save(self, outdir: str) -> Dict[str, str]:
        """fp32 corpus and query indexes, TREC qrels and the config."""
        mkdir(outdir)
        paths = dict(
            corpus=os.path.join(outdir, CORPUS_INDEX_FNAME),
            queries=os.path.join(outdir, QUERIES_INDEX_FNAME),
            qrels=os.path.join(outdir, QRELS_FNAME),
            config=os.path.join(outdir, BENCHMARK_CONFIG_FNAME),
        )
        build_index(self.corpus, Precision.FP32, False, paths["corpus"])
        build_index(self.queries, Precision.FP32, False, paths["queries"])
        self.qrels.save(paths["qrels"])
        save_json(paths["config"], dict(seed=self.seed, **self.config))
        logger.info(f"Saved synthetic benchmark to {outdir}")
        return paths

    @classmethod
    def load(cls, outdir: str) -> "SyntheticBenchmark":
        corpus = list(load_index(os.path.join(outdir, CORPUS_INDEX_FNAME)))
        queries = list(load_index(os.path.join(outdir, QUERIES_INDEX_FNAME)))
        qrels = Qrels.load(os.path.join(outdir, QRELS_FNAME))
        config = load_json(os.path.join(outdir, BENCHMARK_CONFIG_FNAME))
        seed = config.pop("seed")
        return cls(corpus, queries, qrels, seed, config)


def generate_synthetic_benchmark(
    seed: int = 0,
    n_docs: int = 10_000,
    n_queries: int = 200,
    dim: int = 64,
    token_count_distribution: Optional[TokenCountDistribution] = None,
    planted_structure_config: Optional[PlantedStructureConfig] = None,
) -> SyntheticBenchmark:
    token_counts = token_count_distribution or TokenCountDistribution()
    cfg = planted_structure_config or PlantedStructureConfig()
    if n_queries < 1 or n_docs < n_queries * (1 + cfg.extra_positives):
        raise InvalidArgument(
            f"{n_docs} docs cannot hold {n_queries} queries with "
            f"{cfg.extra_positives} extra positives each"
        )
    latent_dim = cfg.latent_dim or max(dim // 4, 1)
    if not 1 <= latent_dim <= dim:
        raise InvalidArgument(f"latent dim {latent_dim} not in [1, {dim}]")

    rng = rng_for(seed)
    basis, _ = np.linalg.qr(rng.standard_normal((dim, latent_dim)))
    centers = rng.standard_normal((cfg.n_topics, latent_dim))
    counts = token_counts.sample(rng, n_docs)

    def _embed(latent: np.ndarray) -> np.ndarray:
        tokens = latent @ basis.T
        tokens += cfg.ambient_noise * rng.standard_normal(tokens.shape)
        return _finish(tokens, cfg.token_kind)

    doc_tokens = []
    for n in counts:
        topics = rng.choice(cfg.n_topics, cfg.topics_per_doc, replace=False)
        which = rng.choice(topics, size=n)
        latent = centers[which] + cfg.topic_spread * rng.standard_normal(
            (n, latent_dim)
        )
        doc_tokens.append(_embed(latent))

    n_planted = n_queries * (1 + cfg.extra_positives)
    planted = rng.choice(n_docs, size=n_planted, replace=False)
    positives = planted[:n_queries]
    extras = planted[n_queries:].reshape(n_queries, cfg.extra_positives)
    for pos, extra in zip(positives, extras):
        for e in extra:
            doc_tokens[e] = _perturb(
                rng, doc_tokens[pos], cfg.query_noise, cfg.token_kind
            )

    width = len(str(n_docs - 1))
    doc_ids = [f"d{i:0{width}d}" for i in range(n_docs)]
    corpus = [MultiVector(d, t) for d, t in zip(doc_ids, doc_tokens)]

    qwidth = len(str(n_queries - 1))
    queries, qrels = [], Qrels()
    for j, (pos, extra) in enumerate(zip(positives, extras)):
        query_id = f"q{j:0{qwidth}d}"
        source = doc_tokens[pos]
        picks = rng.choice(
            len(source),
            size=cfg.query_tokens,
            replace=cfg.query_tokens > len(source),
        )
        tokens = _perturb(rng, source[picks], cfg.query_noise, cfg.token_kind)
        queries.append(MultiVector(query_id, tokens))
        qrels.add(query_id, doc_ids[pos], POSITIVE_GRADE)
        for e in extra:
            qrels.add(query_id, doc_ids[e], EXTRA_POSITIVE_GRADE)

    config = dict(
        n_docs=n_docs,
        n_queries=n_queries,
        dim=dim,
        latent_dim=latent_dim,
        token_counts=asdict(token_counts),
        planted=asdict(cfg),
    )
    config["planted"]["token_kind"] = cfg.token_kind.value
    logger.info(
        f"Generated {n_docs} docs (avg {counts.mean():.1f} tokens) and "
        f"{n_queries} queries, dim {dim}"
    )
    return SyntheticBenchmark(corpus, queries, qrels, seed, config)


def _finish(tokens: np.ndarray, kind: TokenKind) -> np.ndarray:
    if kind == TokenKind.SIGN:
        signs = np.where(tokens > 0, 1.0, -1.0)
        return signs / np.sqrt(tokens.shape[1])
    return l2_normalize_rows(tokens)


def _perturb(rng, tokens: np.ndarray, noise: float, kind: TokenKind):
    """Unit tokens plus isotropic noise of expected norm ``noise``."""
    if noise == 0:
        return tokens.copy()
    dim = tokens.shape[1]
    noisy = tokens + noise / np.sqrt(dim) * rng.standard_normal(tokens.shape)
    return _finish(noisy, kind)
