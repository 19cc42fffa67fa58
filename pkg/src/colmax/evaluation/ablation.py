"""Embedding-size / precision ablation: storage and NDCG relative to a
baseline configuration."""
import itertools
import logging
import os
import tempfile
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import tabulate

from ..data import Qrels
from ..errors import InvalidArgument, IoFailure
from ..file_management import ensure_parent_dir
from ..logger import LOGGER_NAME
from ..model import MultiVector, Precision
from ..store import (
    MODEL_PRESETS,
    apply_projection,
    build_index,
    estimate_storage,
    fit_projection,
    storage_ratio,
)
from ..utils import rng_for
from .metrics import ndcg_at_k, ndcg_pct
from .pipelines import Pipeline, run_pipeline

logger = logging.getLogger(LOGGER_NAME)

CSV_COLUMNS = [
    "label",
    "dim",
    "precision",
    "storage_gib",
    "storage_pct",
    "ndcg",
    "ndcg_pct",
]
DEFAULT_STORAGE_DOCS = 1_000_000
DEFAULT_PROJECTION_SAMPLE = 20_000


@dataclass
class AblationRow:
    label: str
    embed_dim: int
    precision: Precision
    storage_gib: float
    storage_pct: int
    ndcg: float
    ndcg_pct: float

    def to_record(self) -> Dict:
        return dict(
            label=self.label,
            dim=self.embed_dim,
            precision=Precision(self.precision).value,
            storage_gib=self.storage_gib,
            storage_pct=self.storage_pct,
            ndcg=self.ndcg,
            ndcg_pct=self.ndcg_pct,
        )


def _rows_from(
    labels: Sequence[str],
    estimates: Sequence,
    ndcgs: Sequence[float],
) -> List[AblationRow]:
    base_estimate, base_ndcg = estimates[0], ndcgs[0]
    return [
        AblationRow(
            label=label,
            embed_dim=est.dim,
            precision=est.precision,
            storage_gib=est.total_gib,
            storage_pct=storage_ratio(est, base_estimate),
            ndcg=ndcg,
            ndcg_pct=ndcg_pct(ndcg, base_ndcg),
        )
        for label, est, ndcg in zip(labels, estimates, ndcgs)
    ]


def ablation_from_published(
    model: str,
    entries: Sequence[Tuple[int, float]],
    n_docs: int = DEFAULT_STORAGE_DOCS,
    precision: Precision = Precision.FP16,
) -> List[AblationRow]:
    """Rows from published (dim, NDCG) pairs of a preset model; the first
    entry is the baseline."""
    if model not in MODEL_PRESETS:
        raise InvalidArgument(f"unknown model '{model}'")
    if not entries:
        raise InvalidArgument("no ablation entries")
    avg_tokens = MODEL_PRESETS[model].avg_tokens
    estimates = [
        estimate_storage(n_docs, avg_tokens, dim, precision)
        for dim, _ in entries
    ]
    labels = [f"{model}-{dim}" for dim, _ in entries]
    return _rows_from(labels, estimates, [n for _, n in entries])


def run_ablation(
    corpus: Sequence[MultiVector],
    queries: Sequence[MultiVector],
    qrels: Qrels,
    dims: Sequence[int],
    precisions: Sequence[Precision],
    k: int = 10,
    seed: int = 0,
    storage_n_docs: int = DEFAULT_STORAGE_DOCS,
    projection_sample: int = DEFAULT_PROJECTION_SAMPLE,
    workers: int = 1,
    workdir: Optional[str] = None,
) -> List[AblationRow]:
    """Evaluate every (dim, precision) pair; the first pair is the baseline.

    Reduced dims use a PCA projection fitted on a token sample of the corpus
    (queries and documents are both projected and renormalized).
    """
    if not dims or not precisions:
        raise InvalidArgument("need at least one dim and one precision")
    precisions = [Precision.parse(p) for p in precisions]
    source_dim = corpus[0].dim
    avg_tokens = float(np.mean([mv.n_tokens for mv in corpus]))
    configs = list(itertools.product(dims, precisions))

    projected: Dict[int, Tuple[List[MultiVector], List[MultiVector]]] = {}
    labels, estimates, ndcgs = [], [], []
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        for dim, precision in configs:
            if dim not in projected:
                projected[dim] = _project(
                    corpus, queries, dim, source_dim, seed, projection_sample
                )
            docs, qs = projected[dim]
            path = os.path.join(tmp, f"{dim}-{precision.value}.cmx")
            index = build_index(docs, precision, True, path)
            run = run_pipeline(qs, index, Pipeline.MAXSIM, k, workers=workers)
            ndcg = ndcg_at_k(run, qrels, k).mean
            logger.info(f"dim={dim} {precision.value}: NDCG@{k}={ndcg:.4f}")
            labels.append(f"{dim}-{precision.value}")
            estimates.append(
                estimate_storage(storage_n_docs, avg_tokens, dim, precision)
            )
            ndcgs.append(ndcg)
            del index
    return _rows_from(labels, estimates, ndcgs)


def _project(corpus, queries, dim, source_dim, seed, sample_size):
    if dim == source_dim:
        return list(corpus), list(queries)
    tokens = np.concatenate([mv.tokens for mv in corpus])
    if len(tokens) > sample_size:
        picks = rng_for(seed, dim).choice(
            len(tokens), size=sample_size, replace=False
        )
        tokens = tokens[np.sort(picks)]
    projection = fit_projection(tokens, dim)
    return (
        [apply_projection(mv, projection, True) for mv in corpus],
        [apply_projection(mv, projection, True) for mv in queries],
    )


def ablation_dataframe(rows: Sequence[AblationRow]) -> pd.DataFrame:
    return pd.DataFrame([r.to_record() for r in rows], columns=CSV_COLUMNS)


def write_ablation_csv(path: str, rows: Sequence[AblationRow]) -> str:
    ensure_parent_dir(path)
    try:
        ablation_dataframe(rows).to_csv(path, index=False)
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e
    return path


def ablation_markdown(rows: Sequence[AblationRow]) -> str:
    table = [
        [
            r.label,
            r.embed_dim,
            Precision(r.precision).value,
            f"{r.storage_gib:.1f}",
            f"{r.storage_pct}%",
            f"{r.ndcg:.4f}",
            f"{r.ndcg_pct:.2f}%",
        ]
        for r in rows
    ]
    headers = [
        "Config",
        "Embed. dim",
        "Precision",
        "Storage (GiB)",
        "% storage",
        "NDCG",
        "% NDCG",
    ]
    return tabulate.tabulate(table, headers=headers, tablefmt="github")
