"""Embedding storage arithmetic.

Sizes are reported in GiB (2**30 bytes): 773 tokens x 4096 dims x 2 bytes x
1M pages is 5897.5 GiB, which is the figure published for that model, while
10**9-byte GB would give 6332.4.
"""
from dataclasses import asdict, dataclass
from math import floor
from typing import Dict, List, NamedTuple, Optional, Sequence

import pandas as pd

from ..errors import InvalidArgument
from ..model import Precision
from ..utils import percent_half_up

GIB = 1 << 30
ONE_MILLION_PAGES = 1_000_000


class ModelPreset(NamedTuple):
    name: str
    params_b: str
    dim: int
    avg_tokens: float


MODEL_PRESETS: Dict[str, ModelPreset] = {
    p.name: p
    for p in [
        ModelPreset("nemotron-colembed-vl-8b-v2", "8.14", 4096, 773),
        ModelPreset("nemotron-colembed-vl-4b-v2", "4.43", 2560, 773),
        ModelPreset("llama-nemotron-colembed-vl-3b-v2", "3.99", 3072, 2304),
        ModelPreset("llama-nemoretriever-colembed-1b-v1", "2.15", 2048, 2304),
        ModelPreset("llama-nemotron-embed-vl-1b-v2", "1.41", 2048, 1),
    ]
}


@dataclass(frozen=True)
class StorageEstimate:
    n_docs: int
    avg_tokens: float
    dim: int
    precision: Precision
    floats_per_image: int
    total_bytes: int
    total_gib: float

    def to_dict(self) -> Dict:
        d = asdict(self)
        d["precision"] = self.precision.value
        return d

    def __str__(self):
        return f"{self.total_gib:.1f} GiB"


def estimate_storage(
    n_docs: int, avg_tokens: float, dim: int, precision: Precision
) -> StorageEstimate:
    """Bytes needed to store ``n_docs`` multi-vector embeddings."""
    precision = Precision.parse(precision)
    if n_docs <= 0 or avg_tokens <= 0 or dim <= 0:
        raise InvalidArgument("n_docs, avg_tokens and dim must be positive")
    n_docs = int(n_docs)
    per_token = dim * precision.bytes_per_element
    if precision == Precision.INT8:
        per_token += 4  # fp32 scale
    total_bytes = int(round(n_docs * avg_tokens * per_token))
    return StorageEstimate(
        n_docs=n_docs,
        avg_tokens=float(avg_tokens),
        dim=int(dim),
        precision=precision,
        floats_per_image=int(round(avg_tokens)) * int(dim),
        total_bytes=total_bytes,
        total_gib=_round_tenth(total_bytes / GIB),
    )


def estimate_model_storage(
    name: str,
    n_docs: int = ONE_MILLION_PAGES,
    precision: Precision = Precision.FP16,
    dim: Optional[int] = None,
) -> StorageEstimate:
    """``estimate_storage`` for a named model (optionally at a reduced dim)."""
    try:
        preset = MODEL_PRESETS[name]
    except KeyError:
        raise InvalidArgument(
            f"unknown model '{name}' "
            f"(known: {', '.join(sorted(MODEL_PRESETS))})"
        ) from None
    return estimate_storage(
        n_docs, preset.avg_tokens, dim or preset.dim, precision
    )


def storage_ratio(reduced: StorageEstimate, baseline: StorageEstimate) -> int:
    """Integer percentage of the baseline's bytes, rounded half up."""
    if (reduced.n_docs, reduced.avg_tokens) != (
        baseline.n_docs,
        baseline.avg_tokens,
    ):
        raise InvalidArgument(
            "storage ratios need the same n_docs and avg_tokens"
        )
    return percent_half_up(reduced.total_bytes, baseline.total_bytes)


def storage_multiplier(
    a: StorageEstimate, b: StorageEstimate, reported: bool = False
) -> float:
    """How many times more storage ``a`` needs than ``b``.

    With ``reported`` the rounded GiB figures are compared (as a table
    reader would), otherwise the exact byte counts.
    """
    if reported:
        return a.total_gib / b.total_gib
    return a.total_bytes / b.total_bytes


def storage_table(
    names: Optional[Sequence[str]] = None,
    n_docs: int = ONE_MILLION_PAGES,
    precision: Precision = Precision.FP16,
) -> pd.DataFrame:
    """One row per model: dim, tokens per page and storage for ``n_docs``."""
    rows: List[Dict] = []
    for name in names or list(MODEL_PRESETS):
        preset = MODEL_PRESETS.get(name)
        estimate = estimate_model_storage(name, n_docs, precision)
        rows.append(
            dict(
                model=name,
                params_b=preset.params_b,
                dim=estimate.dim,
                avg_tokens=preset.avg_tokens,
                floats_per_image=estimate.floats_per_image,
                storage_gib=estimate.total_gib,
            )
        )
    return pd.DataFrame(rows)


def _round_tenth(value: float) -> float:
    return floor(value * 10 + 0.5) / 10
