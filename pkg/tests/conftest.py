import os
from pathlib import Path
from typing import List

import numpy as np
import pytest

from colmax.model import MultiVector, Precision, l2_normalize_rows
from colmax.store import build_index


def make_corpus(
    n_docs: int,
    dim: int,
    max_tokens: int = 8,
    seed: int = 0,
    normalize: bool = True,
    prefix: str = "d",
) -> List[MultiVector]:
    """Random docs with 1..max_tokens tokens each."""
    rng = np.random.default_rng(seed)
    docs = []
    for i in range(n_docs):
        tokens = rng.standard_normal((rng.integers(1, max_tokens + 1), dim))
        if normalize:
            tokens = l2_normalize_rows(tokens)
        docs.append(MultiVector(f"{prefix}{i:04d}", tokens))
    return docs


def make_query(dim: int, n_tokens: int = 4, seed: int = 1, qid="q0"):
    rng = np.random.default_rng(seed)
    return MultiVector(
        qid, l2_normalize_rows(rng.standard_normal((n_tokens, dim)))
    )


def oracle_maxsim(query: MultiVector, doc: MultiVector) -> float:
    """Double loop, no numpy reductions."""
    total = 0.0
    for q in query.tokens:
        best = -np.inf
        for d in doc.tokens:
            dot = sum(float(a) * float(b) for a, b in zip(q, d))
            best = max(best, dot)
        total += best
    return total


@pytest.fixture
def tmp_working_dir(tmp_path) -> str:
    """
    Create temporary path using pytest native fixture,
    them move it, yield, and restore the original path
    """
    old = os.getcwd()
    os.chdir(str(tmp_path))
    yield str(Path(tmp_path).resolve())
    os.chdir(old)


@pytest.fixture
def small_corpus() -> List[MultiVector]:
    return make_corpus(n_docs=40, dim=16, max_tokens=6, seed=3)


@pytest.fixture
def small_index(tmp_path, small_corpus):
    return build_index(
        small_corpus, Precision.FP32, False, str(tmp_path / "small.cmx")
    )
