import numpy as np
import pytest
from conftest import make_corpus

from colmax.curation import (
    IdentityQueryTransformer,
    MarginType,
    TrainingTriplet,
    mine_from_index,
    mine_hard_negatives,
    mine_many,
    mining_cutoff,
    read_triplets,
    write_triplets,
)
from colmax.engine import maxsim_score
from colmax.errors import (
    InvalidArgument,
    IoFailure,
    MissingPositiveScore,
    NonPositiveK,
)
from colmax.model import MultiVector, Precision
from colmax.store import build_index

CANDIDATES = {"p": 0.8, "a": 0.9, "b": 0.75, "c": 0.7, "d": 0.5}


def test_false_negative_filtered():
    triplet = mine_hard_negatives("q", "p", CANDIDATES, k=2, threshold=0.95)
    assert triplet.negative_ids == ["b", "c"]
    assert triplet.teacher_scores == {"p": 0.8, "b": 0.75, "c": 0.7}
    assert mining_cutoff(0.8, 0.95) == pytest.approx(0.76)


def test_threshold_one_is_plain_top_k():
    candidates = {"p": 1.0, "x": 0.2, "y": 0.9, "z": 0.5}
    triplet = mine_hard_negatives("q", "p", candidates, k=2, threshold=1.0)
    assert triplet.negative_ids == ["y", "z"]


def test_all_above_cutoff_gives_empty_list():
    candidates = {"p": 0.5, "x": 0.6, "y": 0.99}
    triplet = mine_hard_negatives("q", "p", candidates, k=3)
    assert triplet.negative_ids == []
    assert triplet.teacher_scores == {"p": 0.5}


def test_short_pool_and_ties():
    candidates = {"p": 1.0, "z": 0.3, "m": 0.3, "a": 0.3}
    triplet = mine_hard_negatives("q", "p", candidates, k=10)
    assert triplet.negative_ids == ["a", "m", "z"]


def test_abs_margin():
    triplet = mine_hard_negatives(
        "q", "p", CANDIDATES, k=5, threshold=0.08, margin_type="abs"
    )
    assert triplet.negative_ids == ["c", "d"]
    assert mining_cutoff(0.8, 0.1, MarginType.ABS) == pytest.approx(0.7)


def test_mining_errors():
    with pytest.raises(NonPositiveK):
        mine_hard_negatives("q", "p", CANDIDATES, k=0)
    with pytest.raises(MissingPositiveScore):
        mine_hard_negatives("q", "missing", CANDIDATES, k=2)
    with pytest.raises(InvalidArgument):
        mine_hard_negatives("q", "p", CANDIDATES, k=2, threshold=1.5)
    with pytest.raises(InvalidArgument):
        mine_hard_negatives("q", "p", CANDIDATES, k=2, threshold=0.0)
    with pytest.raises(InvalidArgument):
        mine_hard_negatives("q", "p", {**CANDIDATES, "n": np.nan}, k=2)
    with pytest.raises(InvalidArgument):
        mine_hard_negatives(
            "q", "p", CANDIDATES, k=2, threshold=-1, margin_type="abs"
        )


def test_safety_and_maximality_random_trials():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        n = int(rng.integers(1, 40))
        scores = np.round(rng.uniform(-1, 1, size=n + 1), 2)
        candidates = {f"d{i:02d}": float(s) for i, s in enumerate(scores)}
        k = int(rng.integers(1, 10))
        threshold = float(rng.uniform(0.05, 1.0))
        triplet = mine_hard_negatives("q", "d00", candidates, k, threshold)
        cutoff = threshold * candidates["d00"]
        eligible = sorted(
            (-s, d)
            for d, s in candidates.items()
            if d != "d00" and s < cutoff
        )
        assert triplet.negative_ids == [d for _, d in eligible[:k]]
        for d in triplet.negative_ids:
            assert candidates[d] < cutoff
        excluded = [
            candidates[d]
            for _, d in eligible
            if d not in triplet.negative_ids
        ]
        if excluded and triplet.negative_ids:
            assert max(excluded) <= min(
                candidates[d] for d in triplet.negative_ids
            )


def test_triplet_invariants():
    with pytest.raises(InvalidArgument):
        TrainingTriplet("q", "p", ["p"], {"p": 1.0})
    with pytest.raises(MissingPositiveScore):
        TrainingTriplet("q", "p", ["a"], {"p": 1.0})


@pytest.fixture
def mining_index(tmp_path):
    docs = make_corpus(n_docs=30, dim=8, max_tokens=4, seed=11)
    return build_index(docs, Precision.FP32, False, str(tmp_path / "m.cmx"))


def test_mine_from_index_uses_maxsim(mining_index):
    query = MultiVector("q", mining_index.doc(3).tokens)
    triplet = mine_from_index(query, "d0003", mining_index, k=4, threshold=1)
    assert len(triplet.negative_ids) == 4
    assert triplet.teacher_scores["d0003"] == pytest.approx(
        maxsim_score(query, mining_index.get("d0003"))
    )
    for d in triplet.negative_ids:
        assert triplet.teacher_scores[d] < triplet.teacher_scores["d0003"]


class TwoVariants:
    def transform(self, query):
        return [query, MultiVector(query.id + "-neg", -query.tokens)]


def test_mine_many_with_transformer(mining_index):
    queries = [
        MultiVector(f"q{i}", mining_index.doc(i).tokens) for i in (0, 1)
    ]
    positives = {"q0": "d0000", "q1": "d0001"}
    plain = mine_many(queries, positives, mining_index, k=3, threshold=1.0)
    assert [t.query_id for t in plain] == ["q0", "q1"]
    same = mine_many(
        queries,
        positives,
        mining_index,
        k=3,
        threshold=1.0,
        transformer=IdentityQueryTransformer(),
        workers=2,
    )
    assert [t.to_dict() for t in same] == [t.to_dict() for t in plain]
    variants = mine_many(
        queries, positives, mining_index, 3, 1.0, transformer=TwoVariants()
    )
    assert [t.query_id for t in variants] == ["q0", "q0-neg", "q1", "q1-neg"]
    assert variants[1].positive_id == "d0000"
    with pytest.raises(MissingPositiveScore):
        mine_many(queries, {"q0": "d0000"}, mining_index, k=3)


def test_triplets_jsonl(tmp_path):
    triplets = [
        mine_hard_negatives("q1", "p", CANDIDATES, k=2),
        mine_hard_negatives("q2", "p", CANDIDATES, k=1),
    ]
    path = write_triplets(str(tmp_path / "out" / "t.jsonl"), triplets)
    assert [t.to_dict() for t in read_triplets(path)] == [
        t.to_dict() for t in triplets
    ]
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"query_id": "q"}\n')
    with pytest.raises(IoFailure):
        read_triplets(str(bad))
