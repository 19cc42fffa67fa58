import numpy as np
import pytest

from colmax.errors import InvalidArgument, NameSetMismatch, ShapeMismatch
from colmax.training import MergeSpec, ParamSet, merge_models


def random_params(seed, shapes=None):
    rng = np.random.default_rng(seed)
    shapes = shapes or {"w": (3, 4), "b": (4,), "scale": ()}
    return ParamSet({n: rng.standard_normal(s) for n, s in shapes.items()})


def test_two_member_average():
    a = ParamSet({"w": [2.0], "b": [0.0]})
    b = ParamSet({"w": [4.0], "b": [2.0]})
    merged = merge_models(MergeSpec([a, b], [0.5, 0.5]))
    np.testing.assert_array_equal(merged["w"], [3.0])
    np.testing.assert_array_equal(merged["b"], [1.0])


def test_identical_members():
    p = random_params(0)
    merged = merge_models(MergeSpec.uniform([p, p, p]))
    assert merged.allclose(p, atol=1e-12)


def test_one_hot_weights_return_member_exactly():
    members = [random_params(i) for i in range(3)]
    merged = merge_models(MergeSpec(members, [0, 1, 0]))
    for name in members[1]:
        np.testing.assert_array_equal(merged[name], members[1][name])


def test_eight_members_equal_pairwise_running_average():
    members = [random_params(i) for i in range(8)]
    merged = merge_models(MergeSpec.uniform(members))
    running = members[0]
    for i, member in enumerate(members[1:], start=1):
        running = merge_models(MergeSpec([running, member], [i, 1]))
    assert merged.allclose(running, atol=1e-12)


def test_weights_normalized():
    spec = MergeSpec([random_params(0), random_params(1)], [1, 3])
    assert spec.weights == [0.25, 0.75]
    assert sum(spec.weights) == pytest.approx(1.0, abs=1e-9)


def test_linearity():
    weights = [0.2, 0.3, 0.5]
    A = [random_params(i) for i in range(3)]
    B = [random_params(10 + i) for i in range(3)]
    summed = [
        ParamSet({n: a[n] + b[n] for n in a}) for a, b in zip(A, B)
    ]
    lhs = merge_models(MergeSpec(summed, weights))
    ra = merge_models(MergeSpec(A, weights))
    rb = merge_models(MergeSpec(B, weights))
    rhs = ParamSet({n: ra[n] + rb[n] for n in ra})
    assert lhs.allclose(rhs, atol=1e-12)


def test_merge_errors():
    a = random_params(0)
    with pytest.raises(NameSetMismatch):
        merge_models(MergeSpec.uniform([a, ParamSet({"w": np.ones((3, 4))})]))
    other = random_params(1, {"w": (4, 3), "b": (4,), "scale": ()})
    with pytest.raises(ShapeMismatch):
        merge_models(MergeSpec.uniform([a, other]))
    with pytest.raises(InvalidArgument):
        MergeSpec([a, a], [1.0])
    with pytest.raises(InvalidArgument):
        MergeSpec([a, a], [-1.0, 2.0])
    with pytest.raises(InvalidArgument):
        MergeSpec([a, a], [0.0, 0.0])
    with pytest.raises(InvalidArgument):
        MergeSpec([], [])


def test_save_load_round_trip(tmp_path):
    p = ParamSet({"w": [[0.5, -1.25], [2.0, 4.0]], "b": [0.125]})
    fpath = p.save(str(tmp_path / "models" / "member.json"))
    assert (tmp_path / "models" / "member.bin").exists()
    loaded = ParamSet.load(fpath)
    assert loaded.names == ["b", "w"]
    assert loaded.shapes == {"b": (1,), "w": (2, 2)}
    assert loaded.allclose(p)
