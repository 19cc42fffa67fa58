import numpy as np
import pytest

from colmax.errors import DimMismatch, InvalidArgument
from colmax.model import MultiVector, l2_normalize_rows
from colmax.training import (
    LossInput,
    info_nce_batch_loss,
    info_nce_gradient,
    info_nce_loss,
)


def single(name, values):
    return MultiVector(name, [values])


def scored_input(s_pos, s_negs, tau=1.0):
    """Single-token docs whose dot with q=[1, 0] is the given score."""
    q = single("q", [1.0, 0.0])
    return LossInput(
        q,
        single("p", [s_pos, 1.0]),
        [single(f"n{i}", [s, 1.0]) for i, s in enumerate(s_negs)],
        tau,
    )


def test_uniform_similarities_give_log_four():
    assert info_nce_loss(scored_input(0.3, [0.3, 0.3, 0.3])) == pytest.approx(
        np.log(4)
    )


def test_one_negative():
    loss = info_nce_loss(scored_input(1.0, [0.5]))
    assert loss == pytest.approx(np.log1p(np.exp(-0.5)))
    assert loss == pytest.approx(0.4741, abs=1e-4)


def test_no_negatives_is_zero():
    assert info_nce_loss(scored_input(1.0, [])) == 0.0
    grad = info_nce_gradient(scored_input(1.0, []))
    assert not grad.q.any() and not grad.d_pos.any() and grad.d_negs == []


def test_stable_for_large_logits():
    loss = info_nce_loss(scored_input(1000.0, [999.0], tau=0.01))
    assert np.isfinite(loss)
    assert loss == pytest.approx(np.log1p(np.exp(-100.0)))


def test_input_validation():
    with pytest.raises(InvalidArgument):
        scored_input(1.0, [0.5], tau=0.0)
    with pytest.raises(DimMismatch):
        LossInput(single("q", [1.0, 0.0]), single("p", [1.0, 0.0, 0.0]))
    with pytest.raises(InvalidArgument):
        info_nce_gradient(
            LossInput(
                single("q", [1.0, 0.0]),
                single("p", [1.0, 0.0]),
                [single("n", [0.0, 1.0])],
                sim="cosine",
            )
        )


def test_positivity_and_monotonicity():
    rng = np.random.default_rng(0)
    for _ in range(50):
        s_pos = float(rng.normal())
        s_negs = rng.normal(size=3).tolist()
        loss = info_nce_loss(scored_input(s_pos, s_negs))
        assert loss > 0
        if max(s_negs) >= s_pos:
            assert loss > np.log(2) - 1e-12
        bumped = list(s_negs)
        bumped[0] += float(rng.uniform(0, 2))
        assert info_nce_loss(scored_input(s_pos, bumped)) >= loss


def test_temperature_scaling_invariance():
    base = info_nce_loss(scored_input(0.7, [0.2, 0.9], tau=0.5))
    scaled = info_nce_loss(scored_input(2.1, [0.6, 2.7], tau=1.5))
    assert scaled == pytest.approx(base)


def test_batch_loss_is_mean():
    a, b = scored_input(1.0, [0.5]), scored_input(0.3, [0.3, 0.3, 0.3])
    assert info_nce_batch_loss([a, b]) == pytest.approx(
        (np.log1p(np.exp(-0.5)) + np.log(4)) / 2
    )
    with pytest.raises(InvalidArgument):
        info_nce_batch_loss([])


def random_input(rng, dim=6, tau=0.7):
    def mv(name, n):
        return MultiVector(
            name, l2_normalize_rows(rng.standard_normal((n, dim)))
        )

    return LossInput(
        mv("q", 3),
        mv("p", int(rng.integers(1, 5))),
        [mv(f"n{i}", int(rng.integers(1, 5))) for i in range(2)],
        tau,
    )


def argmax_margin(inp):
    q = inp.q.tokens
    margins = [np.inf]
    for d in inp.docs:
        if d.n_tokens > 1:
            sims = np.sort(q @ d.tokens.T, axis=1)
            margins.append(float((sims[:, -1] - sims[:, -2]).min()))
    return min(margins)


def numeric_gradient(inp, target, h=1e-4):
    """Central differences of the loss w.r.t. one input's tokens."""
    names = ["q", "d_pos"] + [f"neg{i}" for i in range(len(inp.d_negs))]
    mats = [inp.q.tokens, inp.d_pos.tokens] + [d.tokens for d in inp.d_negs]
    idx = names.index(target)
    base = np.array(mats[idx], dtype=np.float64)
    grad = np.zeros_like(base)

    def loss_with(tokens):
        m = list(mats)
        m[idx] = tokens
        return info_nce_loss(
            LossInput(
                MultiVector("q", m[0]),
                MultiVector("p", m[1]),
                [MultiVector(f"n{i}", t) for i, t in enumerate(m[2:])],
                inp.tau,
            )
        )

    for pos in np.ndindex(base.shape):
        plus, minus = base.copy(), base.copy()
        plus[pos] += h
        minus[pos] -= h
        grad[pos] = (loss_with(plus) - loss_with(minus)) / (2 * h)
    return grad


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(42)
    checked = 0
    for _ in range(50):
        inp = random_input(rng)
        if argmax_margin(inp) < 1e-3:
            continue
        grad = info_nce_gradient(inp)
        analytic = {
            "q": grad.q,
            "d_pos": grad.d_pos,
            "neg0": grad.d_negs[0],
            "neg1": grad.d_negs[1],
        }
        for name, value in analytic.items():
            numeric = numeric_gradient(inp, name)
            np.testing.assert_allclose(value, numeric, rtol=1e-4, atol=1e-7)
        checked += 1
    assert checked >= 25


def test_unselected_doc_token_gets_zero_gradient():
    q = MultiVector("q", [[1.0, 0.0], [0.8, 0.6]])
    pos = MultiVector("p", [[1.0, 0.0], [-1.0, 0.0]])
    neg = MultiVector("n", [[0.0, 1.0]])
    grad = info_nce_gradient(LossInput(q, pos, [neg]))
    assert np.all(grad.d_pos[1] == 0.0)
    assert np.any(grad.d_pos[0] != 0.0)


def test_gradient_scales_with_temperature():
    q = MultiVector("q", [[1.0, 0.0]])
    pos = MultiVector("p", [[0.5, 0.5]])
    neg = MultiVector("n", [[0.2, 0.9]])
    for tau in [1.0, 10.0]:
        grad = info_nce_gradient(LossInput(q, pos, [neg], tau))
        logits = np.array([0.5, 0.2]) / tau
        weights = np.exp(logits) / np.exp(logits).sum()
        np.testing.assert_allclose(
            grad.d_pos, (weights[0] - 1) / tau * q.tokens
        )
        np.testing.assert_allclose(grad.d_negs[0], weights[1] / tau * q.tokens)
    small = info_nce_gradient(LossInput(q, pos, [neg], 10.0))
    large = info_nce_gradient(LossInput(q, pos, [neg], 1.0))
    assert np.abs(small.q).sum() < np.abs(large.q).sum()
