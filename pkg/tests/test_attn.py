import numpy as np
import pytest

from tgsum import reference
from tgsum.attn import AttentionParams, attention_backward, attention_forward
from tgsum.errors import EmptyInputError, ShapeError

from .helpers import central_diff, rel_error


def random_attn(rng, A=2, H_enc=3, H_dec=3, scale=1.0):
    return AttentionParams(scale * rng.uniform(-1, 1, (A, H_enc)), scale * rng.uniform(-1, 1, (A, H_dec)),
                           scale * rng.uniform(-1, 1, A), scale * rng.uniform(-1, 1, A))


def test_identical_rows_give_uniform_weights():
    rng = np.random.default_rng(0)
    p = random_attn(rng)
    e = rng.normal(size=3)
    out = attention_forward(p, np.tile(e, (5, 1)), rng.normal(size=3))
    np.testing.assert_allclose(out.weights, 0.2, rtol=0, atol=1e-15)
    np.testing.assert_allclose(out.context, e, rtol=0, atol=1e-14)


def test_single_row():
    rng = np.random.default_rng(1)
    e = rng.normal(size=(1, 3))
    out = attention_forward(random_attn(rng), e, rng.normal(size=3))
    assert out.weights.tolist() == [1.0]
    np.testing.assert_allclose(out.context, e[0], rtol=0, atol=1e-15)


def test_scalar_case_against_hand_arithmetic():
    p = AttentionParams(np.array([[1.0]]), np.array([[0.0]]), np.zeros(1), np.ones(1))
    out = attention_forward(p, np.array([[0.0], [10.0]]), np.array([0.3]))
    s1 = np.tanh(10.0)
    w1 = np.exp(s1) / (1.0 + np.exp(s1))
    assert out.scores.tolist() == [0.0, s1]
    assert out.weights[1] == pytest.approx(w1, abs=1e-15)
    assert out.context[0] == pytest.approx(10 * w1, abs=1e-13)
    assert 0 < out.context[0] < 10


def test_errors():
    p = AttentionParams.zeros(2, 3, 3)
    with pytest.raises(EmptyInputError):
        attention_forward(p, np.zeros((0, 3)), np.zeros(3))
    with pytest.raises(ShapeError):
        attention_forward(p, np.zeros((2, 4)), np.zeros(3))


def test_zero_upstream_gives_zero_grads():
    rng = np.random.default_rng(2)
    p, enc, h = random_attn(rng), rng.normal(size=(4, 3)), rng.normal(size=3)
    out = attention_forward(p, enc, h)
    g, denc, dh = attention_backward(p, enc, h, out, np.zeros(3))
    assert all(not a.any() for _, a in g.named_tensors()) and not denc.any() and not dh.any()


@pytest.mark.parametrize("seed", range(20))
def test_backward_matches_finite_differences(seed):
    rng = np.random.default_rng(50 + seed)
    T, H, A = 4, 3, 2
    p, enc, h = random_attn(rng, A, H, H), rng.normal(size=(T, H)), rng.normal(size=H)
    r, s = rng.normal(size=H), rng.normal(size=T)
    out = attention_forward(p, enc, h)
    g, denc, dh = attention_backward(p, enc, h, out, r, s)

    ld = reference.DTYPE
    t = {name: np.array(a, dtype=ld) for name, a in p.named_tensors()}
    t.update(enc=np.array(enc, dtype=ld), h=np.array(h, dtype=ld))

    def loss():
        w, ctx = reference.attention(t["W_1"], t["W_2"], t["b_attn"], t["v"], t["enc"], t["h"])
        return r @ ctx + s @ w

    num = central_diff(loss, t)
    for name, arr in g.named_tensors():
        assert rel_error(arr, num[name]) < 1e-6, name
    assert rel_error(denc, num["enc"]) < 1e-6
    assert rel_error(dh, num["h"]) < 1e-6


def test_backward_accumulates():
    rng = np.random.default_rng(3)
    p, enc = random_attn(rng), rng.normal(size=(3, 3))
    hs = rng.normal(size=(2, 3))
    outs = [attention_forward(p, enc, h) for h in hs]
    ups = rng.normal(size=(2, 3))
    parts = [attention_backward(p, enc, h, o, u)[0] for h, o, u in zip(hs, outs, ups)]
    acc = AttentionParams.zeros(2, 3, 3)
    for h, o, u in zip(hs, outs, ups):
        attention_backward(p, enc, h, o, u, grads=acc)
    for (name, a), (_, b1), (_, b2) in zip(acc.named_tensors(), parts[0].named_tensors(), parts[1].named_tensors()):
        np.testing.assert_allclose(a, b1 + b2, rtol=0, atol=1e-15, err_msg=name)


def test_properties_fuzz():
    rng = np.random.default_rng(4)
    for _ in range(300):
        T, H, A = rng.integers(1, 9), rng.integers(1, 6), rng.integers(1, 6)
        p = random_attn(rng, A, H, H, scale=rng.uniform(0.1, 3))
        enc, h = rng.normal(scale=3, size=(T, H)), rng.normal(size=H)
        out = attention_forward(p, enc, h)
        assert np.all(out.weights >= 0) and abs(out.weights.sum() - 1) < 1e-12
        assert np.all(out.context >= enc.min(axis=0) - 1e-12) and np.all(out.context <= enc.max(axis=0) + 1e-12)
        perm = rng.permutation(T)
        shuffled = attention_forward(p, enc[perm], h)
        np.testing.assert_allclose(shuffled.weights, out.weights[perm], rtol=0, atol=1e-14)
        np.testing.assert_allclose(shuffled.context, out.context, rtol=0, atol=1e-12)
