import math

import numpy as np
import pytest

from tgsum import reference
from tgsum.cells import LstmState, lstm_forward_step
from tgsum.embed import build_embedding_matrix
from tgsum.errors import ContractError, EmptyInputError, RangeError
from tgsum.numkit import Rng, softmax
from tgsum.seq2seq import (ModelGrads, decode_step_train, encode_sequence, init_model, loss_and_grads,
                           model_backward, sequence_loss)
from tgsum.textkit import EOS, SOS
from tgsum.trainer import TrainConfig

from .helpers import central_diff, make_model, make_vocab, rel_error


def test_init_model_default_shapes():
    vocab = make_vocab(6)
    cfg = TrainConfig()
    table = build_embedding_matrix(vocab, {}, cfg.emb_dim, Rng(0))
    p = init_model(vocab, table, cfg, Rng(1))
    assert p.encoder.W_f.shape == (128, 128 + 300)
    assert p.decoder.W_o.shape == (128, 428)
    assert p.head2.W.shape == (len(vocab), 128) and p.head2.b.shape == (len(vocab),)
    assert p.head1.W.shape == (128, 256)
    assert p.dims == (10, 300, 128, 128, 128)
    assert np.abs(p.encoder.W).max() <= 0.05 and not p.encoder.b.any() and not p.head2.b.any()
    q = init_model(vocab, table, cfg, Rng(1))
    for (n, a), (_, b) in zip(p.named_tensors(), q.named_tensors()):
        assert a.tobytes() == b.tobytes(), n


def test_encode_single_step_matches_cell(tiny_model):
    enc, state = encode_sequence(tiny_model, [5])
    H, E = 3, 4
    step, _ = lstm_forward_step(tiny_model.encoder, tiny_model.embeddings.matrix[5], LstmState.zeros(H))
    assert enc.shape == (1, H)
    np.testing.assert_array_equal(enc[0], step.h)
    np.testing.assert_array_equal(state.c, step.c)


def test_encode_lengths_and_zero_params(tiny_model):
    rng = np.random.default_rng(0)
    for T in range(1, 65):
        enc, _ = encode_sequence(tiny_model, rng.integers(0, 7, size=T))
        assert enc.shape == (T, 3)
    zero = make_model(scale=0.5)
    for _, arr in zero.named_tensors():
        arr[...] = 0.0
    assert not encode_sequence(zero, [4, 5, 6])[0].any()


def test_encode_errors(tiny_model):
    with pytest.raises(EmptyInputError):
        encode_sequence(tiny_model, [])
    with pytest.raises(RangeError):
        encode_sequence(tiny_model, [7])


def test_decode_step_distribution(tiny_model):
    enc, state = encode_sequence(tiny_model, [4, 5, 6])
    rng = np.random.default_rng(1)
    for seed in range(50):
        m = make_model(seed=seed, scale=rng.uniform(0.1, 3))
        enc, state = encode_sequence(m, [4, 6])
        dist, new, _ = decode_step_train(m, enc, state, SOS)
        assert dist.shape == (7,) and abs(dist.sum() - 1) < 1e-12
    m = make_model()
    m.head2.W[...] = 0
    m.head2.b[...] = 0
    enc, state = encode_sequence(m, [4])
    dist, _, _ = decode_step_train(m, enc, state, SOS)
    np.testing.assert_allclose(dist, 1 / 7, rtol=0, atol=1e-16)


def test_decode_step_matches_trace(tiny_model):
    src, tgt = [4, 5, 6, 4], [6, 5, EOS]
    _, tr = sequence_loss(tiny_model, src, tgt)
    enc, state = encode_sequence(tiny_model, src)
    prev = SOS
    for u in range(3):
        dist, state, cache = decode_step_train(tiny_model, enc, state, prev)
        np.testing.assert_allclose(dist, tr.probs[u], rtol=0, atol=1e-15)
        np.testing.assert_allclose(cache.attention.weights, tr.attn_weights[u], rtol=0, atol=1e-15)
        prev = tgt[u]


def test_rigged_model_has_zero_loss(tiny_model):
    tiny_model.head2.W[...] = 0
    tiny_model.head2.b[...] = 0
    tiny_model.head2.b[EOS] = 1000.0
    loss, _ = sequence_loss(tiny_model, [4, 5], [EOS])
    assert loss == 0.0


def test_uniform_predictor_loss(tiny_model):
    tiny_model.head2.W[...] = 0
    tiny_model.head2.b[...] = 0
    loss, tr = sequence_loss(tiny_model, [4, 5, 6], [5, 6, 4, 5, EOS])
    assert abs(loss - 5 * math.log(7)) < 1e-9


def test_loss_is_consistent_with_trace(tiny_model):
    src, tgt = [4, 6, 5, 5], [5, 4, EOS]
    loss, tr = sequence_loss(tiny_model, src, tgt)
    recomputed = -sum(math.log(tr.probs[u, t]) for u, t in enumerate(tgt))
    assert abs(loss - recomputed) < 1e-12
    assert loss == np.sum(tr.losses)
    assert tr.inputs.tolist() == [SOS, 5, 4]
    assert tr.enc_outputs.shape == (4, 3) and tr.attn_weights.shape == (3, 4)
    np.testing.assert_array_equal(tr.dec_h[0], tr.enc_h[-1])


def test_loss_matches_reference_forward(tiny_model):
    src, tgt = [4, 6, 5], [5, 4, EOS]
    loss, _ = sequence_loss(tiny_model, src, tgt)
    assert abs(loss - float(reference.model_loss(reference.tensors(tiny_model), src, tgt))) < 1e-12


def test_target_must_end_with_eos(tiny_model):
    with pytest.raises(ContractError):
        sequence_loss(tiny_model, [4], [5])
    with pytest.raises(ContractError):
        sequence_loss(tiny_model, [4], [])


@pytest.mark.parametrize("trainable", [True, False])
def test_model_backward_matches_finite_differences(trainable):
    m = make_model(V=7, E=4, H=3, A=3, Hh=3, seed=11, scale=1.0, trainable=trainable)
    src, tgt = [4, 6, 5], [5, 4, EOS]
    _, grads = loss_and_grads(m, src, tgt)
    assert (grads.embeddings is None) == (not trainable)
    t = reference.tensors(m)
    num = central_diff(lambda: reference.model_loss(t, src, tgt), t)
    names = [n for n, _ in grads.named_tensors()]
    assert ("embeddings" in names) == trainable and len(names) == 24 + trainable
    for name, g in grads.named_tensors():
        assert rel_error(g, num[name]) < 1e-6, name


def test_encoder_receives_gradient(tiny_model):
    _, g = loss_and_grads(tiny_model, [4, 5, 6], [6, EOS])
    assert np.abs(g.encoder.W).max() > 1e-6 and np.abs(g.attention.W_1).max() > 1e-6


def test_backward_is_linear_in_passes(tiny_model):
    src, tgt = [4, 5], [6, 5, EOS]
    _, once = loss_and_grads(tiny_model, src, tgt)
    twice = ModelGrads.zeros_like(tiny_model)
    loss_and_grads(tiny_model, src, tgt, twice)
    loss_and_grads(tiny_model, src, tgt, twice)
    for (n, a), (_, b) in zip(once.named_tensors(), twice.named_tensors()):
        assert np.max(np.abs(2 * a - b)) < 1e-9, n


def test_backward_rejects_foreign_trace(tiny_model):
    _, tr = sequence_loss(tiny_model, [4, 5], [6, EOS])
    with pytest.raises(ContractError):
        model_backward(tiny_model, tr, [4, 6], [6, EOS])


def test_fused_softmax_cross_entropy_gradient():
    rng = np.random.default_rng(7)
    for _ in range(100):
        z = rng.normal(scale=3, size=9)
        k = rng.integers(9)
        p = softmax(z)
        jac = np.diag(p) - np.outer(p, p)
        upstream = np.zeros(9)
        upstream[k] = -1.0 / p[k]
        fused = p.copy()
        fused[k] -= 1.0
        assert np.max(np.abs(jac.T @ upstream - fused)) < 1e-12


def test_loss_invariant_under_vocab_permutation():
    m = make_model(V=9, seed=3, scale=0.8)
    src, tgt = [4, 8, 6, 5], [7, 4, EOS]
    base, _ = sequence_loss(m, src, tgt)
    perm = np.arange(9)
    perm[4:] = 4 + np.array([3, 0, 4, 1, 2])      # new id of old id i is perm[i]
    inv = np.argsort(perm)
    m.embeddings.matrix[...] = m.embeddings.matrix[inv]
    m.head2.W[...] = m.head2.W[inv]
    m.head2.b[...] = m.head2.b[inv]
    moved, _ = sequence_loss(m, perm[src], perm[tgt])
    assert abs(moved - base) < 1e-12
