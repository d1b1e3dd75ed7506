"""Straight-line reimplementation of the model's loss in extended precision.

Shares no code with the kernels. The gradient check differentiates this
function numerically: in ``np.longdouble`` the rounding error of a central
difference with step 1e-5 sits near 1e-14 instead of 1e-11, so even very small
gradient entries can be compared at a 1e-6 relative tolerance. On platforms
where longdouble is plain float64 this degrades gracefully to float64.
"""
import numpy as np

from .textkit import SOS

DTYPE = np.longdouble


def sigmoid(x):
    return 1 / (1 + np.exp(-x))


def lstm_step(W_f, W_i, W_c, W_o, b_f, b_i, b_c, b_o, x, h, c):
    z = np.concatenate([h, x])
    f = sigmoid(W_f @ z + b_f)
    i = sigmoid(W_i @ z + b_i)
    cand = np.tanh(W_c @ z + b_c)
    o = sigmoid(W_o @ z + b_o)
    c_new = f * c + i * cand
    return o * np.tanh(c_new), c_new


def attention(W_1, W_2, b_attn, v, enc, h):
    scores = np.array([v @ np.tanh(W_1 @ e + W_2 @ h + b_attn) for e in enc])
    e = np.exp(scores - scores.max())
    weights = e / e.sum()
    return weights, weights @ enc


def log_softmax(x):
    m = x.max()
    return x - m - np.log(np.exp(x - m).sum())


def tensors(params, dtype=DTYPE):
    """Name -> extended-precision copy of every model tensor (embeddings included)."""
    return {name: np.array(arr, dtype=dtype) for name, arr in params.named_tensors()}


def model_loss(t, source, target):
    """Summed negative log likelihood for tensors ``t`` as returned by :func:`tensors`."""
    enc = lambda g: t[f"encoder.{g}"]  # noqa: E731
    dec = lambda g: t[f"decoder.{g}"]  # noqa: E731
    emb = t["embeddings"]
    H = t["encoder.b_f"].shape[0]
    h = np.zeros(H, dtype=emb.dtype)
    c = np.zeros(H, dtype=emb.dtype)
    outs = []
    for tok in source:
        h, c = lstm_step(enc("W_f"), enc("W_i"), enc("W_c"), enc("W_o"),
                         enc("b_f"), enc("b_i"), enc("b_c"), enc("b_o"), emb[tok], h, c)
        outs.append(h)
    outs = np.array(outs)
    total = 0
    prev = SOS
    for tok in target:
        h, c = lstm_step(dec("W_f"), dec("W_i"), dec("W_c"), dec("W_o"),
                         dec("b_f"), dec("b_i"), dec("b_c"), dec("b_o"), emb[prev], h, c)
        _, ctx = attention(t["attention.W_1"], t["attention.W_2"], t["attention.b_attn"],
                           t["attention.v"], outs, h)
        q = np.tanh(t["head1.W"] @ np.concatenate([h, ctx]) + t["head1.b"])
        logits = t["head2.W"] @ q + t["head2.b"]
        total = total - log_softmax(logits)[tok]
        prev = tok
    return total
