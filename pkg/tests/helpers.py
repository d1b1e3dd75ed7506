"""Shared finite-difference and model-building helpers."""
import numpy as np

from tgsum.embed import build_embedding_matrix
from tgsum.numkit import Rng
from tgsum.seq2seq import init_model
from tgsum.textkit import RESERVED_TOKENS, Vocab
from tgsum.trainer import TrainConfig


def central_diff(loss, tensors, eps=1e-5):
    """Central differences of ``loss()`` w.r.t. every entry of every array in ``tensors`` (perturbed in place)."""
    out = {}
    for name, arr in tensors.items():
        g = np.empty(arr.shape)
        step = arr.dtype.type(eps)
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + step
            up = loss()
            arr[idx] = orig - step
            down = loss()
            arr[idx] = orig
            g[idx] = float((up - down) / (2 * step))
        out[name] = g
    return out


def rel_error(a, n):
    a, n = np.asarray(a, dtype=np.float64), np.asarray(n, dtype=np.float64)
    return float(np.max(np.abs(a - n) / np.maximum(np.abs(a) + np.abs(n), 1e-8)))


def make_vocab(n_words):
    return Vocab(RESERVED_TOKENS + tuple(f"w{i}" for i in range(n_words)))


def make_model(V=7, E=4, H=3, A=3, Hh=3, seed=0, scale=0.5, trainable=True):
    """Random model with every tensor (biases too) uniform in [-scale, scale]."""
    rng = Rng(seed)
    vocab = make_vocab(V - 4)
    table = build_embedding_matrix(vocab, {}, E, rng, scale, trainable=trainable)
    cfg = TrainConfig(hidden=H, emb_dim=E, attn_dim=A, head_dim=Hh, init_range=scale)
    params = init_model(vocab, table, cfg, rng)
    for _, arr in params.named_tensors():
        arr[...] = scale * (2.0 * rng.random(arr.size).reshape(arr.shape) - 1.0)
    return params
