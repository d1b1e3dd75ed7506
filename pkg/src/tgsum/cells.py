"""Recurrent cells and the affine layer, with per-step backward passes."""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ShapeError
from .numkit import seeded_uniform_init

GATES = ("f", "i", "c", "o")


def _vec(x, n, what):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (n,):
        raise ShapeError(f"{what}: expected shape ({n},), got {x.shape}")
    return x


@dataclass
class LstmParams:
    """LSTM weights over the concatenation [h_prev; x].

    ``W`` stacks the forget, input, candidate and output blocks, each (H, H+E);
    ``W_f``, ``b_f`` and friends are views into it.
    """

    W: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        rows, cols = self.W.shape
        if rows % 4 or cols <= rows // 4 or self.b.shape != (rows,):
            raise ShapeError(f"inconsistent LSTM shapes W{self.W.shape} b{self.b.shape}")

    @classmethod
    def zeros(cls, hidden, input_size):
        return cls(np.zeros((4 * hidden, hidden + input_size)), np.zeros(4 * hidden))

    @classmethod
    def init(cls, rng, hidden, input_size, half_range=0.05):
        return cls(seeded_uniform_init(rng, 4 * hidden, hidden + input_size, half_range),
                   np.zeros(4 * hidden))

    @property
    def hidden(self):
        return self.W.shape[0] // 4

    @property
    def input_size(self):
        return self.W.shape[1] - self.hidden

    def weight(self, gate):
        k = GATES.index(gate)
        H = self.hidden
        return self.W[k * H:(k + 1) * H]

    def bias(self, gate):
        k = GATES.index(gate)
        H = self.hidden
        return self.b[k * H:(k + 1) * H]

    W_f = property(lambda self: self.weight("f"))
    W_i = property(lambda self: self.weight("i"))
    W_c = property(lambda self: self.weight("c"))
    W_o = property(lambda self: self.weight("o"))
    b_f = property(lambda self: self.bias("f"))
    b_i = property(lambda self: self.bias("i"))
    b_c = property(lambda self: self.bias("c"))
    b_o = property(lambda self: self.bias("o"))

    def named_tensors(self):
        for g in GATES:
            yield f"W_{g}", self.weight(g)
        for g in GATES:
            yield f"b_{g}", self.bias(g)


@dataclass
class LstmState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden):
        return cls(np.zeros(hidden), np.zeros(hidden))


@dataclass
class LstmStepCache:
    z: np.ndarray        # [h_prev; x]
    gates: np.ndarray    # rows f, i, candidate, o
    c_prev: np.ndarray
    c: np.ndarray

    @property
    def f(self):
        return self.gates[0]

    @property
    def i(self):
        return self.gates[1]

    @property
    def candidate(self):
        return self.gates[2]

    @property
    def o(self):
        return self.gates[3]


@dataclass
class AffineParams:
    W: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ShapeError(f"inconsistent affine shapes W{self.W.shape} b{self.b.shape}")

    @classmethod
    def zeros(cls, out, inp):
        return cls(np.zeros((out, inp)), np.zeros(out))

    @classmethod
    def init(cls, rng, out, inp, half_range=0.05):
        return cls(seeded_uniform_init(rng, out, inp, half_range), np.zeros(out))

    def named_tensors(self):
        yield "W", self.W
        yield "b", self.b


def rnn_forward_step(W_h, U_h, b_h, x, h_prev):
    """Vanilla recurrent step, tanh(W_h x + U_h h_prev + b_h)."""
    W_h, U_h = np.asarray(W_h, dtype=np.float64), np.asarray(U_h, dtype=np.float64)
    H = U_h.shape[0]
    if W_h.shape[0] != H or U_h.shape != (H, H):
        raise ShapeError(f"inconsistent RNN shapes W_h{W_h.shape} U_h{U_h.shape}")
    x = _vec(x, W_h.shape[1], "x")
    h_prev = _vec(h_prev, H, "h_prev")
    b_h = _vec(b_h, H, "b_h")
    return np.tanh(W_h @ x + U_h @ h_prev + b_h)


def lstm_forward_step(params, x, prev):
    H, E = params.hidden, params.input_size
    x = _vec(x, E, "x")
    h_prev = _vec(prev.h, H, "h_prev")
    c_prev = _vec(prev.c, H, "c_prev")
    z = np.empty(H + E)
    gates = np.empty((4, H))
    c = np.empty(H)
    h = np.empty(H)
    kernels.lstm_step(params.W, params.b, x, h_prev, c_prev, z, gates, c, h)
    return LstmState(h, c), LstmStepCache(z, gates, c_prev.copy(), c)


def lstm_backward_step(params, cache, dh, dc, grads=None):
    """Backward through one step. Returns ``(grads, dx, dh_prev, dc_prev)``.

    ``grads`` is an LstmParams-shaped accumulator; pass one in to sum over steps.
    """
    H, E = params.hidden, params.input_size
    if cache.z.shape != (H + E,) or cache.gates.shape != (4, H):
        raise ShapeError("cache does not match these parameters")
    if grads is None:
        grads = LstmParams.zeros(H, E)
    dz = np.empty(H + E)
    dc_prev = np.empty(H)
    kernels.lstm_step_backward(params.W, cache.z, cache.gates, cache.c_prev, cache.c,
                               _vec(dh, H, "dh"), _vec(dc, H, "dc"),
                               grads.W, grads.b, dz, dc_prev)
    return grads, dz[H:].copy(), dz[:H].copy(), dc_prev


def affine_forward(params, x):
    x = _vec(x, params.W.shape[1], "x")
    return params.W @ x + params.b


def affine_backward(params, x, dy):
    """Returns ``(dW, db, dx)`` for y = W x + b."""
    x = _vec(x, params.W.shape[1], "x")
    dy = _vec(dy, params.W.shape[0], "dy")
    return np.outer(dy, x), dy.copy(), params.W.T @ dy
