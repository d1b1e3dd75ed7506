"""Dense float64 primitives and the seeded generator everything else draws from.

Matrices and vectors are plain ``numpy.ndarray`` objects of dtype float64 in C
(row-major) order. The generator is SplitMix64, implemented here so that a seed
reproduces the same bytes on every platform and numpy version.
"""
import numpy as np

from .errors import NumericDomainError, ShapeError

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix(z):
    # z: uint64 ndarray, arithmetic wraps modulo 2**64
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class Rng:
    """SplitMix64 stream.

    state_{n+1} = state_n + 0x9E3779B97F4A7C15 (mod 2**64) and each output is the
    standard SplitMix64 finalizer applied to the new state. Doubles take the top
    53 bits, giving values in [0, 1).
    """

    def __init__(self, seed=0):
        self.seed = int(seed) & _MASK64
        self.state = self.seed

    def next_u64s(self, n):
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + steps * np.uint64(_GAMMA)
            out = _mix(z)
        self.state = (self.state + n * _GAMMA) & _MASK64
        return out

    def next_u64(self):
        return int(self.next_u64s(1)[0])

    def random(self, n=None):
        """``n`` doubles uniform on [0, 1), or a single float when ``n`` is omitted."""
        out = (self.next_u64s(1 if n is None else n) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
        return float(out[0]) if n is None else out

    def randbelow(self, n):
        # multiply-shift reduction; bias is below 2**-40 for any n used here
        return (self.next_u64() * n) >> 64

    def permutation(self, n):
        """Fisher-Yates shuffle of ``range(n)``."""
        order = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.randbelow(i + 1)
            order[i], order[j] = order[j], order[i]
        return order

    def spawn(self):
        """Independent child stream seeded from this one."""
        return Rng(self.next_u64())


def matmul(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def softmax(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ShapeError(f"softmax needs a non-empty vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericDomainError("softmax input contains NaN or Inf")
    e = np.exp(x - x.max())
    return e / e.sum()


def sigmoid(x):
    # tanh form never overflows and gives exactly 0.5 at 0
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


def activate(x, kind):
    x = np.asarray(x, dtype=np.float64)
    if np.any(np.isnan(x)):
        raise NumericDomainError(f"{kind} input contains NaN")
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "tanh":
        return np.tanh(x)
    raise ValueError(f"unknown activation {kind!r}")


def activation_grad(y, kind):
    """Derivative of the activation expressed through its forward output ``y``."""
    y = np.asarray(y, dtype=np.float64)
    if kind == "sigmoid":
        return y * (1.0 - y)
    if kind == "tanh":
        return 1.0 - y * y
    raise ValueError(f"unknown activation {kind!r}")


def seeded_uniform_init(rng, rows, cols, half_range):
    if half_range <= 0:
        raise ValueError("half_range must be positive")
    u = rng.random(rows * cols)
    return (half_range * (2.0 * u - 1.0)).reshape(rows, cols)


def global_norm(grads):
    return float(np.sqrt(sum(float(np.dot(g.ravel(), g.ravel())) for g in grads)))


def clip_global_norm(grads, max_norm):
    """Scale every array in ``grads`` in place so their joint L2 norm is at most ``max_norm``.

    Returns the scale factor that was applied (1.0 when nothing changed).
    """
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    norm = global_norm(grads)
    if norm <= max_norm:
        return 1.0
    scale = max_norm / norm
    for g in grads:
        g *= scale
    return scale
