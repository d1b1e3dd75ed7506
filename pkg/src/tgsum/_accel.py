"""Selects between numba-compiled kernels and the plain numpy path.

Set ``TGSUM_DISABLE_NUMBA=1`` in the environment (before import) to run every
kernel as ordinary Python over numpy. The kernels are written in the subset of
numpy that numba understands, so both paths execute the same source.
"""
import os

_FLAG = os.environ.get("TGSUM_DISABLE_NUMBA", "").strip().lower()
DISABLED = _FLAG in ("1", "true", "yes", "on")

try:
    if DISABLED:
        raise ImportError
    import numba
except ImportError:
    numba = None

NUMBA_ENABLED = numba is not None


def jit(fn):
    """Compile ``fn`` in nopython mode when numba is active, else return it unchanged."""
    if numba is None:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def backend_name():
    return "numba" if NUMBA_ENABLED else "numpy"
