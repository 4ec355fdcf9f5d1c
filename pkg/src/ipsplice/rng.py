"""
Counter-based edge weights.

The weight of an edge is a keyed hash of ``(seed, x, y, orientation)``, so a
field is reproducible edge by edge, independent of the order in which edges
are visited, and a sub-region can be redrawn from a different key without
touching anything else.  The mixing function is the SplitMix64 finalizer
applied twice with two seed-derived keys; the top 53 bits are mapped to the
open interval (0, 1).
"""

import numpy as np
from numba import njit

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_OFFSET = 1 << 30


def _mix_py(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def normalize_seed(seed: int) -> int:
    return int(seed) & _MASK


def derive_seed(seed: int, *path: int) -> int:
    """Deterministic child seed, e.g. ``derive_seed(run_seed, replicate, stream)``."""
    h = _mix_py(normalize_seed(seed) + _GOLDEN)
    for v in path:
        h = _mix_py(h ^ _mix_py((int(v) & _MASK) + _GOLDEN))
    return h


def seed_keys(seed: int) -> tuple[np.uint64, np.uint64]:
    s = normalize_seed(seed)
    return np.uint64(_mix_py(s ^ 0x243F6A8885A308D3)), np.uint64(_mix_py(s + _GOLDEN))


@njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def hash_weight(k1, k2, x, y, o):
    key = (
        (np.uint64(x + 1073741824) << np.uint64(33))
        | (np.uint64(y + 1073741824) << np.uint64(1))
        | np.uint64(o)
    )
    h = _mix(_mix(key ^ k1) + k2)
    return (np.float64(h >> np.uint64(11)) + 0.5) * 1.1102230246251565e-16


@njit(cache=True)
def fill_weights(k1, k2, radius, mask, out):
    """Write hashed weights into ``out`` wherever ``mask`` is set."""
    d = 2 * radius + 1
    for o in range(2):
        for i in range(d):
            for j in range(d):
                if mask[o, i, j]:
                    out[o, i, j] = hash_weight(k1, k2, i - radius, j - radius, o)


@njit(cache=True)
def fill_box_weights(k1, k2, radius, n, out):
    """Weights of every edge of S(n) in a grid of the given radius; NaN elsewhere."""
    d = 2 * radius + 1
    lo = radius - n
    hi = radius + n
    for o in range(2):
        for i in range(d):
            for j in range(d):
                inside = False
                if o == 0:
                    inside = lo <= i < hi and lo <= j <= hi
                else:
                    inside = lo <= i <= hi and lo <= j < hi
                if inside:
                    out[o, i, j] = hash_weight(k1, k2, i - radius, j - radius, o)
                else:
                    out[o, i, j] = np.nan


def edge_weights(seed: int, edges) -> np.ndarray:
    """Hashed weights for an explicit edge array."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 3)
    k1, k2 = seed_keys(seed)
    return _edge_weights(k1, k2, e)


@njit(cache=True)
def _edge_weights(k1, k2, e):
    out = np.empty(e.shape[0])
    for t in range(e.shape[0]):
        out[t] = hash_weight(k1, k2, e[t, 0], e[t, 1], e[t, 2])
    return out
