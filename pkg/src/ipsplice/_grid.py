"""Dense box-indexed storage for edge data.

An edge quantity on the box [-R, R]^2 is stored in an array of shape
``(2, 2R + 1, 2R + 1)`` indexed ``[orientation, x + R, y + R]``.  Horizontal
edges with ``x == R`` and vertical edges with ``y == R`` leave the box and are
never part of a region.
"""

import numpy as np

from .lattice import canonical_edges


def side(radius: int) -> int:
    return 2 * radius + 1


def radius_for(edges, minimum: int = 0) -> int:
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 3)
    if len(e) == 0:
        return minimum
    far = np.abs(e[:, :2]).max() + 1
    return int(max(far, minimum))


def index(edges, radius: int):
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 3)
    return e[:, 2], e[:, 0] + radius, e[:, 1] + radius


def in_box(edges, radius: int) -> np.ndarray:
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 3)
    x, y, o = e[:, 0], e[:, 1], e[:, 2]
    lo = (x >= -radius) & (y >= -radius)
    hi = np.where(o == 0, (x < radius) & (y <= radius), (x <= radius) & (y < radius))
    return lo & hi


def box_mask(radius: int, n: int | None = None) -> np.ndarray:
    """Mask of the edges of S(n) inside a grid of the given radius."""
    n = radius if n is None else n
    d = side(radius)
    m = np.zeros((2, d, d), dtype=bool)
    lo, hi = radius - n, radius + n
    m[0, lo:hi, lo : hi + 1] = True
    m[1, lo : hi + 1, lo:hi] = True
    return m


def mask_from_edges(edges, radius: int) -> np.ndarray:
    d = side(radius)
    m = np.zeros((2, d, d), dtype=bool)
    e = canonical_edges(edges)
    if len(e):
        if not in_box(e, radius).all():
            raise ValueError("edges fall outside the grid")
        m[index(e, radius)] = True
    return m


def edges_from_mask(mask: np.ndarray, radius: int) -> np.ndarray:
    """Canonically ordered edges where ``mask`` is set."""
    i, j, o = np.nonzero(np.moveaxis(mask, 0, -1))
    return np.column_stack([i - radius, j - radius, o]).astype(np.int64)


def regrid(arr: np.ndarray, radius: int, new_radius: int, fill):
    """Embed or crop a grid array to a different radius."""
    if new_radius == radius:
        return arr.copy()
    d = side(new_radius)
    out = np.full((2, d, d), fill, dtype=arr.dtype)
    r = min(radius, new_radius)
    a0, b0 = radius - r, new_radius - r
    w = side(r)
    out[:, b0 : b0 + w, b0 : b0 + w] = arr[:, a0 : a0 + w, a0 : a0 + w]
    if new_radius < radius:
        # edges leaving the smaller box
        out[0, -1, :] = fill
        out[1, :, -1] = fill
    return out
