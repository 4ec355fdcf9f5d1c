"""
Edge weight fields and the threshold coupling to Bernoulli percolation.

A :class:`WeightField` stores i.i.d. uniform weights for a finite set of
edges.  Thresholding at ``p`` (edge open iff its weight is ``< p``) gives a
:class:`Configuration` distributed as bond percolation with parameter ``p``,
and all thresholds of one field are nested.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _grid
from .lattice import EdgeId, canonical_edges
from .rng import fill_box_weights, fill_weights, normalize_seed, seed_keys

__all__ = [
    "WeightField",
    "Configuration",
    "sample_weights",
    "sample_box",
    "field_from_values",
    "resample_region",
    "threshold_config",
    "dump_field",
    "load_field",
]

MAGIC = b"IPWF"
FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class WeightField:
    """Weights on a finite edge region, stored densely on a box grid.

    ``weights`` has shape ``(2, 2R + 1, 2R + 1)`` and holds NaN for edges
    outside the region.  Instances are never mutated; resampling returns a
    new field with ``generation`` incremented.
    """

    radius: int
    weights: np.ndarray
    seed: int
    generation: int = 0

    def __post_init__(self):
        self.weights.setflags(write=False)

    @property
    def mask(self) -> np.ndarray:
        return ~np.isnan(self.weights)

    def region(self) -> np.ndarray:
        return _grid.edges_from_mask(self.mask, self.radius)

    def __len__(self):
        return int(self.mask.sum())

    def covers(self, edges) -> bool:
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 3)
        if len(e) == 0:
            return True
        inside = _grid.in_box(e, self.radius)
        if not inside.all():
            return False
        return bool(self.mask[_grid.index(e, self.radius)].all())

    def covers_box(self, n: int) -> bool:
        if n > self.radius:
            return False
        return bool(self.mask[_grid.box_mask(self.radius, n)].all())

    def values(self, edges) -> np.ndarray:
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 3)
        if not self.covers(e):
            raise KeyError("some edges are outside the weight field's region")
        return np.asarray(self.weights[_grid.index(e, self.radius)])

    def weight(self, e) -> float:
        return float(self.values([tuple(e)])[0])

    def as_dict(self) -> dict[EdgeId, float]:
        region = self.region()
        vals = self.values(region)
        return {EdgeId(int(x), int(y), int(o)): float(w) for (x, y, o), w in zip(region, vals)}

    def on_grid(self, radius: int) -> "WeightField":
        """Same field re-embedded on a grid of another radius (cropping if smaller)."""
        w = _grid.regrid(self.weights, self.radius, radius, np.nan)
        return WeightField(radius, w, self.seed, self.generation)


@dataclass(frozen=True, eq=False)
class Configuration:
    """Open/closed status for every edge of a region."""

    radius: int
    open: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        if np.any(self.open & ~self.mask):
            raise ValueError("open edges must lie in the region")
        self.open.setflags(write=False)
        self.mask.setflags(write=False)

    @classmethod
    def from_edges(cls, region, open_edges=(), radius: int | None = None) -> "Configuration":
        region = canonical_edges(region)
        open_edges = canonical_edges(open_edges)
        if radius is None:
            radius = _grid.radius_for(region)
        mask = _grid.mask_from_edges(region, radius)
        op = _grid.mask_from_edges(open_edges, radius)
        return cls(radius, op & mask, mask)

    def region(self) -> np.ndarray:
        return _grid.edges_from_mask(self.mask, self.radius)

    def open_edges(self) -> np.ndarray:
        return _grid.edges_from_mask(self.open, self.radius)

    def covers(self, edges) -> bool:
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 3)
        if len(e) == 0:
            return True
        if not _grid.in_box(e, self.radius).all():
            return False
        return bool(self.mask[_grid.index(e, self.radius)].all())

    def is_open(self, e) -> bool:
        x, y, o = e
        if not self.covers([(x, y, o)]):
            raise KeyError(f"edge {tuple(e)} is outside the configuration's region")
        return bool(self.open[o, x + self.radius, y + self.radius])

    def status(self, edges) -> np.ndarray:
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 3)
        if not self.covers(e):
            raise KeyError("some edges are outside the configuration's region")
        return np.asarray(self.open[_grid.index(e, self.radius)])

    def with_status(self, e, is_open: bool) -> "Configuration":
        x, y, o = e
        if not self.covers([(x, y, o)]):
            raise KeyError(f"edge {tuple(e)} is outside the configuration's region")
        op = self.open.copy()
        op[o, x + self.radius, y + self.radius] = bool(is_open)
        return Configuration(self.radius, op, self.mask.copy())

    def restrict(self, edges) -> "Configuration":
        m = _grid.mask_from_edges(edges, self.radius) & self.mask
        return Configuration(self.radius, self.open & m, m)

    def on_grid(self, radius: int) -> "Configuration":
        return Configuration(
            radius,
            _grid.regrid(self.open, self.radius, radius, False),
            _grid.regrid(self.mask, self.radius, radius, False),
        )

    def same_as(self, other: "Configuration") -> bool:
        r = max(self.radius, other.radius)
        a, b = self.on_grid(r), other.on_grid(r)
        return bool(np.array_equal(a.mask, b.mask) and np.array_equal(a.open, b.open))


def sample_weights(region, seed: int, radius: int | None = None) -> WeightField:
    """Fresh uniform weights on ``region``, a deterministic function of the seed.

    Each edge's weight depends only on ``(seed, edge)``, so the result does not
    depend on how the region is enumerated.
    """
    region = canonical_edges(region)
    if radius is None:
        radius = _grid.radius_for(region)
    mask = _grid.mask_from_edges(region, radius)
    d = _grid.side(radius)
    w = np.full((2, d, d), np.nan)
    k1, k2 = seed_keys(seed)
    fill_weights(k1, k2, radius, mask, w)
    return WeightField(radius, w, normalize_seed(seed), 0)


def sample_box(n: int, seed: int, radius: int | None = None) -> WeightField:
    """Weights on all edges of S(n); the fast path used by the experiments."""
    radius = n if radius is None else radius
    if radius < n:
        raise ValueError("grid radius must be at least the box radius")
    d = _grid.side(radius)
    w = np.empty((2, d, d))
    k1, k2 = seed_keys(seed)
    fill_box_weights(k1, k2, radius, n, w)
    return WeightField(radius, w, normalize_seed(seed), 0)


def field_from_values(values, seed: int = 0, radius: int | None = None) -> WeightField:
    """Build a field from explicit ``{edge: weight}`` pairs (hand-made fixtures)."""
    items = list(values.items()) if hasattr(values, "items") else list(values)
    edges = np.array([tuple(e) for e, _ in items], dtype=np.int64).reshape(-1, 3)
    ws = np.array([w for _, w in items], dtype=float)
    if np.any((ws <= 0) | (ws >= 1)):
        raise ValueError("weights must lie strictly inside (0, 1)")
    if len(canonical_edges(edges)) != len(edges):
        raise ValueError("duplicate edges")
    if radius is None:
        radius = _grid.radius_for(edges)
    d = _grid.side(radius)
    w = np.full((2, d, d), np.nan)
    if len(edges):
        w[_grid.index(edges, radius)] = ws
    return WeightField(radius, w, normalize_seed(seed), 0)


def resample_region(wf: WeightField, sub, seed2: int) -> WeightField:
    """Redraw the weights on ``sub`` from ``seed2``; everything else is kept bit for bit."""
    if isinstance(sub, np.ndarray) and sub.dtype == bool:
        sub_mask = sub
        if sub_mask.shape != wf.weights.shape:
            raise ValueError("mask shape does not match the field's grid")
    else:
        sub = canonical_edges(sub)
        if not wf.covers(sub):
            raise ValueError("resampled edges must be a subset of the field's region")
        sub_mask = _grid.mask_from_edges(sub, wf.radius)
    if np.any(sub_mask & np.isnan(wf.weights)):
        raise ValueError("resampled edges must be a subset of the field's region")
    w = wf.weights.copy()
    k1, k2 = seed_keys(seed2)
    fill_weights(k1, k2, wf.radius, sub_mask, w)
    return WeightField(wf.radius, w, wf.seed, wf.generation + 1)


def threshold_config(wf: WeightField, p: float) -> Configuration:
    """Edge open iff its weight is strictly below ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    mask = wf.mask
    with np.errstate(invalid="ignore"):
        op = (wf.weights < p) & mask
    return Configuration(wf.radius, op, mask)


_HEADER = struct.Struct("<4sHiQQq")


def dump_field(wf: WeightField, path) -> None:
    """Binary dump: magic, version, grid radius, seed, generation, edge count,
    then edge triples (int32) and weights (float64) in canonical order."""
    region = wf.region()
    vals = wf.values(region)
    with open(Path(path), "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, wf.radius, wf.seed, wf.generation, len(region)))
        fh.write(region.astype("<i4").tobytes())
        fh.write(vals.astype("<f8").tobytes())


def load_field(path) -> WeightField:
    data = Path(path).read_bytes()
    magic, version, radius, seed, gen, m = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError("not a weight field dump (bad magic)")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported weight field format version {version}")
    off = _HEADER.size
    edges = np.frombuffer(data, dtype="<i4", count=3 * m, offset=off).reshape(m, 3).astype(np.int64)
    off += 12 * m
    vals = np.frombuffer(data, dtype="<f8", count=m, offset=off)
    d = _grid.side(radius)
    w = np.full((2, d, d), np.nan)
    if m:
        w[_grid.index(edges, radius)] = vals
    return WeightField(radius, w, seed, gen)
