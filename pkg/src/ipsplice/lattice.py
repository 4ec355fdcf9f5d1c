"""
Square-lattice geometry: boxes, annuli, edge enumeration and planar duality.

Edge sets are carried around as ``(m, 3)`` integer arrays with columns
``(x, y, orientation)``.  The stored site is the lexicographically smaller
endpoint, so a horizontal edge ``(x, y, 0)`` joins ``(x, y)`` to ``(x + 1, y)``
and a vertical edge ``(x, y, 1)`` joins ``(x, y)`` to ``(x, y + 1)``.  Arrays
returned by this module are sorted in canonical order: by ``x``, then ``y``,
then orientation.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache
from typing import NamedTuple

import numpy as np

__all__ = [
    "Orientation",
    "Site",
    "EdgeId",
    "DualEdge",
    "AnnulusSpec",
    "box_sites",
    "annulus_sites",
    "region_edges",
    "box_edges",
    "dual_edge",
    "graph_boundary",
    "canonical_edges",
    "edge_endpoints",
    "sup_norm",
]


class Orientation(IntEnum):
    HORIZONTAL = 0
    VERTICAL = 1


class Site(NamedTuple):
    x: int
    y: int


class EdgeId(NamedTuple):
    """Canonical primal edge: the smaller endpoint and an orientation."""

    x: int
    y: int
    orientation: Orientation

    @property
    def site(self) -> Site:
        return Site(self.x, self.y)

    @property
    def endpoints(self) -> tuple[Site, Site]:
        if self.orientation == Orientation.HORIZONTAL:
            return Site(self.x, self.y), Site(self.x + 1, self.y)
        return Site(self.x, self.y), Site(self.x, self.y + 1)

    @classmethod
    def between(cls, a, b) -> "EdgeId":
        """Edge joining two nearest-neighbour sites, in either order."""
        (ax, ay), (bx, by) = a, b
        if abs(ax - bx) + abs(ay - by) != 1:
            raise ValueError(f"sites {a} and {b} are not nearest neighbours")
        if (bx, by) < (ax, ay):
            ax, ay, bx, by = bx, by, ax, ay
        o = Orientation.HORIZONTAL if bx != ax else Orientation.VERTICAL
        return cls(ax, ay, o)


@dataclass(frozen=True)
class DualEdge:
    """Edge of the shifted lattice (1/2, 1/2) + Z^2.

    It is identified with the primal edge it crosses; status and weight are
    inherited from that edge.
    """

    primal: EdgeId

    @property
    def endpoints(self) -> tuple[tuple[float, float], tuple[float, float]]:
        x, y, o = self.primal
        if o == Orientation.HORIZONTAL:
            return (x + 0.5, y - 0.5), (x + 0.5, y + 0.5)
        return (x - 0.5, y + 0.5), (x + 0.5, y + 0.5)

    @property
    def orientation(self) -> Orientation:
        # a dual edge is perpendicular to the primal edge it crosses
        return Orientation(1 - int(self.primal.orientation))


def dual_edge(e):
    """Map a primal edge to the dual edge crossing it, and back.

    ``dual_edge(dual_edge(e)) == e`` for every primal edge.
    """
    if isinstance(e, DualEdge):
        return e.primal
    x, y, o = e
    return DualEdge(EdgeId(int(x), int(y), Orientation(int(o))))


def sup_norm(sites, center=(0, 0)) -> np.ndarray:
    sites = np.asarray(sites)
    return np.maximum(np.abs(sites[..., 0] - center[0]), np.abs(sites[..., 1] - center[1]))


def box_sites(n: int, center=(0, 0)) -> np.ndarray:
    """Sites of the sup-norm box S(n) = [-n, n]^2, sorted by (x, y)."""
    if n < 0:
        raise ValueError("box radius must be nonnegative")
    r = np.arange(-n, n + 1)
    xs, ys = np.meshgrid(r + center[0], r + center[1], indexing="ij")
    return np.stack([xs.ravel(), ys.ravel()], axis=1)


def annulus_sites(inner: int, outer: int, center=(0, 0)) -> np.ndarray:
    s = box_sites(outer, center)
    d = sup_norm(s, center)
    return s[d >= inner]


def canonical_edges(edges) -> np.ndarray:
    """Deduplicate and sort an edge array into canonical order."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 3)
    if len(e) == 0:
        return e
    e = e[np.lexsort((e[:, 2], e[:, 1], e[:, 0]))]
    keep = np.ones(len(e), dtype=bool)
    keep[1:] = np.any(e[1:] != e[:-1], axis=1)
    return e[keep]


def edge_endpoints(edges) -> tuple[np.ndarray, np.ndarray]:
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 3)
    a = e[:, :2]
    b = a.copy()
    b[:, 0] += e[:, 2] == 0
    b[:, 1] += e[:, 2] == 1
    return a, b


def _site_keys(sites: np.ndarray) -> np.ndarray:
    sites = np.asarray(sites, dtype=np.int64).reshape(-1, 2)
    return (sites[:, 0] << 32) + sites[:, 1]


def region_edges(sites) -> np.ndarray:
    """All edges with both endpoints in ``sites``, in canonical order."""
    sites = np.asarray(sites, dtype=np.int64).reshape(-1, 2)
    if len(sites) == 0:
        return np.empty((0, 3), dtype=np.int64)
    keys = np.unique(_site_keys(sites))
    out = []
    for o, (dx, dy) in enumerate(((1, 0), (0, 1))):
        nb = sites + (dx, dy)
        hit = np.isin(_site_keys(nb), keys)
        s = sites[hit]
        out.append(np.column_stack([s, np.full(len(s), o)]))
    return canonical_edges(np.concatenate(out))


def box_edges(n: int, center=(0, 0)) -> np.ndarray:
    return region_edges(box_sites(n, center))


def graph_boundary(sites, edges) -> np.ndarray:
    """Edge boundary of a subgraph: edges not in it with an endpoint in it."""
    sites = np.asarray(sites, dtype=np.int64).reshape(-1, 2)
    edges = canonical_edges(edges)
    cand = [
        np.column_stack([sites, np.zeros(len(sites), np.int64)]),
        np.column_stack([sites, np.ones(len(sites), np.int64)]),
        np.column_stack([sites - (1, 0), np.zeros(len(sites), np.int64)]),
        np.column_stack([sites - (0, 1), np.ones(len(sites), np.int64)]),
    ]
    cand = canonical_edges(np.concatenate(cand))
    if len(edges) == 0:
        return cand
    keep = ~_rows_in(cand, edges)
    return cand[keep]


def _rows_in(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ka = (a[:, 0] << 33) + (a[:, 1] << 1) + a[:, 2]
    kb = (b[:, 0] << 33) + (b[:, 1] << 1) + b[:, 2]
    return np.isin(ka, kb)


@lru_cache(maxsize=64)
def _annulus_edges(inner: int, outer: int, cx: int, cy: int) -> np.ndarray:
    e = region_edges(annulus_sites(inner, outer, (cx, cy)))
    e.setflags(write=False)
    return e


@dataclass(frozen=True)
class AnnulusSpec:
    """Sites ``s`` with ``inner <= |s - center|_inf <= outer``."""

    inner: int
    outer: int
    center: Site = Site(0, 0)

    def __post_init__(self):
        if not (0 < self.inner < self.outer):
            raise ValueError(
                f"annulus needs 0 < inner < outer, got inner={self.inner}, outer={self.outer}"
            )
        object.__setattr__(self, "center", Site(*self.center))

    @classmethod
    def half(cls, n: int, center=(0, 0)) -> "AnnulusSpec":
        """The annulus between S(floor(n/2)) and S(n)."""
        return cls(n // 2, n, Site(*center))

    def sites(self) -> np.ndarray:
        return annulus_sites(self.inner, self.outer, self.center)

    def edges(self) -> np.ndarray:
        return _annulus_edges(self.inner, self.outer, self.center[0], self.center[1])

    def inner_boundary(self) -> np.ndarray:
        s = self.sites()
        return s[sup_norm(s, self.center) == self.inner]

    def outer_boundary(self) -> np.ndarray:
        s = self.sites()
        return s[sup_norm(s, self.center) == self.outer]

    def contains(self, site) -> bool:
        d = max(abs(site[0] - self.center[0]), abs(site[1] - self.center[1]))
        return self.inner <= d <= self.outer

    def contains_edge(self, e) -> bool:
        a, b = EdgeId(*e).endpoints
        return self.contains(a) and self.contains(b)
