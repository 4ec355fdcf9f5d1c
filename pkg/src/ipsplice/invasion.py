"""
Invasion percolation from the origin.

The cluster starts as the single site at the origin.  At each step the edge
of minimum weight among all edges not yet invaded that touch the cluster is
added (an edge whose endpoints are both already in the cluster is still
eligible).  Ties are broken by canonical edge order.

The frontier is a binary min-heap of ``(weight, edge id)`` pairs.  Each edge
enters the heap at most once, the first time one of its endpoints joins the
cluster, so no lazy deletion is needed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numba import njit

from . import _grid
from .errors import DomainError
from .weights import Configuration, WeightField

__all__ = [
    "StopRule",
    "StopReason",
    "InvasionResult",
    "invade",
    "invasion_configuration",
    "invaded_weight_tail",
    "write_invasion_csv",
]


class StopReason(Enum):
    REACHED_RADIUS = "reached_radius"
    STEP_BUDGET = "step_budget"
    EXHAUSTED_REGION = "exhausted_region"


@dataclass(frozen=True)
class StopRule:
    max_steps: int | None = None
    exit_radius: int | None = None

    def __post_init__(self):
        if self.max_steps is None and self.exit_radius is None:
            raise ValueError("a stop rule needs max_steps, exit_radius, or both")
        if self.max_steps is not None and self.max_steps < 0:
            raise ValueError("max_steps must be nonnegative")
        if self.exit_radius is not None and self.exit_radius < 0:
            raise ValueError("exit_radius must be nonnegative")


@dataclass(frozen=True, eq=False)
class InvasionResult:
    """Invaded edges in step order.

    ``edges[i]`` was invaded at step ``i + 1`` with weight ``weights[i]``.
    ``truncated`` is set when the cluster reached a site with a lattice edge
    outside the field's region before the stop rule fired, in which case the
    run is not an exact invasion of the infinite lattice.
    """

    edges: np.ndarray
    weights: np.ndarray
    sites: np.ndarray
    stop_reason: StopReason
    stop_value: int
    radius: int
    truncated: bool
    invaded_mask: np.ndarray = field(repr=False)

    @property
    def steps(self) -> np.ndarray:
        return np.arange(1, len(self.edges) + 1)

    def __len__(self):
        return len(self.edges)

    def max_distance(self) -> int:
        if len(self.sites) == 0:
            return 0
        return int(np.abs(self.sites).max())


@njit(cache=True, inline="always")
def _less(wa, ia, wb, ib):
    return wa < wb or (wa == wb and ia < ib)


@njit(cache=True)
def _push(hw, hi, size, w, ident):
    k = size
    hw[k] = w
    hi[k] = ident
    while k > 0:
        parent = (k - 1) >> 1
        if _less(hw[k], hi[k], hw[parent], hi[parent]):
            hw[k], hw[parent] = hw[parent], hw[k]
            hi[k], hi[parent] = hi[parent], hi[k]
            k = parent
        else:
            break
    return size + 1


@njit(cache=True)
def _pop(hw, hi, size):
    w0 = hw[0]
    i0 = hi[0]
    size -= 1
    hw[0] = hw[size]
    hi[0] = hi[size]
    k = 0
    while True:
        left = 2 * k + 1
        if left >= size:
            break
        best = left
        right = left + 1
        if right < size and _less(hw[right], hi[right], hw[left], hi[left]):
            best = right
        if _less(hw[best], hi[best], hw[k], hi[k]):
            hw[k], hw[best] = hw[best], hw[k]
            hi[k], hi[best] = hi[best], hi[k]
            k = best
        else:
            break
    return w0, i0, size


@njit(cache=True)
def _add_site(W, known, in_cluster, hw, hi, size, d, i, j):
    """Put a site into the cluster and push its not-yet-known incident edges.

    Returns the new heap size and whether some incident lattice edge is
    missing from the region.
    """
    in_cluster[i, j] = True
    missing = False
    # (orientation, edge i, edge j) for the four incident edges
    for t in range(4):
        if t == 0:
            o, a, b = 0, i, j
        elif t == 1:
            o, a, b = 1, i, j
        elif t == 2:
            o, a, b = 0, i - 1, j
        else:
            o, a, b = 1, i, j - 1
        if a < 0 or b < 0 or a >= d or b >= d:
            missing = True
            continue
        w = W[o, a, b]
        if np.isnan(w):
            missing = True
            continue
        if not known[o, a, b]:
            known[o, a, b] = True
            size = _push(hw, hi, size, w, (a * d + b) * 2 + o)
    return size, missing


@njit(cache=True)
def _invade_kernel(W, radius, max_steps, exit_radius):
    d = 2 * radius + 1
    known = np.zeros((2, d, d), dtype=np.bool_)
    invaded = np.zeros((2, d, d), dtype=np.bool_)
    in_cluster = np.zeros((d, d), dtype=np.bool_)
    cap = 1024
    hw = np.empty(cap)
    hi = np.empty(cap, dtype=np.int64)
    out_cap = 1024
    out_id = np.empty(out_cap, dtype=np.int64)
    out_w = np.empty(out_cap)
    size = 0
    size, truncated = _add_site(W, known, in_cluster, hw, hi, size, d, radius, radius)
    steps = 0
    reason = 2
    if exit_radius == 0:
        return out_id[:0], out_w[:0], in_cluster, invaded, 0, truncated
    while True:
        if max_steps >= 0 and steps >= max_steps:
            reason = 1
            break
        if size == 0:
            reason = 2
            break
        w, ident, size = _pop(hw, hi, size)
        o = ident & 1
        rest = ident >> 1
        a = rest // d
        b = rest - a * d
        invaded[o, a, b] = True
        if steps == out_cap:
            out_cap *= 2
            t_id = np.empty(out_cap, dtype=np.int64)
            t_w = np.empty(out_cap)
            t_id[:steps] = out_id[:steps]
            t_w[:steps] = out_w[:steps]
            out_id = t_id
            out_w = t_w
        out_id[steps] = ident
        out_w[steps] = w
        steps += 1
        a2 = a + 1 if o == 0 else a
        b2 = b if o == 0 else b + 1
        reached = False
        for t in range(2):
            si = a if t == 0 else a2
            sj = b if t == 0 else b2
            if in_cluster[si, sj]:
                continue
            if hw.shape[0] < size + 4:
                ncap = 2 * hw.shape[0]
                t_hw = np.empty(ncap)
                t_hi = np.empty(ncap, dtype=np.int64)
                t_hw[:size] = hw[:size]
                t_hi[:size] = hi[:size]
                hw = t_hw
                hi = t_hi
            dist = max(abs(si - radius), abs(sj - radius))
            size, missing = _add_site(W, known, in_cluster, hw, hi, size, d, si, sj)
            if exit_radius >= 0 and dist >= exit_radius:
                reached = True
            elif missing:
                truncated = True
        if reached:
            reason = 0
            break
    return out_id[:steps], out_w[:steps], in_cluster, invaded, reason, truncated


def _decode(ids: np.ndarray, radius: int) -> np.ndarray:
    d = _grid.side(radius)
    o = ids & 1
    rest = ids >> 1
    a, b = rest // d, rest % d
    return np.column_stack([a - radius, b - radius, o]).astype(np.int64)


def invade(wf: WeightField, stop: StopRule) -> InvasionResult:
    """Grow the invasion cluster of ``wf`` until ``stop`` fires."""
    r = wf.radius
    m = wf.mask
    if r < 1 or not (m[0, r, r] or m[1, r, r] or m[0, r - 1, r] or m[1, r, r - 1]):
        raise DomainError("the origin has no incident edge in the weight field's region")
    if stop.exit_radius is not None and not wf.covers_box(stop.exit_radius):
        raise DomainError(
            f"weight field does not cover S({stop.exit_radius}) required by the stop rule"
        )
    max_steps = -1 if stop.max_steps is None else int(stop.max_steps)
    exit_radius = -1 if stop.exit_radius is None else int(stop.exit_radius)
    ids, ws, in_cluster, invaded, reason, truncated = _invade_kernel(
        np.ascontiguousarray(wf.weights), wf.radius, max_steps, exit_radius
    )
    reason = [StopReason.REACHED_RADIUS, StopReason.STEP_BUDGET, StopReason.EXHAUSTED_REGION][reason]
    value = {
        StopReason.REACHED_RADIUS: exit_radius,
        StopReason.STEP_BUDGET: max_steps,
        StopReason.EXHAUSTED_REGION: len(ids),
    }[reason]
    si, sj = np.nonzero(in_cluster)
    sites = np.column_stack([si - wf.radius, sj - wf.radius]).astype(np.int64)
    return InvasionResult(
        edges=_decode(ids, wf.radius),
        weights=ws.copy(),
        sites=sites,
        stop_reason=reason,
        stop_value=value,
        radius=wf.radius,
        truncated=bool(truncated),
        invaded_mask=invaded,
    )


def invasion_configuration(res: InvasionResult, region) -> Configuration:
    """Invaded edges are open, every other edge of ``region`` closed.

    ``region`` is an edge array, or a boolean mask on the invasion's grid.
    """
    if isinstance(region, np.ndarray) and region.dtype == bool:
        mask = region
        if mask.shape != res.invaded_mask.shape:
            raise ValueError("mask shape does not match the invasion grid")
        return Configuration(res.radius, res.invaded_mask & mask, mask.copy())
    region = np.asarray(region, dtype=np.int64).reshape(-1, 3)
    radius = max(res.radius, _grid.radius_for(region))
    mask = _grid.mask_from_edges(region, radius)
    inv = _grid.regrid(res.invaded_mask, res.radius, radius, False)
    return Configuration(radius, inv & mask, mask)


def invaded_weight_tail(res: InvasionResult, tail_fraction: float) -> float:
    """Largest weight among the last ``tail_fraction`` of invaded edges."""
    if len(res.weights) == 0:
        raise DomainError("empty invasion has no invaded weights")
    if not 0.0 < tail_fraction <= 1.0:
        raise ValueError("tail_fraction must lie in (0, 1]")
    k = max(1, math.ceil(tail_fraction * len(res.weights)))
    return float(res.weights[-k:].max())


def write_invasion_csv(res: InvasionResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "edge_x", "edge_y", "orientation", "weight"])
        for step, (x, y, o), wt in zip(res.steps, res.edges, res.weights):
            w.writerow([int(step), int(x), int(y), "H" if o == 0 else "V", repr(float(wt))])
