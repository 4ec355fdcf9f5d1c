"""
Arm events, circuit events and box crossings.

All detectors work on a weight grid directly: an edge is p-open when its
weight is below ``p`` and q-closed when its weight is at least ``q``, so
one field serves every pair of levels.

Conventions for the annulus Ann(s, n) around a centre c:

* primal arms run through annulus sites; an open arm *touches* the inner
  (outer) boundary when its cluster contains a site at sup-distance s (n);
* dual arms run through unit squares whose four corners lie in the annulus,
  stepping across non-loop annulus edges; a closed dual cluster touches the
  inner boundary when it contains the square just outside a q-closed edge
  of the inner loop, and the outer boundary likewise with the square just
  inside a q-closed edge of the outer loop.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import _grid
from ._parallel import map_chunks
from .crossings import ring_sites
from .errors import DomainError
from .lattice import Site
from .rng import derive_seed, hash_weight, seed_keys
from .stats import EstimateWithCI, wilson
from .weights import WeightField

__all__ = [
    "PerArm",
    "Total",
    "ArmEventSpec",
    "FourArmResult",
    "CorrelationLengthEstimate",
    "detect_circuit_event",
    "detect_four_arm",
    "four_arm_details",
    "estimate_arm_probability",
    "rectangle_crossing_probability",
    "estimate_correlation_length",
    "estimate_p_n",
    "write_arm_csv",
]


@dataclass(frozen=True)
class PerArm:
    """Each of the four arms may carry at most ``k`` defects."""

    k: int

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("defect budget must be nonnegative")


@dataclass(frozen=True)
class Total:
    """The four arms together may carry at most ``m`` defects."""

    m: int

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("defect budget must be nonnegative")


@dataclass(frozen=True)
class ArmEventSpec:
    """Alternating four-arm event between scales ``s`` and ``n``.

    Arms alternate p-open (primal) and q-closed (dual).  ``budget`` is None,
    :class:`PerArm` or :class:`Total`; ``rotations`` is the number of sector
    placements tried by the approximate detector used for positive budgets.
    """

    p: float
    q: float
    s: int
    n: int
    center: Site = Site(0, 0)
    budget: PerArm | Total | None = None
    rotations: int = 8

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0 and 0.0 <= self.q <= 1.0):
            raise ValueError("p and q must lie in [0, 1]")
        if not 1 <= self.s < self.n:
            raise ValueError("need 1 <= s < n")
        if self.rotations < 1:
            raise ValueError("rotations must be positive")
        object.__setattr__(self, "center", Site(*self.center))

    @property
    def exact(self) -> bool:
        b = self.budget
        return b is None or (isinstance(b, PerArm) and b.k == 0) or (isinstance(b, Total) and b.m == 0)

    def label(self) -> str:
        b = self.budget
        if b is None:
            tag = "none"
        elif isinstance(b, PerArm):
            tag = f"per_arm:{b.k}"
        else:
            tag = f"total:{b.m}"
        return tag


# ---------------------------------------------------------------------------
# union-find

@njit(cache=True, inline="always")
def _find(par, x):
    while par[x] != x:
        par[x] = par[par[x]]
        x = par[x]
    return x


@njit(cache=True, inline="always")
def _union(par, a, b):
    ra = _find(par, a)
    rb = _find(par, b)
    if ra != rb:
        if ra < rb:
            par[rb] = ra
        else:
            par[ra] = rb


@njit(cache=True, inline="always")
def _dist(i, j, radius, cx, cy):
    return max(abs(i - radius - cx), abs(j - radius - cy))


@njit(cache=True, inline="always")
def _sq_ok(i, j, radius, cx, cy, a, b):
    for di in range(2):
        for dj in range(2):
            t = _dist(i + di, j + dj, radius, cx, cy)
            if t < a or t > b:
                return False
    return True


@njit(cache=True)
def _loop_step(x1, y1, x2, y2):
    """Edge (o, ex, ey) joining consecutive counterclockwise ring sites and the
    lower-left corner of the square on the right of the step (outside the ring)."""
    dx = x2 - x1
    dy = y2 - y1
    if dy == 1:
        return 1, x1, y1, x1, y1
    if dx == -1:
        return 0, x2, y1, x2, y1
    if dy == -1:
        return 1, x1, y2, x1 - 1, y2
    return 0, x1, y1, x1, y1 - 1


@njit(cache=True)
def _inside_square(x1, y1, x2, y2):
    """Lower-left corner of the square on the left of a counterclockwise step
    along a ring (inside the ring)."""
    if y2 - y1 == 1:
        return x1 - 1, y1
    if x2 - x1 == -1:
        return x2, y1 - 1
    if y2 - y1 == -1:
        return x1, y2
    return x1, y1


# ---------------------------------------------------------------------------
# exact four-arm detection

@njit(cache=True)
def _alternating(typ, lab, m):
    """Does the cyclic sequence contain open, closed, open, closed entries
    with the two open labels distinct and the two closed labels distinct?"""
    if m < 4:
        return False
    for i in range(m):
        if typ[i] != 0:
            continue
        a = lab[i]
        for t1 in range(1, m):
            j = (i + t1) % m
            if typ[j] != 1:
                continue
            x = lab[j]
            t2 = t1 + 1
            while t2 < m:
                k = (i + t2) % m
                if typ[k] == 0 and lab[k] != a:
                    break
                t2 += 1
            if t2 >= m:
                continue
            for t3 in range(t2 + 1, m):
                l = (i + t3) % m
                if typ[l] == 1 and lab[l] != x:
                    return True
    return False


@njit(cache=True)
def four_arm_exact_kernel(W, radius, cx, cy, s, n, p, q):
    """Exact alternating four-arm detection with defect-free arms.

    Returns (event, number of crossing open clusters, number of crossing
    closed dual clusters).
    """
    d = 2 * radius + 1
    ci = cx + radius
    cj = cy + radius
    lo_i = ci - n
    hi_i = ci + n
    lo_j = cj - n
    hi_j = cj + n
    par = np.arange(d * d)
    dpar = np.arange(d * d)
    for i in range(lo_i, hi_i + 1):
        for j in range(lo_j, hi_j + 1):
            t = _dist(i, j, radius, cx, cy)
            if t < s:
                continue
            if i < hi_i and _dist(i + 1, j, radius, cx, cy) >= s and W[0, i, j] < p:
                _union(par, i * d + j, (i + 1) * d + j)
            if j < hi_j and _dist(i, j + 1, radius, cx, cy) >= s and W[1, i, j] < p:
                _union(par, i * d + j, i * d + j + 1)
    # dual clusters over valid squares
    for i in range(lo_i, hi_i):
        for j in range(lo_j, hi_j):
            if not _sq_ok(i, j, radius, cx, cy, s, n):
                continue
            if i + 1 < hi_i and _sq_ok(i + 1, j, radius, cx, cy, s, n) and W[1, i + 1, j] >= q:
                _union(dpar, i * d + j, (i + 1) * d + j)
            if j + 1 < hi_j and _sq_ok(i, j + 1, radius, cx, cy, s, n) and W[0, i, j + 1] >= q:
                _union(dpar, i * d + j, i * d + j + 1)
    in_open = np.zeros(d * d, dtype=np.bool_)
    out_open = np.zeros(d * d, dtype=np.bool_)
    in_dual = np.zeros(d * d, dtype=np.bool_)
    out_dual = np.zeros(d * d, dtype=np.bool_)
    inner = ring_sites(ci, cj, s)
    outer = ring_sites(ci, cj, n)
    for k in range(outer.shape[0]):
        out_open[_find(par, outer[k, 0] * d + outer[k, 1])] = True
        k2 = (k + 1) % outer.shape[0]
        o, ex, ey, sx, sy = _loop_step(outer[k, 0], outer[k, 1], outer[k2, 0], outer[k2, 1])
        if W[o, ex, ey] >= q:
            sx, sy = _inside_square(outer[k, 0], outer[k, 1], outer[k2, 0], outer[k2, 1])
            if _sq_ok(sx, sy, radius, cx, cy, s, n):
                out_dual[_find(dpar, sx * d + sy)] = True
    L = inner.shape[0]
    typ = np.empty(2 * L, dtype=np.int64)
    lab = np.empty(2 * L, dtype=np.int64)
    m = 0
    for k in range(L):
        in_open[_find(par, inner[k, 0] * d + inner[k, 1])] = True
        k2 = (k + 1) % L
        o, ex, ey, sx, sy = _loop_step(inner[k, 0], inner[k, 1], inner[k2, 0], inner[k2, 1])
        if W[o, ex, ey] >= q and _sq_ok(sx, sy, radius, cx, cy, s, n):
            in_dual[_find(dpar, sx * d + sy)] = True
    n_open = 0
    n_dual = 0
    for x in range(d * d):
        if in_open[x] and out_open[x]:
            n_open += 1
        if in_dual[x] and out_dual[x]:
            n_dual += 1
    for k in range(L):
        r = _find(par, inner[k, 0] * d + inner[k, 1])
        if in_open[r] and out_open[r]:
            if m == 0 or typ[m - 1] != 0 or lab[m - 1] != r:
                typ[m] = 0
                lab[m] = r
                m += 1
        k2 = (k + 1) % L
        o, ex, ey, sx, sy = _loop_step(inner[k, 0], inner[k, 1], inner[k2, 0], inner[k2, 1])
        if W[o, ex, ey] >= q and _sq_ok(sx, sy, radius, cx, cy, s, n):
            r = _find(dpar, sx * d + sy)
            if in_dual[r] and out_dual[r]:
                if m == 0 or typ[m - 1] != 1 or lab[m - 1] != r:
                    typ[m] = 1
                    lab[m] = r
                    m += 1
    while m > 1 and typ[m - 1] == typ[0] and lab[m - 1] == lab[0]:
        m -= 1
    return _alternating(typ, lab, m), n_open, n_dual


# ---------------------------------------------------------------------------
# sector approximation for defected arms

@njit(cache=True)
def _sector(x, y, theta0):
    a = math.atan2(y, x) - theta0
    two_pi = 2.0 * math.pi
    a = a - two_pi * math.floor(a / two_pi)
    k = int(a / (0.5 * math.pi))
    return 3 if k > 3 else k


@njit(cache=True)
def sector_arm_costs(W, radius, cx, cy, s, n, p, q, theta0):
    """Fewest defects of an open arm and of a closed dual arm inside each of
    the four quarter-plane sectors starting at angle ``theta0``.

    A defect of an open arm is a traversed edge that is not p-open; a defect
    of a closed dual arm is a crossed edge that is not q-closed (including
    the loop edges it enters and leaves through).  Unreachable: 1 << 30.
    """
    d = 2 * radius + 1
    big = 1 << 30
    ci = cx + radius
    cj = cy + radius
    open_cost = np.full(4, big, dtype=np.int64)
    dual_cost = np.full(4, big, dtype=np.int64)
    sec = np.full((d, d), -1, dtype=np.int64)
    ssec = np.full((d, d), -1, dtype=np.int64)
    for i in range(ci - n, ci + n + 1):
        for j in range(cj - n, cj + n + 1):
            t = _dist(i, j, radius, cx, cy)
            if s <= t <= n:
                sec[i, j] = _sector(i - ci, j - cj, theta0)
            if i < ci + n and j < cj + n and _sq_ok(i, j, radius, cx, cy, s, n):
                ssec[i, j] = _sector(i - ci + 0.5, j - cj + 0.5, theta0)
    dist = np.full((d, d), big, dtype=np.int64)
    cap = 6 * d * d + 8
    buf = np.empty(cap, dtype=np.int64)
    inner = ring_sites(ci, cj, s)
    outer = ring_sites(ci, cj, n)
    for k in range(4):
        # open arm
        for i in range(ci - n, ci + n + 1):
            for j in range(cj - n, cj + n + 1):
                dist[i, j] = big
        head = cap // 2
        tail = head
        for t in range(inner.shape[0]):
            i, j = inner[t, 0], inner[t, 1]
            if sec[i, j] == k:
                dist[i, j] = 0
                buf[tail % cap] = i * d + j
                tail += 1
        while head < tail:
            v = buf[head % cap]
            head += 1
            i = v // d
            j = v - i * d
            for dirn in range(4):
                if dirn == 0:
                    ni, nj, o, ei, ej = i + 1, j, 0, i, j
                elif dirn == 1:
                    ni, nj, o, ei, ej = i - 1, j, 0, i - 1, j
                elif dirn == 2:
                    ni, nj, o, ei, ej = i, j + 1, 1, i, j
                else:
                    ni, nj, o, ei, ej = i, j - 1, 1, i, j - 1
                if ni < 0 or nj < 0 or ni >= d or nj >= d or sec[ni, nj] != k:
                    continue
                w = 0 if W[o, ei, ej] < p else 1
                nd = dist[i, j] + w
                if nd < dist[ni, nj]:
                    dist[ni, nj] = nd
                    if w == 0:
                        head -= 1
                        buf[head % cap] = ni * d + nj
                    else:
                        buf[tail % cap] = ni * d + nj
                        tail += 1
        for t in range(outer.shape[0]):
            i, j = outer[t, 0], outer[t, 1]
            if sec[i, j] == k and dist[i, j] < open_cost[k]:
                open_cost[k] = dist[i, j]
        # closed dual arm
        for i in range(ci - n, ci + n + 1):
            for j in range(cj - n, cj + n + 1):
                dist[i, j] = big
        head = cap // 2
        tail = head
        L = inner.shape[0]
        for t in range(L):
            t2 = (t + 1) % L
            o, ex, ey, sx, sy = _loop_step(inner[t, 0], inner[t, 1], inner[t2, 0], inner[t2, 1])
            if ssec[sx, sy] != k:
                continue
            c0 = 0 if W[o, ex, ey] >= q else 1
            if c0 < dist[sx, sy]:
                dist[sx, sy] = c0
                if c0 == 0:
                    head -= 1
                    buf[head % cap] = sx * d + sy
                else:
                    buf[tail % cap] = sx * d + sy
                    tail += 1
        while head < tail:
            v = buf[head % cap]
            head += 1
            i = v // d
            j = v - i * d
            for dirn in range(4):
                if dirn == 0:
                    ni, nj, o, ei, ej = i + 1, j, 1, i + 1, j
                elif dirn == 1:
                    ni, nj, o, ei, ej = i - 1, j, 1, i, j
                elif dirn == 2:
                    ni, nj, o, ei, ej = i, j + 1, 0, i, j + 1
                else:
                    ni, nj, o, ei, ej = i, j - 1, 0, i, j
                if ni < 0 or nj < 0 or ni >= d or nj >= d or ssec[ni, nj] != k:
                    continue
                w = 0 if W[o, ei, ej] >= q else 1
                nd = dist[i, j] + w
                if nd < dist[ni, nj]:
                    dist[ni, nj] = nd
                    if w == 0:
                        head -= 1
                        buf[head % cap] = ni * d + nj
                    else:
                        buf[tail % cap] = ni * d + nj
                        tail += 1
        L = outer.shape[0]
        for t in range(L):
            t2 = (t + 1) % L
            o, ex, ey, sx, sy = _loop_step(outer[t, 0], outer[t, 1], outer[t2, 0], outer[t2, 1])
            sx, sy = _inside_square(outer[t, 0], outer[t, 1], outer[t2, 0], outer[t2, 1])
            if sx < 0 or sy < 0 or sx >= d or sy >= d or ssec[sx, sy] != k:
                continue
            c1 = dist[sx, sy] + (0 if W[o, ex, ey] >= q else 1)
            if c1 < dual_cost[k]:
                dual_cost[k] = c1
    return open_cost, dual_cost


@dataclass(frozen=True)
class FourArmResult:
    """Outcome of a four-arm detection with its provenance.

    ``lower_bound`` is set when the sector approximation was consulted: the
    event is then certified when reported true, but a false answer may miss
    configurations whose arms do not fit into quarter-plane sectors.
    """

    event: bool
    exact_event: bool
    lower_bound: bool
    crossing_open_clusters: int
    crossing_closed_clusters: int
    best_arm_costs: tuple | None = None


def _field_grid(wf: WeightField, spec: ArmEventSpec) -> np.ndarray:
    cx, cy = spec.center
    need = max(abs(cx), abs(cy)) + spec.n + 1
    w = wf if wf.radius >= need else wf.on_grid(need)
    sub = _box_edges_mask(w.radius, cx, cy, spec.n)
    if not bool(w.mask[sub].all()):
        raise DomainError("weight field does not cover the box of the arm event")
    return w


def _box_edges_mask(radius, cx, cy, n):
    d = _grid.side(radius)
    m = np.zeros((2, d, d), dtype=bool)
    i0, j0 = cx + radius, cy + radius
    m[0, i0 - n : i0 + n, j0 - n : j0 + n + 1] = True
    m[1, i0 - n : i0 + n + 1, j0 - n : j0 + n] = True
    return m


def _within_budget(budget, open_cost, dual_cost) -> tuple[bool, tuple | None]:
    best = None
    for opens in ((0, 2), (1, 3)):
        closes = tuple(k for k in range(4) if k not in opens)
        costs = (int(open_cost[opens[0]]), int(dual_cost[closes[0]]), int(open_cost[opens[1]]), int(dual_cost[closes[1]]))
        if isinstance(budget, PerArm):
            ok = max(costs) <= budget.k
        else:
            ok = sum(costs) <= budget.m
        if ok:
            return True, costs
        if best is None or sum(costs) < sum(best):
            best = costs
    return False, best


def four_arm_details(wf: WeightField, spec: ArmEventSpec) -> FourArmResult:
    """Four-arm detection with metadata (see :func:`detect_four_arm`)."""
    w = _field_grid(wf, spec)
    cx, cy = spec.center
    W = np.ascontiguousarray(w.weights)
    ev, no, nd = four_arm_exact_kernel(W, w.radius, cx, cy, spec.s, spec.n, spec.p, spec.q)
    if spec.exact:
        return FourArmResult(bool(ev), bool(ev), False, int(no), int(nd))
    if ev:
        return FourArmResult(True, True, True, int(no), int(nd), (0, 0, 0, 0))
    best = None
    for r in range(spec.rotations):
        theta = 0.5 * math.pi * r / spec.rotations
        oc, dc = sector_arm_costs(W, w.radius, cx, cy, spec.s, spec.n, spec.p, spec.q, theta)
        ok, costs = _within_budget(spec.budget, oc, dc)
        if ok:
            return FourArmResult(True, False, True, int(no), int(nd), costs)
        if costs is not None and (best is None or sum(costs) < sum(best)):
            best = costs
    return FourArmResult(False, False, True, int(no), int(nd), best)


def detect_four_arm(wf: WeightField, spec: ArmEventSpec) -> bool:
    """Alternating p-open / q-closed four-arm event from scale s to scale n.

    Without a defect budget (or with a zero budget) the detection is exact:
    open clusters and closed dual clusters crossing the annulus are labelled
    and the inner loop is walked once to look for open, closed, open, closed
    crossings from four distinct clusters in cyclic order.  With a positive
    budget the exact answer is combined with a sector approximation: the
    annulus is cut into four quarter-plane sectors (tried at ``rotations``
    angular offsets), each sector's cheapest arm of the required colour is
    found by 0/1 shortest paths, and the event is reported when some
    placement meets the budget.  The approximation only ever adds certified
    events, so it is a lower bound on the defected event.

    The cluster walk relies on open and closed arms being unable to cross,
    which holds when ``p <= q``.  For ``p > q`` an edge with weight in
    ``[q, p)`` is both p-open and q-closed, and the result is the event
    that four non-crossing arms alternate, a subset of the path event.
    """
    return four_arm_details(wf, spec).event


# ---------------------------------------------------------------------------
# circuit event A(n, p)

@njit(cache=True)
def _find_pot(par, pot, x):
    # returns root and the offset of x relative to it
    acc = 0
    y = x
    while par[y] != y:
        acc += pot[y]
        y = par[y]
    root = y
    # path compression with offsets
    y = x
    total = acc
    while par[y] != y:
        nxt = par[y]
        step = pot[y]
        par[y] = root
        pot[y] = total
        total -= step
        y = nxt
    return root, acc


@njit(cache=True)
def circuit_event_kernel(W, radius, a, b, p, big_r):
    """Is there a p-open circuit around the origin in Ann(a, b) whose open
    cluster reaches the boundary of S(big_r)?

    Circuits are found with a union-find that records, for every site, how
    many times a path to its root winds across the seam {y = 0, x > 0}
    (equivalently, the sheet of a cyclic cover); closing a cycle with
    inconsistent offsets certifies a cycle of nonzero winding.
    """
    d = 2 * radius + 1
    par = np.arange(d * d)
    pot = np.zeros(d * d, dtype=np.int64)
    wind = np.zeros(d * d, dtype=np.bool_)
    c = radius
    for i in range(c - b, c + b + 1):
        for j in range(c - b, c + b + 1):
            if _dist(i, j, radius, 0, 0) < a:
                continue
            for o in range(2):
                i2 = i + 1 if o == 0 else i
                j2 = j if o == 0 else j + 1
                if i2 > c + b or j2 > c + b:
                    continue
                if _dist(i2, j2, radius, 0, 0) < a:
                    continue
                if not W[o, i, j] < p:
                    continue
                # crossing the seam upward between (x, -1) and (x, 0), x > 0
                step = 1 if (o == 1 and j == c - 1 and i > c) else 0
                u = i * d + j
                v = i2 * d + j2
                ru, ou = _find_pot(par, pot, u)
                rv, ov = _find_pot(par, pot, v)
                if ru == rv:
                    if ov != ou + step:
                        wind[ru] = True
                else:
                    # offset(v) = offset(u) + step
                    par[rv] = ru
                    pot[rv] = ou + step - ov
                    wind[ru] = wind[ru] or wind[rv]
    has_any = False
    for x in range(d * d):
        if par[x] == x and wind[x]:
            has_any = True
            break
    if not has_any:
        return False
    # flood fill from the boundary of S(big_r) over p-open edges
    seen = np.zeros((d, d), dtype=np.bool_)
    queue = np.empty(d * d, dtype=np.int64)
    head = 0
    tail = 0
    ring = ring_sites(c, c, big_r)
    for k in range(ring.shape[0]):
        i, j = ring[k, 0], ring[k, 1]
        seen[i, j] = True
        queue[tail] = i * d + j
        tail += 1
    lo = c - big_r
    hi = c + big_r
    while head < tail:
        v = queue[head]
        head += 1
        i = v // d
        j = v - i * d
        t = _dist(i, j, radius, 0, 0)
        if a <= t <= b:
            r, _ = _find_pot(par, pot, v)
            if wind[r]:
                return True
        for dirn in range(4):
            if dirn == 0:
                ni, nj, o, ei, ej = i + 1, j, 0, i, j
            elif dirn == 1:
                ni, nj, o, ei, ej = i - 1, j, 0, i - 1, j
            elif dirn == 2:
                ni, nj, o, ei, ej = i, j + 1, 1, i, j
            else:
                ni, nj, o, ei, ej = i, j - 1, 1, i, j - 1
            if ni < lo or nj < lo or ni > hi or nj > hi or seen[ni, nj]:
                continue
            if W[o, ei, ej] < p:
                seen[ni, nj] = True
                queue[tail] = ni * d + nj
                tail += 1
    return False


def circuit_event_radii(n: int) -> tuple[int, int]:
    a, b = n // 4, n // 2
    if a < 1 or b <= a:
        raise DomainError("circuit event needs n >= 8 so that Ann(n/4, n/2) is nondegenerate")
    return a, b


def detect_circuit_event(wf: WeightField, n: int, p: float, reach_factor: int = 4) -> bool:
    """A(n, p): a p-open circuit around the origin inside Ann(n/4, n/2) that
    is p-open connected to the boundary of S(reach_factor * n), the finite
    stand-in for infinity."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    a, b = circuit_event_radii(n)
    big = reach_factor * n
    if big < b:
        raise DomainError("reach radius must be at least n/2")
    if not wf.covers_box(big):
        raise DomainError(f"weight field does not cover S({big})")
    return bool(circuit_event_kernel(np.ascontiguousarray(wf.weights), wf.radius, a, b, p, big))


# ---------------------------------------------------------------------------
# Monte Carlo estimation of four-arm probabilities

def _arm_chunk(start, stop, spec: ArmEventSpec, seed: int) -> np.ndarray:
    cx, cy = spec.center
    radius = max(abs(cx), abs(cy)) + spec.n + 1
    d = _grid.side(radius)
    W = np.empty((2, d, d))
    out = np.zeros(stop - start, dtype=bool)
    exact = spec.exact
    for t, k in enumerate(range(start, stop)):
        k1, k2 = seed_keys(derive_seed(seed, k))
        _fill_centered(k1, k2, radius, cx, cy, spec.n, W)
        if exact:
            ev, _, _ = four_arm_exact_kernel(W, radius, cx, cy, spec.s, spec.n, spec.p, spec.q)
            out[t] = ev
        else:
            wf = WeightField(radius, W.copy(), 0)
            out[t] = four_arm_details(wf, spec).event
    return out


@njit(cache=True)
def _fill_centered(k1, k2, radius, cx, cy, n, out):
    d = 2 * radius + 1
    for o in range(2):
        for i in range(d):
            for j in range(d):
                x = i - radius - cx
                y = j - radius - cy
                if o == 0:
                    inside = -n <= x < n and -n <= y <= n
                else:
                    inside = -n <= x <= n and -n <= y < n
                if inside:
                    out[o, i, j] = hash_weight(k1, k2, i - radius, j - radius, o)
                else:
                    out[o, i, j] = np.nan


def arm_sample_field(spec: ArmEventSpec, seed: int, k: int) -> WeightField:
    """The weight field used for sample ``k`` of :func:`estimate_arm_probability`."""
    cx, cy = spec.center
    radius = max(abs(cx), abs(cy)) + spec.n + 1
    d = _grid.side(radius)
    W = np.empty((2, d, d))
    s = derive_seed(seed, k)
    k1, k2 = seed_keys(s)
    _fill_centered(k1, k2, radius, cx, cy, spec.n, W)
    return WeightField(radius, W, s, 0)


def estimate_arm_probability(spec: ArmEventSpec, samples: int, seed: int, workers: int = 1) -> EstimateWithCI:
    """Frequency of the four-arm event over independent fields.

    Sample ``k`` uses the field seeded by ``derive_seed(seed, k)``, so the
    result depends only on ``(spec, samples, seed)``.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    parts = map_chunks(_arm_chunk, samples, (spec, seed), workers)
    hits = int(sum(int(p.sum()) for p in parts))
    return wilson(hits, samples, seed)


# ---------------------------------------------------------------------------
# left-right crossings of rectangles

@njit(cache=True)
def _rect_threshold(k1, k2, w, h, wbuf, ebuf, par):
    """Smallest level at which the rectangle {0..w} x {0..h} has a left-right
    open crossing (the minimax weight over crossing paths)."""
    m = 0
    for x in range(w + 1):
        for y in range(h + 1):
            if x < w:
                wbuf[m] = hash_weight(k1, k2, x, y, 0)
                ebuf[m] = (x * (h + 1) + y) * 2
                m += 1
            if y < h and 0 < x < w:
                wbuf[m] = hash_weight(k1, k2, x, y, 1)
                ebuf[m] = (x * (h + 1) + y) * 2 + 1
                m += 1
    order = np.argsort(wbuf[:m], kind="mergesort")
    nsite = (w + 1) * (h + 1)
    for v in range(nsite + 2):
        par[v] = v
    left = nsite
    right = nsite + 1
    for y in range(h + 1):
        _union(par, y, left)
        _union(par, w * (h + 1) + y, right)
    for t in range(m):
        e = ebuf[order[t]]
        v = e >> 1
        u = v + (h + 1) if (e & 1) == 0 else v + 1
        _union(par, u, v)
        if _find(par, left) == _find(par, right):
            return wbuf[order[t]]
    return 1.0


@njit(cache=True)
def _rect_crossing(k1, k2, w, h, p, par):
    nsite = (w + 1) * (h + 1)
    for v in range(nsite + 2):
        par[v] = v
    left = nsite
    right = nsite + 1
    for y in range(h + 1):
        _union(par, y, left)
        _union(par, w * (h + 1) + y, right)
    for x in range(w + 1):
        for y in range(h + 1):
            v = x * (h + 1) + y
            if x < w and hash_weight(k1, k2, x, y, 0) < p:
                _union(par, v, v + h + 1)
            if y < h and 0 < x < w and hash_weight(k1, k2, x, y, 1) < p:
                _union(par, v, v + 1)
    return _find(par, left) == _find(par, right)


@njit(cache=True)
def _rect_batch(keys1, keys2, w, h, p, thresholds):
    n = keys1.shape[0]
    par = np.empty((w + 1) * (h + 1) + 2, dtype=np.int64)
    out = np.empty(n)
    if thresholds:
        m = 2 * (w + 1) * (h + 1)
        wbuf = np.empty(m)
        ebuf = np.empty(m, dtype=np.int64)
        for k in range(n):
            out[k] = _rect_threshold(keys1[k], keys2[k], w, h, wbuf, ebuf, par)
    else:
        for k in range(n):
            out[k] = 1.0 if _rect_crossing(keys1[k], keys2[k], w, h, p, par) else 0.0
    return out


def _keys(seed: int, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
    k1 = np.empty(stop - start, dtype=np.uint64)
    k2 = np.empty(stop - start, dtype=np.uint64)
    for t, k in enumerate(range(start, stop)):
        k1[t], k2[t] = seed_keys(derive_seed(seed, k))
    return k1, k2


def _rect_chunk(start, stop, w, h, p, seed, thresholds):
    k1, k2 = _keys(seed, start, stop)
    return _rect_batch(k1, k2, w, h, p, thresholds)


def rectangle_field(w: int, h: int, seed: int, k: int) -> WeightField:
    """Weights of sample ``k`` for the rectangle {0..w} x {0..h}."""
    from .lattice import region_edges
    from .weights import sample_weights

    sites = np.array([(x, y) for x in range(w + 1) for y in range(h + 1)])
    return sample_weights(region_edges(sites), derive_seed(seed, k))


def rectangle_crossing_probability(
    w: int, h: int, p: float, samples: int, seed: int, workers: int = 1
) -> EstimateWithCI:
    """Left-right p-open crossing frequency of the rectangle {0..w} x {0..h}.

    A crossing joins the column x = 0 to the column x = w; edges along those
    two columns cannot matter and are skipped.  ``w = h + 1`` is the
    self-dual shape whose crossing probability at p = 1/2 is exactly 1/2.
    """
    if w < 1 or h < 0:
        raise DomainError("rectangle must have positive width")
    if samples < 1:
        raise ValueError("samples must be at least 1")
    parts = map_chunks(_rect_chunk, samples, (w, h, float(p), seed, False), workers, size=5000)
    hits = int(sum(int(x.sum()) for x in parts))
    return wilson(hits, samples, seed)


def crossing_thresholds(w: int, h: int, samples: int, seed: int, workers: int = 1) -> np.ndarray:
    """Per-sample level above which the rectangle is crossed left to right.

    With common random numbers, sample k crosses at level p iff its
    threshold is below p.
    """
    parts = map_chunks(_rect_chunk, samples, (w, h, 0.0, seed, True), workers, size=2000)
    return np.concatenate(parts) if parts else np.zeros(0)


# ---------------------------------------------------------------------------
# correlation length and p_n

@dataclass(frozen=True)
class CorrelationLengthEstimate:
    """Smallest grid scale whose crossing probability clears 1 - delta.

    ``curve`` holds one :class:`EstimateWithCI` per scale in the grid;
    ``L`` is None when no scale qualifies.
    """

    p: float
    delta: float
    L: int | None
    curve: list = field(default_factory=list)
    scales: tuple = ()

    def rows(self):
        return [(n, e.estimate, e.stderr, e.lower) for n, e in zip(self.scales, self.curve)]


def estimate_correlation_length(
    p: float, delta: float, n_grid, samples: int, seed: int, workers: int = 1
) -> CorrelationLengthEstimate:
    """Crossing probability of [0, n]^2 at level p for each n in the grid;
    L is the first n whose Wilson lower bound is at least 1 - delta."""
    if not 0.5 < p <= 1.0:
        raise DomainError("correlation length is defined for p > 1/2")
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    scales = tuple(sorted(int(n) for n in n_grid))
    if not scales or scales[0] < 1:
        raise DomainError("scales must be positive")
    curve = []
    L = None
    for i, n in enumerate(scales):
        est = rectangle_crossing_probability(n, n, p, samples, derive_seed(seed, n), workers)
        curve.append(est)
        if L is None and est.lower >= 1.0 - delta:
            L = n
    return CorrelationLengthEstimate(p, delta, L, curve, scales)


def _lower_bound_below(thr: np.ndarray, p: float, delta: float) -> bool:
    hits = int(np.count_nonzero(thr < p))
    return wilson(hits, len(thr)).lower < 1.0 - delta


def estimate_p_n(
    n: int, delta: float, samples: int, seed: int, tol: float = 1e-3, workers: int = 1
) -> float:
    """Largest p in (1/2, 1) at which the box [0, n]^2 still fails the
    1 - delta crossing criterion, by bisection.

    All levels are evaluated on the same samples (through per-sample
    crossing thresholds), so the predicate is monotone in p and the bisection
    is well posed.  The failing side is p = 1/2 by definition.
    """
    if n < 2:
        raise DomainError("n must be at least 2")
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    if samples < 1:
        raise ValueError("samples must be at least 1")
    thr = crossing_thresholds(n, n, samples, derive_seed(seed, n), workers)
    lo, hi = 0.5, 1.0
    if _lower_bound_below(thr, hi, delta):
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _lower_bound_below(thr, mid, delta):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def write_arm_csv(rows, path) -> None:
    """``rows``: iterable of (spec, estimate).  One line per estimate."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["p", "q", "budget", "center_x", "center_y", "n", "s", "estimate", "stderr", "samples", "seed"])
        for spec, est in rows:
            wr.writerow(
                [spec.p, spec.q, spec.label(), spec.center[0], spec.center[1], spec.n, spec.s,
                 repr(est.estimate), repr(est.stderr), est.samples, est.seed]
            )
