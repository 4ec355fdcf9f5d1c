"""
Disjoint open crossings of an annulus and their dual certificates.

``count_disjoint_crossings`` is a unit-capacity max-flow between the inner
boundary (all sites contracted into a source) and the outer boundary
(contracted into a sink); "disjoint" means edge-disjoint.  By max-flow/min-cut
the same number is the fewest open edges crossed by a dual circuit that
separates the two boundaries, which ``min_defect_circuit`` computes
independently as a shortest closed walk of winding number one in a cyclic
cover of the dual graph, cut open along the seam {y = center_y, x >= center_x}.

Dual vertices are the unit squares all of whose corners lie in the annulus;
a square is identified by its lower-left corner.  Two squares sharing an edge
are joined by the dual edge crossing it, with cost 1 if that primal edge is
open (a *defect*) and 0 otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _grid
from .errors import DomainError
from .lattice import AnnulusSpec, EdgeId
from .weights import Configuration

__all__ = [
    "CrossingCount",
    "DefectCircuit",
    "count_disjoint_crossings",
    "crossing_number",
    "min_defect_circuit",
    "circuit_through_edge",
    "brute_force_crossings",
    "check_circuit",
    "flip_budget_check",
]

_SHEETS = 8
_SHEET0 = 3
_INF = 1 << 30


# ---------------------------------------------------------------------------
# kernels

@njit(cache=True, inline="always")
def _dist(i, j, radius, cx, cy):
    return max(abs(i - radius - cx), abs(j - radius - cy))


@njit(cache=True)
def ring_sites(ci, cj, r):
    """Grid indices of the sup-norm circle of radius r, counterclockwise from (ci + r, cj)."""
    if r == 0:
        out = np.empty((1, 2), dtype=np.int64)
        out[0, 0] = ci
        out[0, 1] = cj
        return out
    out = np.empty((8 * r, 2), dtype=np.int64)
    k = 0
    for y in range(0, r):
        out[k, 0] = ci + r
        out[k, 1] = cj + y
        k += 1
    for x in range(r, -r, -1):
        out[k, 0] = ci + x
        out[k, 1] = cj + r
        k += 1
    for y in range(r, -r, -1):
        out[k, 0] = ci - r
        out[k, 1] = cj + y
        k += 1
    for x in range(-r, r):
        out[k, 0] = ci + x
        out[k, 1] = cj - r
        k += 1
    for y in range(-r, 0):
        out[k, 0] = ci + r
        out[k, 1] = cj + y
        k += 1
    return out


@njit(cache=True)
def maxflow_kernel(open_, radius, cx, cy, a, b, flow, stamp, parent, limit):
    """Edge-disjoint augmenting paths from the inner to the outer circle.

    ``flow[o, i, j]`` is +1 when the edge carries flow from its smaller to its
    larger endpoint and -1 for the reverse.  On return with ``limit < 0``, the
    sites with ``stamp == it`` are those reachable from the source in the
    final residual graph.
    """
    d = 2 * radius + 1
    src = ring_sites(cx + radius, cy + radius, a)
    queue = np.empty(d * d, dtype=np.int64)
    n = 0
    it = stamp.max()
    while True:
        if limit >= 0 and n >= limit:
            break
        it += 1
        head = 0
        tail = 0
        for k in range(src.shape[0]):
            stamp[src[k, 0], src[k, 1]] = it
            queue[tail] = src[k, 0] * d + src[k, 1]
            tail += 1
        found = -1
        while head < tail and found < 0:
            s = queue[head]
            head += 1
            i = s // d
            j = s - i * d
            for dirn in range(4):
                if dirn == 0:
                    ni, nj, o, ei, ej = i + 1, j, 0, i, j
                elif dirn == 1:
                    ni, nj, o, ei, ej = i - 1, j, 0, i - 1, j
                elif dirn == 2:
                    ni, nj, o, ei, ej = i, j + 1, 1, i, j
                else:
                    ni, nj, o, ei, ej = i, j - 1, 1, i, j - 1
                if ni < 0 or nj < 0 or ni >= d or nj >= d:
                    continue
                if stamp[ni, nj] == it:
                    continue
                if not open_[o, ei, ej]:
                    continue
                dn = _dist(ni, nj, radius, cx, cy)
                if dn < a or dn > b:
                    continue
                if dirn == 0 or dirn == 2:
                    res = 1 - flow[o, ei, ej]
                else:
                    res = 1 + flow[o, ei, ej]
                if res <= 0:
                    continue
                stamp[ni, nj] = it
                parent[ni, nj] = dirn
                if dn == b:
                    found = ni * d + nj
                    break
                queue[tail] = ni * d + nj
                tail += 1
        if found < 0:
            break
        s = found
        while True:
            i = s // d
            j = s - i * d
            if _dist(i, j, radius, cx, cy) == a:
                break
            dirn = parent[i, j]
            if dirn == 0:
                flow[0, i - 1, j] += 1
                s = (i - 1) * d + j
            elif dirn == 1:
                flow[0, i, j] -= 1
                s = (i + 1) * d + j
            elif dirn == 2:
                flow[1, i, j - 1] += 1
                s = i * d + j - 1
            else:
                flow[1, i, j] -= 1
                s = i * d + j + 1
        n += 1
    return n, it


@njit(cache=True)
def crossing_number_kernel(open_, radius, cx, cy, a, b):
    d = 2 * radius + 1
    flow = np.zeros((2, d, d), dtype=np.int8)
    stamp = np.zeros((d, d), dtype=np.int32)
    parent = np.zeros((d, d), dtype=np.int8)
    n, _ = maxflow_kernel(open_, radius, cx, cy, a, b, flow, stamp, parent, -1)
    return n


@njit(cache=True, inline="always")
def _site_in(i, j, radius, cx, cy, a, b, d):
    if i < 0 or j < 0 or i >= d or j >= d:
        return False
    t = _dist(i, j, radius, cx, cy)
    return a <= t <= b


@njit(cache=True)
def square_ok(i, j, radius, cx, cy, a, b):
    d = 2 * radius + 1
    return (
        _site_in(i, j, radius, cx, cy, a, b, d)
        and _site_in(i + 1, j, radius, cx, cy, a, b, d)
        and _site_in(i, j + 1, radius, cx, cy, a, b, d)
        and _site_in(i + 1, j + 1, radius, cx, cy, a, b, d)
    )


@njit(cache=True)
def cover_bfs(open_, radius, cx, cy, a, b, si, sj, ssheet, excl_o, excl_i, excl_j, dist, parent):
    """0/1 shortest paths in the cyclic cover of the dual graph from one node.

    Node id is ``(sheet * d + i) * d + j`` for the square with lower-left grid
    corner ``(i, j)``; crossing the seam upward moves one sheet up.
    """
    d = 2 * radius + 1
    nsheet = dist.shape[0]
    for t in range(nsheet):
        for i in range(d):
            for j in range(d):
                dist[t, i, j] = 1 << 30
    cap = 6 * nsheet * d * d + 8
    buf = np.empty(cap, dtype=np.int64)
    head = cap // 2
    tail = head
    dist[ssheet, si, sj] = 0
    parent[ssheet, si, sj] = -1
    buf[tail % cap] = (ssheet * d + si) * d + sj
    tail += 1
    while head < tail:
        node = buf[head % cap]
        head += 1
        sh = node // (d * d)
        rest = node - sh * d * d
        i = rest // d
        j = rest - i * d
        du = dist[sh, i, j]
        for dirn in range(4):
            nsh = sh
            if dirn == 0:
                ni, nj, o, ei, ej = i + 1, j, 1, i + 1, j
            elif dirn == 1:
                ni, nj, o, ei, ej = i - 1, j, 1, i, j
            elif dirn == 2:
                ni, nj, o, ei, ej = i, j + 1, 0, i, j + 1
                if ej - radius == cy and ei - radius >= cx:
                    nsh = sh + 1
            else:
                ni, nj, o, ei, ej = i, j - 1, 0, i, j
                if ej - radius == cy and ei - radius >= cx:
                    nsh = sh - 1
            if nsh < 0 or nsh >= nsheet:
                continue
            if o == excl_o and ei == excl_i and ej == excl_j:
                continue
            if ni < 0 or nj < 0 or ni >= d - 1 or nj >= d - 1:
                continue
            if not square_ok(ni, nj, radius, cx, cy, a, b):
                continue
            w = 1 if open_[o, ei, ej] else 0
            nd = du + w
            if nd < dist[nsh, ni, nj]:
                dist[nsh, ni, nj] = nd
                parent[nsh, ni, nj] = node
                nid = (nsh * d + ni) * d + nj
                if w == 0:
                    head -= 1
                    buf[head % cap] = nid
                else:
                    buf[tail % cap] = nid
                    tail += 1
    return 0


@njit(cache=True)
def _edge_squares(o, ei, ej, radius, cy, cx):
    """The two squares sharing a primal edge, ordered so that moving from the
    first to the second crosses the seam upward when the edge is on the seam."""
    if o == 0:
        f1i, f1j, f2i, f2j = ei, ej - 1, ei, ej
        sigma = 1 if (ej - radius == cy and ei - radius >= cx) else 0
    else:
        f1i, f1j, f2i, f2j = ei - 1, ej, ei, ej
        sigma = 0
    return f1i, f1j, f2i, f2j, sigma


@njit(cache=True)
def circuit_through_cost(open_, radius, cx, cy, a, b, o, ei, ej, dist, parent):
    """Least defect count of a winding-one dual closed walk using the given
    edge exactly once; returns (cost, orientation flag) or (-1, 0)."""
    f1i, f1j, f2i, f2j, sigma = _edge_squares(o, ei, ej, radius, cy, cx)
    if not (square_ok(f1i, f1j, radius, cx, cy, a, b) and square_ok(f2i, f2j, radius, cx, cy, a, b)):
        return -1, 0
    c = 1 if open_[o, ei, ej] else 0
    best = -1
    which = 0
    # f1 -> f2 across the edge, then back to f1 one sheet up
    cover_bfs(open_, radius, cx, cy, a, b, f2i, f2j, _SHEET0 + sigma, o, ei, ej, dist, parent)
    t = dist[_SHEET0 + 1, f1i, f1j]
    if t < (1 << 30):
        best = t + c
        which = 1
    cover_bfs(open_, radius, cx, cy, a, b, f1i, f1j, _SHEET0 - sigma, o, ei, ej, dist, parent)
    t = dist[_SHEET0 + 1, f2i, f2j]
    if t < (1 << 30) and (best < 0 or t + c < best):
        best = t + c
        which = 2
    return best, which


@njit(cache=True)
def min_circuit_cost(open_, radius, cx, cy, a, b, dist, parent):
    """Least defect count over all winding-one closed dual walks, and the
    seam-adjacent square where it is attained."""
    best = -1
    best_k = -1
    for k in range(a, b):
        ui = cx + k + radius
        uj = cy + radius
        if not square_ok(ui, uj, radius, cx, cy, a, b):
            continue
        cover_bfs(open_, radius, cx, cy, a, b, ui, uj, _SHEET0, -1, -1, -1, dist, parent)
        t = dist[_SHEET0 + 1, ui, uj]
        if t < (1 << 30) and (best < 0 or t < best):
            best = t
            best_k = k
            if best == 0:
                break
    return best, best_k


@njit(cache=True)
def flip_budget_scan(open_, radius, cx, cy, a, b):
    """Single-edge flips of one configuration.

    Returns (pivotal edge count, flips changing N by other than one,
    pivotal edges with no dual circuit through them within N defects).
    """
    d = 2 * radius + 1
    n0 = crossing_number_kernel(open_, radius, cx, cy, a, b)
    work = open_.copy()
    dist = np.empty((_SHEETS, d, d), dtype=np.int64)
    parent = np.empty((_SHEETS, d, d), dtype=np.int64)
    pivotal = 0
    bad_jump = 0
    missing = 0
    for o in range(2):
        for i in range(d):
            for j in range(d):
                i2 = i + 1 if o == 0 else i
                j2 = j if o == 0 else j + 1
                if i2 >= d or j2 >= d:
                    continue
                if not (_site_in(i, j, radius, cx, cy, a, b, d) and _site_in(i2, j2, radius, cx, cy, a, b, d)):
                    continue
                was = work[o, i, j]
                work[o, i, j] = True
                n_plus = crossing_number_kernel(work, radius, cx, cy, a, b)
                work[o, i, j] = False
                n_minus = crossing_number_kernel(work, radius, cx, cy, a, b)
                work[o, i, j] = was
                if n_plus == n_minus:
                    continue
                pivotal += 1
                if n_plus != n_minus + 1:
                    bad_jump += 1
                cost, _ = circuit_through_cost(open_, radius, cx, cy, a, b, o, i, j, dist, parent)
                if cost < 0 or cost > n0:
                    missing += 1
    return pivotal, bad_jump, missing


# ---------------------------------------------------------------------------
# public API

@dataclass(frozen=True, eq=False)
class CrossingCount:
    """Maximal number of edge-disjoint open crossings with its certificates.

    ``paths`` holds edge-disjoint open walks from the inner to the outer
    boundary (each a list of sites); ``min_cut`` is an edge set whose open
    members number exactly ``value`` and whose removal disconnects the
    boundaries.
    """

    value: int
    paths: list | None
    min_cut: np.ndarray


@dataclass(frozen=True, eq=False)
class DefectCircuit:
    """Closed dual walk around the annulus centre.

    ``squares`` lists the lower-left corners of the visited unit squares
    (closed: first == last); ``crossed`` lists the primal edges crossed, one
    per step.
    """

    squares: np.ndarray
    crossed: np.ndarray
    defects: np.ndarray
    defect_count: int
    simple: bool

    @property
    def dual_vertices(self) -> np.ndarray:
        return self.squares[:-1] + 0.5

    def __len__(self):
        return len(self.crossed)


def _check_annulus(config: Configuration, ann: AnnulusSpec):
    if not isinstance(ann, AnnulusSpec):
        raise DomainError("expected an AnnulusSpec")
    if ann.inner >= ann.outer:
        raise DomainError("degenerate annulus")
    if not config.covers(ann.edges()):
        raise DomainError("configuration does not cover the annulus edges")


def _grid_for(config: Configuration, ann: AnnulusSpec) -> Configuration:
    need = max(abs(ann.center[0]), abs(ann.center[1])) + ann.outer + 1
    if need > config.radius:
        return config.on_grid(need)
    return config


def crossing_number(config: Configuration, ann: AnnulusSpec) -> int:
    """Just the count; no certificates."""
    _check_annulus(config, ann)
    c = _grid_for(config, ann)
    return int(
        crossing_number_kernel(c.open, c.radius, ann.center[0], ann.center[1], ann.inner, ann.outer)
    )


def count_disjoint_crossings(config: Configuration, ann: AnnulusSpec, witness: bool = True) -> CrossingCount:
    _check_annulus(config, ann)
    c = _grid_for(config, ann)
    r = c.radius
    d = _grid.side(r)
    flow = np.zeros((2, d, d), dtype=np.int8)
    stamp = np.zeros((d, d), dtype=np.int32)
    parent = np.zeros((d, d), dtype=np.int8)
    cx, cy = ann.center
    n, it = maxflow_kernel(c.open, r, cx, cy, ann.inner, ann.outer, flow, stamp, parent, -1)
    reach = stamp == it
    edges = ann.edges()
    o, i, j = _grid.index(edges, r)
    i2 = i + (o == 0)
    j2 = j + (o == 1)
    across = reach[i, j] != reach[i2, j2]
    cut = edges[across & c.open[o, i, j]]
    paths = _decompose(flow, r, ann) if witness else None
    return CrossingCount(int(n), paths, cut)


def _decompose(flow: np.ndarray, radius: int, ann: AnnulusSpec) -> list:
    out_edges: dict[tuple, list] = {}
    for o, i, j in zip(*np.nonzero(flow)):
        a = (int(i) - radius, int(j) - radius)
        b = (a[0] + 1, a[1]) if o == 0 else (a[0], a[1] + 1)
        if flow[o, i, j] < 0:
            a, b = b, a
        out_edges.setdefault(a, []).append(b)
    cx, cy = ann.center

    def level(s):
        return max(abs(s[0] - cx), abs(s[1] - cy))

    paths = []
    for start in sorted(out_edges):
        if level(start) != ann.inner:
            continue
        while out_edges.get(start):
            walk = [start]
            cur = start
            while level(cur) != ann.outer or cur == start:
                nxt = out_edges[cur].pop()
                walk.append(nxt)
                cur = nxt
            paths.append(walk)
    return paths


def _reconstruct(parent, radius, node_end, node_start_base, open_) -> list:
    d = _grid.side(radius)
    seq = []
    node = node_end
    while node != -1:
        sh, rest = divmod(int(node), d * d)
        i, j = divmod(rest, d)
        seq.append((sh, i, j))
        node = parent[sh, i, j]
    seq.reverse()
    return seq


def _crossed_edge(p, q):
    """Primal edge (grid indices) shared by two adjacent squares."""
    (i, j), (k, l) = p, q
    if k == i + 1:
        return (1, k, j)
    if k == i - 1:
        return (1, i, j)
    if l == j + 1:
        return (0, i, l)
    return (0, i, j)


def _build_circuit(base, open_, radius) -> DefectCircuit:
    """``base`` is the closed list of squares (grid indices), first == last."""
    crossed = [_crossed_edge(base[t], base[t + 1]) for t in range(len(base) - 1)]
    crossed_xy = np.array([(i - radius, j - radius, o) for o, i, j in crossed], dtype=np.int64).reshape(-1, 3)
    is_def = np.array([bool(open_[o, i, j]) for o, i, j in crossed], dtype=bool)
    squares = np.array([(i - radius, j - radius) for i, j in base], dtype=np.int64).reshape(-1, 2)
    simple = len({tuple(s) for s in squares[:-1]}) == len(squares) - 1
    return DefectCircuit(squares, crossed_xy, crossed_xy[is_def], int(is_def.sum()), simple)


def min_defect_circuit(config: Configuration, ann: AnnulusSpec) -> DefectCircuit:
    """Separating dual circuit crossing the fewest open edges."""
    _check_annulus(config, ann)
    c = _grid_for(config, ann)
    r = c.radius
    d = _grid.side(r)
    cx, cy = ann.center
    dist = np.empty((_SHEETS, d, d), dtype=np.int64)
    parent = np.empty((_SHEETS, d, d), dtype=np.int64)
    best, k = min_circuit_cost(c.open, r, cx, cy, ann.inner, ann.outer, dist, parent)
    if best < 0:
        raise DomainError("annulus has no separating dual circuit")
    ui, uj = cx + k + r, cy + r
    cover_bfs(c.open, r, cx, cy, ann.inner, ann.outer, ui, uj, _SHEET0, -1, -1, -1, dist, parent)
    end = ((_SHEET0 + 1) * d + ui) * d + uj
    seq = _reconstruct(parent, r, end, None, c.open)
    base = [(i, j) for _, i, j in seq]
    circ = _build_circuit(base, c.open, r)
    assert circ.defect_count == best
    return circ


def circuit_through_edge(config: Configuration, ann: AnnulusSpec, e, budget: int) -> DefectCircuit | None:
    """Fewest-defect separating dual circuit through the dual of ``e``.

    Returns None when no such circuit has at most ``budget`` defects (in
    particular for edges on the two boundary circles, whose duals touch the
    hole or the outside).
    """
    _check_annulus(config, ann)
    e = EdgeId(*e)
    if not ann.contains_edge(e):
        raise DomainError(f"edge {tuple(e)} is not inside the annulus")
    c = _grid_for(config, ann)
    r = c.radius
    d = _grid.side(r)
    cx, cy = ann.center
    o, ei, ej = int(e.orientation), e.x + r, e.y + r
    dist = np.empty((_SHEETS, d, d), dtype=np.int64)
    parent = np.empty((_SHEETS, d, d), dtype=np.int64)
    cost, which = circuit_through_cost(c.open, r, cx, cy, ann.inner, ann.outer, o, ei, ej, dist, parent)
    if cost < 0 or cost > budget:
        return None
    f1i, f1j, f2i, f2j, sigma = _edge_squares(o, ei, ej, r, cy, cx)
    if which == 1:
        first, start, start_sheet, target = (f1i, f1j), (f2i, f2j), _SHEET0 + sigma, (f1i, f1j)
    else:
        first, start, start_sheet, target = (f2i, f2j), (f1i, f1j), _SHEET0 - sigma, (f2i, f2j)
    cover_bfs(c.open, r, cx, cy, ann.inner, ann.outer, start[0], start[1], start_sheet, o, ei, ej, dist, parent)
    end = ((_SHEET0 + 1) * d + target[0]) * d + target[1]
    seq = _reconstruct(parent, r, end, None, c.open)
    base = [first] + [(i, j) for _, i, j in seq]
    circ = _build_circuit(base, c.open, r)
    assert circ.defect_count == cost
    return circ


def check_circuit(circ: DefectCircuit, config: Configuration, ann: AnnulusSpec) -> None:
    """Raise AssertionError unless ``circ`` is a closed dual walk of winding
    number one inside the annulus with correctly counted defects."""
    sq = circ.squares
    assert len(sq) >= 2 and tuple(sq[0]) == tuple(sq[-1]), "walk is not closed"
    cx, cy = ann.center
    wind = 0
    for t in range(len(sq) - 1):
        (i, j), (k, l) = sq[t], sq[t + 1]
        assert abs(i - k) + abs(j - l) == 1, "consecutive squares are not adjacent"
        for corner in ((i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)):
            assert ann.contains(corner), "square leaves the annulus"
        o, x, y = _crossed_edge((i, j), (k, l))
        assert tuple(circ.crossed[t]) == (x, y, o)
        if o == 0 and y == cy and x >= cx:
            wind += 1 if l > j else -1
    assert abs(wind) == 1, f"winding number {wind}"
    status = config.status(circ.crossed) if len(circ.crossed) else np.zeros(0, bool)
    assert int(status.sum()) == circ.defect_count


def flip_budget_check(config: Configuration, ann: AnnulusSpec) -> tuple[int, int, int]:
    """For every single-edge flip that changes the crossing number, check that
    the count rises by exactly one when the edge opens and that a separating
    dual circuit through the flipped edge has at most N(config) defects.

    Returns ``(pivotal_edges, bad_jumps, missing_circuits)``.
    """
    _check_annulus(config, ann)
    c = _grid_for(config, ann)
    cx, cy = ann.center
    p, j, m = flip_budget_scan(np.ascontiguousarray(c.open), c.radius, cx, cy, ann.inner, ann.outer)
    return int(p), int(j), int(m)


# ---------------------------------------------------------------------------
# exhaustive oracle

BRUTE_FORCE_MAX_SITES = 24


@njit(cache=True)
def _gray_min_cut(nbr, base):
    """Minimum over all 2^k side assignments of the free sites.

    ``nbr[v]`` lists the open neighbours of free site v: a free-site index,
    -1 for a site tied to the inner side, -2 for one tied to the outer side,
    or -3 for padding.  ``base`` counts open edges joining the two tied sides
    directly.  Every free site starts on the outer side.
    """
    k = nbr.shape[0]
    side = np.zeros(k, dtype=np.bool_)
    cut = base
    for v in range(k):
        for t in range(nbr.shape[1]):
            if nbr[v, t] == -1:
                cut += 1
    best = cut
    for g in range(1, 1 << k):
        v = 0
        while not (g >> v) & 1:
            v += 1
        old = side[v]
        delta = 0
        for t in range(nbr.shape[1]):
            w = nbr[v, t]
            if w == -3:
                break
            if w == -1:
                other = True
            elif w == -2:
                other = False
            else:
                other = side[w]
            delta += (1 if other != (not old) else 0) - (1 if other != old else 0)
        side[v] = not old
        cut += delta
        if cut < best:
            best = cut
    return best


def brute_force_crossings(config: Configuration, ann: AnnulusSpec) -> int:
    """Maximum number of edge-disjoint open crossings, by exhaustion.

    Enumerates every way of splitting the sites strictly between the two
    boundary circles into an inner side and an outer side, and returns the
    fewest open edges joining the sides.  By Menger's theorem this equals
    the maximal edge-disjoint crossing packing.  Shares no code with the
    max-flow or the dual search; meant as a test oracle only.
    """
    if ann.inner >= ann.outer:
        raise DomainError("degenerate annulus")
    edges = ann.edges()
    if not config.covers(edges):
        raise DomainError("configuration does not cover the annulus edges")
    cx, cy = ann.center

    def level(s):
        return max(abs(s[0] - cx), abs(s[1] - cy))

    free = [tuple(map(int, s)) for s in ann.sites() if ann.inner < level(s) < ann.outer]
    if len(free) > BRUTE_FORCE_MAX_SITES:
        raise DomainError(
            f"brute force refuses annuli with more than {BRUTE_FORCE_MAX_SITES} interior sites (got {len(free)})"
        )
    slot = {s: k for k, s in enumerate(free)}
    nbr = [[] for _ in free]
    base = 0

    def code(s):
        if s in slot:
            return slot[s]
        return -1 if level(s) == ann.inner else -2

    for (x, y, o), st in zip(edges, config.status(edges)):
        if not st:
            continue
        a = (int(x), int(y))
        b = (a[0] + 1, a[1]) if o == 0 else (a[0], a[1] + 1)
        ca, cb = code(a), code(b)
        if ca >= 0:
            nbr[ca].append(cb)
        if cb >= 0:
            nbr[cb].append(ca)
        if ca < 0 and cb < 0 and ca != cb:
            base += 1
    # a free site with at most one open edge can always sit on its
    # neighbour's side, so it never contributes to the minimum
    alive = [True] * len(free)
    stack = [k for k in range(len(free)) if len(nbr[k]) <= 1]
    while stack:
        k = stack.pop()
        if not alive[k] or len(nbr[k]) > 1:
            continue
        alive[k] = False
        for w in nbr[k]:
            if w >= 0:
                nbr[w].remove(k)
                if alive[w] and len(nbr[w]) <= 1:
                    stack.append(w)
        nbr[k] = []
    keep = [k for k in range(len(free)) if alive[k]]
    renum = {k: t for t, k in enumerate(keep)}
    table = np.full((len(keep), 4), -3, dtype=np.int64)
    for t, k in enumerate(keep):
        row = [renum[w] if w >= 0 else w for w in nbr[k]]
        table[t, : len(row)] = row
    return int(_gray_min_cut(table, base))
