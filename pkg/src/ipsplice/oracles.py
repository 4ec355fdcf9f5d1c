"""
Slow, independent reference implementations.

Nothing here is used by the experiments themselves; the functions exist so
that tests and the ``verify`` subcommand can check the fast kernels against
code that follows the definitions literally.
"""

from __future__ import annotations

import itertools
from fractions import Fraction


from .errors import DomainError
from .lattice import AnnulusSpec
from .weights import WeightField

__all__ = [
    "naive_invasion",
    "exact_crossing_probability",
    "four_arm_by_paths",
    "MAX_PATHS",
]

MAX_PATHS = 200_000


def naive_invasion(wf: WeightField, steps: int) -> list[tuple[tuple[int, int, int], float]]:
    """Invasion by scanning the whole frontier at every step.

    Returns ``[(edge, weight), ...]``; stops early if the frontier runs out
    or reaches an edge missing from the field.
    """
    vals = wf.as_dict()
    cluster = {(0, 0)}
    invaded: set = set()
    frontier: set = set()

    def incident(s):
        x, y = s
        return [(x, y, 0), (x, y, 1), (x - 1, y, 0), (x, y - 1, 1)]

    def add(s):
        for e in incident(s):
            if e not in invaded:
                frontier.add(e)

    add((0, 0))
    out = []
    for _ in range(steps):
        if not frontier or any(e not in vals for e in frontier):
            break
        best = min(frontier, key=lambda e: (vals[e], e))
        frontier.discard(best)
        invaded.add(best)
        out.append((best, vals[best]))
        x, y, o = best
        for s in ((x, y), (x + 1, y) if o == 0 else (x, y + 1)):
            if s not in cluster:
                cluster.add(s)
                add(s)
    return out


def _rect_edges(w: int, h: int) -> list[tuple[int, int, int]]:
    edges = [(x, y, 0) for x in range(w) for y in range(h + 1)]
    edges += [(x, y, 1) for x in range(1, w) for y in range(h)]
    return edges


def _crosses(w: int, h: int, open_edges) -> bool:
    adj: dict = {}
    for x, y, o in open_edges:
        a, b = (x, y), ((x + 1, y) if o == 0 else (x, y + 1))
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    stack = [(0, y) for y in range(h + 1)]
    seen = set(stack)
    while stack:
        s = stack.pop()
        if s[0] == w:
            return True
        for t in adj.get(s, ()):
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return False


def exact_crossing_probability(w: int, h: int, p) -> Fraction:
    """Left-right crossing probability of {0..w} x {0..h} by summing over all
    configurations of the edges that matter (edges along the two side
    columns cannot affect a left-right crossing)."""
    edges = _rect_edges(w, h)
    if len(edges) > 20:
        raise DomainError("rectangle too large for exhaustive enumeration")
    p = Fraction(p)
    total = Fraction(0)
    for bits in itertools.product((False, True), repeat=len(edges)):
        op = [e for e, b in zip(edges, bits) if b]
        if _crosses(w, h, op):
            k = len(op)
            total += p**k * (1 - p) ** (len(edges) - k)
    return total


def _ring(r: int, cx: int, cy: int) -> list[tuple[int, int]]:
    if r == 0:
        return [(cx, cy)]
    pts = [(r, y) for y in range(0, r)]
    pts += [(x, r) for x in range(r, -r, -1)]
    pts += [(-r, y) for y in range(r, -r, -1)]
    pts += [(x, -r) for x in range(-r, r)]
    pts += [(r, y) for y in range(-r, 0)]
    return [(cx + x, cy + y) for x, y in pts]


def _edge_between(a, b):
    (x1, y1), (x2, y2) = a, b
    if y1 == y2:
        return (min(x1, x2), y1, 0)
    return (x1, min(y1, y2), 1)


def four_arm_by_paths(wf: WeightField, ann: AnnulusSpec, p: float, q: float) -> bool:
    """Alternating four-arm event by explicit path enumeration.

    Open arms are self-avoiding site paths of p-open edges from the inner
    circle to the outer circle; closed arms are self-avoiding paths of unit
    squares (all corners in the annulus) stepping across q-closed edges,
    entering through a q-closed edge of the inner circle and leaving through
    a q-closed edge of the outer circle.  The event holds when two
    vertex-disjoint open arms and two square-disjoint closed arms start at
    positions that alternate around the inner circle.
    """
    cx, cy = ann.center
    a, b = ann.inner, ann.outer
    vals = wf.as_dict()

    def level(s):
        return max(abs(s[0] - cx), abs(s[1] - cy))

    def weight(e):
        if e not in vals:
            raise DomainError("weight field does not cover the annulus")
        return vals[e]

    def in_ann(s):
        return a <= level(s) <= b

    def sq_ok(s):
        x, y = s
        return all(in_ann(c) for c in ((x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)))

    budget = [MAX_PATHS]

    def open_paths(start):
        out = []

        def rec(s, seen):
            if level(s) == b:
                out.append(frozenset(seen))
                return
            x, y = s
            for t in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
                if t in seen or not in_ann(t) or level(t) == a:
                    continue
                if weight(_edge_between(s, t)) < p:
                    budget[0] -= 1
                    if budget[0] < 0:
                        raise DomainError("too many paths for exhaustive enumeration")
                    seen.add(t)
                    rec(t, seen)
                    seen.discard(t)

        rec(start, {start})
        return out

    inner = _ring(a, cx, cy)
    outer = _ring(b, cx, cy)
    # squares just inside the outer circle, through a q-closed outer edge
    exits = set()
    for k in range(len(outer)):
        s, t = outer[k], outer[(k + 1) % len(outer)]
        e = _edge_between(s, t)
        if weight(e) < q:
            continue
        dx, dy = t[0] - s[0], t[1] - s[1]
        if dy == 1:
            sq = (s[0] - 1, s[1])
        elif dx == -1:
            sq = (t[0], s[1] - 1)
        elif dy == -1:
            sq = (s[0], t[1])
        else:
            sq = (s[0], s[1])
        if sq_ok(sq):
            exits.add(sq)

    def dual_paths(start):
        out = []

        def rec(u, seen):
            if u in exits:
                out.append(frozenset(seen))
                return
            x, y = u
            for v, e in (
                ((x + 1, y), (x + 1, y, 1)),
                ((x - 1, y), (x, y, 1)),
                ((x, y + 1), (x, y + 1, 0)),
                ((x, y - 1), (x, y, 0)),
            ):
                if v in seen or not sq_ok(v):
                    continue
                if weight(e) >= q:
                    budget[0] -= 1
                    if budget[0] < 0:
                        raise DomainError("too many paths for exhaustive enumeration")
                    seen.add(v)
                    rec(v, seen)
                    seen.discard(v)

        rec(start, {start})
        return out

    # positions 2k (site k) and 2k + 1 (edge from site k to site k + 1)
    L = len(inner)
    arms_open = {}
    arms_dual = {}
    for k in range(L):
        ps = open_paths(inner[k])
        if ps:
            arms_open[2 * k] = ps
        s, t = inner[k], inner[(k + 1) % L]
        e = _edge_between(s, t)
        if weight(e) >= q:
            dx, dy = t[0] - s[0], t[1] - s[1]
            if dy == 1:
                sq = (s[0], s[1])
            elif dx == -1:
                sq = (t[0], s[1])
            elif dy == -1:
                sq = (s[0] - 1, t[1])
            else:
                sq = (s[0], s[1] - 1)
            if sq_ok(sq):
                ds = dual_paths(sq)
                if ds:
                    arms_dual[2 * k + 1] = ds

    def disjoint_pair(xs, ys):
        return any(not (u & v) for u in xs for v in ys)

    opos = sorted(arms_open)
    dpos = sorted(arms_dual)
    for i, j in itertools.combinations(opos, 2):
        if not disjoint_pair(arms_open[i], arms_open[j]):
            continue
        between = [d for d in dpos if i < d < j]
        outside = [d for d in dpos if d < i or d > j]
        for d1 in between:
            for d2 in outside:
                if disjoint_pair(arms_dual[d1], arms_dual[d2]):
                    return True
    return False
