"""
Tranche resampling experiments for the annulus crossing count.

A tranche is the strip of edges whose endpoints both lie within sup-distance
``half_width`` of the square circle of radius floor(3n/4), clipped to the
annulus Ann(floor(n/2), n).  It is covered by boxes ("balls") of radius
``ball_radius`` centred at equally spaced points of that circle, numbered
counterclockwise from the positive x-axis.

Resampling redraws tranche weights from a second seed.  Because each weight
is a hash of (seed, edge), the fresh weight of an edge is the same whichever
ball first reaches it, so the ball-by-ball sequence ends exactly at the
full-tranche resample.

The configuration whose crossing count is measured comes from one of two
derivations applied identically to original and resampled weights:

``"threshold"``
    edges with weight below 1/2 are open (critical Bernoulli percolation);
``"invasion"``
    the invasion cluster grown until it touches the boundary of
    S(reach_factor * n) is open.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _grid
from ._parallel import map_chunks
from .arms import circuit_event_kernel, circuit_event_radii
from .crossings import crossing_number_kernel
from .errors import DomainError
from .invasion import _invade_kernel
from .lattice import AnnulusSpec
from .rng import derive_seed, fill_box_weights, fill_weights, seed_keys
from .stats import EstimateWithCI, wald_mean, wilson
from .weights import Configuration, WeightField, resample_region

__all__ = [
    "TrancheSpec",
    "SpliceRun",
    "MismatchResult",
    "ConditionalVarianceReport",
    "build_tranche",
    "empty_tranche",
    "derive_configuration",
    "crossing_count",
    "resample_pair",
    "resample_sequence",
    "first_change_index",
    "splice_run",
    "estimate_mismatch",
    "estimate_conditional_variance",
    "a_event_stability",
    "MODES",
]

MODES = ("threshold", "invasion")


# ---------------------------------------------------------------------------
# tranche geometry

@dataclass(frozen=True, eq=False)
class TrancheSpec:
    """Tranche edges with their ball cover.

    ``edges`` is canonically ordered; ``first_ball[i]`` is the 1-based index
    of the first ball containing ``edges[i]``; ``balls[j - 1]`` holds the
    indices (into ``edges``) of the edges in ball j.
    """

    n: int
    eps: float
    centerline: int
    half_width: int
    ball_radius: int
    centers: np.ndarray
    edges: np.ndarray
    balls: list
    first_ball: np.ndarray
    requested_balls: int
    degenerate: bool = False
    adjusted: bool = False
    clipped: bool = False

    @property
    def num_balls(self) -> int:
        return len(self.balls)

    def __len__(self):
        return len(self.edges)

    def mask(self, radius: int) -> np.ndarray:
        return _grid.mask_from_edges(self.edges, radius) if len(self.edges) else np.zeros(
            (2, _grid.side(radius), _grid.side(radius)), dtype=bool
        )

    def prefix_mask(self, j: int, radius: int) -> np.ndarray:
        """Edges in the union of balls 1..j."""
        sel = self.edges[self.first_ball <= j]
        m = np.zeros((2, _grid.side(radius), _grid.side(radius)), dtype=bool)
        if len(sel):
            m[_grid.index(sel, radius)] = True
        return m

    def flags(self) -> dict:
        return {
            "degenerate": self.degenerate,
            "adjusted_ball_count": self.adjusted,
            "clipped_to_annulus": self.clipped,
        }


def _centerline_point(m: int, t: float) -> tuple[float, float]:
    t = t % (8 * m)
    if t <= m:
        return (m, t)
    if t <= 3 * m:
        return (m - (t - m), m)
    if t <= 5 * m:
        return (-m, m - (t - 3 * m))
    if t <= 7 * m:
        return (-m + (t - 5 * m), -m)
    return (m, -m + (t - 7 * m))


def _ball_membership(mid: np.ndarray, centers: np.ndarray, r: int) -> np.ndarray:
    dx = np.abs(mid[:, None, 0] - centers[None, :, 0])
    dy = np.abs(mid[:, None, 1] - centers[None, :, 1])
    return np.maximum(dx, dy) <= r + 1e-9


def build_tranche(n: int, eps: float) -> TrancheSpec:
    """Strip around the circle of radius floor(3n/4) with its ball cover.

    Half-width max(1, round(eps*n/2)), ball radius max(1, round(eps*n)),
    ceil(6/eps) balls.  When rounding leaves part of the strip uncovered the
    ball count is raised until it is covered and ``adjusted`` is set; when
    eps*n < 1 the strip is the minimal one and ``degenerate`` is set.
    """
    if not 0.0 < eps <= 1.0:
        raise DomainError("eps must lie in (0, 1]")
    if n < 8:
        raise DomainError("tranche needs n >= 8")
    m = (3 * n) // 4
    h = max(1, int(math.floor(eps * n / 2 + 0.5)))
    r = max(1, int(math.floor(eps * n + 0.5)))
    k_req = int(math.ceil(6.0 / eps - 1e-9))
    ann = AnnulusSpec.half(n)
    lo, hi = max(m - h, ann.inner), min(m + h, ann.outer)
    clipped = lo != m - h or hi != m + h
    edges = AnnulusSpec(lo, hi).edges()
    mid = edges[:, :2].astype(float) + np.where(edges[:, 2:3] == 0, [[0.5, 0.0]], [[0.0, 0.5]])
    k = k_req
    while True:
        centers = np.array([_centerline_point(m, j * 8.0 * m / k) for j in range(k)])
        member = _ball_membership(mid, centers, r)
        if member.any(axis=1).all():
            break
        k += 1
    balls = [np.nonzero(member[:, j])[0] for j in range(k)]
    first = np.argmax(member, axis=1) + 1
    return TrancheSpec(
        n=n,
        eps=float(eps),
        centerline=m,
        half_width=h,
        ball_radius=r,
        centers=centers,
        edges=edges,
        balls=balls,
        first_ball=first,
        requested_balls=k_req,
        degenerate=eps * n < 1,
        adjusted=k != k_req,
        clipped=clipped,
    )


def empty_tranche(n: int) -> TrancheSpec:
    """A tranche with no edges and no balls; resampling it changes nothing."""
    return TrancheSpec(
        n=n, eps=0.0, centerline=(3 * n) // 4, half_width=0, ball_radius=0,
        centers=np.zeros((0, 2)), edges=np.zeros((0, 3), dtype=np.int64), balls=[],
        first_ball=np.zeros(0, dtype=np.int64), requested_balls=0,
    )


def _tranche_for(n: int, eps: float) -> TrancheSpec:
    return empty_tranche(n) if eps == 0 else build_tranche(n, eps)


# ---------------------------------------------------------------------------
# derivations

def _check_mode(mode: str):
    if mode not in MODES:
        raise DomainError(f"unknown derivation mode {mode!r}; expected one of {MODES}")


def _derived_open(W: np.ndarray, radius: int, n: int, mode: str, reach: int) -> np.ndarray:
    """Open mask on the grid for the chosen derivation."""
    if mode == "threshold":
        with np.errstate(invalid="ignore"):
            return W < 0.5
    _, _, _, invaded, reason, _ = _invade_kernel(W, radius, -1, reach * n)
    return invaded


def _annulus_count(open_: np.ndarray, radius: int, n: int) -> int:
    return int(crossing_number_kernel(open_, radius, 0, 0, n // 2, n))


def derive_configuration(wf: WeightField, n: int, mode: str = "threshold", reach_factor: int = 4) -> Configuration:
    """The configuration on Ann(floor(n/2), n) derived from ``wf``."""
    _check_mode(mode)
    need = reach_factor * n if mode == "invasion" else n
    if not wf.covers_box(need):
        raise DomainError(f"weight field does not cover S({need})")
    op = _derived_open(np.ascontiguousarray(wf.weights), wf.radius, n, mode, reach_factor)
    region = _grid.mask_from_edges(AnnulusSpec.half(n).edges(), wf.radius)
    return Configuration(wf.radius, op & region, region)


def crossing_count(config: Configuration, n: int) -> int:
    c = config if config.radius >= n + 1 else config.on_grid(n + 1)
    return _annulus_count(np.ascontiguousarray(c.open), c.radius, n)


def resample_pair(
    wf: WeightField, tranche: TrancheSpec, seed2: int, mode: str = "threshold", reach_factor: int = 4
) -> tuple[Configuration, Configuration]:
    """(omega, omega_eps): the same derivation applied to the original field
    and to the field with tranche weights redrawn from ``seed2``."""
    w2 = resample_region(wf, tranche.edges, seed2)
    n = tranche.n
    return derive_configuration(wf, n, mode, reach_factor), derive_configuration(w2, n, mode, reach_factor)


def resample_sequence(
    wf: WeightField, tranche: TrancheSpec, seed2: int, mode: str = "threshold", reach_factor: int = 4
) -> list[Configuration]:
    """omega^0, ..., omega^K: fresh weights on balls 1..j, original elsewhere."""
    out = [derive_configuration(wf, tranche.n, mode, reach_factor)]
    for j in range(1, tranche.num_balls + 1):
        wj = resample_region(wf, tranche.prefix_mask(j, wf.radius), seed2)
        out.append(derive_configuration(wj, tranche.n, mode, reach_factor))
    return out


def first_change_index(counts) -> int | None:
    """Smallest j >= 1 with counts[j - 1] != counts[j], or None."""
    for j in range(1, len(counts)):
        if counts[j - 1] != counts[j]:
            return j
    return None


@dataclass(frozen=True)
class SpliceRun:
    """One original field and its ball-by-ball resample sequence."""

    seed: int
    n: int
    eps: float
    mode: str
    M: int | None
    N_original: int
    N_resampled: int
    first_change_index: int | None
    counts: tuple
    a_event_flags: tuple | None = None

    @property
    def mismatch(self) -> bool:
        return self.N_original != self.N_resampled


def _sample_seeds(seed: int, k: int) -> tuple[int, int]:
    return derive_seed(seed, k, 0), derive_seed(seed, k, 1)


def splice_run(
    n: int,
    eps: float,
    seed: int,
    index: int = 0,
    mode: str = "threshold",
    reach_factor: int = 4,
    M: int | None = None,
    a_event_p: float | None = None,
) -> SpliceRun:
    """Full resample sequence for replicate ``index``.

    Raises AssertionError if the telescoping property fails (a change between
    the ends of the sequence without a change between consecutive terms).
    """
    _check_mode(mode)
    tr = _tranche_for(n, eps)
    s1, s2 = _sample_seeds(seed, index)
    radius = reach_factor * n if (mode == "invasion" or a_event_p is not None) else n
    radius += 1
    wf = _box_field(radius, radius - 1, s1)
    configs = resample_sequence(wf, tr, s2, mode, reach_factor)
    counts = tuple(crossing_count(c, n) for c in configs)
    j = first_change_index(counts)
    if counts[0] != counts[-1]:
        assert j is not None, "telescoping failed"
    flags = None
    if a_event_p is not None:
        flags = []
        for jj in range(tr.num_balls + 1):
            wj = wf if jj == 0 else resample_region(wf, tr.prefix_mask(jj, wf.radius), s2)
            a, b = circuit_event_radii(n)
            flags.append(bool(circuit_event_kernel(wj.weights, wj.radius, a, b, a_event_p, reach_factor * n)))
        flags = tuple(flags)
    return SpliceRun(int(seed), n, float(eps), mode, M, counts[0], counts[-1], j, counts, flags)


def _box_field(radius: int, n: int, seed: int) -> WeightField:
    d = _grid.side(radius)
    w = np.empty((2, d, d))
    k1, k2 = seed_keys(seed)
    fill_box_weights(k1, k2, radius, n, w)
    return WeightField(radius, w, seed, 0)


# ---------------------------------------------------------------------------
# mismatch estimation

@dataclass(frozen=True)
class MismatchResult:
    """P(N(omega) != N(omega_eps)) for each eps, with the N histogram.

    ``histogram[k]`` counts samples with N(omega) == k for k < M_cap and
    ``histogram[M_cap]`` counts N >= M_cap.  ``outside`` holds, in invasion
    mode, the frequency with which the regrown invasion differs from the
    original on edges of S(n) outside the tranche.
    """

    n: int
    mode: str
    eps: tuple
    estimates: tuple
    histogram: np.ndarray
    M_cap: int
    samples: int
    seed: int
    outside: tuple | None
    tranche_flags: tuple
    counts: np.ndarray = field(repr=False)

    def tail(self) -> np.ndarray:
        """P-hat(N > k) for k = 0..M_cap - 1."""
        h = self.histogram
        total = h.sum()
        return np.array([h[k + 1 :].sum() / total for k in range(self.M_cap)])


def _mismatch_chunk(start, stop, n, eps_list, mode, reach, seed):
    """Per sample: N(omega) followed by N(omega_eps) for each eps, and the
    outside-discrepancy flags."""
    trs = [_tranche_for(n, e) for e in eps_list]
    box = reach * n if mode == "invasion" else n
    radius = box + 1
    d = _grid.side(radius)
    W = np.empty((2, d, d))
    masks = [t.mask(radius) for t in trs]
    inner = _grid.box_mask(radius, n)
    counts = np.zeros((stop - start, 1 + len(eps_list)), dtype=np.int64)
    outside = np.zeros((stop - start, len(eps_list)), dtype=bool)
    fresh = np.empty((2, d, d))
    for t, k in enumerate(range(start, stop)):
        s1, s2 = _sample_seeds(seed, k)
        k1, k2 = seed_keys(s1)
        fill_box_weights(k1, k2, radius, box, W)
        op0 = _derived_open(W, radius, n, mode, reach)
        counts[t, 0] = _annulus_count(op0, radius, n)
        j1, j2 = seed_keys(s2)
        for c, mk in enumerate(masks):
            saved = W[mk].copy()
            fill_weights(j1, j2, radius, mk, W)
            op = _derived_open(W, radius, n, mode, reach)
            counts[t, 1 + c] = _annulus_count(op, radius, n)
            if mode == "invasion":
                outside[t, c] = bool(np.any((op != op0) & inner & ~mk))
            W[mk] = saved
    return counts, outside


def estimate_mismatch(
    n: int,
    eps,
    M_cap: int,
    samples: int,
    seed: int,
    mode: str = "threshold",
    reach_factor: int = 4,
    workers: int = 1,
) -> MismatchResult:
    """Paired-run mismatch frequency for every eps in ``eps``.

    Replicate k draws the original field from ``derive_seed(seed, k, 0)`` and
    the fresh tranche weights from ``derive_seed(seed, k, 1)``; both are
    shared by all eps, so the eps cells are coupled.  ``eps = 0`` stands for
    the empty tranche.
    """
    _check_mode(mode)
    if samples < 1:
        raise ValueError("samples must be at least 1")
    if M_cap < 1:
        raise ValueError("M_cap must be positive")
    eps_list = tuple(float(e) for e in (eps if np.ndim(eps) else [eps]))
    trs = [_tranche_for(n, e) for e in eps_list]
    parts = map_chunks(_mismatch_chunk, samples, (n, eps_list, mode, reach_factor, seed), workers, size=100)
    counts = np.concatenate([p[0] for p in parts])
    outside = np.concatenate([p[1] for p in parts])
    ests = []
    for c in range(len(eps_list)):
        hits = int(np.count_nonzero(counts[:, 0] != counts[:, 1 + c]))
        ests.append(wilson(hits, samples, seed))
    hist = np.bincount(np.minimum(counts[:, 0], M_cap), minlength=M_cap + 1)
    out = None
    if mode == "invasion":
        out = tuple(wilson(int(outside[:, c].sum()), samples, seed) for c in range(len(eps_list)))
    return MismatchResult(
        n=n, mode=mode, eps=eps_list, estimates=tuple(ests), histogram=hist, M_cap=M_cap,
        samples=samples, seed=int(seed), outside=out, tranche_flags=tuple(t.flags() for t in trs),
        counts=counts,
    )


# ---------------------------------------------------------------------------
# conditional variance

@dataclass(frozen=True)
class ConditionalVarianceReport:
    """Nested estimate of E[q(1 - q)] with q = P(N = M | outside weights).

    ``q_hat`` holds one inner-loop frequency per outer sample (and
    ``q_hat_ge`` the same for the event N >= M).  For each delta the report
    gives P-hat(delta < q-hat < 1 - delta), the Markov bound
    E-hat / delta^2, and whether the inequality holds within two combined
    standard errors.
    """

    n: int
    eps: float
    M: int
    outer_samples: int
    inner_samples: int
    seed: int
    mode: str
    variance: EstimateWithCI
    variance_ge: EstimateWithCI
    q_hat: np.ndarray = field(repr=False)
    q_hat_ge: np.ndarray = field(repr=False)
    rows: tuple = ()

    def row(self, delta: float) -> dict:
        for r in self.rows:
            if r["delta"] == delta:
                return r
        raise KeyError(delta)


def _cv_chunk(start, stop, n, eps, M, inner, mode, reach, seed):
    tr = _tranche_for(n, eps)
    box = reach * n if mode == "invasion" else n
    radius = box + 1
    d = _grid.side(radius)
    W = np.empty((2, d, d))
    mk = tr.mask(radius)
    eq = np.zeros(stop - start, dtype=np.int64)
    ge = np.zeros(stop - start, dtype=np.int64)
    for t, k in enumerate(range(start, stop)):
        k1, k2 = seed_keys(derive_seed(seed, k, 0))
        fill_box_weights(k1, k2, radius, box, W)
        for i in range(inner):
            j1, j2 = seed_keys(derive_seed(seed, k, 1, i))
            fill_weights(j1, j2, radius, mk, W)
            N = _annulus_count(_derived_open(W, radius, n, mode, reach), radius, n)
            eq[t] += N == M
            ge[t] += N >= M
    return eq, ge


def estimate_conditional_variance(
    n: int,
    eps: float,
    M: int,
    outer_samples: int,
    inner_samples: int,
    deltas,
    seed: int,
    mode: str = "threshold",
    reach_factor: int = 4,
    workers: int = 1,
) -> ConditionalVarianceReport:
    """Outer loop: outside-tranche weights; inner loop: fresh tranche weights.

    q-hat(1 - q-hat) * m / (m - 1) is unbiased for q(1 - q) given the outer
    sample, m being the inner sample count.
    """
    _check_mode(mode)
    if inner_samples < 2:
        raise DomainError("inner_samples must be at least 2 to estimate a variance")
    if outer_samples < 2:
        raise ValueError("outer_samples must be at least 2")
    parts = map_chunks(
        _cv_chunk, outer_samples, (n, float(eps), int(M), inner_samples, mode, reach_factor, seed), workers, size=25
    )
    eq = np.concatenate([p[0] for p in parts])
    ge = np.concatenate([p[1] for p in parts])
    m = inner_samples
    rows = []
    out = {}
    for name, hits in (("eq", eq), ("ge", ge)):
        q = hits / m
        v = q * (1 - q) * m / (m - 1)
        out[name] = (q, wald_mean(v, seed))
    q, var = out["eq"]
    for delta in deltas:
        delta = float(delta)
        inside = (q > delta) & (q < 1 - delta)
        frac = wald_mean(inside.astype(float), seed)
        bound = var.estimate / delta**2
        sigma = math.sqrt(frac.stderr**2 + (var.stderr / delta**2) ** 2)
        rows.append(
            {
                "delta": delta,
                "interior_fraction": frac.estimate,
                "interior_stderr": frac.stderr,
                "markov_bound": bound,
                "bound_stderr": var.stderr / delta**2,
                "combined_sigma": sigma,
                "holds": bool(frac.estimate <= bound + 2 * sigma),
            }
        )
    return ConditionalVarianceReport(
        n=n, eps=float(eps), M=int(M), outer_samples=outer_samples, inner_samples=m, seed=int(seed),
        mode=mode, variance=var, variance_ge=out["ge"][1], q_hat=q, q_hat_ge=out["ge"][0], rows=tuple(rows),
    )


# ---------------------------------------------------------------------------
# circuit event stability under ball resampling

def _a_chunk(start, stop, n, eps, p, reach, seed):
    tr = _tranche_for(n, eps)
    box = reach * n
    radius = box + 1
    d = _grid.side(radius)
    W = np.empty((2, d, d))
    a, b = circuit_event_radii(n)
    out = np.zeros(stop - start, dtype=bool)
    for t, k in enumerate(range(start, stop)):
        s1, s2 = _sample_seeds(seed, k)
        k1, k2 = seed_keys(s1)
        fill_box_weights(k1, k2, radius, box, W)
        if not circuit_event_kernel(W, radius, a, b, p, box):
            continue
        j1, j2 = seed_keys(s2)
        for j in range(1, tr.num_balls + 1):
            # ball j adds its not-yet-fresh edges to the resampled set
            sel = tr.edges[tr.first_ball == j]
            if len(sel) == 0:
                continue
            mk = np.zeros((2, d, d), dtype=bool)
            mk[_grid.index(sel, radius)] = True
            fill_weights(j1, j2, radius, mk, W)
            if not circuit_event_kernel(W, radius, a, b, p, box):
                out[t] = True
                break
    return out


def a_event_stability(
    n: int, eps: float, p: float, samples: int, seed: int, reach_factor: int = 4, workers: int = 1
) -> EstimateWithCI:
    """Frequency with which A(n, p) holds for the original field but fails
    after resampling balls 1..j for some j."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    parts = map_chunks(_a_chunk, samples, (n, float(eps), float(p), reach_factor, seed), workers, size=50)
    hits = int(sum(int(x.sum()) for x in parts))
    return wilson(hits, samples, seed)
