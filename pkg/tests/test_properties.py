"""Property-based invariants over random small inputs."""

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from ipsplice.arms import ArmEventSpec, PerArm, Total, detect_four_arm
from ipsplice.crossings import brute_force_crossings, count_disjoint_crossings, min_defect_circuit
from ipsplice.lattice import AnnulusSpec, EdgeId, dual_edge
from ipsplice.splicing import build_tranche
from ipsplice.stats import wilson
from ipsplice.weights import Configuration, resample_region, sample_box, threshold_config

SLOW = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])

seeds = st.integers(0, 2**63 - 1)
small_annuli = st.sampled_from([(1, 2), (1, 3), (2, 4), (2, 5)])
edges = st.tuples(st.integers(-50, 50), st.integers(-50, 50), st.integers(0, 1))


@given(edges)
def test_dual_is_an_involution(e):
    d = dual_edge(e)
    assert dual_edge(d) == EdgeId(*e)
    assert d.orientation != EdgeId(*e).orientation
    (a, b), (c, f) = d.endpoints
    # the dual edge has unit length and its midpoint is the primal midpoint
    assert abs(a - c) + abs(b - f) == 1
    x, y, o = e
    assert ((a + c) / 2, (b + f) / 2) == (x + 0.5 * (o == 0), y + 0.5 * (o == 1))


@given(st.integers(1, 6), st.integers(1, 6), st.integers(-3, 3), st.integers(-3, 3))
def test_annulus_boundaries_disjoint(a, extra, cx, cy):
    ann = AnnulusSpec(a, a + extra, (cx, cy))
    inner = {tuple(s) for s in ann.inner_boundary()}
    outer = {tuple(s) for s in ann.outer_boundary()}
    assert inner and outer and not inner & outer
    assert len(inner) == 8 * a and len(outer) == 8 * (a + extra)


@given(seeds, st.floats(0, 1), st.floats(0, 1))
def test_threshold_configurations_nest(seed, p1, p2):
    lo, hi = sorted((p1, p2))
    wf = sample_box(6, seed)
    a, b = threshold_config(wf, lo), threshold_config(wf, hi)
    assert not np.any(a.open & ~b.open)


@SLOW
@given(seeds, seeds, st.integers(2, 12))
def test_resampling_only_touches_its_region(seed, seed2, n):
    wf = sample_box(12, seed)
    sub = sample_box(n, 0).mask & wf.on_grid(n).mask
    sub_full = np.zeros_like(wf.mask)
    r = wf.radius
    sub_full[:, r - n : r + n + 1, r - n : r + n + 1] = sub
    new = resample_region(wf, sub_full, seed2)
    assert np.array_equal(new.weights[~sub_full], wf.weights[~sub_full], equal_nan=True)
    assert new.generation == wf.generation + 1


@SLOW
@given(small_annuli, seeds, st.floats(0.2, 0.8))
def test_maxflow_equals_min_defect_circuit(ab, seed, p):
    ann = AnnulusSpec(*ab)
    c = threshold_config(sample_box(ann.outer, seed), p)
    flow = count_disjoint_crossings(c, ann, witness=False).value
    assert flow == min_defect_circuit(c, ann).defect_count
    if ab in ((1, 2), (1, 3), (2, 4)):
        assert flow == brute_force_crossings(c, ann)


@SLOW
@given(small_annuli, seeds, st.floats(0.2, 0.8), st.data())
def test_opening_an_edge_adds_at_most_one_crossing(ab, seed, p, data):
    ann = AnnulusSpec(*ab)
    c = threshold_config(sample_box(ann.outer, seed), p)
    region = ann.edges()
    e = tuple(int(v) for v in region[data.draw(st.integers(0, len(region) - 1))])
    lo = count_disjoint_crossings(c.with_status(e, False), ann, witness=False).value
    hi = count_disjoint_crossings(c.with_status(e, True), ann, witness=False).value
    assert hi - lo in (0, 1)


@SLOW
@given(seeds, st.sampled_from([(1, 3), (2, 5), (3, 8)]), st.floats(0.4, 0.6), st.integers(0, 2))
def test_four_arm_monotone_in_budget(seed, sn, p, k):
    s, n = sn
    wf = sample_box(n, seed)
    base = detect_four_arm(wf, ArmEventSpec(p, p, s, n))
    per_arm = [detect_four_arm(wf, ArmEventSpec(p, p, s, n, budget=PerArm(j))) for j in range(k + 2)]
    total = [detect_four_arm(wf, ArmEventSpec(p, p, s, n, budget=Total(j))) for j in range(k + 2)]
    assert per_arm == sorted(per_arm) and total == sorted(total)
    assert per_arm[0] == total[0] == base


@given(st.integers(1, 10_000), st.data())
def test_wilson_interval_is_proper(n, data):
    k = data.draw(st.integers(0, n))
    w = wilson(k, n)
    assert 0.0 <= w.lower <= w.estimate <= w.upper <= 1.0
    assert w.estimate == k / n


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([16, 32, 64, 128]), st.sampled_from([1.0, 0.5, 0.25, 0.125, 0.0625]))
def test_tranche_balls_cover_every_edge(n, eps):
    t = build_tranche(n, eps)
    assert len(t) > 0
    assert np.all(t.first_ball >= 1) and np.all(t.first_ball <= t.num_balls)
    union = np.unique(np.concatenate([np.asarray(b, dtype=np.int64) for b in t.balls]))
    assert np.array_equal(union, np.arange(len(t)))
    assert np.abs(t.edges[:, :2]).max() <= n
