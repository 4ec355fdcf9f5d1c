"""
Small-instance self-checks behind ``ipsplice verify``.

Each check compares a fast routine with an independent slow one, or with an
exactly known value, on inputs small enough to finish in seconds.
"""

from __future__ import annotations

import itertools
import time
from fractions import Fraction

import numpy as np

from .arms import ArmEventSpec, detect_four_arm, estimate_correlation_length, rectangle_crossing_probability
from .crossings import (
    brute_force_crossings,
    check_circuit,
    count_disjoint_crossings,
    flip_budget_check,
    min_defect_circuit,
)
from .invasion import StopRule, invade
from .lattice import AnnulusSpec
from .oracles import exact_crossing_probability, four_arm_by_paths, naive_invasion
from .rng import derive_seed
from .weights import Configuration, sample_box, threshold_config

__all__ = ["run_all", "radial_fixture_edges", "CHECKS"]


def _result(name, passed, detail, t0):
    return {"name": name, "passed": bool(passed), "detail": f"{detail}; {time.perf_counter() - t0:.1f}s"}


def _random_config(ann: AnnulusSpec, seed: int, p: float = 0.5) -> Configuration:
    return threshold_config(sample_box(ann.outer, seed), p)


def check_duality(seed: int, configs: int, annuli=((1, 2), (2, 4))) -> dict:
    t0 = time.perf_counter()
    bad = 0
    for a, b in annuli:
        ann = AnnulusSpec(a, b)
        for k in range(configs):
            c = _random_config(ann, derive_seed(seed, a, b, k))
            flow = count_disjoint_crossings(c, ann, witness=False).value
            circ = min_defect_circuit(c, ann)
            check_circuit(circ, c, ann)
            if not flow == circ.defect_count == brute_force_crossings(c, ann):
                bad += 1
    return _result("duality", bad == 0, f"{bad} disagreements in {configs * len(annuli)} configurations", t0)


def radial_fixture_edges() -> np.ndarray:
    """The 12 edges of Ann(1, 2) joining the two boundary squares.

    Edges inside either boundary square are contracted by the crossing
    count, so these 12 edges carry every configuration of Ann(1, 2).
    """
    ann = AnnulusSpec(1, 2)
    e = ann.edges()
    x, y, o = e[:, 0], e[:, 1], e[:, 2]
    x2, y2 = x + (o == 0), y + (o == 1)
    l1 = np.maximum(np.abs(x), np.abs(y))
    l2 = np.maximum(np.abs(x2), np.abs(y2))
    return e[l1 != l2]


def check_flip_budget_fixture() -> dict:
    t0 = time.perf_counter()
    ann = AnnulusSpec(1, 2)
    fixture = radial_fixture_edges()
    pivotal = bad = 0
    for bits in itertools.product((False, True), repeat=len(fixture)):
        c = Configuration.from_edges(ann.edges(), fixture[list(bits)])
        p, j, m = flip_budget_check(c, ann)
        pivotal += p
        bad += j + m
    return _result(
        "flip_budget_fixture", bad == 0 and len(fixture) == 12,
        f"{2 ** len(fixture)} configurations, {pivotal} pivotal flips, {bad} counterexamples", t0,
    )


def check_flip_budget_random(seed: int, count: int, annuli=((1, 2), (1, 3), (2, 4))) -> dict:
    t0 = time.perf_counter()
    pivotal = bad = 0
    for a, b in annuli:
        ann = AnnulusSpec(a, b)
        for k in range(count):
            p, j, m = flip_budget_check(_random_config(ann, derive_seed(seed, 7, a, b, k)), ann)
            pivotal += p
            bad += j + m
    return _result("flip_budget_random", bad == 0, f"{count * len(annuli)} configurations, {pivotal} pivotal flips, {bad} counterexamples", t0)


def check_self_dual_exact() -> dict:
    t0 = time.perf_counter()
    vals = [exact_crossing_probability(n + 1, n, Fraction(1, 2)) for n in (1, 2)]
    return _result("self_dual_exact", all(v == Fraction(1, 2) for v in vals), f"exact values {[str(v) for v in vals]}", t0)


def check_rectangle_mc(seed: int, samples: int) -> dict:
    """Monte Carlo rectangle crossing against exact enumeration, within 3 sigma."""
    t0 = time.perf_counter()
    worst = 0.0
    for w, h, p in ((2, 2, 0.5), (3, 2, 0.6), (3, 3, 0.45)):
        exact = float(exact_crossing_probability(w, h, Fraction(p).limit_denominator(100)))
        est = rectangle_crossing_probability(w, h, p, samples, derive_seed(seed, w, h))
        worst = max(worst, abs(est.estimate - exact) / max(est.stderr, 1e-12))
    return _result("rectangle_vs_exact", worst <= 3.0, f"max deviation {worst:.2f} sigma", t0)


def check_corrlen(seed: int) -> dict:
    """At p = 1 every box is crossed, so L equals the smallest scale."""
    t0 = time.perf_counter()
    est = estimate_correlation_length(1.0, 0.1, [1, 2, 4], 200, seed)
    return _result("corrlen_p1", est.L == 1, f"L = {est.L}", t0)


def check_four_arm(seed: int, count: int) -> dict:
    t0 = time.perf_counter()
    bad = total = 0
    for s, n in ((1, 2), (1, 3), (2, 4)):
        ann = AnnulusSpec(s, n)
        for k in range(count):
            wf = sample_box(n, derive_seed(seed, 11, s, n, k))
            for p, q in ((0.5, 0.5), (0.4, 0.6)):
                total += 1
                bad += detect_four_arm(wf, ArmEventSpec(p, q, s, n)) != four_arm_by_paths(wf, ann, p, q)
    return _result("four_arm_vs_paths", bad == 0, f"{bad} disagreements in {total} cases", t0)


def check_invasion(seed: int, runs: int, steps: int) -> dict:
    t0 = time.perf_counter()
    bad = 0
    for k in range(runs):
        wf = sample_box(128, derive_seed(seed, 13, k))
        fast = invade(wf, StopRule(max_steps=steps))
        slow = naive_invasion(wf, steps)
        # the naive scan stops where the field ends; a truncated fast run goes on
        same = (len(slow) == len(fast) or (fast.truncated and len(slow) < len(fast))) and all(
            tuple(int(v) for v in e) == se and float(w) == sw for e, w, (se, sw) in zip(fast.edges, fast.weights, slow)
        )
        bad += not same
    return _result("invasion_vs_naive", bad == 0, f"{bad} of {runs} replays differ", t0)


CHECKS = ("duality", "flip_budget_fixture", "flip_budget_random", "self_dual_exact", "rectangle_vs_exact", "corrlen_p1",
          "four_arm_vs_paths", "invasion_vs_naive")


def run_all(p: dict) -> list[dict]:
    seed = p["seed"]
    out = [check_duality(seed, p["configs"])]
    if p["fixture"]:
        out.append(check_flip_budget_fixture())
    out += [
        check_flip_budget_random(seed, p["flip_budget_random"]),
        check_self_dual_exact(),
        check_rectangle_mc(seed, p["rect_samples"]),
        check_corrlen(seed),
        check_four_arm(seed, p["arm_checks"]),
        check_invasion(seed, p["invasion_checks"], p["invasion_steps"]),
    ]
    return out
