import itertools

import networkx as nx
import numpy as np
import pytest

from ipsplice import _grid
from ipsplice.crossings import (
    BRUTE_FORCE_MAX_SITES,
    brute_force_crossings,
    check_circuit,
    circuit_through_edge,
    count_disjoint_crossings,
    crossing_number,
    flip_budget_check,
    min_defect_circuit,
)
from ipsplice.errors import DomainError
from ipsplice.lattice import AnnulusSpec, EdgeId
from ipsplice.rng import derive_seed
from ipsplice.weights import Configuration, sample_box, threshold_config


def config_of(ann, open_edges=()):
    return Configuration.from_edges(ann.edges(), list(open_edges))


def all_open(ann):
    return config_of(ann, ann.edges())


def random_config(ann, seed, p=0.5):
    reach = max(abs(ann.center[0]), abs(ann.center[1])) + ann.outer
    return threshold_config(sample_box(reach, seed), p)


def networkx_crossings(config, ann):
    """Max-flow with networkx on the annulus with contracted boundary circles."""
    cx, cy = ann.center
    g = nx.DiGraph()

    def node(s):
        d = max(abs(s[0] - cx), abs(s[1] - cy))
        return "in" if d == ann.inner else "out" if d == ann.outer else s

    g.add_nodes_from(["in", "out"])
    for (x, y, o), st in zip(ann.edges(), config.status(ann.edges())):
        if not st:
            continue
        a, b = node((x, y)), node((x + 1, y) if o == 0 else (x, y + 1))
        if a == b:
            continue
        for u, v in ((a, b), (b, a)):
            cap = g[u][v]["capacity"] + 1 if g.has_edge(u, v) else 1
            g.add_edge(u, v, capacity=cap)
    return int(nx.maximum_flow_value(g, "in", "out"))


@pytest.mark.parametrize("a, b", [(1, 2), (2, 4), (1, 3), (3, 6)])
def test_all_closed(a, b):
    ann = AnnulusSpec(a, b)
    c = config_of(ann)
    assert count_disjoint_crossings(c, ann).value == 0
    circ = min_defect_circuit(c, ann)
    assert circ.defect_count == 0
    check_circuit(circ, c, ann)


@pytest.mark.parametrize("a, b, expected", [(1, 2, 12), (2, 4, 20), (1, 3, 12)])
def test_all_open(a, b, expected):
    ann = AnnulusSpec(a, b)
    c = all_open(ann)
    assert count_disjoint_crossings(c, ann).value == expected
    assert min_defect_circuit(c, ann).defect_count == expected
    assert brute_force_crossings(c, ann) == expected


def test_single_radial_path():
    ann = AnnulusSpec(2, 5)
    path = [(x, 0, 0) for x in range(2, 5)]
    c = config_of(ann, path)
    res = count_disjoint_crossings(c, ann)
    assert res.value == 1
    assert len(res.paths) == 1
    assert min_defect_circuit(c, ann).defect_count == 1


def test_witness_paths_and_min_cut():
    for k in range(30):
        ann = AnnulusSpec(2, 6, (k % 3 - 1, 1 - k % 2))
        c = random_config(ann, derive_seed(3, k), 0.6)
        res = count_disjoint_crossings(c, ann)
        assert len(res.paths) == res.value
        used = set()
        for path in res.paths:
            lv = [max(abs(x - ann.center[0]), abs(y - ann.center[1])) for x, y in path]
            assert lv[0] == ann.inner and lv[-1] == ann.outer
            for s, t in zip(path, path[1:]):
                e = tuple(EdgeId.between(s, t))
                assert c.is_open(e) and e not in used
                used.add(e)
        assert int(c.status(res.min_cut).sum()) == res.value
        op = c.open.copy()
        op[_grid.index(res.min_cut, c.radius)] = False
        assert crossing_number(Configuration(c.radius, op, c.mask.copy()), ann) == 0


@pytest.mark.parametrize("a, b", [(1, 2), (2, 4), (1, 3)])
def test_maxflow_dual_and_brute_force_agree(a, b):
    ann = AnnulusSpec(a, b)
    for k in range(150):
        c = random_config(ann, derive_seed(a, b, k), 0.3 + 0.4 * (k % 3) / 2)
        n = count_disjoint_crossings(c, ann, witness=False).value
        circ = min_defect_circuit(c, ann)
        check_circuit(circ, c, ann)
        assert n == circ.defect_count == brute_force_crossings(c, ann)


@pytest.mark.parametrize("a, b, center", [(3, 6, (0, 0)), (4, 9, (2, -1)), (5, 10, (0, 0))])
def test_maxflow_and_dual_match_networkx(a, b, center):
    ann = AnnulusSpec(a, b, center)
    for k in range(25):
        c = random_config(ann, derive_seed(7, a, b, k), 0.5 + 0.1 * (k % 3))
        n = count_disjoint_crossings(c, ann, witness=False).value
        assert n == networkx_crossings(c, ann)
        circ = min_defect_circuit(c, ann)
        check_circuit(circ, c, ann)
        assert circ.defect_count == n


def test_circuit_through_only_open_edge():
    ann = AnnulusSpec(2, 4)
    e = (3, 1, 1)
    c = config_of(ann, [e])
    assert circuit_through_edge(c, ann, e, 0) is None
    circ = circuit_through_edge(c, ann, e, 1)
    assert circ is not None and circ.defect_count == 1
    assert tuple(e) in {tuple(r) for r in circ.crossed.tolist()}
    check_circuit(circ, c, ann)


def test_circuit_through_closed_edge_in_closed_annulus():
    ann = AnnulusSpec(2, 5)
    c = config_of(ann)
    for e in [(3, 0, 0), (-3, 2, 1), (0, -4, 1), (4, 0, 1)]:
        circ = circuit_through_edge(c, ann, e, 0)
        assert circ is not None and circ.defect_count == 0
        assert tuple(e) in {tuple(r) for r in circ.crossed.tolist()}
        check_circuit(circ, c, ann)


def test_circuit_through_boundary_edge_is_absent():
    ann = AnnulusSpec(2, 5)
    assert circuit_through_edge(config_of(ann), ann, (2, 0, 1), 10) is None


def test_circuit_through_edge_outside_annulus():
    ann = AnnulusSpec(2, 5)
    with pytest.raises(DomainError):
        circuit_through_edge(config_of(ann), ann, (0, 0, 0), 3)


def test_flip_budget_exhaustive_small_fixture():
    from ipsplice.verify import radial_fixture_edges

    ann = AnnulusSpec(1, 2)
    fixture = radial_fixture_edges()
    assert len(fixture) == 12
    for bits in itertools.product((False, True), repeat=12):
        c = Configuration.from_edges(ann.edges(), fixture[list(bits)])
        assert crossing_number(c, ann) == sum(bits)
        _, jumps, missing = flip_budget_check(c, ann)
        assert jumps == 0 and missing == 0


@pytest.mark.parametrize("a, b", [(1, 3), (2, 4), (2, 5)])
def test_flip_budget_on_random_configurations(a, b):
    ann = AnnulusSpec(a, b)
    pivotal = 0
    for k in range(150):
        p, jumps, missing = flip_budget_check(random_config(ann, derive_seed(11, a, b, k)), ann)
        pivotal += p
        assert jumps == 0 and missing == 0
    assert pivotal > 0


def test_flip_budget_check_agrees_with_direct_flips():
    ann = AnnulusSpec(2, 4)
    for k in range(8):
        c = random_config(ann, derive_seed(13, k))
        N = crossing_number(c, ann)
        count = 0
        for e in ann.edges():
            e = tuple(int(v) for v in e)
            lo = crossing_number(c.with_status(e, False), ann)
            hi = crossing_number(c.with_status(e, True), ann)
            assert hi - lo in (0, 1)
            if hi != lo:
                count += 1
                assert circuit_through_edge(c, ann, e, N) is not None
        assert flip_budget_check(c, ann)[0] == count


def test_brute_force_refuses_large_annulus():
    ann = AnnulusSpec(2, 6)
    assert len([1 for s in ann.sites() if 2 < max(abs(s[0]), abs(s[1])) < 6]) > BRUTE_FORCE_MAX_SITES
    with pytest.raises(DomainError):
        brute_force_crossings(config_of(ann), ann)


def test_configuration_must_cover_annulus():
    small = Configuration.from_edges(AnnulusSpec(1, 2).edges())
    with pytest.raises(DomainError):
        count_disjoint_crossings(small, AnnulusSpec(2, 4))
