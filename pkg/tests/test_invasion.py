import numpy as np
import pytest

from ipsplice.errors import DomainError
from ipsplice.invasion import (
    StopReason,
    StopRule,
    invade,
    invaded_weight_tail,
    invasion_configuration,
    write_invasion_csv,
)
from ipsplice.lattice import box_edges, graph_boundary
from ipsplice.oracles import naive_invasion
from ipsplice.rng import derive_seed
from ipsplice.weights import field_from_values, sample_box, threshold_config

UP, DOWN, LEFT, RIGHT = (0, 0, 1), (0, -1, 1), (-1, 0, 0), (0, 0, 0)
DOWN2, LEFT2, RIGHT2 = (0, -2, 1), (-1, -1, 0), (0, -1, 0)


def hand_field():
    vals = {tuple(int(v) for v in e): 0.95 for e in box_edges(4)}
    vals.update({UP: 0.9, DOWN: 0.3, LEFT: 0.7, RIGHT: 0.5, DOWN2: 0.8, LEFT2: 0.6, RIGHT2: 0.4})
    return field_from_values(vals)


def edges_of(res):
    return [tuple(int(v) for v in e) for e in res.edges]


def test_first_step_takes_smallest_origin_edge():
    assert edges_of(invade(hand_field(), StopRule(max_steps=1))) == [DOWN]


def test_second_step_from_the_new_site():
    res = invade(hand_field(), StopRule(max_steps=2))
    assert edges_of(res) == [DOWN, RIGHT2]
    assert res.weights.tolist() == [0.3, 0.4]
    assert res.stop_reason is StopReason.STEP_BUDGET


def test_hand_run_continues_in_weight_order():
    res = invade(hand_field(), StopRule(max_steps=6))
    # frontier after two steps holds 0.5, 0.6, 0.7, 0.8, 0.9 and the 0.95 background
    assert res.weights.tolist()[2:6] == [0.5, 0.6, 0.7, 0.8]


def test_zero_steps_gives_origin_only():
    res = invade(hand_field(), StopRule(max_steps=0))
    assert len(res) == 0
    assert res.sites.tolist() == [[0, 0]]
    assert res.max_distance() == 0


def test_exit_radius_stop():
    res = invade(sample_box(20, 4), StopRule(exit_radius=6))
    assert res.stop_reason is StopReason.REACHED_RADIUS
    assert res.max_distance() == 6
    assert np.abs(res.sites[:-1]).max() <= 6


def test_field_too_small_for_exit_radius():
    with pytest.raises(DomainError):
        invade(sample_box(3, 4), StopRule(exit_radius=10))


def test_stop_rule_needs_a_bound():
    with pytest.raises(ValueError):
        StopRule()


@pytest.mark.parametrize("k", range(4))
def test_replay_against_naive_scan(k):
    wf = sample_box(400, derive_seed(5, k))
    fast = invade(wf, StopRule(max_steps=10_000 if k == 0 else 2000))
    assert not fast.truncated
    slow = naive_invasion(wf.on_grid(fast.max_distance() + 2), len(fast))
    assert edges_of(fast) == [e for e, _ in slow]
    assert fast.weights.tolist() == [w for _, w in slow]


def test_greedy_rule_against_boundary_at_each_step():
    wf = sample_box(20, 3)
    res = invade(wf, StopRule(max_steps=150))
    vals = wf.as_dict()
    sites = {(0, 0)}
    done = []
    for e, w in zip(edges_of(res), res.weights):
        frontier = graph_boundary(sorted(sites), done) if done else graph_boundary([(0, 0)], [])
        assert w == min(vals[tuple(int(v) for v in f)] for f in frontier)
        assert e in {tuple(int(v) for v in f) for f in frontier}
        done.append(e)
        x, y, o = e
        sites |= {(x, y), (x + 1, y) if o == 0 else (x, y + 1)}


def test_invasion_configuration_counts():
    res = invade(hand_field(), StopRule(max_steps=2))
    c = invasion_configuration(res, box_edges(2))
    assert int(c.open.sum()) == 2
    empty = invasion_configuration(invade(hand_field(), StopRule(max_steps=0)), box_edges(2))
    assert not empty.open.any()
    far = invasion_configuration(res, [(3, 3, 0), (3, 3, 1)])
    assert not far.open.any()


def test_coupling_containment():
    wf = sample_box(40, 17)
    res = invade(wf, StopRule(max_steps=3000))
    for p in (0.45, 0.5, 0.55):
        op = threshold_config(wf, p)
        low = res.edges[res.weights < p]
        assert op.status(low).all()


def test_invaded_set_grows():
    wf = sample_box(30, 2)
    a = invade(wf, StopRule(max_steps=500))
    b = invade(wf, StopRule(max_steps=900))
    assert edges_of(b)[:500] == edges_of(a)


def test_weight_tail():
    res = invade(hand_field(), StopRule(max_steps=1))
    assert invaded_weight_tail(res, 1.0) == 0.3
    long = invade(sample_box(60, 1), StopRule(max_steps=4000))
    assert invaded_weight_tail(long, 0.1) <= invaded_weight_tail(long, 0.5)
    with pytest.raises(DomainError):
        invaded_weight_tail(invade(hand_field(), StopRule(max_steps=0)), 0.1)


def test_csv_export(tmp_path):
    res = invade(hand_field(), StopRule(max_steps=2))
    path = tmp_path / "inv.csv"
    write_invasion_csv(res, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "step,edge_x,edge_y,orientation,weight"
    assert lines[1:] == ["1,0,-1,V,0.3", "2,0,-1,H,0.4"]
