import numpy as np
import pytest

from ipsplice.lattice import AnnulusSpec, box_edges
from ipsplice.rng import derive_seed, edge_weights
from ipsplice.weights import (
    dump_field,
    field_from_values,
    load_field,
    resample_region,
    sample_box,
    sample_weights,
    threshold_config,
)


def test_sampling_is_deterministic():
    e = box_edges(3)
    a, b = sample_weights(e, 11), sample_weights(e, 11)
    assert np.array_equal(a.values(e), b.values(e))


def test_sampling_ignores_enumeration_order():
    e = box_edges(3)
    a = sample_weights(e, 5)
    b = sample_weights(e[::-1].copy(), 5)
    assert np.array_equal(a.values(e), b.values(e))


def test_box_fast_path_matches_generic_sampler():
    e = box_edges(6)
    assert np.array_equal(sample_box(6, 9).values(e), sample_weights(e, 9).values(e))
    assert np.array_equal(edge_weights(9, e), sample_box(6, 9).values(e))


def test_weights_do_not_depend_on_grid_radius():
    e = box_edges(4)
    assert np.array_equal(sample_box(4, 3).values(e), sample_box(4, 3, radius=9).values(e))


@pytest.mark.parametrize("pair", range(10))
def test_distinct_seeds_give_distinct_fields(pair):
    e = box_edges(2)
    a = sample_weights(e, derive_seed(0, pair, 0)).values(e)
    b = sample_weights(e, derive_seed(0, pair, 1)).values(e)
    assert np.any(a != b)


def test_weights_are_interior_and_mean_half():
    # 10^6 edges: 3 sigma of the mean of uniforms is 3 / sqrt(12) / 1000
    wf = sample_box(354, 2024)
    v = wf.weights[wf.mask]
    assert len(v) >= 10**6
    assert v.min() > 0.0 and v.max() < 1.0
    assert abs(v.mean() - 0.5) < 0.002


def test_weights_pass_a_uniformity_check():
    v = sample_box(100, 1).weights.ravel()
    v = v[~np.isnan(v)]
    hist, _ = np.histogram(v, bins=20, range=(0, 1))
    expected = len(v) / 20
    chi2 = float(((hist - expected) ** 2 / expected).sum())
    assert chi2 < 43.8  # 99.9% quantile of chi-square with 19 degrees of freedom


def test_resample_empty_subset_is_identity():
    wf = sample_box(3, 1)
    out = resample_region(wf, np.empty((0, 3), dtype=np.int64), 2)
    assert np.array_equal(out.weights, wf.weights, equal_nan=True)
    assert out.generation == wf.generation + 1


def test_resample_everything_equals_fresh_sample():
    e = box_edges(3)
    wf = sample_box(3, 1)
    assert np.array_equal(resample_region(wf, e, 77).values(e), sample_weights(e, 77).values(e))


def test_resample_single_edge_changes_one_weight():
    e = box_edges(3)
    wf = sample_box(3, 1)
    before = wf.values(e).copy()
    after = resample_region(wf, [(0, 0, 1)], 5).values(e)
    changed = np.flatnonzero(before != after)
    assert len(changed) == 1 and tuple(e[changed[0]]) == (0, 0, 1)
    assert np.array_equal(wf.values(e), before)


def test_resample_accepts_boolean_mask():
    wf = sample_box(3, 1)
    ann = AnnulusSpec(1, 2)
    by_edges = resample_region(wf, ann.edges(), 4)
    mask = np.zeros_like(wf.mask)
    from ipsplice import _grid

    mask[_grid.index(ann.edges(), wf.radius)] = True
    assert np.array_equal(resample_region(wf, mask, 4).weights, by_edges.weights, equal_nan=True)


def test_resample_outside_region_rejected():
    wf = sample_box(2, 1)
    with pytest.raises(ValueError):
        resample_region(wf, [(5, 5, 0)], 1)


def test_threshold_extremes_and_nesting():
    wf = sample_box(4, 8)
    assert not threshold_config(wf, 0.0).open.any()
    assert np.array_equal(threshold_config(wf, 1.0).open, wf.mask)
    ps = [0.1, 0.3, 0.5, 0.7, 0.9]
    confs = [threshold_config(wf, p).open for p in ps]
    for lo, hi in zip(confs, confs[1:]):
        assert not np.any(lo & ~hi)


def test_threshold_rejects_bad_p():
    with pytest.raises(ValueError):
        threshold_config(sample_box(1, 0), 1.5)


def test_field_from_values_validation():
    with pytest.raises(ValueError):
        field_from_values({(0, 0, 0): 0.0})
    with pytest.raises(ValueError):
        field_from_values([((0, 0, 0), 0.2), ((0, 0, 0), 0.3)])
    wf = field_from_values({(0, 0, 0): 0.25})
    assert wf.weight((0, 0, 0)) == 0.25 and len(wf) == 1


def test_dump_and_load_roundtrip(tmp_path):
    wf = resample_region(sample_box(3, 12), AnnulusSpec(1, 2).edges(), 3)
    path = tmp_path / "field.ipwf"
    dump_field(wf, path)
    assert path.read_bytes()[:4] == b"IPWF"
    back = load_field(path)
    assert back.radius == wf.radius and back.seed == wf.seed and back.generation == wf.generation
    assert np.array_equal(back.weights, wf.weights, equal_nan=True)


def test_cropped_field_drops_edges_leaving_the_box():
    wf = sample_box(6, 3).on_grid(4)
    region = wf.region()
    assert len(region) == len(box_edges(4))
    assert np.array_equal(wf.values(region), sample_box(6, 3).values(region))
