import math

import numpy as np
import pytest

from ipsplice._parallel import chunks, map_chunks
from ipsplice.rng import derive_seed, edge_weights, normalize_seed, seed_keys
from ipsplice.stats import Z95, EstimateWithCI, wald_mean, wilson

M64 = (1 << 64) - 1


def splitmix(z):
    z &= M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M64
    return z ^ (z >> 31)


def reference_weight(seed, x, y, o):
    """Pure-integer transcription of the edge hash."""
    s = seed & M64
    k1 = splitmix(s ^ 0x243F6A8885A308D3)
    k2 = splitmix((s + 0x9E3779B97F4A7C15) & M64)
    key = ((x + (1 << 30)) << 33) | ((y + (1 << 30)) << 1) | o
    h = splitmix((splitmix(key ^ k1) + k2) & M64)
    return ((h >> 11) + 0.5) / 2.0**53


def test_edge_hash_matches_integer_reference():
    edges = [(0, 0, 0), (-5, 3, 1), (1000, -1000, 0), (-(1 << 20), 7, 1)]
    for seed in (0, 1, 2**63 + 5, -1):
        got = edge_weights(seed, edges)
        assert got.tolist() == [reference_weight(seed, *e) for e in edges]


def test_seed_normalisation():
    assert normalize_seed(-1) == M64
    assert seed_keys(-1) == seed_keys(M64)


def test_derive_seed_is_path_sensitive():
    seen = {derive_seed(1, *p) for p in [(), (0,), (1,), (0, 0), (0, 1), (1, 0)]}
    assert len(seen) == 6
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)


def test_chunks_cover_range():
    assert chunks(0) == []
    assert chunks(7, 3) == [(0, 3), (3, 6), (6, 7)]


def _square_range(a, b, k):
    return [k * i * i for i in range(a, b)]


def test_map_chunks_is_worker_independent():
    one = map_chunks(_square_range, 1000, (3,), workers=1, size=64)
    many = map_chunks(_square_range, 1000, (3,), workers=4, size=64)
    assert one == many
    assert sum(one, []) == [3 * i * i for i in range(1000)]


def test_wilson_zero_successes():
    e = wilson(0, 10, seed=4)
    assert e.estimate == 0.0 and e.lower == 0.0
    assert math.isclose(e.upper, Z95**2 / (10 + Z95**2))
    assert e.stderr > 0 and e.seed == 4 and e.method == "wilson"


def test_wilson_all_successes_and_symmetry():
    a, b = wilson(10, 10), wilson(0, 10)
    assert a.upper == 1.0 and math.isclose(a.lower, 1 - b.upper)
    c, d = wilson(3, 20), wilson(17, 20)
    assert math.isclose(c.stderr, d.stderr)
    assert math.isclose(c.lower, 1 - d.upper)


def test_wilson_matches_closed_form():
    k, n = 37, 120
    p = k / n
    z = Z95
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z / (1 + z * z / n) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    e = wilson(k, n)
    assert math.isclose(e.lower, centre - half) and math.isclose(e.upper, centre + half)
    assert math.isclose(e.stderr, half / z)


def test_wilson_validation():
    with pytest.raises(ValueError):
        wilson(1, 0)
    with pytest.raises(ValueError):
        wilson(5, 4)


def test_wald_mean():
    v = np.array([0.0, 1.0, 2.0, 3.0])
    e = wald_mean(v, seed=2)
    assert e.estimate == 1.5
    assert math.isclose(e.stderr, np.std(v, ddof=1) / 2)
    assert wald_mean([0.25]).stderr == 0.0


def test_differs_from():
    a = EstimateWithCI(0.5, 0.03, 100, "wilson", 0, 0.4, 0.6)
    b = EstimateWithCI(0.4, 0.04, 100, "wilson", 0, 0.3, 0.5)
    assert math.isclose(a.differs_from(b), 0.1 / 0.05)
    assert a.as_dict()["samples"] == 100
