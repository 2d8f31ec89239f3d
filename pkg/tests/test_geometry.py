import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from whitepet.errors import InvalidGeometry, NoCoincidencePossible
from whitepet.geometry import (EIGHT_ACTIVE, FOUR_ACTIVE, build_scanner, effective_half_length,
                               enumerate_pairs, pair_weight)


def brute_force_pairs(geom):
    """Independent enumeration over every crystal index pair."""
    out = []
    per = geom.crystals_per_sector
    centers = []
    for s in geom.active_sectors:
        rad = geom.sector_radius(s)
        for c in range(per):
            a = geom.sector_angles[s] + (c - (per - 1) / 2) * geom.crystal_pitch / rad
            centers.append((s, rad, rad * np.cos(a), rad * np.sin(a)))
    for i, j in itertools.combinations(range(len(centers)), 2):
        si, ri, xi, yi = centers[i]
        sj, rj, xj, yj = centers[j]
        if si == sj:
            continue
        h = abs(xi * yj - yi * xj) / np.hypot(xj - xi, yj - yi)
        if h < geom.fov_radius:
            L = 0.25 * geom.crystal_length * (np.sqrt(1 - (h / ri) ** 2) + np.sqrt(1 - (h / rj) ** 2))
            out.append((i, j, h, 0.5 * np.hypot(xj - xi, yj - yi), L))
    return out


def test_default_scanner_is_eight_active():
    g = build_scanner()
    assert g.n_sectors == 20
    assert g.active_sectors == EIGHT_ACTIVE
    assert g.intersection_config == "EightActive"
    assert g.crystals().center.shape == (64, 2)


def test_four_contiguous_plus_four_opposite_is_valid():
    g = build_scanner(active_sectors=[0, 1, 2, 3, 10, 11, 12, 13])
    assert sum(g.active_mask) == 8
    assert len(g.pairs()) > 0


@pytest.mark.parametrize("active", [[], [False] * 20, [3]])
def test_no_coincidence_possible(active):
    with pytest.raises(NoCoincidencePossible):
        build_scanner(active_sectors=active)


def test_adjacent_sectors_only_see_nothing_through_a_tiny_fov():
    # two neighbouring sectors: every cross-sector chord misses a small FOV
    with pytest.raises(NoCoincidencePossible):
        build_scanner(active_sectors=[0, 1], fov_radius=5.0)


def test_crystal_longer_than_ring_radius_rejected():
    with pytest.raises(InvalidGeometry):
        build_scanner(crystal_length=60.0, ring_radii=(50.0,), fov_radius=20.0)


@pytest.mark.parametrize("field,value", [
    ("crystal_pitch", 0.0), ("crystal_length", -1.0), ("fov_radius", 0.0),
    ("ring_radii", (70.0, -75.0)), ("crystals_per_sector", 0),
])
def test_non_positive_dimensions_rejected(field, value):
    with pytest.raises(InvalidGeometry):
        build_scanner(**{field: value})


@pytest.mark.parametrize("h,R,L0,expected", [
    (0.0, 50.0, 10.0, 5.0),
    (25.0, 50.0, 10.0, 5.0 * np.sqrt(3.0) / 2.0),
    (12.5, 25.0, 10.0, 4.330127018922193),
])
def test_effective_half_length_values(h, R, L0, expected):
    assert effective_half_length(h, R, L0) == pytest.approx(expected, rel=1e-14)


def test_effective_half_length_vanishes_at_the_ring():
    vals = effective_half_length(50.0 * (1 - np.logspace(-2, -12, 6)), 50.0, 10.0)
    assert np.all(np.diff(vals) < 0) and vals[-1] < 1e-4


@pytest.mark.parametrize("h", [50.0, 60.0, -1.0])
def test_effective_half_length_outside_ring_is_an_error(h):
    with pytest.raises(InvalidGeometry):
        effective_half_length(h, 50.0, 10.0)


@pytest.mark.parametrize("L,w", [(5.0, 25.0), (0.0, 0.0), (0.5, 0.25)])
def test_pair_weight_values(L, w):
    assert pair_weight(L) == w


@given(st.floats(0.0, 1e3, allow_nan=False))
def test_doubling_length_quadruples_weight(L):
    assert pair_weight(2 * L) == pytest.approx(4 * pair_weight(L), rel=1e-15, abs=0)


def test_diametral_single_pair():
    g = build_scanner(n_sectors=2, active_sectors=[0, 1], crystals_per_sector=1,
                      ring_radii=(50.0,), fov_radius=20.0, crystal_length=4.0)
    pairs = enumerate_pairs(g)
    assert len(pairs) == 1
    p = pairs[0]
    assert p.h == pytest.approx(0.0, abs=1e-12)
    assert p.R == pytest.approx(50.0, rel=1e-14)
    assert p.L_eff == pytest.approx(2.0) and p.w == pytest.approx(4.0)


@pytest.mark.parametrize("active", [EIGHT_ACTIVE, FOUR_ACTIVE, tuple(range(20))])
def test_enumeration_matches_brute_force(active):
    g = build_scanner(active_sectors=active)
    pairs = g.pairs()
    ref = brute_force_pairs(g)
    assert len(pairs) == len(ref)
    got = np.column_stack([pairs.i, pairs.j, pairs.h, pairs.R, pairs.L_eff])
    np.testing.assert_allclose(got, np.array(ref), rtol=1e-12, atol=1e-12)


def test_frozen_pair_counts():
    assert len(build_scanner(active_sectors="EightActive").pairs()) == 950
    assert len(build_scanner(active_sectors="FourActive").pairs()) == 256


def test_pair_ids_sorted_and_lookup_consistent():
    pairs = build_scanner().pairs()
    keys = list(zip(pairs.i.tolist(), pairs.j.tolist()))
    assert keys == sorted(keys)
    assert np.all(pairs.index[pairs.i, pairs.j] == np.arange(len(pairs)))
    assert np.all(pairs.index[pairs.j, pairs.i] == np.arange(len(pairs)))
    assert [p.pair_id for p in pairs] == list(range(len(pairs)))


@pytest.mark.parametrize("active", ["EightActive", "FourActive"])
def test_pair_invariants(active):
    g = build_scanner(active_sectors=active)
    p = g.pairs()
    assert np.all(p.h >= 0) and np.all(p.h < p.R)
    assert np.all(p.L_eff <= g.crystal_length / 2)
    np.testing.assert_array_equal(p.w, p.L_eff ** 2)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 2 * np.pi))
def test_rotation_leaves_pair_multiset_unchanged(angle):
    a = build_scanner().pairs()
    b = build_scanner(sector_offset=angle).pairs()

    def rows(p):
        cols = np.column_stack([p.h, p.R, p.L_eff])
        keys = np.round(cols, 5)
        return cols[np.lexsort(keys.T[::-1])]

    assert len(a) == len(b)
    np.testing.assert_allclose(rows(a), rows(b), atol=1e-7)
