import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from whitepet import _accel
from whitepet.errors import InvalidGeometry, MismatchedShapes, NoAcceptedEventsWarning
from whitepet.geometry import build_scanner
from whitepet.geometry import PairTable
from whitepet.response import rotated_triangle
from whitepet.whiteimage import (GridSpec, Image, RadialProfile, block_sum, compare_white_images,
                                 profile_from_pairs, radius_table, rasterize_radial,
                                 white_image_analytic, white_image_mc, white_image_profile)


@pytest.fixture(scope="module")
def eight():
    return build_scanner(active_sectors="EightActive")


@pytest.fixture(scope="module")
def single():
    return build_scanner(n_sectors=2, active_sectors=[0, 1], crystals_per_sector=1,
                         ring_radii=(50.0,), fov_radius=20.0, crystal_length=4.0)


# ------------------------------------------------------------------ grid


@pytest.mark.parametrize("n,fov", [(1, 32.0), (0, 32.0), (16, 0.0), (16, -1.0), (16, np.inf)])
def test_grid_validation(n, fov):
    with pytest.raises(ValueError):
        GridSpec(n, fov)


@pytest.mark.parametrize("n", [2, 7, 64, 256])
def test_grid_geometry(n):
    g = GridSpec(n, 32.0)
    assert g.pixel_size == pytest.approx(64.0 / n)
    c = g.centers
    np.testing.assert_array_equal(c, -c[::-1])
    assert c[0] - 0.5 * g.pixel_size == pytest.approx(-32.0)
    assert g.disk_mask().sum() >= g.interior_mask().sum()


def test_pixel_of_roundtrip():
    g = GridSpec(8, 4.0)
    i, j = g.pixel_of(g.centers[[0, 3, 7]], g.centers[[7, 2, 0]])
    np.testing.assert_array_equal(j, [0, 3, 7])
    np.testing.assert_array_equal(i, [7, 2, 0])
    i, j = g.pixel_of(np.array([-99.0, 99.0]), np.array([99.0, -99.0]))
    np.testing.assert_array_equal(j, [0, 7])
    np.testing.assert_array_equal(i, [7, 0])


def test_image_shape_checked():
    with pytest.raises(MismatchedShapes):
        Image(np.zeros((4, 5)), GridSpec(4, 1.0))


# ------------------------------------------------------------ rasterize


def test_constant_profile_gives_constant_image():
    g = GridSpec(32, 10.0)
    img = rasterize_radial(RadialProfile(np.array([0.0, 100.0]), np.array([2.5, 2.5])), g)
    assert np.all(img.values == 2.5)


def test_profile_zero_on_outer_annulus():
    g = GridSpec(64, 10.0)
    img = rasterize_radial(lambda r: np.where(r <= 5.0, 1.0, 0.0), g)
    assert np.all(img.values[g.radius() > 5.0] == 0.0)
    assert np.all(img.values[g.radius() <= 5.0] == 1.0)


def test_rasterize_callable_matches_direct_evaluation():
    g = GridSpec(96, 32.0)
    img = rasterize_radial(lambda r: rotated_triangle(r, 3.0, 70.0, 1.0), g)
    direct = rotated_triangle(g.radius(), 3.0, 70.0, 1.0)
    np.testing.assert_allclose(img.values, direct, rtol=1e-6, atol=0)


def test_radius_table_interpolation_error_is_small():
    g = GridSpec(256, 32.0)
    rt = radius_table(g)
    assert rt[1] == pytest.approx(g.pixel_size / 4)
    assert rt[-1] >= g.radius().max()
    f = lambda r: rotated_triangle(r, 3.0, 70.0, 1.0)  # noqa: E731
    interp = rasterize_radial(RadialProfile(rt, f(rt)), g).values
    direct = f(g.radius())
    assert np.max(np.abs(interp - direct)) < 0.01 * direct.max()


# -------------------------------------------------------------- analytic


def test_single_pair_collapses_to_triangle(single):
    g = GridSpec(64, 20.0)
    p = single.pairs()[0]
    img = white_image_analytic(single, g)
    expected = rotated_triangle(g.radius(), p.h, p.R, p.L_eff)
    np.testing.assert_allclose(img.values, expected, rtol=1e-12, atol=0)


@pytest.mark.parametrize("active", ["EightActive", "FourActive"])
def test_analytic_radially_symmetric(active):
    g = GridSpec(64, 32.0)
    v = white_image_analytic(build_scanner(active_sectors=active), g).values
    for k in (1, 2, 3):
        np.testing.assert_allclose(np.rot90(v, k), v, rtol=1e-9, atol=0)
    np.testing.assert_allclose(v.T, v, rtol=1e-9, atol=0)


@pytest.mark.parametrize("active", ["EightActive", "FourActive"])
def test_analytic_positive_and_centre_weighted(active):
    g = GridSpec(64, 32.0)
    v = white_image_analytic(build_scanner(active_sectors=active), g).values
    assert np.all(v >= 0) and np.all(np.isfinite(v)) and v.sum() > 0
    r = g.radius()
    assert v[r < 5].mean() > v[(r > 25) & (r < 30)].mean()


def test_profile_matches_pair_sum(eight):
    pairs = eight.pairs()
    r = np.linspace(0.0, 32.0, 17)
    ref = sum(pairs.w[k] * rotated_triangle(r, pairs.h[k], pairs.R[k], pairs.L_eff[k])
              for k in range(len(pairs))) / (len(pairs) * pairs.w.sum())
    np.testing.assert_allclose(white_image_profile(eight, r), ref, rtol=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_weight_scaling_invariance(eight, c):
    p = eight.pairs()
    scaled = PairTable(p.i, p.j, p.h, p.R, p.L_eff, c * p.w, p.index)
    r = np.linspace(0.0, 32.0, 9)
    np.testing.assert_allclose(profile_from_pairs(scaled, r), profile_from_pairs(p, r), rtol=1e-12)


def test_empty_pair_table_rejected(eight):
    p = eight.pairs()
    empty = PairTable(p.i[:0], p.j[:0], p.h[:0], p.R[:0], p.L_eff[:0], p.w[:0], p.index)
    with pytest.raises(InvalidGeometry):
        profile_from_pairs(empty, np.array([0.0]))


def test_analytic_fov_mass_below_one(eight):
    # every rotated profile has unit mass, but its support reaches the rings,
    # so only part of it falls inside the FOV
    r = np.linspace(0.0, 32.0, 64001)
    m = np.trapezoid(2 * np.pi * r * white_image_profile(eight, r), r) * len(eight.pairs())
    assert 0.0 < m < 1.0


# ---------------------------------------------------------- Monte Carlo


def test_mc_rejects_empty_run(eight):
    with pytest.raises(ValueError):
        white_image_mc(eight, GridSpec(16, 32.0), 0, 0)


def test_mc_unit_sum_and_meta(eight):
    img = white_image_mc(eight, GridSpec(32, 32.0), 50_000, 1)
    assert img.values.sum() == pytest.approx(1.0, rel=1e-12)
    assert 0 < img.meta["accepted"] < img.meta["sampled"] == 50_000
    # no detected point may lie outside the FOV disk
    g = img.grid
    far = g.radius() > g.fov_radius + g.pixel_size
    assert img.values[far].sum() == 0


def test_mc_acceptance_shrinks_with_crystals():
    g = GridSpec(16, 32.0)
    acc = [white_image_mc(build_scanner(crystal_length=L), g, 100_000, 0).meta["accepted"]
           for L in (2.0, 0.5, 0.1)]
    assert acc[0] > acc[1] > acc[2]
    assert acc[2] < 1e-3 * 100_000


def test_mc_vanishing_crystals_warn():
    g = GridSpec(16, 32.0)
    with pytest.warns(NoAcceptedEventsWarning):
        img = white_image_mc(build_scanner(crystal_length=1e-6), g, 100_000, 0)
    assert img.meta["accepted"] == 0 and np.all(img.values == 0)


def test_mc_deterministic(eight, backend):
    g = GridSpec(32, 32.0)
    a = white_image_mc(eight, g, 70_000, 5)
    b = white_image_mc(eight, g, 70_000, 5)
    np.testing.assert_array_equal(a.values, b.values)
    c = white_image_mc(eight, g, 70_000, 6)
    assert not np.array_equal(a.values, c.values)


def test_mc_backends_and_threads_identical(eight, monkeypatch):
    g = GridSpec(32, 32.0)
    ref = white_image_mc(eight, g, 70_000, 5).values
    monkeypatch.setenv(_accel.DISABLE_ENV, "1")
    np.testing.assert_array_equal(white_image_mc(eight, g, 70_000, 5).values, ref)
    monkeypatch.delenv(_accel.DISABLE_ENV)
    _accel.set_threads(1)
    np.testing.assert_array_equal(white_image_mc(eight, g, 70_000, 5).values, ref)


def test_mc_radial_distribution_matches_analytic(eight):
    # accepted points and the analytic image binned into the same annuli
    g = GridSpec(128, 32.0)
    mc = white_image_mc(eight, g, 1_000_000, 11)
    wi = white_image_analytic(eight, g)
    edges = np.linspace(0.0, 28.0, 8)
    r = g.radius()
    bins = [(r >= a) & (r < b) for a, b in zip(edges[:-1], edges[1:])]
    got = np.array([mc.values[m].sum() for m in bins])
    want = np.array([wi.values[m].sum() for m in bins])
    # about 140k accepted events put at least 4000 in every annulus
    np.testing.assert_allclose(got / got.sum(), want / want.sum(), rtol=0.05)


def test_mc_nrmse_moderate_run(eight):
    g = GridSpec(64, 32.0)
    nr = compare_white_images(white_image_analytic(eight, g), white_image_mc(eight, g, 500_000, 3), 16)
    assert nr < 0.15


# ------------------------------------------------------------ comparison


def test_block_sum():
    v = np.arange(16.0).reshape(4, 4)
    np.testing.assert_array_equal(block_sum(v, 2), [[10, 18], [42, 50]])
    with pytest.raises(MismatchedShapes):
        block_sum(np.zeros((6, 6)), 4)


def test_compare_identical_images_is_zero(eight):
    g = GridSpec(64, 32.0)
    a = white_image_analytic(eight, g)
    assert compare_white_images(a, a.copy()) == 0.0
    b = Image(3.0 * a.values, g)
    assert compare_white_images(a, b) == pytest.approx(0.0, abs=1e-15)


def test_compare_rejects_grid_mismatch(eight):
    a = white_image_analytic(eight, GridSpec(32, 32.0))
    b = white_image_analytic(eight, GridSpec(64, 32.0))
    with pytest.raises(MismatchedShapes):
        compare_white_images(a, b)


def test_compare_zero_mc_is_infinite(eight):
    g = GridSpec(32, 32.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert compare_white_images(white_image_analytic(eight, g), Image(np.zeros((32, 32)), g)) == np.inf
