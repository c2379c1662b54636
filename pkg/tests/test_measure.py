from fractions import Fraction
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fractal_energy.errors import GridSizeError, ValidationError
from fractal_energy.measure import (CantorSpec, GridMeasure, cantor_measure, check_regularity,
                                    disk_measure, interval_measure, neighborhood_support,
                                    point_mass, product_measure, radius_ladder)

from oracles import cantor_strings, neighborhood_enum

LOG2_3 = math.log(2) / math.log(3)


def test_cantor_one_level():
    mu = cantor_measure(CantorSpec(3, (0, 2), 1))
    assert mu.step == Fraction(1, 3)
    assert mu.indices.ravel().tolist() == [0, 2]
    assert mu.masses.tolist() == [0.5, 0.5]


def test_cantor_decimal_example():
    mu = cantor_measure(CantorSpec(10, (1, 2, 5, 6), 2))
    assert mu.size == 16
    assert mu.step == Fraction(1, 100)
    assert np.all(mu.masses == 1 / 16)
    assert sorted(mu.indices.ravel()) == sorted(cantor_strings(10, (1, 2, 5, 6), 2))


def test_full_digit_set_is_uniform():
    spec = CantorSpec(3, (0, 1, 2), 4)
    mu = cantor_measure(spec)
    assert mu.size == 81
    assert mu.indices.ravel().tolist() == list(range(81))
    assert spec.delta == pytest.approx(1.0)


@pytest.mark.parametrize("K,D,N", [(3, (0, 2), 6), (10, (1, 2, 5, 6), 3), (5, (0, 1, 4), 4)])
def test_cantor_total_mass_and_support(K, D, N):
    mu = cantor_measure(CantorSpec(K, D, N))
    assert mu.total_mass == pytest.approx(1.0, abs=1e-12)
    assert sorted(mu.indices.ravel()) == sorted(cantor_strings(K, D, N))
    assert mu.provenance["delta"] == pytest.approx(math.log(len(D)) / math.log(K))


def test_random_cantor_is_seeded_and_keeps_counts():
    a = cantor_measure(CantorSpec(5, (0, 2, 4), 4, seed=7))
    b = cantor_measure(CantorSpec(5, (0, 2, 4), 4, seed=7))
    c = cantor_measure(CantorSpec(5, (0, 2, 4), 4, seed=8))
    assert np.array_equal(a.indices, b.indices)
    assert not np.array_equal(a.indices, c.indices)
    assert a.size == 3**4
    # every node keeps exactly |D| children
    parents, counts = np.unique(a.indices.ravel() // 5, return_counts=True)
    assert np.all(counts == 3) and parents.size == 27


def test_cantor_rejects_bad_specs():
    with pytest.raises(ValidationError):
        CantorSpec(3, (0, 3))
    with pytest.raises(ValidationError):
        CantorSpec(3, ())
    with pytest.raises(GridSizeError):
        cantor_measure(CantorSpec(10, (0, 9), 40))


def test_disk_line():
    # the lattice of step 2^-10 on [-1, 1] has 2 * 1024 + 1 points
    mu = disk_measure(1, 1, Fraction(1, 1024))
    assert mu.size == 2049
    assert np.allclose(mu.masses, 1 / 2049)
    assert mu.indices.min() == -1024 and mu.indices.max() == 1024


def test_disk_segment_in_plane():
    mu = disk_measure(2, 1, Fraction(1, 64))
    assert np.all(mu.indices[:, 1] == 0)
    assert mu.size == 129


def test_disk_in_plane_counts_lattice_points():
    mu = disk_measure(2, 2, Fraction(1, 64))
    assert abs(mu.size - math.pi * 4096) / (math.pi * 4096) < 0.05
    assert mu.total_mass == pytest.approx(1.0)


def test_disk_rejects_coarse_step():
    with pytest.raises(ValidationError):
        disk_measure(1, 1, 1)
    with pytest.raises(ValidationError):
        disk_measure(1, 2, Fraction(1, 8))


def test_product_examples():
    p = product_measure(point_mass(1), point_mass(1))
    assert p.dim == 2 and p.indices.tolist() == [[0, 0]] and p.masses.tolist() == [1.0]

    c = cantor_measure(CantorSpec(3, (0, 2), 2))
    cc = product_measure(c, c)
    assert cc.size == 16 and np.allclose(cc.masses, 1 / 16)
    assert cc.provenance["delta"] == pytest.approx(2 * LOG2_3)

    step = Fraction(1, 8)
    a = GridMeasure(1, step, (0,), [[0], [1]], [0.5, 0.5])
    b = GridMeasure(1, step, (0,), [[0], [1], [2]], [1 / 3] * 3)
    ab = product_measure(a, b)
    assert ab.size == 6 and np.allclose(ab.masses, 1 / 6)
    assert ab.total_mass == pytest.approx(a.total_mass * b.total_mass)


def test_product_needs_common_step():
    with pytest.raises(ValidationError):
        product_measure(point_mass(1, Fraction(1, 8)), point_mass(1, Fraction(1, 16)))


def test_grid_measure_merges_and_sorts():
    mu = GridMeasure(1, Fraction(1, 4), (0,), [[2], [0], [2], [1]], [0.25, 0.5, 0.25, 0.0])
    assert mu.indices.ravel().tolist() == [0, 2]
    assert mu.masses.tolist() == [0.5, 0.5]


def test_grid_measure_rejects_bad_input():
    with pytest.raises(ValidationError):
        GridMeasure(1, Fraction(1, 4), (0,), [[0]], [-1.0])
    with pytest.raises(ValidationError):
        GridMeasure(1, Fraction(1, 4), (0,), [[5]], [1.0])  # outside [-1, 1]
    with pytest.raises(ValidationError):
        GridMeasure(1, 0, (0,), [[0]], [1.0])


@given(st.lists(st.tuples(st.integers(-30, 30), st.floats(0, 10)), min_size=1, max_size=40))
def test_grid_measure_invariants(cells):
    idx = [[i] for i, _ in cells]
    masses = [m for _, m in cells]
    mu = GridMeasure(1, Fraction(1, 32), (0,), idx, masses)
    assert np.all(mu.masses > 0)
    assert mu.total_mass == pytest.approx(math.fsum(masses), rel=1e-12, abs=1e-300)
    assert np.all(np.diff(mu.indices.ravel()) > 0)


def test_regularity_cantor_constant():
    mu = cantor_measure(CantorSpec(3, (0, 2), 8))
    cert = check_regularity(mu, LOG2_3, 3**-7, 1)
    assert 1 <= cert.constant_C <= 8
    assert cert.c_lower <= cert.c_upper


def test_regularity_point_mass_blows_up():
    cert = check_regularity(point_mass(1, Fraction(1, 1024)), 0.5, 2**-8, 1)
    # mu(B) = 1 at every radius, so the upper ratio peaks at the smallest radius
    assert cert.c_upper == pytest.approx((2**-8) ** -0.5)
    assert cert.c_lower == pytest.approx(1.0)
    assert cert.constant_C == pytest.approx(16.0)


def test_regularity_interval():
    mu = interval_measure(0, 1, Fraction(1, 4096))
    cert = check_regularity(mu, 1.0, 2**-10, 1)
    assert cert.constant_C <= 3


def test_regularity_self_similar_under_depth_doubling():
    c5 = check_regularity(cantor_measure(CantorSpec(3, (0, 2), 5)), LOG2_3, 3.0**-4, 1)
    c10 = check_regularity(cantor_measure(CantorSpec(3, (0, 2), 10)), LOG2_3, 3.0**-9, 1)
    assert abs(c10.constant_C - c5.constant_C) / c5.constant_C <= 0.10


@given(st.integers(0, 30), st.integers(0, 30), st.integers(0, 10), st.integers(0, 10))
def test_regularity_monotone_in_window(a, b, da, db):
    mu = cantor_measure(CantorSpec(3, (0, 2), 7))
    lo_k, hi_k = max(a, b), min(a, b)
    outer = (10 ** (-min(lo_k + da, 30) / 12), 10 ** (-max(hi_k - db, 0) / 12))
    inner = (10 ** (-lo_k / 12), 10 ** (-hi_k / 12))
    c_out = check_regularity(mu, LOG2_3, *outer).constant_C
    c_in = check_regularity(mu, LOG2_3, *inner).constant_C
    assert c_in <= c_out * (1 + 1e-12)


def test_regularity_of_products():
    a = cantor_measure(CantorSpec(3, (0, 2), 5))
    ca = check_regularity(a, LOG2_3, 3**-4, 1).constant_C
    cp = check_regularity(product_measure(a, a), 2 * LOG2_3, 3**-4, 1).constant_C
    assert cp <= ca * ca * 4**2


def test_regularity_subsamples_large_supports():
    mu = cantor_measure(CantorSpec(3, (0, 2), 8))
    a = check_regularity(mu, LOG2_3, 3**-6, 1, samples=50, seed=3)
    b = check_regularity(mu, LOG2_3, 3**-6, 1, samples=50, seed=3)
    full = check_regularity(mu, LOG2_3, 3**-6, 1)
    assert a == b
    assert a.c_lower >= full.c_lower - 1e-12


def test_regularity_errors():
    empty = GridMeasure(1, Fraction(1, 8), (0,), np.zeros((0, 1), dtype=np.int64), [])
    with pytest.raises(ValidationError):
        check_regularity(empty, 0.5, 0.25, 1)
    with pytest.raises(ValidationError):
        check_regularity(point_mass(1), 1.5, 0.25, 1)
    with pytest.raises(ValidationError):
        check_regularity(point_mass(1), 0.5, 2**-20, 1)


def test_radius_ladder_has_endpoints_and_density():
    radii = radius_ladder(1e-3, 1)
    assert radii[0] == 1e-3 and radii[-1] == 1
    assert len(radii) == 37
    assert np.all(np.diff(radii) > 0)


def test_neighborhood_small_examples():
    step = Fraction(1, 64)
    one = point_mass(1, step)
    assert neighborhood_support(one, 2 * step).ravel().tolist() == [-2, -1, 0, 1, 2]
    two = GridMeasure(1, step, (0,), [[0], [10]], [0.5, 0.5])
    assert neighborhood_support(two, step).ravel().tolist() == [-1, 0, 1, 9, 10, 11]


def test_neighborhood_cantor_matches_enumeration():
    mu = cantor_measure(CantorSpec(3, (0, 2), 3))
    got = neighborhood_support(mu, Fraction(1, 27)).ravel().tolist()
    assert got == neighborhood_enum(mu.indices.ravel(), 1)
    assert len(got) == 20


@given(st.lists(st.integers(-50, 50), min_size=1, max_size=12, unique=True), st.integers(1, 6))
def test_neighborhood_matches_enumeration(points, R):
    step = Fraction(1, 64)
    mu = GridMeasure(1, step, (0,), [[p] for p in points], [1.0] * len(points))
    got = neighborhood_support(mu, R * step).ravel().tolist()
    assert got == neighborhood_enum(points, R)


def test_neighborhood_in_plane_is_a_ball():
    mu = point_mass(2, Fraction(1, 16))
    got = neighborhood_support(mu, Fraction(2, 16))
    assert got.shape[0] == 13  # lattice points with |k|^2 <= 4
