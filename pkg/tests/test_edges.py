from fractions import Fraction
import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fractal_energy.edges import (BaseHypothesisWarning, build_tree, coverage_masks,
                                  energy_bound_via_strips, exceptional_sets, in_exceptional,
                                  left_edges, left_edges_at_level, near_edge_cap, near_edges,
                                  porosity_violations, strip_mass)
from fractal_energy.energy import energy_fast
from fractal_energy.errors import ValidationError
from fractal_energy.measure import CantorSpec, GridMeasure, cantor_measure, point_mass

pytestmark = pytest.mark.filterwarnings("ignore::fractal_energy.edges.BaseHypothesisWarning")

FAMILY = [(4, (0, 3)), (4, (1, 2)), (5, (0, 2, 4)), (5, (1, 3)), (6, (0, 1, 4)),
          (7, (2, 3, 5)), (9, (0, 2, 6, 8)), (10, (1, 2, 5, 6))]


def tree_of(K, D, depth, seed=None):
    return build_tree(cantor_measure(CantorSpec(K, D, depth, seed)), K, depth)


def family_trees(max_depth=6):
    for (K, D), seed in itertools.product(FAMILY, (None, 1, 2)):
        depth = max_depth if K ** max_depth <= 10**6 else 4
        yield tree_of(K, D, depth, seed)


def uniform(K, depth):
    n = K**depth
    return GridMeasure(1, Fraction(1, n), (0,), np.arange(n)[:, None], np.full(n, 1 / n))


def digits_of(j, K, length):
    return [(j // K ** (length - 1 - k)) % K for k in range(length)]


def test_decimal_example_tree():
    t = tree_of(10, (1, 2, 5, 6), 2)
    assert t.active[2].size == 16
    assert t.active[0].tolist() == [0]


def test_uniform_and_empty_trees():
    t = build_tree(uniform(5, 3), 5, 3)
    for level in range(4):
        assert t.active[level].tolist() == list(range(5**level))
    empty = GridMeasure(1, Fraction(1, 125), (0,), np.zeros((0, 1), dtype=np.int64), [])
    e = build_tree(empty, 5, 3)
    assert all(a.size == 0 for a in e.active)


def test_tree_errors_and_warning():
    with pytest.raises(ValidationError):
        build_tree(GridMeasure(2, Fraction(1, 4), (0, 0), [[0, 0]], [1.0]), 4, 1)
    with pytest.raises(ValidationError):
        build_tree(cantor_measure(CantorSpec(3, (0, 2), 2)), 9, 2)  # finer than the grid
    with pytest.warns(BaseHypothesisWarning):
        tree_of(10, (1, 2, 5, 6), 2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        build_tree(point_mass(1, Fraction(1, 1600)), 1600, 1)


def test_negative_positions_floor_correctly():
    mu = GridMeasure(1, Fraction(1, 16), (0,), [[-16], [-1], [0], [15]], [0.25] * 4)
    t = build_tree(mu, 4, 2)
    assert t.active[2].tolist() == [-16, -1, 0, 15]
    assert t.active[1].tolist() == [-4, -1, 0, 3]
    assert t.active[0].tolist() == [-1, 0]


@given(st.sampled_from(FAMILY), st.integers(1, 4), st.one_of(st.none(), st.integers(0, 99)))
def test_activity_consistent_across_levels(KD, depth, seed):
    K, D = KD
    t = tree_of(K, D, depth, seed)
    for level in range(depth):
        assert np.array_equal(t.active[level], np.unique(t.active[level + 1] // K))


def test_porosity_examples():
    assert porosity_violations(tree_of(9, (0, 2, 6, 8), 3)) == []
    full = build_tree(uniform(9, 3), 9, 3)
    viol = porosity_violations(full, levels=range(1, 4))
    assert sorted({v[0] for v in viol}) == [1, 2, 3]
    assert all(v[2] >= 3 for v in viol)
    assert porosity_violations(build_tree(point_mass(1, Fraction(1, 729)), 9, 3)) == []


def test_left_edges_decimal_example():
    t = tree_of(10, (1, 2, 5, 6), 2)
    assert left_edges(t, 1).tolist() == [11, 51]
    # only the leftmost interval of a solid block has an inactive left neighbourhood
    assert left_edges(build_tree(uniform(4, 2), 4, 2), 1).tolist() == [0]
    assert near_edges(build_tree(uniform(4, 2), 4, 2), 1) == {0: [0, 1]}


def test_single_active_leaf_is_a_left_edge():
    mu = GridMeasure(1, Fraction(1, 625), (0,), [[137]], [1.0])
    t = build_tree(mu, 5, 4)
    assert left_edges(t, 1).tolist() == [137 // 25]
    assert left_edges(t, 2).tolist() == [137]


@pytest.mark.parametrize("level", range(2, 7))
def test_decimal_left_edge_digit_rule(level):
    t = tree_of(10, (1, 2, 5, 6), 6)
    got = set(left_edges_at_level(t, level).tolist())
    want = {j for j in t.active[level].tolist()
            if digits_of(j, 10, level)[-1] == 1 and digits_of(j, 10, level)[-2] in (1, 5)}
    assert got == want


@pytest.mark.parametrize("n", [1, 2, 3])
def test_decimal_near_edge_digit_rule(n):
    t = tree_of(10, (1, 2, 5, 6), 6)
    runs = near_edges(t, n)
    for edge, run in runs.items():
        d = digits_of(edge, 10, 2 * n)
        assert d[-1] == 1 and d[-2] in (1, 5)
        assert run == [edge, edge + 1, edge + 2]
        assert [digits_of(j, 10, 2 * n)[-1] for j in run] == [1, 2, 3]
    first = 11 * 10 ** (2 * n - 2) + sum(11 * 10 ** (2 * k) for k in range(n - 1))
    assert first in runs


def test_decimal_near_edges_at_level_two():
    t = tree_of(10, (1, 2, 5, 6), 2)
    assert near_edges(t, 1) == {11: [11, 12, 13], 51: [51, 52, 53]}


def test_isolated_left_edge_near_edges():
    mu = GridMeasure(1, Fraction(1, 625), (0,), [[137]], [1.0])
    t = build_tree(mu, 5, 4)
    assert near_edges(t, 2) == {137: [137, 138]}


def test_near_edge_cap():
    assert near_edge_cap(10) == 4
    assert near_edge_cap(9) == 3
    assert near_edge_cap(10000) == 100
    # a long active run is cut at the cap
    t = build_tree(uniform(4, 2).restrict(0, Fraction(15, 16)), 4, 2)
    assert all(len(run) <= near_edge_cap(4) for run in near_edges(t, 1).values())


def test_separation_and_disjointness_exhaustive():
    for t in family_trees():
        K = t.base
        for n in range(1, t.depth // 2 + 1):
            edges = left_edges(t, n)
            assert np.all(np.diff(edges) >= K + 1)  # gap of at least K intervals
            runs = near_edges(t, n)
            flat = [j for run in runs.values() for j in run]
            assert len(flat) == len(set(flat))
            for edge, run in runs.items():
                assert t.is_active(2 * n, edge)
                assert all(t.is_active(2 * n, j) for j in run[:-1])
                assert run == list(range(edge, edge + len(run)))


def test_left_edges_found_under_every_active_interval():
    for t in family_trees():
        K = t.base
        for n in range(0, (t.depth - 2) // 2 + 1):
            anc = set((left_edges(t, n + 1) // K**2).tolist())
            for j in t.active[2 * n].tolist():
                assert j in anc or j - 1 in anc


def test_left_edges_found_at_depth_eight():
    for K, D in [(4, (0, 3)), (5, (1, 3))]:
        t = tree_of(K, D, 8, seed=3)
        for n in range(0, 4):
            anc = set((left_edges(t, n + 1) // K**2).tolist())
            assert all(j in anc or j - 1 in anc for j in t.active[2 * n].tolist())


def test_exceptional_mass_examples():
    mu = cantor_measure(CantorSpec(10, (1, 2, 5, 6), 6))
    reports = exceptional_sets(build_tree(mu, 10, 6), mu, 3)
    assert reports[0].exceptional_mass == pytest.approx(mu.total_mass**2)
    masses = [r.exceptional_mass for r in reports]
    factors = [b / a for a, b in zip(masses, masses[1:])]
    assert all(f < 1 for f in factors)
    assert [r.active_count for r in reports] == [1, 16, 256, 4096]


def test_exceptional_mass_matches_pair_enumeration():
    for K, D, seed in [(4, (0, 3), None), (5, (1, 3), 2), (4, (1, 2), 1)]:
        mu = cantor_measure(CantorSpec(K, D, 4, seed))
        t = build_tree(mu, K, 4)
        reports = exceptional_sets(t, mu, 2)
        for n in range(3):
            level = 2 * n
            act = t.active[level].tolist()
            w = t.interval_masses(level)
            want = sum(w[a] * w[b] for a, b in itertools.product(range(len(act)), repeat=2)
                       if in_exceptional(t, n, act[a], act[b]))
            assert reports[n].exceptional_mass == pytest.approx(want, rel=1e-12, abs=1e-15)


def test_exceptional_mass_monotone_and_report_invariants():
    for t in family_trees():
        reports = exceptional_sets(t, None, t.depth // 2)
        masses = [r.exceptional_mass for r in reports]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(masses, masses[1:]))
        cap = near_edge_cap(t.base)
        for r in reports[1:]:
            assert r.left_edge_count <= r.near_edge_count <= cap * r.left_edge_count


def test_exceptional_mass_vanishes_once_covered():
    mu = GridMeasure(1, Fraction(1, 625), (0,), [[137]], [1.0])
    reports = exceptional_sets(build_tree(mu, 5, 4), mu, 2)
    assert [r.exceptional_mass for r in reports] == [1.0, 0.0, 0.0]


def test_exceptional_sets_checks_measure_and_depth():
    mu = cantor_measure(CantorSpec(4, (0, 3), 4))
    t = build_tree(mu, 4, 4)
    with pytest.raises(ValidationError):
        exceptional_sets(t, mu, 3)
    with pytest.raises(ValidationError):
        exceptional_sets(t, cantor_measure(CantorSpec(4, (1, 2), 4)), 2)


def test_coverage_masks_bits():
    t = tree_of(10, (1, 2, 5, 6), 4)
    masks = dict(zip(t.active[4].tolist(), coverage_masks(t, 2).tolist()))
    assert masks[1111] == 0b11  # 11 and 1111 are both near-edges
    assert masks[1115] == 0b01
    assert masks[2511] == 0b10
    assert masks[2626] == 0


def test_strip_mass_examples():
    assert strip_mass(point_mass(1), 0, 0) == 1.0
    assert strip_mass(point_mass(1), 0, 0.3) == 1.0
    two = GridMeasure(1, Fraction(1, 4), (0,), [[0], [4]], [0.5, 0.5])
    assert strip_mass(two, 1, 0.1) == pytest.approx(0.5)
    assert strip_mass(two, 3, 0.1) == 0.0


def test_strip_mass_matches_pair_enumeration():
    rng = np.random.default_rng(0)
    idx = np.unique(rng.integers(-60, 61, 30))
    m = rng.random(idx.size)
    mu = GridMeasure(1, Fraction(1, 64), (0,), idx[:, None], m)
    for z, r in [(0.1, 0.05), (-0.5, 0.2), (1.0, 1 / 64)]:
        want = sum(a * b for (i, a), (j, b) in itertools.product(zip(idx, m), repeat=2)
                   if abs((i + j) / 64 - z) <= r + 1e-12)
        assert strip_mass(mu, z, r) == pytest.approx(want, rel=1e-12, abs=1e-15)


def test_strip_bound_point_mass_and_empty():
    assert energy_bound_via_strips(point_mass(1), 0.1) == pytest.approx(2.0)
    empty = GridMeasure(1, Fraction(1, 8), (0,), np.zeros((0, 1), dtype=np.int64), [])
    assert energy_bound_via_strips(empty, 0.1) == 0.0


@pytest.mark.parametrize("K,D,seed", [(3, (0, 2), None), (4, (0, 3), 1), (5, (0, 2, 4), 2),
                                      (5, (1, 3), None), (7, (0, 3, 6), 4)])
def test_energy_within_strip_envelope(K, D, seed):
    N = int(math.log(4096) / math.log(K))
    mu = cantor_measure(CantorSpec(K, D, N, seed))
    for r in (0.2, 0.05, 0.01, 2.0 * float(mu.step)):
        assert energy_fast(mu, r) <= 64 * energy_bound_via_strips(mu, r)
