"""K-adic interval combinatorics on the line: activity, porosity, left edges,
left near-edges, exceptional sets and strip masses.

Level ``n`` holds the intervals ``[j K^-n, (j+1) K^-n)``.  An interval is
active when it contains a support cell of the measure; intervals outside the
bounding box are inactive.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
import math
import warnings

import numpy as np

from . import _fft
from .errors import ValidationError
from .measure import GridMeasure


class BaseHypothesisWarning(UserWarning):
    """K is below 1000, not a perfect square, or not a multiple of 100."""


def ceil_sqrt(K: int) -> int:
    return math.isqrt(K - 1) + 1 if K > 0 else 0


def near_edge_cap(K: int) -> int:
    """Largest near-edge run kept per left edge.

    ``K // 100`` is below one for small K, so the porosity bound
    ``ceil(sqrt(K))`` (active run < sqrt(K), plus the closing inactive
    interval) is used whenever it is larger.
    """
    return max(K // 100, ceil_sqrt(K))


@dataclass
class KAdicTree:
    base: int
    depth: int
    active: list
    leaf_masses: np.ndarray
    box: tuple = (Fraction(-1), Fraction(1))

    def is_active(self, level, j):
        act = self.active[level]
        j = np.asarray(j, dtype=np.int64)
        if act.size == 0:
            return np.zeros(j.shape, dtype=bool)
        pos = np.minimum(np.searchsorted(act, j), act.size - 1)
        return act[pos] == j

    def ancestor(self, level, j, up_level):
        return np.asarray(j, dtype=np.int64) // self.base ** (level - up_level)

    def interval_length(self, level):
        return Fraction(1, self.base**level)

    def interval_masses(self, level):
        """Masses of the active intervals at ``level`` (aligned with ``active[level]``)."""
        leaves = self.active[self.depth]
        if leaves.size == 0:
            return np.zeros(0)
        anc = self.ancestor(self.depth, leaves, level)
        pos = np.searchsorted(self.active[level], anc)
        return np.bincount(pos, weights=self.leaf_masses, minlength=self.active[level].size)


def _leaf_indices(mu: GridMeasure, K: int, depth: int):
    p, q = mu.step.numerator, mu.step.denominator
    a, b = mu.origin[0].numerator, mu.origin[0].denominator
    scale = K**depth
    i = mu.indices[:, 0]
    biggest = (abs(a) * q + int(np.abs(i).max(initial=0)) * p * b) * scale
    if biggest < 2**62:
        num = (a * q + i * (p * b)) * scale
        return np.floor_divide(num, b * q)
    return np.array([((a * q + int(v) * p * b) * scale) // (b * q) for v in i], dtype=np.int64)


def build_tree(mu: GridMeasure, K: int, depth: int) -> KAdicTree:
    if mu.dim != 1:
        raise ValidationError("K-adic trees are one-dimensional")
    if K < 4:
        raise ValidationError("K must be at least 4")
    if depth < 1:
        raise ValidationError("depth must be at least 1")
    if Fraction(K) ** depth * mu.step > 1:
        raise ValidationError("leaves would be finer than the grid step")
    if K < 1000 or math.isqrt(K) ** 2 != K or K % 100:
        warnings.warn(f"K={K} is outside the K>=1000, square, multiple-of-100 regime",
                      BaseHypothesisWarning, stacklevel=2)
    if mu.size:
        leaves = _leaf_indices(mu, K, depth)
        uniq, inv = np.unique(leaves, return_inverse=True)
        masses = np.bincount(inv, weights=mu.masses)
    else:
        uniq, masses = np.zeros(0, dtype=np.int64), np.zeros(0)
    active = [None] * (depth + 1)
    active[depth] = uniq
    for level in range(depth - 1, -1, -1):
        active[level] = np.unique(active[level + 1] // K)
    return KAdicTree(K, depth, active, masses, mu.box)


def porosity_violations(tree: KAdicTree, levels=None):
    """Maximal runs of at least ceil(sqrt K) consecutive active intervals.

    Returns ``(level, start index, run length)`` triples; an empty list
    means the porosity conclusion holds on every inspected level.
    """
    need = ceil_sqrt(tree.base)
    levels = range(tree.depth + 1) if levels is None else levels
    out = []
    for level in levels:
        act = tree.active[level]
        if act.size == 0:
            continue
        breaks = np.flatnonzero(np.diff(act) != 1)
        starts = np.concatenate([[0], breaks + 1])
        ends = np.concatenate([breaks + 1, [act.size]])
        for s, e in zip(starts, ends):
            if e - s >= need:
                out.append((level, int(act[s]), int(e - s)))
    return out


def _check_level(tree, n):
    if n < 1 or 2 * n > tree.depth:
        raise ValidationError(f"need 1 <= n and 2n <= depth ({tree.depth})")


def left_edges(tree: KAdicTree, n: int) -> np.ndarray:
    """Active intervals of length K^-2n whose left siblings and whose parent's
    left shift are all inactive."""
    _check_level(tree, n)
    return left_edges_at_level(tree, 2 * n)


def left_edges_at_level(tree: KAdicTree, level: int) -> np.ndarray:
    """The left-edge rule applied at any level >= 1."""
    if not 1 <= level <= tree.depth:
        raise ValidationError(f"level must lie in [1, {tree.depth}]")
    K = tree.base
    act = tree.active[level]
    if act.size == 0:
        return act.copy()
    parent = act // K
    prev = np.concatenate([[np.iinfo(np.int64).min], act[:-1]])
    no_left_sibling = prev < parent * K
    shift_inactive = ~tree.is_active(level - 1, parent - 1)
    return act[no_left_sibling & shift_inactive]


def near_edges(tree: KAdicTree, n: int) -> dict:
    """Map each left edge to its run of left near-edges.

    The run starts at the edge and extends right through active intervals,
    ending at (and including) the first inactive one, capped at
    :func:`near_edge_cap` entries.
    """
    level = 2 * n
    cap = near_edge_cap(tree.base)
    out = {}
    for edge in left_edges(tree, n).tolist():
        run = [edge]
        while len(run) < cap and tree.is_active(level, run[-1]):
            run.append(run[-1] + 1)
        out[edge] = run
    return out


def near_edge_set(tree: KAdicTree, n: int) -> np.ndarray:
    runs = near_edges(tree, n).values()
    return np.unique(np.concatenate([np.asarray(r, dtype=np.int64) for r in runs])) \
        if runs else np.zeros(0, dtype=np.int64)


@dataclass(frozen=True)
class EdgeReport:
    n: int
    interval_length: Fraction
    active_count: int
    left_edge_count: int
    near_edge_count: int
    exceptional_mass: float


def coverage_masks(tree: KAdicTree, n: int, near_sets=None) -> np.ndarray:
    """Bit ``n'-1`` of entry ``i`` is set when the level-2n' ancestor of the
    i-th active interval at level 2n is a left near-edge (1 <= n' <= n)."""
    act = tree.active[2 * n]
    masks = np.zeros(act.size, dtype=np.int64)
    for k in range(1, n + 1):
        ne = near_sets[k] if near_sets is not None else near_edge_set(tree, k)
        anc = tree.ancestor(2 * n, act, 2 * k)
        masks |= np.isin(anc, ne).astype(np.int64) << (k - 1)
    return masks


def exceptional_sets(tree: KAdicTree, mu: GridMeasure, N: int):
    """Reports for E_0..E_N.

    A pair of active level-2n intervals stays exceptional unless, at some
    level 2n' <= 2n, both ancestors are left near-edges; two intervals are
    therefore covered exactly when their coverage masks share a bit, which
    lets mu^2(E_n) be summed over mask classes instead of K^4n pairs.
    """
    if 2 * N > tree.depth:
        raise ValidationError("need 2N <= depth")
    if N > 30:
        raise ValidationError("N too large for the coverage bitmask")
    if mu is not None and mu.size:
        leaves = np.unique(_leaf_indices(mu, tree.base, tree.depth))
        if not np.array_equal(leaves, tree.active[tree.depth]):
            raise ValidationError("tree was not built from this measure")
    near_sets = {k: near_edge_set(tree, k) for k in range(1, N + 1)}
    reports = []
    for n in range(N + 1):
        level = 2 * n
        masses = tree.interval_masses(level)
        masks = coverage_masks(tree, n, near_sets)
        classes, inv = np.unique(masks, return_inverse=True)
        w = np.bincount(inv, weights=masses)
        disjoint = (classes[:, None] & classes[None, :]) == 0
        mass = float(w @ disjoint @ w)
        left = len(left_edges(tree, n)) if n else 0
        near = int(near_sets[n].size) if n else 0
        reports.append(EdgeReport(n, tree.interval_length(level), int(tree.active[level].size),
                                  left, near, mass))
    return reports


def in_exceptional(tree: KAdicTree, n: int, j1: int, j2: int) -> bool:
    """Direct membership test for the square ``I_{j1} x I_{j2}`` at level 2n."""
    for k in range(1, n + 1):
        ne = near_edge_set(tree, k)
        a1 = int(tree.ancestor(2 * n, j1, 2 * k))
        a2 = int(tree.ancestor(2 * n, j2, 2 * k))
        if a1 in ne and a2 in ne:
            return False
    return True


# -- strips ----------------------------------------------------------------

def _sum_distribution_1d(mu: GridMeasure):
    """Exact-position sum distribution of mu restricted to [-1, 1]."""
    if mu.dim != 1:
        raise ValidationError("strip masses are one-dimensional")
    nu = mu.restrict(-1, 1)
    if nu.size == 0:
        return None
    dense, lo = nu.to_dense()
    s = np.maximum(_fft.convolve(dense, dense), 0.0)
    return s, 2 * int(lo[0]), 2 * nu.origin[0], nu.step


def strip_mass(mu: GridMeasure, z, r) -> float:
    """mu^2 of ``{(x, y) in [-1,1]^2 : |x + y - z| <= r}``."""
    sd = _sum_distribution_1d(mu)
    if sd is None:
        return 0.0
    s, t0, shift, step = sd
    z, r = _fft.as_fraction(z), _fft.as_fraction(r)
    lo = math.ceil((z - r - shift) / step) - t0
    hi = math.floor((z + r - shift) / step) - t0
    lo, hi = max(lo, 0), min(hi, s.size - 1)
    return float(s[lo:hi + 1].sum()) if hi >= lo else 0.0


def energy_bound_via_strips(mu: GridMeasure, r) -> float:
    """``r^-1 * sum_z mu^2(S_z)^2 dz`` on a midpoint z-grid over [-3, 3] with
    spacing ``dz = 6 / ceil(6 / r) <= r``."""
    r = float(r)
    if r <= 0:
        raise ValidationError("r must be positive")
    sd = _sum_distribution_1d(mu)
    if sd is None:
        return 0.0
    s, t0, shift, step = sd
    nz = math.ceil(6 / r - 1e-12)
    dz = 6 / nz
    z = -3 + (np.arange(nz) + 0.5) * dz
    step, shift = float(step), float(shift)
    cum = np.concatenate([[0.0], np.cumsum(s)])
    lo = np.ceil((z - r - shift) / step - 1e-9).astype(np.int64) - t0
    hi = np.floor((z + r - shift) / step + 1e-9).astype(np.int64) - t0
    lo = np.clip(lo, 0, s.size)
    hi = np.clip(hi + 1, 0, s.size)
    strips = np.where(hi > lo, cum[hi] - cum[np.minimum(lo, hi)], 0.0)
    return float(np.sum(strips**2) * dz / r)
