"""Discretised regular measures on a lattice and their regularity certificates.

A :class:`GridMeasure` places nonnegative masses on points
``origin + index * step`` of a cubic lattice.  Everything downstream (energies,
K-adic trees, masks) works on the integer indices, so the step and origin are
kept as exact rationals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
import math

import numpy as np
from scipy import ndimage

from . import _fft
from .errors import GridSizeError, ValidationError

MAX_CELLS = 2**26
LOWER_SAMPLE_CAP = 10_000
LADDER_PER_DECADE = 12


@dataclass(frozen=True)
class CantorSpec:
    """Base-K digit-set recipe; ``levels`` digits are generated."""

    base: int
    digits: tuple
    levels: int = 1
    seed: int | None = None

    def __post_init__(self):
        digits = tuple(sorted(set(int(d) for d in self.digits)))
        object.__setattr__(self, "digits", digits)
        if self.base < 2:
            raise ValidationError("base must be >= 2")
        if not digits:
            raise ValidationError("digit set must be nonempty")
        if digits[0] < 0 or digits[-1] >= self.base:
            raise ValidationError(f"digits {digits} out of range for base {self.base}")
        if self.levels < 1:
            raise ValidationError("levels must be >= 1")
        if len(digits) == 1:
            raise ValidationError("a single digit gives dimension 0")

    @property
    def delta(self):
        return math.log(len(self.digits)) / math.log(self.base)

    def with_levels(self, levels):
        return CantorSpec(self.base, self.digits, levels, self.seed)


@dataclass(frozen=True)
class GridMeasure:
    """Nonnegative masses on the lattice ``origin + step * Z^dim``.

    ``indices`` is an ``(N, dim)`` int64 array sorted lexicographically with
    no repeats, ``masses`` the matching positive masses.  ``box`` is the
    per-coordinate bounding interval the support must lie in.
    """

    dim: int
    step: Fraction
    origin: tuple
    indices: np.ndarray
    masses: np.ndarray
    box: tuple = (Fraction(-1), Fraction(1))
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValidationError("dim must be 1, 2 or 3")
        step = _fft.as_fraction(self.step)
        if step <= 0:
            raise ValidationError("step must be positive")
        origin = tuple(_fft.as_fraction(o) for o in self.origin)
        if len(origin) != self.dim:
            raise ValidationError("origin has wrong length")
        box = (_fft.as_fraction(self.box[0]), _fft.as_fraction(self.box[1]))
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1, self.dim)
        m = np.asarray(self.masses, dtype=np.float64).reshape(-1)
        if idx.shape[0] != m.shape[0]:
            raise ValidationError("indices and masses differ in length")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise ValidationError("masses must be finite and nonnegative")
        keep = m > 0
        idx, m = idx[keep], m[keep]
        if idx.shape[0]:
            order = np.lexsort(idx.T[::-1])
            idx, m = idx[order], m[order]
            dup = np.all(idx[1:] == idx[:-1], axis=1)
            if dup.any():
                starts = np.concatenate([[True], ~dup])
                group = np.cumsum(starts) - 1
                m = np.bincount(group, weights=m)
                idx = idx[starts]
            for ax in range(self.dim):
                lo = math.ceil((box[0] - origin[ax]) / step)
                hi = math.floor((box[1] - origin[ax]) / step)
                if idx[:, ax].min() < lo or idx[:, ax].max() > hi:
                    raise ValidationError("support leaves the bounding box")
        idx.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "step", step)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "masses", m)

    @property
    def size(self):
        return int(self.masses.shape[0])

    @property
    def total_mass(self):
        return math.fsum(self.masses.tolist())

    @property
    def cells(self):
        return {tuple(int(v) for v in i): float(w) for i, w in zip(self.indices, self.masses)}

    def positions(self):
        o = np.array([float(v) for v in self.origin])
        return o + self.indices * float(self.step)

    def to_dense(self):
        """Return ``(array, lo)``: masses on the support's bounding grid and its
        lowest index vector."""
        if self.size == 0:
            raise ValidationError("empty measure")
        lo = self.indices.min(axis=0)
        shape = tuple(int(v) for v in self.indices.max(axis=0) - lo + 1)
        if math.prod(shape) > _fft.DEFAULT_BUDGET:
            raise GridSizeError(f"dense grid {shape} too large")
        arr = np.zeros(shape)
        arr[tuple((self.indices - lo).T)] = self.masses
        return arr, lo

    def restrict(self, lo=-1, hi=1):
        """Restriction to the cube [lo, hi]^dim."""
        pos = [self.origin[ax] + 0 for ax in range(self.dim)]
        keep = np.ones(self.size, dtype=bool)
        lo, hi = _fft.as_fraction(lo), _fft.as_fraction(hi)
        for ax in range(self.dim):
            imin = math.ceil((lo - pos[ax]) / self.step)
            imax = math.floor((hi - pos[ax]) / self.step)
            keep &= (self.indices[:, ax] >= imin) & (self.indices[:, ax] <= imax)
        return self.replace_cells(self.indices[keep], self.masses[keep])

    def replace_cells(self, indices, masses, **changes):
        kw = dict(dim=self.dim, step=self.step, origin=self.origin, box=self.box,
                  provenance=self.provenance)
        kw.update(changes)
        return GridMeasure(indices=indices, masses=masses, **kw)


def point_mass(dim=1, step=Fraction(1, 1024), mass=1.0):
    return GridMeasure(dim, step, (0,) * dim, np.zeros((1, dim), dtype=np.int64), [mass])


def cantor_measure(spec: CantorSpec) -> GridMeasure:
    """Equal-mass measure on the depth-``levels`` digit strings of a Cantor set.

    Cell ``j`` sits at ``j * base**-levels`` (left endpoint of its base-adic
    interval), so the support lies in [0, 1).
    """
    K, D, N = spec.base, spec.digits, spec.levels
    if N * math.log2(K) > 62:
        raise GridSizeError(f"{K}**{N} does not fit in a 64-bit index")
    if len(D) ** N > MAX_CELLS:
        raise GridSizeError(f"{len(D)}**{N} cells exceed {MAX_CELLS}")
    if spec.seed is None:
        idx = np.zeros(1, dtype=np.int64)
        digits = np.array(D, dtype=np.int64)
        for _ in range(N):
            idx = (idx[:, None] * K + digits[None, :]).ravel()
    else:
        # one uniformly random |D|-subset of digits per node, level by level
        rng = np.random.default_rng(spec.seed)
        idx = np.zeros(1, dtype=np.int64)
        for _ in range(N):
            picks = np.sort(
                np.array([rng.choice(K, size=len(D), replace=False) for _ in idx]), axis=1
            )
            idx = (idx[:, None] * K + picks).ravel()
    idx = np.sort(idx)
    masses = np.full(idx.shape[0], 1.0 / len(D) ** N)
    prov = {"type": "cantor", "base": K, "digits": list(D), "levels": N,
            "seed": spec.seed, "delta": spec.delta}
    return GridMeasure(1, Fraction(1, K**N), (0,), idx[:, None], masses, provenance=prov)


def disk_measure(dim: int, delta_int: int, step) -> GridMeasure:
    """Uniform probability measure on lattice points of B^delta_int(0,1) x {0}."""
    step = _fft.as_fraction(step)
    if not 1 <= delta_int <= dim:
        raise ValidationError("need 1 <= delta_int <= dim")
    if step >= 1:
        raise ValidationError("degenerate grid: step must be < 1")
    mask, half = _fft.ball_offsets(1 / step, delta_int)
    if mask.sum() > MAX_CELLS:
        raise GridSizeError("disk discretisation too fine")
    pts = np.argwhere(mask) - half
    idx = np.zeros((pts.shape[0], dim), dtype=np.int64)
    idx[:, :delta_int] = pts
    masses = np.full(pts.shape[0], 1.0 / pts.shape[0])
    prov = {"type": "disk", "dim": dim, "delta_int": delta_int, "delta": float(delta_int)}
    return GridMeasure(dim, step, (0,) * dim, idx, masses, provenance=prov)


def interval_measure(lo, hi, step) -> GridMeasure:
    """Uniform probability on lattice points of [lo, hi] (1-d Lebesgue stand-in)."""
    step = _fft.as_fraction(step)
    lo, hi = _fft.as_fraction(lo), _fft.as_fraction(hi)
    i0, i1 = math.ceil(lo / step), math.floor(hi / step)
    idx = np.arange(i0, i1 + 1, dtype=np.int64)[:, None]
    prov = {"type": "interval", "lo": str(lo), "hi": str(hi), "delta": 1.0}
    return GridMeasure(1, step, (0,), idx, np.full(idx.shape[0], 1.0 / idx.shape[0]),
                       provenance=prov)


def product_measure(a: GridMeasure, b: GridMeasure) -> GridMeasure:
    if a.step != b.step:
        raise ValidationError(f"steps differ: {a.step} vs {b.step}")
    if a.dim + b.dim > 3:
        raise ValidationError("product dimension exceeds 3")
    ia = np.repeat(a.indices, b.size, axis=0)
    ib = np.tile(b.indices, (a.size, 1))
    masses = np.outer(a.masses, b.masses).ravel()
    prov = {"type": "product", "factors": [a.provenance, b.provenance]}
    da, db = a.provenance.get("delta"), b.provenance.get("delta")
    if da is not None and db is not None:
        prov["delta"] = da + db
    box = (min(a.box[0], b.box[0]), max(a.box[1], b.box[1]))
    return GridMeasure(a.dim + b.dim, a.step, a.origin + b.origin,
                       np.hstack([ia, ib]), masses, box=box, provenance=prov)


def ball_masses(mu: GridMeasure, r, workers=1):
    """mu(B(x, r)) for every lattice point x within distance r of the support's
    bounding grid.  Returns ``(values, lo)`` where ``values[k]`` belongs to
    index ``lo + k``; ball membership compares cell centres exactly."""
    dense, lo = mu.to_dense()
    window, half = _fft.ball_offsets(_fft.radius_in_cells(r, mu.step), mu.dim)
    vals = _fft.convolve(dense, window.astype(float), workers=workers)
    return np.maximum(vals, 0.0), lo - half


def radius_ladder(scale_lo, scale_hi, per_decade=LADDER_PER_DECADE):
    """Radii 10**(-k/per_decade) inside [scale_lo, scale_hi] plus both ends.

    The ladder is anchored at 1, so windows whose endpoints are ladder points
    sample nested radius sets.
    """
    lo, hi = float(scale_lo), float(scale_hi)
    kmin = math.ceil(-per_decade * math.log10(hi) - 1e-9)
    kmax = math.floor(-per_decade * math.log10(lo) + 1e-9)
    rungs = [10 ** (-k / per_decade) for k in range(kmin, kmax + 1)]
    radii = {lo, hi}
    radii.update(r for r in rungs if lo * (1 - 1e-12) <= r <= hi * (1 + 1e-12))
    return sorted(radii)


@dataclass(frozen=True)
class RegularityCertificate:
    delta: float
    scale_lo: float
    scale_hi: float
    c_upper: float
    c_lower: float
    constant_C: float
    sample_count: int


def check_regularity(mu: GridMeasure, delta, scale_lo, scale_hi, samples=LOWER_SAMPLE_CAP,
                     seed=1, workers=1) -> RegularityCertificate:
    """Sampled regularity constant of ``mu`` on radii in [scale_lo, scale_hi].

    Upper ratios use every lattice point near the support; lower ratios use
    support cells only (all of them up to ``samples``, else a seeded subset).
    """
    if mu.size == 0:
        raise ValidationError("empty measure")
    if not 0 < delta <= mu.dim:
        raise ValidationError(f"delta {delta} outside (0, {mu.dim}]")
    diam = float(mu.box[1] - mu.box[0]) * math.sqrt(mu.dim)
    if not float(mu.step) <= scale_lo <= scale_hi <= diam * (1 + 1e-12):
        raise ValidationError("need step <= scale_lo <= scale_hi <= box diameter")
    support = mu.indices
    if support.shape[0] > samples:
        rng = np.random.default_rng(seed)
        support = support[np.sort(rng.choice(support.shape[0], samples, replace=False))]
    c_up, c_low, count = 0.0, math.inf, 0
    for r in radius_ladder(scale_lo, scale_hi):
        vals, lo = ball_masses(mu, r, workers)
        scale = r**delta
        c_up = max(c_up, float(vals.max()) / scale)
        at_support = vals[tuple((support - lo).T)]
        c_low = min(c_low, float(at_support.min()) / scale)
        count += vals.size + at_support.size
    return RegularityCertificate(float(delta), float(scale_lo), float(scale_hi), c_up,
                                 c_low, max(c_up, 1.0 / c_low, 1.0), count)


def neighborhood_support(mu: GridMeasure, r) -> np.ndarray:
    """Lattice indices within distance r of a support cell (rasterised X_r).

    Returns an ``(M, dim)`` array sorted lexicographically.
    """
    R = _fft.radius_in_cells(r, mu.step)
    if R < 1:
        raise ValidationError("neighborhood radius must be at least one step")
    if mu.size == 0:
        return np.zeros((0, mu.dim), dtype=np.int64)
    window, half = _fft.ball_offsets(R, mu.dim)
    lo = mu.indices.min(axis=0) - half
    shape = tuple(int(v) for v in mu.indices.max(axis=0) + half - lo + 1)
    if math.prod(shape) > _fft.DEFAULT_BUDGET:
        raise GridSizeError(f"neighborhood grid {shape} too large")
    grid = np.zeros(shape, dtype=bool)
    grid[tuple((mu.indices - lo).T)] = True
    grid = ndimage.binary_dilation(grid, structure=window)
    return np.argwhere(grid) + lo
