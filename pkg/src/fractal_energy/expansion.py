"""Volumes of images F(X_r, Y_r) of regular-set neighbourhoods.

Sets are rasterized as half-open cells ``[k s, (k+1) s)`` with ``s = r/2``;
a cell stands for its centre.  Images are rasterized onto an output lattice
and dilated enough to cover every true image point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
import itertools
import math

import numpy as np

from . import _fft
from .errors import FitError, ValidationError
from .fitting import loglog_fit
from .measure import CantorSpec

MAP_NAMES = ("sum", "difference", "product", "shifted_product", "quadratic", "affine")
PAIR_CHUNK = 1 << 22


@dataclass(frozen=True)
class MapSpec:
    """A map ``F(x, y)`` from a box in R^d x R^d to R^d.

    ``shifted_product`` is ``(1 + x)(1 + y)``; ``quadratic`` is ``x + y^2``;
    ``affine`` is ``A x + B y + offset``.  ``domain`` is ``(lo, hi)`` applied to
    every coordinate of both arguments.
    """

    name: str
    domain: tuple = (-2.0, 2.0)
    dim: int = 1
    A: np.ndarray = None
    B: np.ndarray = None
    offset: np.ndarray = None

    def __post_init__(self):
        if self.name not in MAP_NAMES:
            raise ValidationError(f"unknown map {self.name!r}")
        lo, hi = (float(v) for v in self.domain)
        if not lo < hi:
            raise ValidationError("empty domain")
        object.__setattr__(self, "domain", (lo, hi))
        if self.name == "affine":
            A = np.atleast_2d(np.asarray(self.A if self.A is not None else np.eye(self.dim), float))
            B = np.atleast_2d(np.asarray(self.B if self.B is not None else np.eye(self.dim), float))
            off = np.zeros(self.dim) if self.offset is None else np.asarray(self.offset, float)
            if A.shape != (self.dim, self.dim) or B.shape != (self.dim, self.dim):
                raise ValidationError("affine matrices must be dim x dim")
            if abs(np.linalg.det(A)) < 1e-12 or abs(np.linalg.det(B)) < 1e-12:
                raise ValidationError("affine derivatives must be invertible")
            object.__setattr__(self, "A", A)
            object.__setattr__(self, "B", B)
            object.__setattr__(self, "offset", off.reshape(self.dim))
        elif self.dim != 1:
            raise ValidationError(f"{self.name} map is one-dimensional")
        # derivative invertibility on the declared domain
        if self.name == "product" and lo <= 0 <= hi:
            raise ValidationError("product map needs a domain bounded away from 0")
        if self.name == "shifted_product" and lo <= -1 <= hi:
            raise ValidationError("shifted product needs a domain bounded away from -1")
        if self.name == "quadratic" and lo <= 0 <= hi:
            raise ValidationError("quadratic map needs a domain bounded away from 0")

    def __call__(self, x, y):
        if self.name == "sum":
            return x + y
        if self.name == "difference":
            return x - y
        if self.name == "product":
            return x * y
        if self.name == "shifted_product":
            return (1 + x) * (1 + y)
        if self.name == "quadratic":
            return x + y * y
        return x @ self.A.T + y @ self.B.T + self.offset

    def lipschitz(self):
        """``sup |D_x F| + sup |D_y F|`` (operator norms) over the domain."""
        m = max(abs(v) for v in self.domain)
        if self.name in ("sum", "difference"):
            return 2.0
        if self.name == "product":
            return 2 * m
        if self.name == "shifted_product":
            return 2 * (1 + m)
        if self.name == "quadratic":
            return 1 + 2 * m
        return float(np.linalg.norm(self.A, 2) + np.linalg.norm(self.B, 2))


@dataclass(frozen=True)
class PlacedSet:
    """``offset + scale * X`` for a Cantor spec, or for ``[0, 1]`` when ``spec`` is None."""

    spec: CantorSpec = None
    offset: Fraction = Fraction(0)
    scale: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "offset", _fft.as_fraction(self.offset))
        object.__setattr__(self, "scale", _fft.as_fraction(self.scale))
        if self.scale <= 0:
            raise ValidationError("scale must be positive")

    @property
    def delta(self):
        return 1.0 if self.spec is None else self.spec.delta

    @property
    def base(self):
        return 3 if self.spec is None else self.spec.base

    def intervals(self, r):
        """``(lefts, unit)``: the cover ``offset + unit * (j + [0, 1))`` for j in
        ``lefts``, by intervals no longer than ``r``."""
        r = _fft.as_fraction(r)
        if self.spec is None:
            return np.array([0], dtype=np.int64), self.scale
        n = 0
        while self.scale / self.spec.base**n > r:
            n += 1
        lefts = np.array([0], dtype=np.int64)
        digits = np.asarray(self.spec.digits, dtype=np.int64)
        for _ in range(n):
            lefts = (lefts[:, None] * self.spec.base + digits[None, :]).ravel()
        return np.sort(lefts), self.scale / self.spec.base**n

    def mask(self, r, step=None) -> np.ndarray:
        """Indices of the cells of side ``step`` (default ``r/2``) meeting
        ``X_r = cover + [-r, r)``."""
        r = _fft.as_fraction(r)
        s = r / 2 if step is None else _fft.as_fraction(step)
        lefts, unit = self.intervals(r)
        # interval j spans [q1 + j q2, q1 + j q2 + q3) in units of s
        q1, q2, q3 = (self.offset - r) / s, unit / s, (unit + 2 * r) / s
        D = math.lcm(q1.denominator, q2.denominator, q3.denominator)
        n1, n2, n3 = (int(q * D) for q in (q1, q2, q3))
        start = n1 + lefts * n2
        lo = np.floor_divide(start, D)
        hi = -np.floor_divide(-(start + n3), D)
        width = int((hi - lo).max())
        cells = lo[:, None] + np.arange(width)[None, :]
        return np.unique(cells[cells < hi[:, None]])


def _positions(mask, step):
    m = np.asarray(mask, dtype=np.int64)
    if m.ndim == 1:
        m = m[:, None]
    return (m + 0.5) * float(step)


def image_measure(F: MapSpec, X_mask, Y_mask, r, step=None, out_factor: int = 2) -> float:
    """Lebesgue measure of the rasterized image ``F(X_r, Y_r)``.

    Masks index cells of side ``step`` (default ``r/2``).  Images of cell
    centres land on an output lattice of side ``r / out_factor``, dilated by
    ``max(1, ceil(Lip * step / out_step))`` cells in every direction.
    """
    r = _fft.as_fraction(r)
    step = r / 2 if step is None else _fft.as_fraction(step)
    if step > r / 2:
        raise ValidationError("mask step must be at most r/2")
    X, Y = _positions(X_mask, step), _positions(Y_mask, step)
    if X.shape[0] == 0 or Y.shape[0] == 0:
        return 0.0
    d = F.dim
    if X.shape[1] != d or Y.shape[1] != d:
        raise ValidationError("mask dimension does not match the map")
    lo, hi = F.domain
    half = float(step) / 2
    for P in (X, Y):
        if P.min() - half < lo or P.max() + half > hi:
            raise ValidationError("mask leaves the map's domain")
    out_step = float(r) / out_factor
    dil = max(1, math.ceil(F.lipschitz() * float(step) / out_step))
    chunk = max(1, PAIR_CHUNK // Y.shape[0])
    hits = []
    for s in range(0, X.shape[0], chunk):
        xs = X[s:s + chunk]
        if d == 1:
            vals = F(xs[:, None, 0], Y[None, :, 0]).ravel()
            hits.append(np.unique(np.floor(vals / out_step).astype(np.int64)))
        else:
            vals = F(xs[:, None, :], Y[None, :, :]).reshape(-1, d)
            hits.append(np.unique(np.floor(vals / out_step).astype(np.int64), axis=0))
    if d == 1:
        cells = np.unique(np.concatenate(hits))
        covered = np.unique((cells[:, None] + np.arange(-dil, dil + 1)[None, :]).ravel())
        return covered.size * out_step
    cells = np.unique(np.concatenate(hits), axis=0)
    offsets = np.array(list(itertools.product(range(-dil, dil + 1), repeat=d)), dtype=np.int64)
    covered = np.unique((cells[:, None, :] + offsets[None, :, :]).reshape(-1, d), axis=0)
    return covered.shape[0] * out_step**d


def baseline_measure(x_spec: PlacedSet, r) -> float:
    """Lebesgue measure of the rasterized ``X_r``."""
    r = _fft.as_fraction(r)
    return x_spec.mask(r).size * float(r / 2)


@dataclass
class ExpansionCurve:
    map: str
    entries: list
    delta: float
    dim: int
    fitted_exponent: float
    gain: float
    residual: float
    degenerate: bool = False
    config: dict = field(default_factory=dict)


def expansion_curve(F: MapSpec, x_spec: PlacedSet, y_spec: PlacedSet, r_list,
                    out_factor: int = 2) -> ExpansionCurve:
    """Image measures at each radius; gain is ``(d - delta) - fitted exponent``
    with ``delta`` the larger of the two dimensions (the trivial floor
    ``|F(X_r, Y_r)| >= max(|X_r|, |Y_r|)``)."""
    if len(r_list) < 4:
        raise ValidationError("an expansion curve needs at least 4 radii")
    if F.dim != 1:
        raise ValidationError("placed Cantor sets are one-dimensional")
    radii = sorted((_fft.as_fraction(r) for r in r_list), reverse=True)
    entries = []
    for r in radii:
        X, Y = x_spec.mask(r), y_spec.mask(r)
        entries.append((float(r), image_measure(F, X, Y, r, out_factor=out_factor),
                        X.size * float(r / 2), Y.size * float(r / 2)))
    delta = max(x_spec.delta, y_spec.delta)
    vals = np.array([e[1] for e in entries])
    degenerate = bool(np.ptp(vals) <= 1e-12 * max(vals.max(), 1e-300))
    try:
        slope, _, resid = loglog_fit([e[0] for e in entries], vals)
    except FitError:
        slope, resid, degenerate = float("nan"), float("nan"), True
    return ExpansionCurve(F.name, entries, delta, F.dim, slope, (F.dim - delta) - slope,
                          resid, degenerate)
