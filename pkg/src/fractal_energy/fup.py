"""Discretized semiclassical Fourier transform and fractal uncertainty norms.

``F_h f(xi) = (2 pi h)^(-d/2) * sum_x exp(-i x.xi / h) f(x) step^d`` with x and
xi on the same lattice ``step * Z^d``.  Norms of ``1_X F_h 1_Y`` are computed
on index masks: rows run over X (frequency side), columns over Y.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
import math

import numpy as np

from . import _fft
from .energy import energy_fast
from .errors import ConvergenceError, FitError, ValidationError
from .fitting import loglog_fit
from .measure import CantorSpec, GridMeasure, cantor_measure

MAX_SIDE_1D = 2**14
MAX_SIDE_2D = 2**12
DENSE_SVD_MAX_SIDE = 1024
DENSE_MATRIX_MAX_ENTRIES = 2**24
POWER_TOL = 1e-9
POWER_MAX_ITER = 10_000
EXTENT = (Fraction(-2), Fraction(2))


def _as_mask(mask, dim=None):
    m = np.asarray(mask, dtype=np.int64)
    if m.ndim == 1:
        m = m[:, None]
    if dim is not None and m.size and m.shape[1] != dim:
        raise ValidationError("mask dimension mismatch")
    return m.reshape(-1, dim or m.shape[1])


def _phase_scale(h, step):
    h, step = float(h), float(step)
    return step * step / h


def restricted_matrix(X_mask, Y_mask, h, step) -> np.ndarray:
    """``1_X F_h 1_Y`` as a dense ``|X| x |Y|`` matrix."""
    X, Y = _as_mask(X_mask), _as_mask(Y_mask)
    d = X.shape[1] if X.size else Y.shape[1]
    c = (2 * math.pi * float(h)) ** (-d / 2) * float(step) ** d
    phase = (X.astype(float) @ Y.astype(float).T) * _phase_scale(h, step)
    return c * np.exp(-1j * phase)


def extent_indices(extent, step, dim=1) -> np.ndarray:
    """Lattice indices of ``step * Z^dim`` inside the closed box ``extent^dim``."""
    lo, hi = (_fft.as_fraction(v) for v in extent)
    step = _fft.as_fraction(step)
    a, b = math.ceil(lo / step), math.floor(hi / step)
    axis = np.arange(a, b + 1, dtype=np.int64)
    if axis.size == 0:
        return np.zeros((0, dim), dtype=np.int64)
    grids = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def fourier_matrix(h, step, extent=EXTENT, dim=1):
    """Quadrature matrix of F_h over the lattice points of ``extent^dim``.

    Returns ``(matrix, indices)``; row and column ``k`` sit at ``indices[k] * step``.
    """
    if float(step) > float(h):
        raise ValidationError("need step <= h")
    idx = extent_indices(extent, step, dim)
    limit = MAX_SIDE_1D if dim == 1 else MAX_SIDE_2D
    if idx.shape[0] > limit:
        raise ValidationError(f"matrix side {idx.shape[0]} exceeds {limit}")
    if idx.shape[0] == 0:
        return np.zeros((0, 0), dtype=complex), idx
    return restricted_matrix(idx, idx, h, step), idx


def _check_masks(X, Y, h, step):
    if float(step) > float(h) / 4 * (1 + 1e-12):
        raise ValidationError("oversampling factor h/step must be at least 4")
    bound = float(EXTENT[1]) / float(step) + 1e-9
    for m in (X, Y):
        if m.size and np.abs(m).max() > bound:
            raise ValidationError("mask leaves the [-2, 2] extent")
    d = max(X.shape[1], Y.shape[1])
    limit = MAX_SIDE_1D if d == 1 else MAX_SIDE_2D
    if max(X.shape[0], Y.shape[0]) > limit:
        raise ValidationError(f"mask side exceeds {limit}")


class _Operator:
    """Matrix-vector products with ``A = 1_X F_h 1_Y``, dense or row-blocked."""

    def __init__(self, X, Y, h, step):
        self.X, self.Y, self.h, self.step = X, Y, h, step
        self.dense = None
        if X.shape[0] * Y.shape[0] <= DENSE_MATRIX_MAX_ENTRIES:
            self.dense = restricted_matrix(X, Y, h, step)
        self.block = max(1, DENSE_MATRIX_MAX_ENTRIES // (8 * max(Y.shape[0], 1)))

    def normal(self, v):
        if self.dense is not None:
            return self.dense.conj().T @ (self.dense @ v)
        out = np.zeros(self.Y.shape[0], dtype=complex)
        for s in range(0, self.X.shape[0], self.block):
            A = restricted_matrix(self.X[s:s + self.block], self.Y, self.h, self.step)
            out += A.conj().T @ (A @ v)
        return out


def power_norm(op, n_cols, tol=POWER_TOL, max_iter=POWER_MAX_ITER):
    """Largest singular value by power iteration on ``A^H A`` from the all-ones vector."""
    v = np.ones(n_cols, dtype=complex) / math.sqrt(n_cols)
    sigma = 0.0
    for _ in range(max_iter):
        w = op.normal(v)
        lam = float(np.real(np.vdot(v, w)))
        new = math.sqrt(max(lam, 0.0))
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        if abs(new - sigma) <= tol * new:
            return new
        sigma = new
    raise ConvergenceError("power iteration did not converge", last_iterate=v, bound=sigma)


def fup_norm(X_mask, Y_mask, h, step, method="auto") -> float:
    """``||1_X F_h 1_Y||_{L^2 -> L^2}`` on the lattice ``step * Z^d``."""
    X, Y = _as_mask(X_mask), _as_mask(Y_mask)
    if X.shape[0] == 0 or Y.shape[0] == 0:
        return 0.0
    if X.shape[1] != Y.shape[1]:
        raise ValidationError("masks live in different dimensions")
    _check_masks(X, Y, h, step)
    if method == "auto":
        method = "svd" if max(X.shape[0], Y.shape[0]) <= DENSE_SVD_MAX_SIDE else "power"
    if method == "svd":
        return float(np.linalg.svd(restricted_matrix(X, Y, h, step), compute_uv=False)[0])
    if method == "power":
        return power_norm(_Operator(X, Y, h, step), Y.shape[0])
    raise ValidationError(f"unknown method {method!r}")


# -- masks -----------------------------------------------------------------

def cantor_mask(spec: CantorSpec, n: int, oversample: int = 4) -> np.ndarray:
    """Lattice indices (step ``h / oversample``, ``h = base^-n``) of the
    h-neighbourhood ``[a - h, a + 2h)`` of each depth-n interval ``[a, a + h)``.

    Half-open cells make the sample count equal the covered length divided by
    the step, which keeps norms stable under refinement of the lattice.
    """
    if spec.seed is not None:
        lefts = cantor_measure(spec.with_levels(n)).indices[:, 0]
    else:
        lefts = np.array([0], dtype=np.int64)
        digits = np.asarray(spec.digits, dtype=np.int64)
        for _ in range(n):
            lefts = (lefts[:, None] * spec.base + digits[None, :]).ravel()
    starts = np.sort(lefts) * oversample
    offsets = np.arange(-oversample, 2 * oversample)
    return np.unique((starts[:, None] + offsets[None, :]).ravel())


def interval_mask(lo, hi, h, oversample: int = 4) -> np.ndarray:
    """Indices of ``[lo - h, hi + h)`` at step ``h / oversample``."""
    h = _fft.as_fraction(h)
    step = h / oversample
    lo, hi = _fft.as_fraction(lo), _fft.as_fraction(hi)
    return np.arange(math.ceil((lo - h) / step), math.ceil((hi + h) / step), dtype=np.int64)


def product_mask(*factors) -> np.ndarray:
    """Cartesian product of one-dimensional masks as an ``(M, d)`` array."""
    grids = np.meshgrid(*factors, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


@dataclass(frozen=True)
class FullInterval:
    """Mask generator for ``[lo, hi]`` (dimension 1)."""

    lo: Fraction = Fraction(0)
    hi: Fraction = Fraction(1)
    base: int = 3

    @property
    def delta(self):
        return 1.0

    def mask(self, n, oversample):
        return interval_mask(self.lo, self.hi, Fraction(1, self.base**n), oversample)


def _factors(spec):
    return list(spec) if isinstance(spec, (tuple, list)) else [spec]


def _factor_mask(spec, n, oversample):
    if isinstance(spec, CantorSpec):
        return cantor_mask(spec, n, oversample)
    if hasattr(spec, "mask"):
        return spec.mask(n, oversample)
    raise ValidationError(f"unsupported mask spec {spec!r}")


@dataclass
class FupCurve:
    entries: list
    delta_x: float
    delta_y: float
    dim: int
    trivial_exponent: float
    fitted_exponent: float
    gain: float
    residual: float
    oversample: int
    sides: list = field(default_factory=list)
    degenerate: bool = False

    @property
    def reference_exponent(self):
        """``(3/8)(d - dx - dy)``, the comparison exponent for product sets in the plane."""
        return 0.375 * (self.dim - self.delta_x - self.delta_y)


def _scale_level(h, base):
    n = round(-math.log(float(h)) / math.log(base))
    if n < 0 or Fraction(1, base**n) != _fft.as_fraction(h):
        raise ValidationError(f"h={h} is not a power of 1/{base}")
    return n


def fup_curve(x_spec, y_spec, h_list, oversample: int = 4, method="auto") -> FupCurve:
    """Norms of ``1_{X_h} F_h 1_{Y_h}`` over ``h_list`` and a log-log fit.

    A spec is a :class:`CantorSpec`, a :class:`FullInterval`, or a tuple of
    those for a product set.  Product masks factor the matrix as a Kronecker
    product, so the norm is the product of the factor norms.
    """
    if len(h_list) < 4:
        raise ValidationError("an FUP curve needs at least 4 values of h")
    if oversample < 4:
        raise ValidationError("oversample must be at least 4")
    xs, ys = _factors(x_spec), _factors(y_spec)
    if len(xs) != len(ys):
        raise ValidationError("X and Y specs have different dimensions")
    d = len(xs)
    for s in xs + ys:
        if not (isinstance(s, CantorSpec) or hasattr(s, "mask")):
            raise ValidationError(f"unsupported mask spec {s!r}")
    base = xs[0].base
    if any(s.base != base for s in xs + ys):
        raise ValidationError("all factors need the same base")
    delta_x = sum(s.delta for s in xs)
    delta_y = sum(s.delta for s in ys)
    hs = sorted((_fft.as_fraction(h) for h in h_list), reverse=True)
    entries, sides = [], []
    for h in hs:
        n = _scale_level(h, base)
        step = h / oversample
        norm, side = 1.0, 1
        for xf, yf in zip(xs, ys):
            X, Y = _factor_mask(xf, n, oversample), _factor_mask(yf, n, oversample)
            norm *= fup_norm(X, Y, h, step, method)
            side *= max(X.size, Y.size)
        entries.append((float(h), norm))
        sides.append(side)
    trivial = max((d - delta_x - delta_y) / 2, 0.0)
    norms = np.array([v for _, v in entries])
    degenerate = bool(np.all(norms == 0) or np.ptp(norms) <= 1e-12 * norms.max())
    if degenerate:
        slope, resid = float("nan"), float("nan")
    else:
        try:
            slope, _, resid = loglog_fit([h for h, _ in entries], norms)
        except FitError:
            slope, resid, degenerate = float("nan"), float("nan"), True
    return FupCurve(entries, delta_x, delta_y, d, trivial, slope, slope - trivial, resid,
                    oversample, sides, degenerate)


def fey_bound(mu_Y: GridMeasure, h, delta) -> float:
    """``h^(d/2 - delta) * E(mu_Y, h)^(1/4)``."""
    if float(h) < float(mu_Y.step) * (1 - 1e-12):
        raise ValidationError("need h >= step")
    E = energy_fast(mu_Y, h)
    return float(h) ** (mu_Y.dim / 2 - float(delta)) * E**0.25
