"""Gowers U^2 toolkit for functions on a scaled lattice ``step * Z^dim``.

Haar measure is ``step**dim`` per lattice point, so every norm here is the
discrete counterpart of the Euclidean one: ``||f||_{U^2}^4 = ||f * f||_2^2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import fft as sfft

from . import _fft
from .errors import ValidationError
from .measure import GridMeasure, ball_masses

DIRECT_INNER_MAX_SUPPORT = 64


@dataclass(frozen=True)
class GridFunction:
    """Dense array of (possibly complex) values; ``values[k]`` sits at
    lattice index ``offset + k``."""

    dim: int
    step: Fraction
    values: np.ndarray
    offset: tuple = None
    origin: tuple = None

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.ndim != self.dim:
            raise ValidationError(f"values must be {self.dim}-dimensional")
        step = _fft.as_fraction(self.step)
        if step <= 0:
            raise ValidationError("step must be positive")
        offset = (0,) * self.dim if self.offset is None else tuple(int(v) for v in self.offset)
        origin = (Fraction(0),) * self.dim if self.origin is None else tuple(
            _fft.as_fraction(o) for o in self.origin)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "step", step)
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "origin", origin)

    @classmethod
    def from_cells(cls, cells, step, dim=None):
        """Build from a mapping ``index tuple -> value``."""
        keys = [tuple(np.atleast_1d(k)) for k in cells]
        dim = dim or len(keys[0])
        idx = np.array(keys, dtype=np.int64).reshape(-1, dim)
        lo = idx.min(axis=0)
        vals = np.zeros(tuple(idx.max(axis=0) - lo + 1),
                        dtype=np.result_type(*[np.asarray(v) for v in cells.values()], float))
        for k, v in zip(idx, cells.values()):
            vals[tuple(k - lo)] += v
        return cls(dim, step, vals, tuple(lo))

    @classmethod
    def from_measure(cls, mu: GridMeasure):
        dense, lo = mu.to_dense()
        return cls(mu.dim, mu.step, dense, tuple(lo), mu.origin)

    @property
    def support_size(self):
        return int(np.count_nonzero(self.values))

    @property
    def cell_volume(self):
        return float(self.step) ** self.dim


def tensor(f: GridFunction, g: GridFunction) -> GridFunction:
    """``(f (x) g)(x, y) = f(x) g(y)`` on the product lattice."""
    if f.step != g.step:
        raise ValidationError("tensor factors need a common step")
    vals = np.multiply.outer(f.values, g.values)
    return GridFunction(f.dim + g.dim, f.step, vals, f.offset + g.offset, f.origin + g.origin)


def _self_conv_sq_sum(values, axes):
    """Sum over the output of |f * f|^2 along ``axes`` (others are batch axes)."""
    shape = _fft.padded_shape([2 * values.shape[a] - 1 for a in axes])
    if np.iscomplexobj(values):
        F = sfft.fftn(values, shape, axes=axes)
        ff = sfft.ifftn(F * F, shape, axes=axes)
    else:
        F = sfft.rfftn(values, shape, axes=axes)
        ff = sfft.irfftn(F * F, shape, axes=axes)
    return np.sum(np.abs(ff) ** 2, axis=axes)


def u2_fourth(f: GridFunction) -> float:
    """``||f||_{U^2}^4 = step^(3 dim) * sum_t |(f*f)(t)|^2``."""
    if f.values.size == 0 or not np.any(f.values):
        return 0.0
    axes = tuple(range(f.dim))
    return float(_self_conv_sq_sum(f.values, axes)) * f.cell_volume**3


def u2_norm(f: GridFunction) -> float:
    return u2_fourth(f) ** 0.25


def lp_norm(f: GridFunction, p) -> float:
    return float(np.sum(np.abs(f.values) ** p) * f.cell_volume) ** (1.0 / p)


def _check_common(fs):
    f0 = fs[0]
    for f in fs[1:]:
        if f.dim != f0.dim or f.step != f0.step or f.origin != f0.origin:
            raise ValidationError("Gowers inner product needs a common lattice")


def _inner_direct(fs):
    """Cubic sum over the supports; used for small inputs and as an oracle."""
    pts = []
    for f in fs:
        nz = np.argwhere(f.values != 0)
        pts.append({tuple(k + np.array(f.offset)): f.values[tuple(k)] for k in nz})
    f1, f2, f3, f4 = pts
    total = 0j
    for x, a in f1.items():
        for y, b in f2.items():
            for z, c in f3.items():
                w = tuple(yy + zz - xx for xx, yy, zz in zip(x, y, z))
                d = f4.get(w)
                if d is not None:
                    total += a * np.conj(b) * np.conj(c) * d
    return total


def _placed(values, offset, lo, shape):
    out = np.zeros(shape, dtype=values.dtype)
    sl = tuple(slice(o - l, o - l + n) for o, l, n in zip(offset, lo, values.shape))
    out[sl] = values
    return out


def gowers_inner(f1, f2, f3, f4, direct=None) -> complex:
    """``sum_{x,h,k} f1(x) conj f2(x+h) conj f3(x+k) f4(x+h+k)`` times step^(3 dim).

    Evaluated as ``sum_t conj((f2*f3)(t)) (f1*f4)(t)``; inputs with at most
    64 support points in total use the literal cubic sum instead.
    """
    fs = (f1, f2, f3, f4)
    _check_common(fs)
    vol3 = f1.cell_volume**3
    if direct is None:
        direct = sum(f.support_size for f in fs) <= DIRECT_INNER_MAX_SUPPORT
    if direct:
        return complex(_inner_direct(fs)) * vol3
    if any(f.values.size == 0 or not np.any(f.values) for f in fs):
        return 0j
    c14 = _fft.convolve(f1.values, f4.values)
    c23 = _fft.convolve(f2.values, f3.values)
    o14 = np.add(f1.offset, f4.offset)
    o23 = np.add(f2.offset, f3.offset)
    lo = np.minimum(o14, o23)
    hi = np.maximum(o14 + c14.shape, o23 + c23.shape)
    shape = tuple(int(v) for v in hi - lo)
    a = _placed(c14, o14, lo, shape)
    b = _placed(c23, o23, lo, shape)
    return complex(np.vdot(b, a)) * vol3


def splitting_check(F: GridFunction, split=1):
    """Both sides of the splitting inequality on ``V x V'``.

    ``V`` is spanned by the first ``split`` axes.  Returns ``(lhs, rhs)`` with
    ``lhs = ||F||_{U^2(V x V')}`` and ``rhs`` the U^2(V') norm of
    ``v' -> ||F(., v')||_{U^2(V)}``.
    """
    if F.dim < 2 or not 1 <= split < F.dim:
        raise ValidationError("splitting needs a product lattice of dimension >= 2")
    lhs = u2_norm(F)
    axes = tuple(range(split))
    if not np.any(F.values):
        return 0.0, 0.0
    inner4 = _self_conv_sq_sum(F.values, axes) * float(F.step) ** (3 * split)
    fiber = GridFunction(F.dim - split, F.step, inner4**0.25, F.offset[split:], F.origin[split:])
    return lhs, u2_norm(fiber)


def smoothed(mu: GridMeasure, r) -> GridFunction:
    """``mu * 1_{B(0,r)}`` sampled on the lattice: x -> mu(B(x, r))."""
    vals, lo = ball_masses(mu, r)
    return GridFunction(mu.dim, mu.step, vals, tuple(lo), mu.origin)


def u2_of_smoothed(mu: GridMeasure, r) -> float:
    if _fft.radius_in_cells(r, mu.step) < 1:
        raise ValidationError("smoothing radius must be at least one step")
    return u2_norm(smoothed(mu, r))


__all__ = ["GridFunction", "tensor", "u2_fourth", "u2_norm", "lp_norm", "gowers_inner",
           "splitting_check", "smoothed", "u2_of_smoothed"]
