"""Zero-padded FFT convolution helpers with a transform-size budget."""

from fractions import Fraction
import math

import numpy as np
from scipy import fft as sfft

from .errors import GridSizeError

DEFAULT_BUDGET = 2**27


def padded_shape(lengths, budget=DEFAULT_BUDGET):
    shape = tuple(sfft.next_fast_len(int(n), real=True) for n in lengths)
    total = math.prod(shape)
    if total > budget:
        raise GridSizeError(
            f"transform of shape {shape} ({total} points) exceeds budget {budget}"
        )
    return shape


def convolve(a, b, budget=DEFAULT_BUDGET, workers=1):
    """Full linear convolution of two real or complex n-d arrays."""
    a = np.asarray(a)
    b = np.asarray(b)
    out_len = [m + n - 1 for m, n in zip(a.shape, b.shape)]
    shape = padded_shape(out_len, budget)
    axes = tuple(range(a.ndim))
    if np.iscomplexobj(a) or np.iscomplexobj(b):
        fa = sfft.fftn(a, shape, axes=axes, workers=workers)
        fb = sfft.fftn(b, shape, axes=axes, workers=workers)
        out = sfft.ifftn(fa * fb, shape, axes=axes, workers=workers)
    else:
        fa = sfft.rfftn(a, shape, axes=axes, workers=workers)
        fb = sfft.rfftn(b, shape, axes=axes, workers=workers)
        out = sfft.irfftn(fa * fb, shape, axes=axes, workers=workers)
    return out[tuple(slice(0, n) for n in out_len)]


def as_fraction(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(float(x))


def radius_in_cells(r, step):
    """Exact ratio r/step as a Fraction (both coerced to rationals)."""
    return as_fraction(r) / as_fraction(step)


def ball_offsets(radius_cells, dim):
    """Integer offsets k with |k| <= radius_cells (closed ball), exact comparison.

    Returns (mask, half) where ``mask`` is a boolean array of side 2*half+1
    centred on the origin.
    """
    R = as_fraction(radius_cells)
    if R < 0:
        raise ValueError("radius must be nonnegative")
    half = int(math.floor(R))
    # |k|^2 is an integer, so |k|^2 <= R^2 iff |k|^2 <= floor(R^2)
    threshold = math.floor(R * R)
    k = np.arange(-half, half + 1, dtype=np.int64)
    sq = np.zeros((2 * half + 1,) * dim, dtype=np.int64)
    for ax in range(dim):
        shape = [1] * dim
        shape[ax] = -1
        sq = sq + (k**2).reshape(shape)
    return sq <= threshold, half


def squared_radius_threshold(r, step):
    """floor((r/step)^2): integer offsets k lie in the closed ball iff |k|^2 <= it."""
    R = radius_in_cells(r, step)
    return math.floor(R * R)
