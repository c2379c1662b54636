"""Additive energy of lattice measures at a scale or against a symmetric set.

``E(mu, H)`` is the mu^4 mass of quadruples with ``x1 + x2 - x3 - x4`` in ``H``.
The fast path forms the sum distribution ``s = mu * mu`` and returns
``sum_{a - b in H} s(a) s(b)`` from two FFT convolutions; the brute-force
path enumerates pair sums directly and shares no code with it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import itertools
import math

import numpy as np
from scipy import fft as sfft

from . import _fft
from .errors import ValidationError
from .fitting import loglog_fit
from .measure import GridMeasure, ball_masses

BRUTE_MAX_SUPPORT = 400
LITERAL_MAX_SUPPORT = 24


@dataclass(frozen=True)
class WindowSet:
    """Finite symmetric set of lattice offsets containing 0."""

    dim: int
    step: object
    indices: np.ndarray

    def __post_init__(self):
        idx = np.unique(np.asarray(self.indices, dtype=np.int64).reshape(-1, self.dim), axis=0)
        if not np.any(np.all(idx == 0, axis=1)):
            raise ValidationError("window must contain 0")
        neg = np.unique(-idx, axis=0)
        if neg.shape != idx.shape or np.any(neg != idx):
            raise ValidationError("window must be symmetric")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "step", _fft.as_fraction(self.step))

    @classmethod
    def ball(cls, r, step, dim=1):
        mask, half = _fft.ball_offsets(_fft.radius_in_cells(r, step), dim)
        return cls(dim, step, np.argwhere(mask) - half)

    def scaled(self, factor: int):
        """Image under x -> factor * x (the step is unchanged)."""
        return WindowSet(self.dim, self.step, self.indices * int(factor))

    def mask(self):
        half = int(np.abs(self.indices).max())
        out = np.zeros((2 * half + 1,) * self.dim, dtype=bool)
        out[tuple((self.indices + half).T)] = True
        return out, half

    def uniform_weights(self):
        """nu_H: the uniform probability measure on the window."""
        return np.full(self.indices.shape[0], 1.0 / self.indices.shape[0])


def affine_pushforward(mu: GridMeasure, scale: int, shift) -> GridMeasure:
    """Push ``mu`` forward along ``i -> scale * i + shift`` on lattice indices."""
    if int(scale) == 0:
        raise ValidationError("affine map must be invertible")
    shift = np.broadcast_to(np.asarray(shift, dtype=np.int64), (mu.dim,))
    idx = mu.indices * int(scale) + shift
    # the image of the old box, widened to stay symmetric about the origin
    span = (max(abs(mu.box[0]), abs(mu.box[1])) * abs(int(scale))
            + int(np.abs(shift).max()) * mu.step
            + max(abs(o) for o in mu.origin) * abs(int(scale) - 1))
    return mu.replace_cells(idx, mu.masses, box=(-span, span), provenance={})


# -- brute force -----------------------------------------------------------

def _literal_energy(idx, m, thresh):
    n = idx.shape[0]
    total = 0.0
    for a, b, c, d in itertools.product(range(n), repeat=4):
        k = idx[a] + idx[b] - idx[c] - idx[d]
        if int(k @ k) <= thresh:
            total += m[a] * m[b] * m[c] * m[d]
    return total


def _pair_sums(idx, m):
    """Distinct pair sums i1 + i2 with aggregated weights (exact, no FFT)."""
    sums = (idx[:, None, :] + idx[None, :, :]).reshape(-1, idx.shape[1])
    w = np.outer(m, m).ravel()
    keys, inv = np.unique(sums, axis=0, return_inverse=True)
    return keys, np.bincount(inv.ravel(), weights=w)


def energy_bruteforce(mu: GridMeasure, r, block=2048) -> float:
    """Exhaustive quadruple sum with the closed condition ``|x1+x2-x3-x4| <= r``.

    Ordered pairs are grouped by their exact index sum before comparing, so
    the work is quadratic in the number of distinct sums; supports up to 24
    points are enumerated literally.
    """
    if mu.size > BRUTE_MAX_SUPPORT:
        raise ValidationError(f"support {mu.size} too large for the brute-force oracle")
    if r < 0:
        raise ValidationError("r must be nonnegative")
    if mu.size == 0:
        return 0.0
    thresh = _fft.squared_radius_threshold(r, mu.step)
    idx, m = mu.indices, mu.masses
    if mu.size <= LITERAL_MAX_SUPPORT:
        return _literal_energy(idx, m, thresh)
    keys, w = _pair_sums(idx, m)
    total = 0.0
    for start in range(0, keys.shape[0], block):
        diff = keys[start:start + block, None, :] - keys[None, :, :]
        close = np.sum(diff * diff, axis=2) <= thresh
        total += float(w[start:start + block] @ (close @ w))
    return total


# -- fast path -------------------------------------------------------------

class SumDistribution:
    """FFT of ``s = mu * mu`` padded for windows up to ``max_half`` cells."""

    def __init__(self, mu: GridMeasure, max_half: int, budget=_fft.DEFAULT_BUDGET, workers=1):
        dense, _ = mu.to_dense()
        self.dim = mu.dim
        self.workers = workers
        self.shape = _fft.padded_shape([2 * n - 1 + 2 * max_half for n in dense.shape], budget)
        self.max_half = max_half
        axes = tuple(range(self.dim))
        M = sfft.rfftn(dense, self.shape, axes=axes, workers=workers)
        self.s_hat = M * M
        self.s = sfft.irfftn(self.s_hat, self.shape, axes=axes, workers=workers)

    def windowed(self, mask, half):
        """``sum_a s(a) (s * W)(a)`` for a centred boolean window."""
        if half > self.max_half:
            raise ValidationError("window larger than the padding allows")
        W = np.zeros(self.shape)
        W[tuple(slice(0, 2 * half + 1) for _ in range(self.dim))] = mask
        W = np.roll(W, [-half] * self.dim, axis=tuple(range(self.dim)))
        axes = tuple(range(self.dim))
        G = sfft.irfftn(self.s_hat * sfft.rfftn(W, axes=axes, workers=self.workers),
                        self.shape, axes=axes, workers=self.workers)
        return float(np.sum(self.s * G))


def energy_fast(mu: GridMeasure, r, budget=_fft.DEFAULT_BUDGET, workers=1) -> float:
    if _fft.radius_in_cells(r, mu.step) < 1:
        raise ValidationError("energy_fast needs r >= step")
    if mu.size == 0:
        return 0.0
    mask, half = _fft.ball_offsets(_fft.radius_in_cells(r, mu.step), mu.dim)
    return SumDistribution(mu, half, budget, workers).windowed(mask, half)


def energy_wrt_set(mu: GridMeasure, H: WindowSet, budget=_fft.DEFAULT_BUDGET, workers=1) -> float:
    if H.dim != mu.dim or H.step != mu.step:
        raise ValidationError("window and measure live on different lattices")
    if mu.size == 0:
        return 0.0
    mask, half = H.mask()
    return SumDistribution(mu, half, budget, workers).windowed(mask, half)


# -- curves ----------------------------------------------------------------

@dataclass
class EnergyCurve:
    entries: list
    delta: float
    fitted_slope: float
    beta: float
    residual: float
    method: str
    total_mass: float = 1.0
    ball_max: list = field(default_factory=list)

    @property
    def radii(self):
        return [r for r, _ in self.entries]

    @property
    def energies(self):
        return [e for _, e in self.entries]

    def trivial_bounds(self):
        """``total^3 * max_x mu(B(x, r))`` for each entry."""
        return [self.total_mass**3 * b for b in self.ball_max]


def measure_delta(mu: GridMeasure):
    """Dimension recorded by the generator of ``mu``, or None."""
    prov = mu.provenance or {}
    if "delta" in prov:
        return float(prov["delta"])
    if prov.get("type") == "cantor":
        return math.log(len(prov["digits"])) / math.log(prov["base"])
    return None


def energy_curve(mu: GridMeasure, scales, delta=None, method="fast", workers=1,
                 budget=_fft.DEFAULT_BUDGET) -> EnergyCurve:
    """Energies at each scale and a log-log fit over the interior scales."""
    if delta is None:
        delta = measure_delta(mu)
        if delta is None:
            raise ValidationError("delta not given and not recorded in the measure")
    scales = sorted(scales)
    if len(scales) < 4:
        raise ValidationError("an energy curve needs at least 4 scales")
    step = float(mu.step)
    if scales[0] < step * (1 - 1e-12) or scales[-1] > 1:
        raise ValidationError("scales must lie in [step, 1]")
    if method == "fast":
        windows = [_fft.ball_offsets(_fft.radius_in_cells(r, mu.step), mu.dim) for r in scales]
        sd = SumDistribution(mu, max(h for _, h in windows), budget, workers)
        energies = [sd.windowed(m, h) for m, h in windows]
    elif method == "brute":
        energies = [energy_bruteforce(mu, r) for r in scales]
    else:
        raise ValidationError(f"unknown method {method!r}")
    ball_max = [float(ball_masses(mu, r, workers)[0].max()) for r in scales]
    inner = slice(1, -1)
    slope, _, resid = loglog_fit(scales[inner], energies[inner], min_points=2)
    return EnergyCurve([(float(r), float(e)) for r, e in zip(scales, energies)], float(delta),
                       slope, slope - float(delta), resid, method, mu.total_mass, ball_max)
