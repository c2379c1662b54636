"""Least-squares power-law fits in log-log coordinates."""

import numpy as np

from .errors import FitError


def loglog_fit(x, y, min_points=3):
    """Fit ``log y = slope * log x + intercept``.

    Returns ``(slope, intercept, residual)`` with residual the RMS of the
    log-residuals.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise FitError("x and y must be 1-d arrays of equal length")
    if x.size < min_points:
        raise FitError(f"need at least {min_points} points, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(x * y)):
        raise FitError("power-law fit needs finite positive data")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) == 0:
        raise FitError("all abscissae coincide")
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (slope * lx + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid**2)))


def fit_powerlaw(points):
    """Power-law fit of positive ``(x, y)`` pairs; at least three are required."""
    points = list(points)
    if len(points) < 3:
        raise FitError(f"need at least 3 points, got {len(points)}")
    x, y = zip(*points)
    return loglog_fit(x, y, min_points=3)
