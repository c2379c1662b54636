"""Additive energy, Gowers norms and fractal uncertainty experiments for
discretised regular measures."""

__version__ = "0.1.0"

from .errors import ConvergenceError, FitError, GridSizeError, ValidationError
from .measure import (CantorSpec, GridMeasure, RegularityCertificate, cantor_measure,
                      check_regularity, disk_measure, interval_measure, point_mass,
                      product_measure)
from .energy import EnergyCurve, WindowSet, energy_bruteforce, energy_curve, energy_fast
from .fitting import fit_powerlaw

__all__ = [
    "CantorSpec", "ConvergenceError", "EnergyCurve", "FitError", "GridMeasure",
    "GridSizeError", "RegularityCertificate", "ValidationError", "WindowSet",
    "cantor_measure", "check_regularity", "disk_measure", "energy_bruteforce",
    "energy_curve", "energy_fast", "fit_powerlaw", "interval_measure", "point_mass",
    "product_measure",
]
