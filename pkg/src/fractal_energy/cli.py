"""Command-line experiment runner.

    fractal-energy gen --type cantor --base 3 --digits 0,2 --levels 12 --out c.msr
    fractal-energy energy --measure c.msr --delta auto --scales 3^-4..3^-10 --out e.csv
    fractal-energy fit --in e.csv

Exit status: 0 on success, 2 on invalid input, 3 when an iteration fails to converge.
"""

from __future__ import annotations

import argparse
from dataclasses import asdict, dataclass, field
from fractions import Fraction
import json
import math
from pathlib import Path
import platform
import sys
import time
import warnings

import numpy as np
import scipy

from . import __version__
from . import edges as edges_mod
from . import expansion as exp_mod
from . import fup as fup_mod
from . import io
from .energy import energy_curve, energy_fast, measure_delta
from .errors import ConvergenceError, ValidationError
from .fitting import loglog_fit
from .gowers import u2_of_smoothed
from .measure import (CantorSpec, cantor_measure, disk_measure, interval_measure,
                      point_mass, product_measure)


@dataclass
class ExperimentConfig:
    """Echo of one run: the command, its parameters and the bookkeeping knobs.

    ``epsilon`` and ``r0`` are recorded for parameter studies only; nothing
    is derived from them.
    """

    command: str
    params: dict = field(default_factory=dict)
    seed: int = 1
    threads: int = 1
    epsilon: float | None = None
    r0: float | None = None

    @classmethod
    def from_args(cls, args):
        skip = {"func", "command", "seed", "threads", "epsilon", "r0"}
        params = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
        return cls(args.command, params, args.seed, args.threads, args.epsilon, args.r0)


def _versions():
    return {"fractal_energy": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _sidecar(args, t0, results):
    return {"config": asdict(ExperimentConfig.from_args(args)), "versions": _versions(),
            "wall_time_s": round(time.perf_counter() - t0, 3), **results}


def _digits(text):
    try:
        return tuple(int(d) for d in text.split(","))
    except ValueError:
        raise ValidationError(f"bad digit list {text!r}") from None


def _resolve_delta(text, mu):
    if text is None or text == "auto":
        delta = measure_delta(mu)
        if delta is None:
            raise ValidationError("--delta auto needs a measure with a recorded dimension")
        return delta
    try:
        return float(text)
    except ValueError:
        raise ValidationError(f"bad --delta {text!r}") from None


# -- subcommands -----------------------------------------------------------

def cmd_gen(args):
    t = args.type
    if t == "cantor":
        spec = CantorSpec(args.base, _digits(args.digits), args.levels,
                          args.seed if args.random else None)
        mu = cantor_measure(spec)
        for _ in range(args.dim - 1):
            mu = product_measure(mu, cantor_measure(spec))
    elif t == "disk":
        mu = disk_measure(args.dim, args.delta_int, Fraction(args.step))
    elif t == "interval":
        mu = interval_measure(Fraction(args.lo), Fraction(args.hi), Fraction(args.step))
    elif t == "point":
        mu = point_mass(args.dim, Fraction(args.step))
    else:
        raise ValidationError(f"unknown measure type {t!r}")
    io.save_measure(mu, args.out)
    print(f"gen {t}: {mu.size} cells, dim {mu.dim}, step {mu.step} -> {args.out}")


def cmd_energy(args):
    t0 = time.perf_counter()
    mu = io.load_measure(args.measure)
    delta = _resolve_delta(args.delta, mu)
    scales = io.parse_ladder(args.scales)
    curve = energy_curve(mu, scales, delta, args.method, workers=args.threads)
    rows = [(r, e, curve.method) for r, e in curve.entries]
    io.write_csv(args.out, ["r", "energy", "method"], rows)
    io.write_sidecar(args.out, _sidecar(args, t0, {
        "kind": "energy", "delta": curve.delta, "fitted_slope": curve.fitted_slope,
        "beta": curve.beta, "residual": curve.residual, "fit": "interior"}))
    print(f"energy: slope {curve.fitted_slope:.6f} beta {curve.beta:.6f} "
          f"residual {curve.residual:.3e} -> {args.out}")


def cmd_gowers(args):
    t0 = time.perf_counter()
    mu = io.load_measure(args.measure)
    rows = []
    for r in io.parse_ladder(args.scales):
        E = energy_fast(mu, r, workers=args.threads)
        u = u2_of_smoothed(mu, r)
        rows.append((float(r), E, u, E * float(r) ** (3 * mu.dim) / u**4))
    io.write_csv(args.out, ["r", "energy", "u2_smoothed", "ratio"], rows)
    ratios = [row[3] for row in rows]
    io.write_sidecar(args.out, _sidecar(args, t0, {
        "kind": "gowers", "ratio_min": min(ratios), "ratio_max": max(ratios),
        "ratio_spread": max(ratios) / min(ratios)}))
    print(f"gowers: ratio in [{min(ratios):.4g}, {max(ratios):.4g}] -> {args.out}")


def cmd_edges(args):
    t0 = time.perf_counter()
    mu = io.load_measure(args.measure)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", edges_mod.BaseHypothesisWarning)
        tree = edges_mod.build_tree(mu, args.K, args.depth)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    N = args.levels if args.levels is not None else args.depth // 2
    reports = edges_mod.exceptional_sets(tree, mu, N)
    rows = [(r.n, str(r.interval_length), r.active_count, r.left_edge_count,
             r.near_edge_count, r.exceptional_mass) for r in reports]
    io.write_csv(args.out, ["n", "interval_length", "active", "left_edges", "near_edges",
                            "exceptional_mass"], rows)
    viol = edges_mod.porosity_violations(tree)
    masses = [r.exceptional_mass for r in reports]
    factors = [b / a for a, b in zip(masses, masses[1:]) if a > 0]
    io.write_sidecar(args.out, _sidecar(args, t0, {
        "kind": "edges", "porosity_violations": len(viol),
        "decay_factors": factors, "max_decay_factor": max(factors) if factors else None}))
    print(f"edges: {len(reports)} levels, {len(viol)} porosity violations -> {args.out}")


def _fup_spec(args, which):
    digits = getattr(args, f"{which}_digits") or args.digits
    one = fup_mod.FullInterval(base=args.base) if args.full else \
        CantorSpec(args.base, _digits(digits))
    return tuple([one] * args.dim) if args.dim > 1 else one


def cmd_fup(args):
    t0 = time.perf_counter()
    hs = io.parse_ladder(args.h)
    curve = fup_mod.fup_curve(_fup_spec(args, "x"), _fup_spec(args, "y"), hs,
                              oversample=args.oversample, method=args.method)
    rows = [(h, v, side, curve.oversample) for (h, v), side in zip(curve.entries, curve.sides)]
    io.write_csv(args.out, ["h", "norm", "matrix_side", "oversample"], rows)
    io.write_sidecar(args.out, _sidecar(args, t0, {
        "kind": "fup", "dim": curve.dim, "delta_x": curve.delta_x, "delta_y": curve.delta_y,
        "trivial_exponent": curve.trivial_exponent, "fitted_exponent": curve.fitted_exponent,
        "gain": curve.gain, "residual": curve.residual, "degenerate": curve.degenerate,
        "reference_exponent": curve.reference_exponent}))
    print(f"fup: exponent {curve.fitted_exponent:.6f} trivial {curve.trivial_exponent:.6f} "
          f"gain {curve.gain:.6f} -> {args.out}")


_POSITIVE_MAPS = ("product", "quadratic")


def cmd_expand(args):
    t0 = time.perf_counter()
    spec = None if args.segment else CantorSpec(args.base, _digits(args.digits))
    if args.map in _POSITIVE_MAPS:
        placed = exp_mod.PlacedSet(spec, Fraction(1, 2), Fraction(1, 2))
        domain = (0.25, 1.5)
    else:
        placed = exp_mod.PlacedSet(spec)
        domain = (-1.0, 2.0)
    F = exp_mod.MapSpec(args.map, domain)
    curve = exp_mod.expansion_curve(F, placed, placed, io.parse_ladder(args.radii))
    io.write_csv(args.out, ["r", "image_measure", "baseline_x", "baseline_y"], curve.entries)
    io.write_sidecar(args.out, _sidecar(args, t0, {
        "kind": "expand", "map": curve.map, "delta": curve.delta, "dim": curve.dim,
        "fitted_exponent": curve.fitted_exponent, "gain": curve.gain,
        "residual": curve.residual, "degenerate": curve.degenerate,
        "placement": [str(placed.offset), str(placed.scale)]}))
    print(f"expand {args.map}: exponent {curve.fitted_exponent:.6f} gain {curve.gain:.6f} "
          f"-> {args.out}")


def fit_file(path, delta=None):
    """Refit a curve CSV.  Returns ``(slope, beta, residual)``.

    ``beta`` follows the producing command: slope - delta for energies,
    slope - trivial exponent for FUP curves, (d - delta) - slope for images.
    Energy curves are fitted on their interior scales, as when produced.
    """
    header, rows = io.read_csv(path)
    side = io.read_sidecar(path) or {}
    x = [r[0] for r in rows]
    y = [r[1] for r in rows]
    kind = {"energy": "energy", "norm": "fup", "image_measure": "expand"}.get(header[1])
    if kind == "energy":
        x, y = x[1:-1], y[1:-1]
        slope, _, resid = loglog_fit(x, y, min_points=2)
    else:
        slope, _, resid = loglog_fit(x, y)
    if kind == "energy":
        d = delta if delta is not None else side.get("delta")
        beta = slope - d if d is not None else math.nan
    elif kind == "fup":
        triv = side.get("trivial_exponent")
        beta = slope - triv if triv is not None else math.nan
    elif kind == "expand":
        d = delta if delta is not None else side.get("delta")
        beta = (side.get("dim", 1) - d) - slope if d is not None else math.nan
    else:
        beta = slope - delta if delta is not None else math.nan
    return slope, beta, resid


def cmd_fit(args):
    delta = None if args.delta is None else float(args.delta)
    slope, beta, resid = fit_file(args.input, delta)
    print(f"{slope!r} {beta!r} {resid!r}")


def cmd_report(args):
    paths = []
    for p in args.input:
        p = Path(p)
        paths.extend(sorted(p.glob("*.json")) if p.is_dir() else [io.sidecar_path(p)])
    lines = ["run,kind,key,value"]
    keys = {"energy": ["beta", "residual"], "fup": ["gain", "fitted_exponent"],
            "expand": ["gain", "fitted_exponent"], "gowers": ["ratio_spread"],
            "edges": ["max_decay_factor", "porosity_violations"]}
    for p in paths:
        if not p.exists():
            raise ValidationError(f"no sidecar at {p}")
        doc = json.loads(p.read_text())
        kind = doc.get("kind")
        for k in keys.get(kind, []):
            lines.append(f"{p.stem},{kind},{k},{doc.get(k)!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        io.atomic_write(args.out, text)
    sys.stdout.write(text)


# -- parser ----------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=1)
    common.add_argument("--threads", type=int, default=1, help="FFT worker threads")
    common.add_argument("--epsilon", type=float, default=None, help="recorded only")
    common.add_argument("--r0", type=float, default=None, help="recorded only")

    p = argparse.ArgumentParser(prog="fractal-energy", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a measure file")
    g.add_argument("--type", choices=["cantor", "disk", "interval", "point"], required=True)
    g.add_argument("--base", type=int, default=3)
    g.add_argument("--digits", default="0,2")
    g.add_argument("--levels", type=int, default=8)
    g.add_argument("--random", action="store_true", help="random digit subsets per node")
    g.add_argument("--dim", type=int, default=1)
    g.add_argument("--delta-int", type=int, default=1)
    g.add_argument("--step", default="1/1024")
    g.add_argument("--lo", default="0")
    g.add_argument("--hi", default="1")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("energy", parents=[common], help="energy curve of a measure")
    e.add_argument("--measure", required=True)
    e.add_argument("--delta", default="auto")
    e.add_argument("--scales", required=True, help="e.g. 3^-4..3^-10")
    e.add_argument("--method", choices=["fast", "brute"], default="fast")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_energy)

    w = sub.add_parser("gowers", parents=[common], help="energy against U2 of the smoothing")
    w.add_argument("--measure", required=True)
    w.add_argument("--scales", required=True)
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_gowers)

    d = sub.add_parser("edges", parents=[common], help="K-adic edge report")
    d.add_argument("--measure", required=True)
    d.add_argument("--K", type=int, required=True)
    d.add_argument("--depth", type=int, required=True)
    d.add_argument("--levels", type=int, default=None, help="N, default depth // 2")
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_edges)

    f = sub.add_parser("fup", parents=[common], help="fractal uncertainty norm curve")
    f.add_argument("--base", type=int, default=3)
    f.add_argument("--digits", default="0,2")
    f.add_argument("--x-digits", default=None)
    f.add_argument("--y-digits", default=None)
    f.add_argument("--full", action="store_true", help="use [0, 1] instead of a Cantor set")
    f.add_argument("--dim", type=int, choices=[1, 2], default=1)
    f.add_argument("--h", required=True, help="e.g. 3^-4..3^-8")
    f.add_argument("--oversample", type=int, default=4)
    f.add_argument("--method", choices=["auto", "svd", "power"], default="auto")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fup)

    x = sub.add_parser("expand", parents=[common], help="image volume curve")
    x.add_argument("--map", choices=["sum", "difference", "product", "shifted_product",
                                     "quadratic"], required=True)
    x.add_argument("--base", type=int, default=3)
    x.add_argument("--digits", default="0,2")
    x.add_argument("--segment", action="store_true", help="use [0, 1] (control)")
    x.add_argument("--radii", required=True)
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_expand)

    t = sub.add_parser("fit", parents=[common], help="refit a curve CSV")
    t.add_argument("--in", dest="input", required=True)
    t.add_argument("--delta", default=None)
    t.set_defaults(func=cmd_fit)

    r = sub.add_parser("report", parents=[common], help="summarise sidecars")
    r.add_argument("--in", dest="input", nargs="+", required=True)
    r.add_argument("--out", default=None)
    r.set_defaults(func=cmd_report)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        args.func(args)
    except ConvergenceError as exc:
        print(f"error: {exc} (last bound {exc.bound})", file=sys.stderr)
        return 3
    except (ValidationError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run())
