"""File formats: exact measure documents, curve CSVs with JSON sidecars."""

from __future__ import annotations

import csv
import io
import json
import os
import re
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .measure import GridMeasure

MEASURE_VERSION = 1
_LADDER = re.compile(r"^\s*(\d+)\^(-?\d+)\s*\.\.\s*(\d+)\^(-?\d+)\s*$")


def atomic_write(path, text: str):
    """Write ``text`` to a temp file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_mass(m: float) -> str:
    return f"{m:.17e}"


def measure_to_text(mu: GridMeasure) -> str:
    doc = {
        "version": MEASURE_VERSION,
        "dim": mu.dim,
        "step": str(mu.step),
        "origin": [str(o) for o in mu.origin],
        "box": [str(mu.box[0]), str(mu.box[1])],
        "provenance": mu.provenance or {},
        "cells": [[[int(v) for v in idx], format_mass(float(m))]
                  for idx, m in zip(mu.indices, mu.masses)],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def measure_from_text(text: str) -> GridMeasure:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"not a measure document: {exc}") from None
    if doc.get("version") != MEASURE_VERSION:
        raise ValidationError(f"unsupported measure version {doc.get('version')!r}")
    dim = int(doc["dim"])
    cells = doc["cells"]
    idx = np.array([c[0] for c in cells], dtype=np.int64).reshape(-1, dim)
    masses = np.array([float(c[1]) for c in cells])
    box = tuple(Fraction(v) for v in doc.get("box", ["-1", "1"]))
    return GridMeasure(dim, Fraction(doc["step"]), tuple(Fraction(o) for o in doc["origin"]),
                       idx, masses, box=box, provenance=doc.get("provenance", {}))


def save_measure(mu: GridMeasure, path):
    atomic_write(path, measure_to_text(mu))


def load_measure(path) -> GridMeasure:
    return measure_from_text(Path(path).read_text())


# -- curves ----------------------------------------------------------------

def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    atomic_write(path, csv_text(header, rows))


def read_csv(path):
    """Returns ``(header, rows)``; numeric cells become floats."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = []
        for row in reader:
            out = []
            for v in row:
                try:
                    out.append(float(Fraction(v)) if "/" in v else float(v))
                except ValueError:
                    out.append(v)
            rows.append(out)
    return header, rows


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def _jsonable(v):
    if isinstance(v, np.floating):
        v = float(v)
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, float) and not np.isfinite(v):
        return None
    return v


def write_sidecar(path, doc: dict):
    atomic_write(sidecar_path(path), json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n")


def read_sidecar(path):
    p = sidecar_path(path)
    return json.loads(p.read_text()) if p.exists() else None


def parse_ladder(text: str):
    """``"3^-4..3^-10"`` -> exact powers 3^-4, 3^-5, ..., 3^-10 (strictly decreasing).

    A comma-separated list of numbers or rationals is also accepted.
    """
    m = _LADDER.match(text)
    if m:
        b1, e1, b2, e2 = (int(g) for g in m.groups())
        if b1 != b2 or b1 < 2:
            raise ValidationError(f"ladder {text!r} must use one base >= 2")
        if e2 >= e1:
            raise ValidationError(f"ladder {text!r} must be strictly decreasing")
        return [Fraction(b1) ** e for e in range(e1, e2 - 1, -1)]
    try:
        vals = [Fraction(v.strip()) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"cannot parse scales {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise ValidationError("scales must be positive")
    if any(a <= b for a, b in zip(vals, vals[1:])):
        raise ValidationError(f"scales {text!r} must be strictly decreasing")
    return vals
