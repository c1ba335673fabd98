"""Readers for the slipflow CSV outputs.

The file contract: '#'-prefixed metadata lines (``# key: value``), one
header line, comma-separated float rows.  Series files carry the columns
time, ke_mean, ke_sem, diss_mean, diss_sem, wall_ke_mean, wall_ke_sem,
slipnorm_mean, cum_diss_mean; sweep files carry nu, delta, mode,
time_integrated_diss, final_wall_ke, final_ke, weak_diss.
"""

from __future__ import annotations

import glob
import os

import numpy as np

SERIES_COLUMNS = ("time", "ke_mean", "ke_sem", "diss_mean", "diss_sem",
                  "wall_ke_mean", "wall_ke_sem", "slipnorm_mean",
                  "cum_diss_mean")
SWEEP_COLUMNS = ("nu", "delta", "mode", "time_integrated_diss",
                 "final_wall_ke", "final_ke", "weak_diss")


class SchemaError(ValueError):
    """Input file does not follow the slipflow CSV contract."""


def read_table(path: str):
    """(metadata dict, header list, column dict of arrays/lists)."""
    meta = {}
    header = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    k, v = body.split(":", 1)
                    meta[k.strip()] = v.strip()
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                continue
            parts = line.split(",")
            if len(parts) != len(header):
                raise SchemaError(f"{path}: row has {len(parts)} fields, "
                                  f"header has {len(header)}")
            rows.append(parts)
    if header is None:
        raise SchemaError(f"{path}: no header line")
    if not rows:
        raise SchemaError(f"{path}: empty body")
    cols = {}
    for i, name in enumerate(header):
        raw = [r[i] for r in rows]
        try:
            cols[name] = np.array([float(v) for v in raw])
        except ValueError:
            cols[name] = raw
    return meta, header, cols


def require_columns(header, needed, path):
    missing = [c for c in needed if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")


def load_series(path: str):
    """One series file -> dict with metadata, columns and a nu label."""
    meta, header, cols = read_table(path)
    require_columns(header, SERIES_COLUMNS, path)
    nu = float(meta["nu"]) if "nu" in meta else None
    return {"path": path, "meta": meta, "cols": cols, "nu": nu}


def collect_series(inputs):
    """Expand directories to their series_*.csv files and load everything,
    sorted by decreasing viscosity."""
    paths = []
    for item in inputs:
        if os.path.isdir(item):
            found = sorted(glob.glob(os.path.join(item, "series_*.csv")))
            if not found:
                raise SchemaError(f"{item}: no series_*.csv files")
            paths.extend(found)
        else:
            paths.append(item)
    series = [load_series(p) for p in paths]
    if all(s["nu"] is not None for s in series):
        series.sort(key=lambda s: -s["nu"])
    return series


def load_sweep(path: str):
    meta, header, cols = read_table(path)
    require_columns(header, SWEEP_COLUMNS, path)
    return {"path": path, "meta": meta, "cols": cols}
