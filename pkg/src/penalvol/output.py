"""Deterministic file writers: checkpoint CSVs, tables, JSON and gnuplot scripts.

Floats are written with ``%.17g`` so files round-trip exactly; nothing
run-dependent (timestamps, hostnames) goes into data files.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def fmt(x) -> str:
    return "%.17g" % float(x)


def time_label(t: float) -> str:
    return f"{t:.6f}"


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([c if isinstance(c, str) else fmt(c) for c in row])
    return path


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_checkpoint(out_dir, prefix: str, tag: str, t: float, x, v, u=None) -> Path:
    """``<prefix>_<tag>_t<time>.csv`` with columns ``t, x, v_1..v_N[, u_1..u_N]``."""
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    header = ["t", "x"] + [f"v_{k + 1}" for k in range(n)]
    cols = [np.full(len(x), t), np.asarray(x, dtype=float), *v.T]
    if u is not None:
        u = np.asarray(u, dtype=float)
        header += [f"u_{k + 1}" for k in range(u.shape[-1])]
        cols += list(u.T)
    data = np.column_stack(cols)
    path = Path(out_dir) / f"{prefix}_{tag}_t{time_label(t)}.csv"
    return write_csv(path, header, data)


def read_csv(path):
    """Header and float matrix of a CSV written by :func:`write_csv`."""
    with open(path, encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[float(c) if c not in ("", "nan") else float("nan") for c in row] for row in r]
    return header, np.array(rows)


def gnuplot_script(path, csv_name: str, title: str, xlabel: str, ylabel: str,
                   columns: Sequence[tuple], logscale: str = "xy", png_name: str = "") -> Path:
    """Plot script for ``csv_name``; ``columns`` holds ``(x_col, y_col, label)`` 1-based."""
    lines = [
        f"# gnuplot script for {csv_name}",
        "set datafile separator ','",
        f"set title '{title}'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        "set key left top",
        "set grid",
    ]
    if logscale:
        lines.append(f"set logscale {logscale}")
    if png_name:
        lines += ["set terminal pngcairo size 800,600", f"set output '{png_name}'"]
    plots = [f"'{csv_name}' every ::1 using {xc}:{yc} with linespoints title '{lab}'"
             for xc, yc, lab in columns]
    lines.append("plot " + ", \\\n     ".join(plots))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
