"""PNG figures written next to the CSV outputs.

Uses the object-oriented matplotlib API with the Agg canvas, so nothing
depends on a display or on pyplot's global state.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

_PNG_META = {"Software": None}


def _figure(width=6.4, height=4.4):
    fig = Figure(figsize=(width, height), dpi=100)
    FigureCanvasAgg(fig)
    return fig, fig.add_subplot(1, 1, 1)


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, format="png", metadata=_PNG_META)
    return path


def plot_error_table(table, path) -> Path:
    """Log-log errors against eps, with a slope-1 guide through the fit window."""
    eps = np.array([r.epsilon for r in table.rows])
    fig, ax = _figure()
    ax.loglog(eps, [r.err_l2 for r in table.rows], "o-", label="L2")
    ax.loglog(eps, [r.err_h1 for r in table.rows], "s-", label="H1")
    ax.loglog(eps, [r.pv_max for r in table.rows], "^--", label="max |Pv| (obstacle)")
    if table.grid_floor_estimate > 0:
        ax.axhline(3 * table.grid_floor_estimate, color="0.5", lw=0.8, ls=":", label="3 x grid floor")
    e_hi = table.fit_window[1]
    top = next(r.err_l2 for r in table.rows if r.epsilon == e_hi)
    ax.loglog(eps, top * eps / e_hi, color="k", lw=0.8, ls="--", label="slope 1")
    ax.set_xlabel("eps")
    ax.set_ylabel("error on x > 0")
    ax.set_title(f"fitted slope L2 {table.fitted_slope:.3f}, H1 {table.slope_h1:.3f}")
    ax.legend(frameon=False, fontsize=8)
    return _save(fig, path)


def plot_layer(reports, path) -> Path:
    fig, ax = _figure()
    for name, rep in reports.items():
        ax.loglog(rep.epsilons, rep.metric, "o-", label=f"{name}, obstacle side")
        ax.loglog(rep.epsilons, rep.metric_plus, "x:", label=f"{name}, physical side")
    ax.set_xlabel("eps")
    ax.set_ylabel("max |dv/dx| next to the wall")
    ax.legend(frameon=False, fontsize=8)
    return _save(fig, path)


def plot_profiles(x, curves: dict, path, title: str = "", xlabel: str = "x") -> Path:
    """Line plot of ``{label: values}`` over ``x``, wall marked at ``x = 0``."""
    fig, ax = _figure()
    for label, y in curves.items():
        ax.plot(x, y, lw=1.2, label=label)
    ax.axvline(0.0, color="0.4", lw=0.8)
    ax.set_xlabel(xlabel)
    if title:
        ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    return _save(fig, path)


def plot_series(x, curves: dict, path, xlabel: str, ylabel: str, logx=True, logy=True) -> Path:
    fig, ax = _figure()
    for label, y in curves.items():
        ax.plot(x, y, "o-", label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False, fontsize=8)
    return _save(fig, path)
