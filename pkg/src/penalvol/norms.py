"""Discrete space-time norms on checkpointed trajectories."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch


@dataclass(frozen=True)
class Norms:
    l2: float
    linf: float
    h1: float

    def __iter__(self):
        return iter((self.l2, self.linf, self.h1))


def time_weights(times) -> np.ndarray:
    """Trapezoid weights on the checkpoint times (weight 1 for a single time)."""
    t = np.asarray(times, dtype=float)
    if t.size == 1:
        return np.ones(1)
    w = np.zeros_like(t)
    dt = np.diff(t)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


def _values(field):
    return np.asarray(getattr(field, "values", field), dtype=float)


def region_slice(grid, region: str) -> slice:
    if region == "plus":
        return slice(grid.interface_index, grid.n_cells)
    if region == "minus":
        return slice(0, grid.interface_index)
    if region == "all":
        return slice(0, grid.n_cells)
    raise ValueError(f"unknown region {region!r}")


def space_time_l2(delta, dx, times) -> float:
    """``sqrt(sum_k w_k sum_i dx |delta[k, i]|^2)`` for ``delta`` of shape ``(K, n, N)``."""
    d = np.asarray(delta, dtype=float)
    w = time_weights(times)
    per_time = np.sum(d * d, axis=tuple(range(1, d.ndim))) * dx
    return float(np.sqrt(np.dot(w, per_time)))


def discrete_norms(field_a, field_b, grid, region: str = "plus", times=None) -> Norms:
    """Space-time ``(L2, Linf, H1)`` norms of ``field_a - field_b`` on ``region``.

    Fields are trajectories or arrays of shape ``(K, n_cells, N)`` on ``grid``
    (a single ``(n_cells, N)`` snapshot is also accepted).  ``times`` defaults
    to the trajectory's checkpoints.  The H1 norm adds forward differences in
    ``t`` and ``x``; ``x``-differences never cross the ends of the region, so
    obstacle and physical cells are not mixed.
    """
    a = _values(field_a)
    b = _values(field_b)
    if a.shape != b.shape:
        raise GridMismatch(f"field shapes differ: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a = a[None]
        b = b[None]
    if a.shape[1] != grid.n_cells:
        raise GridMismatch(f"fields have {a.shape[1]} cells, grid has {grid.n_cells}")
    if times is None:
        times = getattr(field_a, "times", None)
    if times is None:
        times = np.zeros(1) if a.shape[0] == 1 else None
    if times is None or len(times) != a.shape[0]:
        raise GridMismatch("checkpoint times do not match the fields")
    d = (a - b)[:, region_slice(grid, region)]
    if d.size == 0:
        return Norms(0.0, 0.0, 0.0)
    times = np.asarray(times, dtype=float)
    dx = grid.dx
    l2sq = space_time_l2(d, dx, times) ** 2
    linf = float(np.max(np.abs(d)))
    h1sq = l2sq
    if d.shape[0] > 1:
        dt = np.diff(times)
        dtd = np.diff(d, axis=0) / dt[:, None, None]
        h1sq += float(np.sum(np.sum(dtd * dtd, axis=(1, 2)) * dt) * dx)
    if d.shape[1] > 1:
        dxd = np.diff(d, axis=1) / dx
        h1sq += space_time_l2(dxd, dx, times) ** 2
    return Norms(float(np.sqrt(l2sq)), linf, float(np.sqrt(h1sq)))
