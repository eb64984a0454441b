"""Order-0 asymptotic profiles in the obstacle and the first corrector ``P V1``.

As ``eps -> 0`` the penalised solution behaves like ``V0 + eps V1`` with no
fast variable: on ``x > 0``, ``V0`` is the half-domain reference solution; on
``x < 0``, ``P V0 = 0`` and the remaining components solve a reduced
hyperbolic system fed by the wall trace.  The penalised components of the
first corrector follow from the ``1/eps`` balance of the penalised equation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import GridMismatch, InsufficientCheckpoints
from .model import Model
from .norms import space_time_l2
from .solver import Grid1D, SolverConfig, Trajectory, run_reduced, run_reference, source_ramp


@dataclass
class ExpansionProfile:
    """``V0`` on both sides of the wall and ``P V1`` in the obstacle.

    ``v0_minus`` is stored embedded with zeros in its first ``p`` components,
    ``pv1_minus`` has only the ``p`` penalised components.  All arrays share
    the checkpoint ``times``.
    """

    grid: Grid1D
    times: np.ndarray
    v0_plus: np.ndarray   # (K, n_plus, N)
    v0_minus: np.ndarray  # (K, n_minus, N)
    pv1_minus: np.ndarray  # (K, n_minus, p)

    @property
    def p(self) -> int:
        return self.pv1_minus.shape[-1]

    def v0(self) -> np.ndarray:
        return np.concatenate([self.v0_minus, self.v0_plus], axis=1)

    def v1_embedded(self) -> np.ndarray:
        out = np.zeros((len(self.times), self.grid.n_cells, self.v0_plus.shape[-1]))
        out[:, : self.grid.interface_index, : self.p] = self.pv1_minus
        return out


def solve_order0_minus(model: Model, grid: Grid1D, scfg: SolverConfig, trace,
                       times=None) -> Trajectory:
    """``V0`` on ``[x_min, 0]`` from the wall trace of the reference run.

    ``trace = (times, states)`` sampled at every reference time step.  The
    result carries zeros in its first ``p`` components.
    """
    return run_reduced(model, grid, scfg, trace, times, tag="v0minus")


def compute_pv1_minus(model: Model, v0_minus, grid: Grid1D, times=None, ramp_time: float = 0.0,
                      max_spacing: Optional[float] = None) -> np.ndarray:
    """``-P [A0 dV/dt + A1 dV/dx - r(t) f]`` evaluated on ``V = V0-``.

    ``v0_minus`` is a trajectory (or ``(K, n_minus, N)`` array with
    ``times``) on the obstacle part of ``grid``.  Derivatives are second-order
    centred differences (one-sided at the ends).  Checkpoints must be at
    least three and no further apart than ``max_spacing`` (default ``dx``).
    """
    spec = model.spec
    p = spec.rank_p
    vals = np.asarray(getattr(v0_minus, "values", v0_minus), dtype=float)
    if times is None:
        times = getattr(v0_minus, "times", None)
    times = np.asarray(times, dtype=float)
    minus = grid.minus() if grid.interface_index < grid.n_cells else grid
    if vals.ndim != 3 or vals.shape[1] != minus.n_cells or len(times) != vals.shape[0]:
        raise GridMismatch(f"profile of shape {vals.shape} does not fit {minus.n_cells} cells")
    if max_spacing is None:
        max_spacing = grid.dx
    if len(times) < 3 or np.max(np.diff(times)) > max_spacing * (1 + 1e-9):
        raise InsufficientCheckpoints(
            f"need >= 3 checkpoints spaced <= {max_spacing:g} for the time derivative")
    dvdt = np.gradient(vals, times, axis=0, edge_order=2)
    if vals.shape[1] >= 3:
        dvdx = np.gradient(vals, minus.dx, axis=1, edge_order=2)
    elif vals.shape[1] == 2:
        dvdx = np.repeat(np.diff(vals, axis=1) / minus.dx, 2, axis=1)
    else:
        dvdx = np.zeros_like(vals)
    x = minus.centers
    out = np.empty(vals.shape[:2] + (p,))
    for k, t in enumerate(times):
        v = vals[k]
        a0 = spec.a0(t, x, v)
        a1 = spec.a1(t, x, v)
        r = source_ramp(t, ramp_time)
        res = np.einsum("nij,nj->ni", a0, dvdt[k]) + np.einsum("nij,nj->ni", a1, dvdx[k])
        if r != 0.0:
            res = res - r * spec.source(t, x, v)
        out[k] = -res[:, :p]
    return out


def build_profile(model: Model, grid: Grid1D, scfg: SolverConfig, times=None,
                  reference: Optional[Trajectory] = None) -> ExpansionProfile:
    """Reference run, reduced obstacle solve and ``P V1-`` on shared checkpoints.

    ``times`` defaults to a uniform spacing no coarser than ``dx``.
    """
    if times is None:
        n = int(np.ceil(scfg.t_end / grid.dx))
        times = np.linspace(0.0, scfg.t_end, n + 1)
    times = np.asarray(times, dtype=float)
    if reference is None:
        reference = run_reference(model, grid, scfg, times, tag="v0plus")
    elif len(reference.times) != len(times) or not np.allclose(reference.times, times):
        raise GridMismatch("reference checkpoints differ from the requested times")
    v0m = solve_order0_minus(model, grid, scfg, reference.trace, times)
    pv1 = compute_pv1_minus(model, v0m, grid, times, scfg.ramp_time)
    return ExpansionProfile(grid, times, reference.values, v0m.values, pv1)


def expansion_residual(v_eps, profile: ExpansionProfile, epsilon: float):
    """Space-time L2 norms over the whole grid of ``v_eps - V0`` and ``v_eps - V0 - eps P V1``."""
    vals = np.asarray(getattr(v_eps, "values", v_eps), dtype=float)
    grid = getattr(v_eps, "grid", profile.grid)
    if not grid.same_as(profile.grid):
        raise GridMismatch("penalised run and profile live on different grids")
    v0 = profile.v0()
    if vals.shape != v0.shape:
        raise GridMismatch(f"shape {vals.shape} vs profile {v0.shape}")
    t = getattr(v_eps, "times", profile.times)
    if len(t) != len(profile.times) or not np.allclose(t, profile.times, rtol=0, atol=1e-12):
        raise GridMismatch("checkpoint times differ")
    d0 = vals - v0
    r0 = space_time_l2(d0, grid.dx, profile.times)
    r1 = space_time_l2(d0 - epsilon * profile.v1_embedded(), grid.dx, profile.times)
    return r0, r1


def interface_jump(profile: ExpansionProfile) -> np.ndarray:
    """Per checkpoint, ``|V0-(0-) - V0+(0+)|_inf`` on the unpenalised components.

    One-sided values at the wall come from linear extrapolation of the two
    cells next to it on each side.
    """
    p = profile.p
    m = profile.v0_minus
    q = profile.v0_plus
    if m.shape[1] >= 2:
        left = 1.5 * m[:, -1] - 0.5 * m[:, -2]
    else:
        left = m[:, -1]
    if q.shape[1] >= 2:
        right = 1.5 * q[:, 0] - 0.5 * q[:, 1]
    else:
        right = q[:, 0]
    return np.max(np.abs(left[:, p:] - right[:, p:]), axis=-1)
