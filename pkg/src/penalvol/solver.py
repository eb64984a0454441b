"""Finite-volume solvers on a 1D grid whose face ``x = 0`` is the wall.

Spatial discretisation is a first-order Rusanov scheme written in
fluctuation form so that it applies to quasilinear (non-conservative)
systems; time integration is SSP-RK2.  The stiff penalty is split off with
Strang splitting and integrated implicitly, cell by cell.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    BlowUp,
    CFLViolation,
    DissipativityLost,
    GridMismatch,
    NonFiniteInput,
    NonFiniteState,
)
from .model import Model, SystemSpec
from .penalty import PenaltyConfig, PenaltyMode, Projector, build_projector, penalty_substep

_TIME_EPS = 1e-12


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid1D:
    """Uniform cell-centred grid with ``x = 0`` on a cell face.

    ``interface_index`` is the number of cells left of ``x = 0``, i.e. the
    index of the face at the origin.
    """

    x_min: float
    x_max: float
    n_cells: int
    dx: float
    interface_index: int

    def __post_init__(self):
        if self.n_cells < 1 or not self.dx > 0:
            raise GridMismatch("grid needs at least one cell and dx > 0")
        if not (self.x_min <= 0.0 <= self.x_max):
            raise GridMismatch("grid must contain x = 0")
        if abs(self.x_min + self.interface_index * self.dx) > 1e-9 * self.dx:
            raise GridMismatch("x = 0 does not lie on a cell face")

    @classmethod
    def create(cls, x_min: float, x_max: float, n_cells: int) -> "Grid1D":
        """Uniform grid of ``n_cells`` cells, shifted so that ``x = 0`` is a face.

        The spacing is ``(x_max - x_min) / n_cells``; if ``x_min`` is not a
        multiple of it, both ends move by less than ``dx / 2``.
        """
        n_cells = int(n_cells)
        dx = (x_max - x_min) / n_cells
        k = int(round(-x_min / dx))
        k = min(max(k, 0), n_cells)
        return cls(-k * dx, (n_cells - k) * dx, n_cells, dx, k)

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def faces(self) -> np.ndarray:
        return self.x_min + np.arange(self.n_cells + 1) * self.dx

    def plus(self) -> "Grid1D":
        """The part of the grid over ``[0, x_max]``."""
        n = self.n_cells - self.interface_index
        return Grid1D(0.0, self.x_max, n, self.dx, 0)

    def minus(self) -> "Grid1D":
        """The part of the grid over ``[x_min, 0]``."""
        k = self.interface_index
        return Grid1D(self.x_min, 0.0, k, self.dx, k)

    def refined(self) -> "Grid1D":
        return Grid1D(self.x_min, self.x_max, 2 * self.n_cells, self.dx / 2,
                      2 * self.interface_index)

    def same_as(self, other: "Grid1D") -> bool:
        return (self.n_cells == other.n_cells and self.interface_index == other.interface_index
                and math.isclose(self.dx, other.dx, rel_tol=1e-12))


@dataclass
class StateField:
    values: np.ndarray  # (n_cells, N)
    time: float = 0.0


class Scheme(enum.Enum):
    RUSANOV_RK2 = "RusanovRK2"


@dataclass(frozen=True)
class SolverConfig:
    t_end: float
    cfl: float = 0.5
    ramp_time: float = 0.1
    scheme: Scheme = Scheme.RUSANOV_RK2

    def __post_init__(self):
        if not (0.0 < self.cfl <= 1.0):
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.ramp_time < 0:
            raise ValueError("ramp_time must be non-negative")


@dataclass
class Trajectory:
    """Checkpointed solution in reformulated variables ``v``.

    ``values`` has shape ``(n_checkpoints, n_cells, N)``.  ``trace`` holds the
    wall state of a reference run as ``(times, states)``.
    """

    grid: Grid1D
    times: np.ndarray
    values: np.ndarray
    tag: str = ""
    trace: Optional[tuple] = None
    n_steps: int = 0

    def at(self, k) -> StateField:
        return StateField(self.values[k], float(self.times[k]))

    @property
    def final(self) -> StateField:
        return self.at(-1)


def source_ramp(t: float, ramp_time: float) -> float:
    """Smooth start-up factor ``min(1, t / ramp_time)^2``."""
    if ramp_time <= 0:
        return 1.0
    r = min(1.0, max(t, 0.0) / ramp_time)
    return r * r


# ---------------------------------------------------------------------------
# spatial operator
# ---------------------------------------------------------------------------

def _face_terms(spec: SystemSpec, t, x_face, vL, vR):
    vbar = 0.5 * (vL + vR)
    a1 = spec.a1(t, x_face, vbar)
    a0 = spec.a0(t, x_face, vbar)
    s = np.maximum(spec.speeds(t, x_face, vL), spec.speeds(t, x_face, vR))
    jump = vR - vL
    flux = 0.5 * np.einsum("...ij,...j->...i", a1, vL + vR) \
        - 0.5 * s[..., None] * np.einsum("...ij,...j->...i", a0, jump)
    return flux, a1


def rusanov_flux(spec: SystemSpec, t, x_face, vL, vR) -> np.ndarray:
    """Local Lax-Friedrichs flux with the matrix frozen at the face average.

    ``F = 1/2 A1(vbar) (vL + vR) - 1/2 s A0(vbar) (vR - vL)`` with
    ``vbar = (vL + vR) / 2`` and ``s`` the largest wave speed at ``vL``/``vR``.
    """
    vL = np.asarray(vL, dtype=float)
    vR = np.asarray(vR, dtype=float)
    if not (np.all(np.isfinite(vL)) and np.all(np.isfinite(vR))):
        raise NonFiniteInput("non-finite state passed to the flux")
    return _face_terms(spec, t, x_face, vL, vR)[0]


def extrapolate(edge_value, t):
    return edge_value


def odd_reflection(p: int):
    """Ghost ``(-v_I, v_II)``: the face average satisfies ``P v = 0``."""

    def ghost(edge_value, t):
        g = edge_value.copy()
        g[:p] = -g[:p]
        return g

    return ghost


def _rate(spec: SystemSpec, grid: Grid1D, t, v, bc, source_scale):
    left, right = bc
    ext = np.empty((v.shape[0] + 2, v.shape[1]))
    ext[1:-1] = v
    ext[0] = left(v[0], t)
    ext[-1] = right(v[-1], t)
    faces = grid.faces
    flux, a1 = _face_terms(spec, t, faces, ext[:-1], ext[1:])
    # fluctuation form: flux difference minus the commutator (A1+ - A1-) v_i
    div = flux[1:] - flux[:-1] - np.einsum("nij,nj->ni", a1[1:] - a1[:-1], v)
    rhs = -div / grid.dx
    if source_scale != 0.0:
        rhs = rhs + source_scale * spec.source(t, grid.centers, v)
    a0 = spec.a0(t, grid.centers, v)
    return np.linalg.solve(a0, rhs[..., None])[..., 0]


def stable_dt(spec: SystemSpec, grid: Grid1D, t, v, cfl) -> float:
    smax = float(np.max(spec.speeds(t, grid.centers, v)))
    return cfl * grid.dx / smax if smax > 0 else np.inf


def hyperbolic_step(spec: SystemSpec, grid: Grid1D, state: StateField, dt: float,
                    bc=(extrapolate, extrapolate), ramp_time: float = 0.0) -> StateField:
    """One SSP-RK2 step of ``A0 v_t + A1 v_x = r(t) f`` (no penalty).

    ``bc`` holds ghost-cell rules ``(edge_value, t) -> ghost`` for the left
    and right domain ends; the default is zero-order extrapolation.
    """
    v = state.values
    t = state.time
    smax = float(np.max(spec.speeds(t, grid.centers, v)))
    if dt * smax > grid.dx * (1.0 + 1e-12):
        raise CFLViolation(f"dt={dt:g} exceeds the CFL limit {grid.dx / smax:g}")
    k1 = _rate(spec, grid, t, v, bc, source_ramp(t, ramp_time))
    v1 = v + dt * k1
    k2 = _rate(spec, grid, t + dt, v1, bc, source_ramp(t + dt, ramp_time))
    out = 0.5 * v + 0.5 * (v1 + dt * k2)
    if not np.all(np.isfinite(out)):
        raise NonFiniteState(f"non-finite state at t={t + dt:g}")
    return StateField(out, t + dt)


def _penalty_half(spec, grid, state, dt, pcfg, proj, penalty_matrix, chi):
    v = state.values
    if not np.any(chi):
        return state
    if pcfg.mode is PenaltyMode.ORIGINAL_VARIABLE_M:
        a0 = np.broadcast_to(np.eye(v.shape[1]), v.shape + (v.shape[1],))
    else:
        a0 = spec.a0(state.time, grid.centers, v)
    return StateField(penalty_substep(a0, v, dt, pcfg, chi, proj, penalty_matrix), state.time)


def strang_step(spec: SystemSpec, grid: Grid1D, state: StateField, dt: float,
                pcfg: PenaltyConfig, proj: Projector, penalty_matrix=None,
                bc=(extrapolate, extrapolate), ramp_time: float = 0.0) -> StateField:
    """Penalty half step, hyperbolic step, penalty half step."""
    chi = pcfg.mask(grid.centers)
    s = _penalty_half(spec, grid, state, 0.5 * dt, pcfg, proj, penalty_matrix, chi)
    s = hyperbolic_step(spec, grid, s, dt, bc, ramp_time)
    return _penalty_half(spec, grid, s, 0.5 * dt, pcfg, proj, penalty_matrix, chi)


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------

def checkpoint_times(t_end: float, spacing: Optional[float] = None) -> np.ndarray:
    """Uniform checkpoints ``0, h, ..., t_end`` with ``h <= spacing``."""
    if spacing is None or spacing >= t_end:
        return np.array([0.0, t_end])
    n = int(math.ceil(t_end / spacing - 1e-9))
    return np.linspace(0.0, t_end, n + 1)


def _integrate(step, speed_dt, v0, grid, t_end, times, check, tag="", on_step=None):
    times = np.asarray(times, dtype=float)
    if times[0] > _TIME_EPS:
        times = np.concatenate([[0.0], times])
    if abs(times[-1] - t_end) > _TIME_EPS:
        times = np.concatenate([times[times < t_end], [t_end]])
    out = np.empty((len(times),) + v0.shape)
    state = StateField(v0.copy(), 0.0)
    out[0] = check(state)
    if on_step is not None:
        on_step(state)
    k = 1
    n_steps = 0
    while k < len(times):
        target = times[k]
        dt = speed_dt(state)
        if state.time + dt >= target - _TIME_EPS * max(1.0, target):
            dt = target - state.time
            hit = True
        else:
            # avoid a sliver step right before the checkpoint
            remaining = target - state.time
            if remaining < 2 * dt:
                dt = 0.5 * remaining
            hit = False
        state = step(state, dt)
        n_steps += 1
        if hit:
            state.time = target
        current = check(state)
        if on_step is not None:
            on_step(state)
        if hit:
            out[k] = current
            k += 1
    return Trajectory(grid, times, out, tag, n_steps=n_steps)


def _guard(spec: SystemSpec, to_v=None):
    radius = spec.validity_radius

    def check(state):
        v = state.values if to_v is None else to_v(state.values)
        if not np.all(np.isfinite(v)):
            raise BlowUp(f"non-finite state at t={state.time:.6g}", state.time)
        if np.max(np.abs(v)) > radius:
            raise BlowUp(f"|v|_inf = {np.max(np.abs(v)):.3g} left the validity "
                         f"neighbourhood ({radius:g}) at t={state.time:.6g}", state.time)
        return v

    return check


def run_penalized(model: Model, grid: Grid1D, scfg: SolverConfig, pcfg: PenaltyConfig,
                  times: Optional[Sequence[float]] = None, tag: str = "") -> Trajectory:
    """Integrate the penalised problem on the whole grid from the zero state.

    Returns checkpoints in reformulated variables.  In original-variable mode
    the run is carried out in ``u`` and mapped back through the chart.
    """
    spec = model.spec
    proj = build_projector(spec.n_state, spec.rank_p)
    if times is None:
        times = [scfg.t_end]
    x = grid.centers
    if pcfg.mode is PenaltyMode.ORIGINAL_VARIABLE_M:
        if model.original is None or model.original_penalty is None:
            raise ValueError(f"model {model.name!r} has no original-variable form")
        run_spec = model.original
        kmat = model.original_penalty
        v0 = model.chart.from_v(None, np.zeros((grid.n_cells, spec.n_state)))
        check = _guard(spec, to_v=lambda u: model.chart.to_v(None, u))
    else:
        run_spec = spec
        kmat = None
        v0 = np.zeros((grid.n_cells, spec.n_state))
        check = _guard(spec)

    def step(state, dt):
        return strang_step(run_spec, grid, state, dt, pcfg, proj, kmat, ramp_time=scfg.ramp_time)

    def speed_dt(state):
        return stable_dt(run_spec, grid, state.time, state.values, scfg.cfl)

    return _integrate(step, speed_dt, v0, grid, scfg.t_end, times, check, tag)


def run_reference(model: Model, grid: Grid1D, scfg: SolverConfig,
                  times: Optional[Sequence[float]] = None, tag: str = "") -> Trajectory:
    """Half-domain solve with ``P v = 0`` imposed at ``x = 0`` by odd reflection.

    ``grid`` may be a full grid (its ``x > 0`` part is used) or a half grid.
    The returned trajectory carries the wall trace ``(I - P) v`` of the first
    cell at every time step.
    """
    spec = model.spec
    half = grid.plus() if grid.interface_index > 0 else grid
    p = spec.rank_p
    bc = (odd_reflection(p), extrapolate)
    trace_t, trace_v = [], []

    def record(state):
        w = state.values[0].copy()
        w[:p] = 0.0
        trace_t.append(state.time)
        trace_v.append(w)

    def step(state, dt):
        return hyperbolic_step(spec, half, state, dt, bc, scfg.ramp_time)

    def speed_dt(state):
        return stable_dt(spec, half, state.time, state.values, scfg.cfl)

    v0 = np.zeros((half.n_cells, spec.n_state))
    traj = _integrate(step, speed_dt, v0, half, scfg.t_end, times if times is not None else [scfg.t_end],
                      _guard(spec), tag, on_step=record)
    traj.trace = (np.array(trace_t), np.array(trace_v))
    return traj


def reduced_system(spec: SystemSpec) -> SystemSpec:
    """The ``(N - p)``-system for the unpenalised components with ``P v = 0``."""
    n, p = spec.n_state, spec.rank_p

    def embed(w):
        w = np.asarray(w, dtype=float)
        return np.concatenate([np.zeros(w.shape[:-1] + (p,)), w], axis=-1)

    def a0(t, x, w):
        return spec.a0(t, x, embed(w))[..., p:, p:]

    def a1(t, x, w):
        return spec.a1(t, x, embed(w))[..., p:, p:]

    def source(t, x, w):
        return spec.source(t, x, embed(w))[..., p:]

    return SystemSpec(n - p, n - p, a0, a1, source, spec.param, None, spec.validity_radius)


def run_reduced(model: Model, grid: Grid1D, scfg: SolverConfig, trace,
                times: Optional[Sequence[float]] = None, tag: str = "") -> Trajectory:
    """Solve the reduced system on ``[x_min, 0]`` with wall data from ``trace``.

    ``trace = (times, states)`` gives the full wall state; its last ``N - p``
    components are imposed through the right ghost cell (linear interpolation
    in time).  Returns the solution embedded with zeros in the first ``p``
    components.
    """
    spec = model.spec
    p = spec.rank_p
    red = reduced_system(spec)
    minus = grid.minus() if grid.interface_index < grid.n_cells else grid
    tt, tv = trace
    tt = np.asarray(tt)
    tv = np.asarray(tv)[:, p:]

    def wall(t):
        return np.array([np.interp(t, tt, tv[:, j]) for j in range(tv.shape[1])])

    def right(edge_value, t):
        return wall(t)

    def check_wall(t):
        w = wall(t)
        a1 = red.a1(t, 0.0, w)
        if np.max(np.linalg.eigvalsh(0.5 * (a1 + a1.T))) >= 0.0:
            raise DissipativityLost(f"reduced wall matrix not negative definite at t={t:.6g}")

    bc = (extrapolate, right)

    def step(state, dt):
        check_wall(state.time)
        return hyperbolic_step(red, minus, state, dt, bc, scfg.ramp_time)

    def speed_dt(state):
        return stable_dt(red, minus, state.time, state.values, scfg.cfl)

    w0 = np.zeros((minus.n_cells, red.n_state))
    traj = _integrate(step, speed_dt, w0, minus, scfg.t_end,
                      times if times is not None else [scfg.t_end], _guard(red), tag)
    full = np.zeros(traj.values.shape[:-1] + (spec.n_state,))
    full[..., p:] = traj.values
    traj.values = full
    return traj
