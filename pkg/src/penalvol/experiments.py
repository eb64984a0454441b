"""Penalisation-error studies: eps sweeps, layer probes, manufactured solutions."""

from __future__ import annotations

import dataclasses
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np

from .errors import BoundaryIncompatible, InsufficientRowsAboveFloor, PreconditionViolation
from .model import Model
from .norms import Norms, discrete_norms, space_time_l2, time_weights  # noqa: F401 (re-exported)
from .penalty import PenaltyConfig, PenaltyMode, obstacle_mask
from .solver import (
    Grid1D,
    SolverConfig,
    Trajectory,
    checkpoint_times,
    run_penalized,
    run_reference,
)

FLOOR_FACTOR = 3.0
LAYER_CELLS = 4


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def sweep_workers(n_jobs: int, threads: Optional[int] = None) -> int:
    """Worker count for an eps sweep; ``PENALVOL_THREADS`` caps it."""
    if threads is None:
        env = os.environ.get("PENALVOL_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(int(threads), n_jobs))


def _sweep(fn, items: Sequence, threads=None) -> list:
    workers = sweep_workers(len(items), threads)
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # map keeps the input order, so the reduction is deterministic
        return list(pool.map(fn, items))


def default_times(scfg: SolverConfig, n_checkpoints: int = 100) -> np.ndarray:
    return checkpoint_times(scfg.t_end, scfg.t_end / n_checkpoints)


def fit_slope(eps, errs) -> float:
    """Least-squares slope of ``log err`` against ``log eps``."""
    x = np.log(np.asarray(eps, dtype=float))
    y = np.log(np.asarray(errs, dtype=float))
    if x.size < 2:
        raise InsufficientRowsAboveFloor("need at least two rows to fit a slope")
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def penalized_max(values: np.ndarray, grid: Grid1D, p: int) -> float:
    """Max over checkpoints and obstacle cells of ``|P v|``."""
    obst = values[:, : grid.interface_index, :p]
    if obst.size == 0:
        return 0.0
    return float(np.max(np.linalg.norm(obst, axis=-1)))


def grid_floor(model: Model, grid: Grid1D, scfg: SolverConfig, times,
               reference: Optional[Trajectory] = None) -> float:
    """L2 distance on ``x > 0`` between reference runs on ``dx`` and ``dx/2``.

    The fine run is averaged pairwise onto the coarse cells.
    """
    coarse = reference if reference is not None else run_reference(model, grid, scfg, times)
    fine = run_reference(model, grid.refined(), scfg, times)
    avg = 0.5 * (fine.values[:, 0::2] + fine.values[:, 1::2])
    return space_time_l2(avg - coarse.values, grid.dx, times)


@dataclass(frozen=True)
class ErrorRow:
    epsilon: float
    err_l2: float
    err_linf: float
    err_h1: float
    pv_max: float
    err_exact_l2: float = float("nan")


@dataclass
class ErrorTable:
    """Penalisation error on ``x > 0`` per eps, sorted by decreasing eps.

    Slopes are least-squares fits on the rows whose L2 error is at least
    ``FLOOR_FACTOR`` times ``grid_floor_estimate``.
    """

    rows: List[ErrorRow]
    fitted_slope: float
    fit_window: tuple
    grid_floor_estimate: float
    slope_h1: float = float("nan")
    slope_pv: float = float("nan")
    mode: str = PenaltyMode.PROJECTOR_IN_V.value
    n_cells: int = 0

    @property
    def usable(self) -> List[ErrorRow]:
        return [r for r in self.rows if r.err_l2 >= FLOOR_FACTOR * self.grid_floor_estimate]

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["rows"] = [dataclasses.asdict(r) for r in self.rows]
        d["fit_window"] = list(self.fit_window)
        return d


def build_table(rows: Iterable[ErrorRow], floor: float, mode: str = "", n_cells: int = 0) -> ErrorTable:
    rows = sorted(rows, key=lambda r: -r.epsilon)
    use = [r for r in rows if r.err_l2 >= FLOOR_FACTOR * floor]
    if len(use) < 3:
        raise InsufficientRowsAboveFloor(
            f"{len(use)} of {len(rows)} rows lie above {FLOOR_FACTOR:g}x the grid floor "
            f"{floor:.3g}; refine the grid or raise eps")
    eps = [r.epsilon for r in use]
    slope = fit_slope(eps, [r.err_l2 for r in use])
    s_h1 = fit_slope(eps, [r.err_h1 for r in use])
    pv = [r.pv_max for r in use]
    s_pv = fit_slope(eps, pv) if all(x > 0 for x in pv) else float("nan")
    return ErrorTable(rows, slope, (min(eps), max(eps)), floor, s_h1, s_pv, mode, n_cells)


def convergence_study(model: Model, grid: Grid1D, scfg: SolverConfig, eps_list,
                      mode: PenaltyMode = PenaltyMode.PROJECTOR_IN_V, times=None,
                      exact: Optional[Callable] = None, threads: Optional[int] = None,
                      runs: Optional[Dict[float, Trajectory]] = None) -> ErrorTable:
    """Penalised runs for every eps against one half-domain reference run.

    ``exact(t, x)`` optionally gives a manufactured solution; its distance to
    each penalised run is recorded as ``err_exact_l2``.  Finished runs are
    stored in ``runs`` (keyed by eps) when a dict is passed.
    """
    eps_list = sorted({float(e) for e in eps_list}, reverse=True)
    if len(eps_list) < 3:
        raise InsufficientRowsAboveFloor(f"{len(eps_list)} eps value(s) given, need at least 3")
    times = default_times(scfg) if times is None else np.asarray(times, dtype=float)
    ref = run_reference(model, grid, scfg, times, tag="reference")
    floor = grid_floor(model, grid, scfg, times, ref)
    i0 = grid.interface_index
    p = model.spec.rank_p
    half = ref.grid
    exact_vals = None
    if exact is not None:
        exact_vals = np.stack([np.asarray(exact(t, half.centers), dtype=float).reshape(half.n_cells, -1)
                               for t in ref.times])

    def one(eps):
        tr = run_penalized(model, grid, scfg, PenaltyConfig(eps, mode), times, tag=f"eps={eps:g}")
        plus = tr.values[:, i0:]
        l2, linf, h1 = discrete_norms(plus, ref.values, half, "all", ref.times)
        ex = float("nan")
        if exact_vals is not None:
            ex = space_time_l2(plus - exact_vals, half.dx, ref.times)
        return tr, ErrorRow(eps, l2, linf, h1, penalized_max(tr.values, grid, p), ex)

    done = _sweep(one, eps_list, threads)
    if runs is not None:
        runs.update({eps: tr for eps, (tr, _) in zip(eps_list, done)})
    return build_table([row for _, row in done], floor, mode.value, grid.n_cells)


# ---------------------------------------------------------------------------
# boundary-layer probe
# ---------------------------------------------------------------------------

def wall_gradient(values: np.ndarray, grid: Grid1D, k: int = LAYER_CELLS, side: str = "minus") -> float:
    """Max of ``|dv/dx|`` by one-sided differences inside the ``k`` cells next to ``x = 0``.

    Differences are taken between neighbouring cells of the same side, so
    none crosses the wall.
    """
    if k < 2:
        raise ValueError("layer probe needs k >= 2")
    i0 = grid.interface_index
    block = values[:, max(0, i0 - k):i0] if side == "minus" else values[:, i0:i0 + k]
    if block.shape[1] < 2:
        return 0.0
    return float(np.max(np.abs(np.diff(block, axis=1))) / grid.dx)


@dataclass
class LayerReport:
    mode: str
    epsilons: List[float]
    metric: List[float]          # obstacle side
    metric_plus: List[float]     # physical side
    growth_ratios: List[tuple] = field(default_factory=list)  # (eps, eps/10, ratio)
    k: int = LAYER_CELLS

    @property
    def max_growth(self) -> float:
        return max((g for _, _, g in self.growth_ratios), default=float("nan"))

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def decade_ratios(eps: Sequence[float], metric: Sequence[float]) -> List[tuple]:
    """``metric(eps/10) / metric(eps)`` for every pair in the sweep one decade apart."""
    out = []
    for i, e in enumerate(eps):
        for j, f in enumerate(eps):
            if np.isclose(f, e / 10.0, rtol=1e-9):
                den = metric[i]
                ratio = metric[j] / den if den > 0 else (1.0 if metric[j] == 0 else np.inf)
                out.append((float(e), float(f), float(ratio)))
    return out


def layer_probe(model: Model, grid: Grid1D, scfg: SolverConfig, eps_list,
                modes=(PenaltyMode.PROJECTOR_IN_V, PenaltyMode.FULL_L2_IN_V), times=None,
                k: int = LAYER_CELLS, threads: Optional[int] = None,
                mask: Callable = obstacle_mask) -> Dict[str, LayerReport]:
    """Wall-gradient metric per eps and mode; a layer shows up as growth with ``1/eps``."""
    eps_list = sorted({float(e) for e in eps_list}, reverse=True)
    times = default_times(scfg) if times is None else np.asarray(times, dtype=float)
    jobs = [(m, e) for m in modes for e in eps_list]

    def one(job):
        m, e = job
        tr = run_penalized(model, grid, scfg, PenaltyConfig(e, m, mask), times)
        return wall_gradient(tr.values, grid, k, "minus"), wall_gradient(tr.values, grid, k, "plus")

    res = _sweep(one, jobs, threads)
    out = {}
    for m in modes:
        vals = [r for (mm, _), r in zip(jobs, res) if mm is m]
        minus = [a for a, _ in vals]
        plus = [b for _, b in vals]
        out[m.value] = LayerReport(m.value, eps_list, minus, plus, decade_ratios(eps_list, minus), k)
    return out


# ---------------------------------------------------------------------------
# manufactured solutions
# ---------------------------------------------------------------------------

def _d4(fn, h):
    # fourth-order central difference of a scalar-argument function
    return lambda s: (-fn(s + 2 * h) + 8 * fn(s + h) - 8 * fn(s - h) + fn(s - 2 * h)) / (12 * h)


def manufactured_solution(model: Model, profile: Callable, dt_profile: Optional[Callable] = None,
                          dx_profile: Optional[Callable] = None, t_samples=None, h: float = 1e-3):
    """Extra source ``A0 v*_t + A1(v*) v*_x - f(v*)`` making ``v*`` an exact solution.

    ``profile(t, x)`` returns ``v*`` with shape ``(len(x), N)``; missing
    derivatives are approximated by fourth-order central differences.  The
    returned source is not ramped, so it belongs with ``ramp_time = 0``
    (the ramp belongs inside ``v*``).
    """
    spec = model.spec
    p = spec.rank_p
    n = spec.n_state

    def prof(t, x):
        return np.asarray(profile(t, np.asarray(x, dtype=float)), dtype=float).reshape(np.size(x), n)

    ts = np.linspace(0.0, 1.0, 11) if t_samples is None else np.asarray(t_samples, dtype=float)
    for t in ts:
        wall = prof(t, np.zeros(1))[0, :p]
        if np.max(np.abs(wall)) > 1e-12:
            raise BoundaryIncompatible(f"P v*(t={t:g}, 0) = {wall} is not zero")
    probe = np.linspace(-1.0, 1.0, 9)
    if np.max(np.abs(prof(0.0, probe))) > 1e-12:
        raise PreconditionViolation("v*(0, x) must vanish (zero initial state)")

    def vt(t, x):
        if dt_profile is not None:
            return np.asarray(dt_profile(t, x), dtype=float).reshape(np.size(x), n)
        return _d4(lambda s: prof(s, x), h)(t)

    def vx(t, x):
        if dx_profile is not None:
            return np.asarray(dx_profile(t, x), dtype=float).reshape(np.size(x), n)
        return _d4(lambda s: prof(t, s), h)(np.asarray(x, dtype=float))

    def f_ms(t, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        v = prof(t, x)
        a0 = spec.a0(t, x, v)
        a1 = spec.a1(t, x, v)
        out = np.einsum("nij,nj->ni", a0, vt(t, x)) + np.einsum("nij,nj->ni", a1, vx(t, x))
        return out - spec.source(t, x, v)

    return f_ms


def with_extra_source(model: Model, extra: Callable) -> Model:
    """Copy of ``model`` whose reformulated source is ``f + extra(t, x)``."""
    spec = model.spec

    def source(t, x, v):
        return spec.source(t, x, v) + np.asarray(extra(t, x), dtype=float).reshape(np.shape(v))

    new_spec = dataclasses.replace(spec, source=source)
    return dataclasses.replace(model, spec=new_spec, original=None, original_penalty=None)


# ---------------------------------------------------------------------------
# two formulations of the same wall condition
# ---------------------------------------------------------------------------

def cross_formulation_check(model: Model, grid: Grid1D, scfg: SolverConfig, eps: float,
                            times=None, modes=(PenaltyMode.PROJECTOR_IN_V,
                                               PenaltyMode.ORIGINAL_VARIABLE_M)) -> float:
    """L2 distance on ``x > 0``, in original unknowns, between two penalty modes."""
    times = default_times(scfg) if times is None else np.asarray(times, dtype=float)
    runs = [run_penalized(model, grid, scfg, PenaltyConfig(eps, m), times) for m in modes]
    u = [model.chart.from_v(None, r.values) for r in runs]
    i0 = grid.interface_index
    return space_time_l2(u[0][:, i0:] - u[1][:, i0:], grid.dx, runs[0].times)
