"""Acceptance suite: one verdict line per criterion, at the stated tolerances.

Each test prints ``criterion N: PASS|FAIL: <measured values>`` and fails
when the criterion does not hold.  The long criteria drive the CLI with the
shipped configs under ``configs/``.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from penalvol.cli import main
from penalvol.experiments import fit_slope, manufactured_solution, space_time_l2, with_extra_source
from penalvol.model import (
    boundary_samples,
    check_chart,
    check_dissipativity,
    make_linear_model,
    make_plasma_model,
    state_samples,
)
from penalvol.output import read_csv
from penalvol.penalty import PenaltyConfig, build_penalty_matrix_linear, build_projector, penalty_substep
from penalvol.solver import Grid1D, SolverConfig, checkpoint_times, run_reference

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def verdict(n, ok, detail, elapsed=None, limit=None):
    if limit is not None:
        detail += f"; runtime {elapsed:.1f} s (limit {limit:g} s)"
        ok = ok and elapsed <= limit
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES[n] = line
    print(line)
    return ok


def cli(sub, cfg, out, tag=None):
    args = [sub, "--config", str(CONFIGS / cfg), "--out", str(out)]
    if tag:
        args += ["--tag", tag]
    code = main(args)
    assert code == 0, f"penalvol {sub} exited with {code}"


# -- 1 ------------------------------------------------------------------------

def test_criterion_1_algebra():
    t0 = time.perf_counter()
    proj_ok = all(np.array_equal(P @ P, P) for P in (build_projector(n, p).matrix
                                                       for n in (1, 2, 3, 4) for p in range(1, n + 1)))
    mat = build_penalty_matrix_linear([[3.0, -1.0]])
    mat_ok = np.array_equal(mat, np.array([[9.0, 0.0], [0.0, 0.0]]))
    worst_rt = 0.0
    equiv_ok = True
    for model in (make_plasma_model(-0.5), make_linear_model([[-0.5, 1.0], [1.0, -0.5]], [[3.0, -1.0]])):
        rt, equiv = check_chart(model.chart, state_samples(model, 200), model.spec.rank_p)
        worst_rt = max(worst_rt, rt)
        equiv_ok &= equiv
    elapsed = time.perf_counter() - t0
    ok = verdict(1, proj_ok and mat_ok and worst_rt <= 1e-12 and equiv_ok,
                 f"P^2=P {proj_ok}, C=[[3,-1]] matrix exact {mat_ok}, "
                 f"max round-trip {worst_rt:.2e} (<= 1e-12), boundary equivalence {equiv_ok}",
                 elapsed, 1.0)
    assert ok


# -- 2 ------------------------------------------------------------------------

def test_criterion_2_dissipativity():
    t0 = time.perf_counter()
    parts = []
    ok = True
    for m0 in (-0.9, -0.5, -0.1):
        model = make_plasma_model(m0)
        rep = check_dissipativity(model.spec, model.chart, boundary_samples(model.spec))
        good = rep.dissipative and rep.mu_estimate >= abs(m0) - 1e-10 and rep.n_positive_eig == 1
        ok &= good
        parts.append(f"M0={m0:g}: mu {rep.mu_estimate:.4f}, n+ {rep.n_positive_eig}")
    bad = make_plasma_model(0.5, validate=False)
    rep = check_dissipativity(bad.spec, bad.chart, boundary_samples(bad.spec))
    ok &= not rep.dissipative
    parts.append(f"M0=0.5 rejected {not rep.dissipative}")
    assert verdict(2, ok, "; ".join(parts), time.perf_counter() - t0, 1.0)


# -- 3 ------------------------------------------------------------------------

def rk4_batch(a0, q, v, ratio, n_micro=10_000):
    """RK4 on ``A0 dv/ds = -ratio Q v`` over ``s in [0, 1]`` (time scaled by dt)."""
    m = -ratio[:, None, None] * np.linalg.solve(a0, np.broadcast_to(q, a0.shape))
    h = 1.0 / n_micro
    w = v.copy()
    mv = lambda x: np.einsum("bij,bj->bi", m, x)
    for _ in range(n_micro):
        k1 = mv(w)
        k2 = mv(w + 0.5 * h * k1)
        k3 = mv(w + 0.5 * h * k2)
        k4 = mv(w + h * k3)
        w = w + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return w


def test_criterion_3_substep_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    n_inst, n = 100, 2
    b = rng.normal(size=(n_inst, n, n))
    a0 = b @ np.swapaxes(b, 1, 2) + 0.5 * np.eye(n)
    v = rng.normal(size=(n_inst, n))
    ratio = rng.uniform(0.0, 10.0, n_inst)  # dt / eps
    eps = 1e-2
    proj = build_projector(n, 1)
    cfg = PenaltyConfig(eps)
    implicit = np.stack([penalty_substep(a0[i], v[i], ratio[i] * eps, cfg, 1.0, proj) for i in range(n_inst)])
    oracle = rk4_batch(a0, proj.matrix, v, ratio)
    rel = np.linalg.norm(implicit - oracle, axis=1) / np.linalg.norm(oracle, axis=1)
    detail = (f"max relative error {rel.max():.3e} (<= 1e-6), median {np.median(rel):.3e}, "
              f"over dt/eps in [{ratio.min():.3f}, {ratio.max():.3f}]")
    ok = verdict(3, bool(rel.max() <= 1e-6), detail, time.perf_counter() - t0, 5.0)
    assert ok, "backward-Euler substep differs from the exact cell flow at O(1) dt/eps"


# -- 4 ------------------------------------------------------------------------

def test_criterion_4_manufactured_order():
    t0 = time.perf_counter()
    lam = 1.0
    prof = lambda t, x: (t * t * x * np.sin(x))[:, None]
    prof_t = lambda t, x: (2 * t * x * np.sin(x))[:, None]
    prof_x = lambda t, x: (t * t * (np.sin(x) + x * np.cos(x)))[:, None]
    base = make_linear_model([[lam]], [[1.0]])
    model = with_extra_source(base, manufactured_solution(base, prof, prof_t, prof_x))
    errs, dxs = [], []
    for n in (256, 512, 1024):
        grid = Grid1D.create(-1.0, 2.0, n)
        tr = run_reference(model, grid, SolverConfig(1.0, ramp_time=0.0), checkpoint_times(1.0, 0.1))
        exact = np.stack([prof(t, tr.grid.centers) for t in tr.times])
        errs.append(space_time_l2(tr.values - exact, grid.dx, tr.times))
        dxs.append(grid.dx)
    order = fit_slope(dxs, errs)
    assert verdict(4, order >= 0.9, f"order {order:.4f} (>= 0.9), errors " + ", ".join(f"{e:.3e}" for e in errs),
                   time.perf_counter() - t0, 30.0)


# -- 5 and 9 ------------------------------------------------------------------

@pytest.fixture(scope="module")
def converge_runs(tmp_path_factory):
    out = []
    for name in ("first", "second"):
        d = tmp_path_factory.mktemp(f"converge_{name}")
        t0 = time.perf_counter()
        cli("converge", "plasma_converge.cfg", d)
        out.append((d, time.perf_counter() - t0))
    return out


def test_criterion_5_eps_rate(converge_runs):
    d, elapsed = converge_runs[0]
    table = json.loads((d / "converge_converge.json").read_text())["table"]
    s_l2, s_h1, s_pv = table["fitted_slope"], table["slope_h1"], table["slope_pv"]
    within = lambda s: 0.8 <= s <= 1.2
    n_used = sum(r["err_l2"] >= 3 * table["grid_floor_estimate"] for r in table["rows"])
    detail = (f"slopes L2 {s_l2:.4f}, H1 {s_h1:.4f}, obstacle |Pv| {s_pv:.4f} (each in [0.8, 1.2]); "
              f"{n_used}/5 rows above 3x grid floor {table['grid_floor_estimate']:.2e}")
    ok = verdict(5, within(s_l2) and within(s_h1) and within(s_pv), detail, elapsed, 600.0)
    assert ok


def test_criterion_9_determinism(converge_runs):
    (a, _), (b, _) = converge_runs
    names = sorted(p.name for p in a.glob("*.csv"))
    same = bool(names) and names == sorted(p.name for p in b.glob("*.csv")) and all(
        (a / n).read_bytes() == (b / n).read_bytes() for n in names)
    assert verdict(9, same, f"{len(names)} CSV file(s) compared byte for byte: identical {same}")


# -- 6 ------------------------------------------------------------------------

def test_criterion_6_no_boundary_layer(tmp_path):
    t0 = time.perf_counter()
    cli("layer", "plasma_layer.cfg", tmp_path)
    elapsed = time.perf_counter() - t0
    reps = json.loads((tmp_path / "layer_layer.json").read_text())["reports"]
    proj = [g for _, _, g in reps["ProjectorInV"]["growth_ratios"]]
    full = [g for _, _, g in reps["FullL2InV"]["growth_ratios"]]
    ok = bool(proj) and max(proj) <= 2.0 and max(full) >= 5.0
    detail = (f"ProjectorInV decade ratios {', '.join(f'{g:.3f}' for g in proj)} (each <= 2); "
              f"FullL2InV decade ratios {', '.join(f'{g:.3f}' for g in full)} (one >= 5)")
    assert verdict(6, ok, detail, elapsed, 300.0)


# -- 7 ------------------------------------------------------------------------

def test_criterion_7_expansion(tmp_path):
    t0 = time.perf_counter()
    cli("expand", "plasma_expand.cfg", tmp_path)
    elapsed = time.perf_counter() - t0
    summary = json.loads((tmp_path / "expand_expand.json").read_text())
    header, data = read_csv(tmp_path / "expand_expand.csv")
    eps, r0, r1 = data[:, 0], data[:, 1], data[:, 2]
    jump, bound = summary["interface_jump_max"], summary["interface_bound"]
    slope = fit_slope(eps, r0)
    two_smallest = np.argsort(eps)[:2]
    corr_ok = bool(np.all(r1[two_smallest] <= r0[two_smallest]))
    cont_ok = jump <= bound
    slope_ok = 0.8 <= slope <= 1.2
    detail = (f"interface jump {jump:.3e} <= {bound:.3e} {cont_ok}; residual0 slope {slope:.4f} "
              f"(in [0.8, 1.2]) {slope_ok}; corrected <= uncorrected at eps "
              + ", ".join(f"{eps[i]:g} ({r1[i]:.2e} vs {r0[i]:.2e})" for i in two_smallest) + f" {corr_ok}")
    assert verdict(7, cont_ok and slope_ok and corr_ok, detail, elapsed, 300.0)


# -- 8 ------------------------------------------------------------------------

def test_criterion_8_cross_formulation(tmp_path):
    t0 = time.perf_counter()
    cli("compare", "plasma_compare.cfg", tmp_path)
    elapsed = time.perf_counter() - t0
    _, data = read_csv(tmp_path / "compare_compare.csv")
    d = dict(zip(data[:, 0], data[:, 1]))
    ratio = d[1e-2] / d[1e-3]
    detail = f"L2 difference {d[1e-2]:.3e} at eps=1e-2, {d[1e-3]:.3e} at eps=1e-3, ratio {ratio:.2f} (>= 3)"
    assert verdict(8, ratio >= 3.0, detail, elapsed, 180.0)
