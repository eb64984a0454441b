import numpy as np
import pytest

from penalvol.errors import BlowUp, CFLViolation, GridMismatch, NonFiniteInput
from penalvol.forcing import Plateau, component_sources
from penalvol.model import make_linear_model, make_plasma_model
from penalvol.penalty import PenaltyConfig, build_projector
from penalvol.solver import (
    Grid1D,
    SolverConfig,
    StateField,
    checkpoint_times,
    hyperbolic_step,
    run_penalized,
    run_reduced,
    run_reference,
    rusanov_flux,
    source_ramp,
    stable_dt,
    strang_step,
)
from penalvol.experiments import penalized_max


def scalar_model(lam=1.0, source=None):
    return make_linear_model([[lam]], [[1.0]], source)


def plasma_forced(m0=-0.5):
    return make_plasma_model(m0, component_sources(2, 1, Plateau()))


def advance(spec, grid, state, t_end, cfl=0.5, **kw):
    while state.time < t_end - 1e-14:
        dt = min(stable_dt(spec, grid, state.time, state.values, cfl), t_end - state.time)
        state = hyperbolic_step(spec, grid, state, dt, **kw)
    return state


def no_mask(x):
    return np.zeros_like(np.asarray(x, dtype=float))


# -- grid -----------------------------------------------------------------

def test_grid_interface_on_face():
    g = Grid1D.create(-1.0, 2.0, 3000)
    assert g.interface_index == 1000
    assert g.dx == pytest.approx(1e-3)
    assert g.faces[g.interface_index] == pytest.approx(0.0, abs=1e-12)


def test_grid_snaps_when_origin_is_off_face():
    g = Grid1D.create(-1.0, 2.0, 100)
    assert g.interface_index == 33
    assert g.x_min == pytest.approx(-33 * g.dx)
    assert g.x_max - g.x_min == pytest.approx(3.0)
    assert abs(g.faces[33]) < 1e-12


def test_grid_halves():
    g = Grid1D.create(-1.0, 2.0, 300)
    assert g.minus().n_cells + g.plus().n_cells == g.n_cells
    np.testing.assert_allclose(g.plus().centers, g.centers[g.interface_index:])
    np.testing.assert_allclose(g.minus().centers, g.centers[: g.interface_index])
    r = g.refined()
    assert r.n_cells == 600 and r.interface_index == 200


def test_grid_rejects_misplaced_origin():
    with pytest.raises(GridMismatch):
        Grid1D(-1.0, 2.0, 100, 0.03, 33)


# -- flux -------------------------------------------------------------------

def test_rusanov_scalar_upwind():
    spec = scalar_model(1.0).spec
    assert rusanov_flux(spec, 0.0, 0.0, np.array([2.0]), np.array([0.0])) == pytest.approx([2.0])


def test_rusanov_zero_jump():
    spec = make_plasma_model(-0.5).spec
    v = np.array([0.1, -0.2])
    expect = spec.a1(0.0, 0.0, v) @ v
    np.testing.assert_allclose(rusanov_flux(spec, 0.0, 0.0, v, v), expect, rtol=1e-15)


def test_rusanov_plasma_rest():
    spec = make_plasma_model(-0.5).spec
    np.testing.assert_array_equal(rusanov_flux(spec, 0.0, 0.0, np.zeros(2), np.zeros(2)), [0.0, 0.0])


def test_rusanov_rejects_nonfinite():
    spec = scalar_model().spec
    with pytest.raises(NonFiniteInput):
        rusanov_flux(spec, 0.0, 0.0, np.array([np.nan]), np.array([0.0]))


# -- hyperbolic step ----------------------------------------------------------

def test_zero_state_is_equilibrium():
    model = make_plasma_model(-0.5)
    grid = Grid1D.create(-1.0, 2.0, 120)
    state = advance(model.spec, grid, StateField(np.zeros((120, 2))), 0.5)
    np.testing.assert_array_equal(state.values, 0.0)


def test_constant_state_preserved():
    spec = scalar_model(1.0).spec
    grid = Grid1D.create(-1.0, 2.0, 90)
    state = advance(spec, grid, StateField(np.full((90, 1), 0.37)), 0.4)
    np.testing.assert_allclose(state.values, 0.37, rtol=1e-14)


@pytest.mark.parametrize("lam", [1.0, -0.7])
def test_gaussian_bump_translates(lam):
    spec = scalar_model(lam).spec
    grid = Grid1D.create(-1.0, 2.0, 1200)
    x = grid.centers
    x0 = 0.5
    v = np.exp(-((x - x0) / 0.1) ** 2)[:, None]
    t = 0.5
    state = advance(spec, grid, StateField(v), t)
    w = state.values[:, 0]
    centre = np.sum(w * x) / np.sum(w)
    assert abs(centre - (x0 + lam * t)) <= 2 * grid.dx


def test_linear_system_conserves_total():
    model = make_linear_model([[-0.5, 1.0], [1.0, -0.5]], [[1.0, 0.0]])
    grid = Grid1D.create(-1.0, 2.0, 300)
    x = grid.centers
    v = np.stack([np.exp(-((x - 0.5) / 0.1) ** 2), 0.5 * np.exp(-((x - 0.4) / 0.1) ** 2)], -1)
    state = StateField(v)
    total = v.sum(axis=0) * grid.dx
    for _ in range(50):
        dt = stable_dt(model.spec, grid, state.time, state.values, 0.5)
        state = hyperbolic_step(model.spec, grid, state, dt)
        new = state.values.sum(axis=0) * grid.dx
        assert np.max(np.abs(new - total)) <= 1e-10
        total = new


def test_cfl_violation():
    spec = scalar_model().spec
    grid = Grid1D.create(-1.0, 2.0, 30)
    with pytest.raises(CFLViolation):
        hyperbolic_step(spec, grid, StateField(np.zeros((30, 1))), 2 * grid.dx)


# -- splitting ----------------------------------------------------------------

def _random_state(n, seed=0):
    rng = np.random.default_rng(seed)
    return StateField(0.1 * rng.normal(size=(n, 2)), 0.2)


def test_strang_without_mask_is_hyperbolic_step():
    model = plasma_forced()
    grid = Grid1D.create(-1.0, 2.0, 60)
    state = _random_state(60)
    dt = 0.5 * stable_dt(model.spec, grid, state.time, state.values, 0.5)
    proj = build_projector(2, 1)
    a = strang_step(model.spec, grid, state, dt, PenaltyConfig(1e-3, mask=no_mask), proj, ramp_time=0.1)
    b = hyperbolic_step(model.spec, grid, state, dt, ramp_time=0.1)
    np.testing.assert_array_equal(a.values, b.values)


def test_strang_weak_penalty_limit():
    model = plasma_forced()
    grid = Grid1D.create(-1.0, 2.0, 60)
    state = _random_state(60, 1)
    dt = stable_dt(model.spec, grid, state.time, state.values, 0.5)
    proj = build_projector(2, 1)
    a = strang_step(model.spec, grid, state, dt, PenaltyConfig(1e300), proj)
    b = hyperbolic_step(model.spec, grid, state, dt)
    np.testing.assert_allclose(a.values, b.values, rtol=0, atol=1e-15)


def test_penalty_is_identity_on_kernel():
    model = make_plasma_model(-0.5)
    grid = Grid1D.create(-1.0, 2.0, 60)
    v = np.zeros((60, 2))
    v[:, 1] = 0.3  # constant, P v = 0 everywhere: a steady state
    state = StateField(v)
    dt = stable_dt(model.spec, grid, 0.0, v, 0.5)
    out = strang_step(model.spec, grid, state, dt, PenaltyConfig(1e-4), build_projector(2, 1))
    np.testing.assert_allclose(out.values, v, atol=1e-15)


# -- drivers ------------------------------------------------------------------

def test_ramp():
    assert source_ramp(0.0, 0.1) == 0.0
    assert source_ramp(0.05, 0.1) == pytest.approx(0.25)
    assert source_ramp(0.2, 0.1) == 1.0
    assert source_ramp(0.0, 0.0) == 1.0


def test_checkpoint_times():
    t = checkpoint_times(1.0, 0.3)
    assert t[0] == 0.0 and t[-1] == 1.0 and np.max(np.diff(t)) <= 0.3


def test_penalized_zero_sources_stay_zero():
    model = make_plasma_model(-0.5)
    grid = Grid1D.create(-1.0, 2.0, 96)
    tr = run_penalized(model, grid, SolverConfig(0.5), PenaltyConfig(1e-2), [0.25, 0.5])
    np.testing.assert_array_equal(tr.values, 0.0)
    np.testing.assert_allclose(tr.times, [0.0, 0.25, 0.5])


def test_reference_zero_sources_stay_zero():
    tr = run_reference(make_plasma_model(-0.5), Grid1D.create(-1.0, 2.0, 96), SolverConfig(0.5))
    np.testing.assert_array_equal(tr.values, 0.0)


def test_penalized_obstacle_component_scales_with_eps():
    model = plasma_forced()
    grid = Grid1D.create(-1.0, 2.0, 512)
    scfg = SolverConfig(1.0)
    times = checkpoint_times(1.0, 0.05)
    pv = []
    for eps in (1e-2, 1e-3):
        tr = run_penalized(model, grid, scfg, PenaltyConfig(eps), times)
        assert np.all(np.isfinite(tr.values))
        pv.append(penalized_max(tr.values, grid, 1))
    # about one decade; measured 6.3 here, rising towards 10 as the grid is refined
    assert 5.0 <= pv[0] / pv[1] <= 15.0


def test_penalized_original_variables_match_chart():
    from penalvol.penalty import PenaltyMode
    model = plasma_forced()
    grid = Grid1D.create(-1.0, 2.0, 96)
    tr = run_penalized(model, grid, SolverConfig(0.3), PenaltyConfig(1e-2, PenaltyMode.ORIGINAL_VARIABLE_M))
    assert np.all(np.isfinite(tr.values))
    assert np.max(np.abs(tr.values)) > 0


def test_blowup_reports_time():
    model = make_linear_model([[1.0]], [[1.0]], lambda t, x: np.ones((np.size(x), 1)), validity_radius=0.05)
    grid = Grid1D.create(-1.0, 2.0, 60)
    with pytest.raises(BlowUp) as info:
        run_penalized(model, grid, SolverConfig(1.0, ramp_time=0.0), PenaltyConfig(1e-2))
    assert 0.0 < info.value.time < 1.0
    assert "t=" in str(info.value)


def test_reference_incoming_characteristics():
    # v_t + v_x = 1, v(0, t) = 0, v(x, 0) = 0: v = min(t, x)
    src = lambda t, x: np.ones((np.size(x), 1))
    model = make_linear_model([[1.0]], [[1.0]], src)
    grid = Grid1D.create(-1.0, 2.0, 1200)
    tr = run_reference(model, grid, SolverConfig(0.6, ramp_time=0.0))
    x = tr.grid.centers
    exact = np.minimum(0.6, x)
    away = np.abs(x - 0.6) > 0.1
    assert np.max(np.abs(tr.values[-1, away, 0] - exact[away])) <= 4 * grid.dx


def test_reference_trace_records_every_step():
    model = plasma_forced()
    tr = run_reference(model, Grid1D.create(-1.0, 2.0, 96), SolverConfig(0.5))
    tt, tv = tr.trace
    assert len(tt) == tr.n_steps + 1
    np.testing.assert_array_equal(tv[:, 0], 0.0)


def test_reduced_solve_carries_wall_data_left():
    model = make_plasma_model(-0.5)
    grid = Grid1D.create(-1.0, 2.0, 300)
    trace = (np.array([0.0, 10.0]), np.array([[0.0, 0.2], [0.0, 0.2]]))
    tr = run_reduced(model, grid, SolverConfig(1.0), trace)
    x = grid.minus().centers
    final = tr.values[-1]
    np.testing.assert_array_equal(final[:, 0], 0.0)
    # speed M0 = -0.5: data has reached x = -0.5 by t = 1
    reached = x > -0.2
    np.testing.assert_allclose(final[reached, 1], 0.2, atol=5e-3)
    assert np.max(np.abs(final[x < -0.8, 1])) < 1e-3
