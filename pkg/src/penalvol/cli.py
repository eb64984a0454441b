"""``penalvol <subcommand> --config <path> [--out <dir>] [--tag <name>]``.

Exit codes: 0 success, 2 invalid input, 3 runtime failure; ``check`` exits
0 when every hypothesis holds and 1 otherwise.  Diagnostics go to stderr as
single lines prefixed ``error:<kind>:``; data goes to files only.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import output, plotting
from .config import RunManifest, check_tag, parse_config
from .errors import PenalvolError, RuntimeFailure, ValidationFailure
from .expansion import build_profile, expansion_residual, interface_jump
from .model import boundary_samples, check_chart, check_dissipativity, check_structure, state_samples
from .penalty import PenaltyConfig, PenaltyMode
from .solver import checkpoint_times, run_penalized

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

SUBCOMMANDS = ("check", "run", "converge", "layer", "expand", "compare")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(EXIT_VALIDATION, f"error:UsageError:{message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="penalvol", description="Volume penalisation experiments for 1D hyperbolic systems.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="key = value configuration file")
    p.add_argument("--out", help="output directory (overrides [output] dir)")
    p.add_argument("--tag", help="name used in output files (overrides [output] tag)")
    return p


def _note(msg: str):
    print(msg, file=sys.stderr)


def _fail(kind: str, msg: str, code: int) -> int:
    print(f"error:{kind}:{' '.join(str(msg).split())}", file=sys.stderr)
    return code


def _sample_times(m: RunManifest) -> np.ndarray:
    return checkpoint_times(m.t_end, m.t_end / m.time_samples)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_check(m: RunManifest, out: Path) -> int:
    model = m.build_model(validate=False)
    spec, chart = model.spec, model.chart
    lines = [f"model: {m.model}"]
    ok = True
    try:
        rep = check_dissipativity(spec, chart, boundary_samples(spec))
        lines += [f"dissipative: {str(rep.dissipative).lower()}",
                  f"mu_estimate: {rep.mu_estimate:.17g}",
                  f"positive_eigenvalues: {rep.n_positive_eig} (p = {spec.rank_p})",
                  f"negative_eigenvalues: {rep.n_negative_eig}",
                  "non_characteristic: true",
                  "constant_signature: true"]
        ok &= rep.dissipative
        report = {"dissipative": rep.dissipative, "mu_estimate": rep.mu_estimate,
                  "n_positive_eig": rep.n_positive_eig, "n_negative_eig": rep.n_negative_eig}
    except PenalvolError as exc:
        lines += ["dissipative: false", f"hypothesis_failure: {exc.kind}: {exc}"]
        ok = False
        report = {"dissipative": False, "failure": exc.kind}
    samples = state_samples(model)
    if m.model == "plasma" and not (-1.0 < m.model_params["M0"] < 0.0):
        lines.append("mach_range: false (M0 must lie in (-1,0))")
        ok = False
    rt, equiv = check_chart(chart, samples, spec.rank_p)
    sym, a0min = check_structure(spec, chart.to_v(None, samples))
    lines += [f"chart_roundtrip: {rt:.3e}",
              f"boundary_equivalence: {str(equiv).lower()}",
              f"symmetry_residual: {sym:.3e}",
              f"a0_min_eigenvalue: {a0min:.17g}"]
    ok &= rt <= 1e-12 and equiv and sym <= 1e-12 and a0min > 0
    lines.append(f"result: {'pass' if ok else 'fail'}")
    print("\n".join(lines))
    report.update({"chart_roundtrip": rt, "boundary_equivalence": equiv,
                   "symmetry_residual": sym, "a0_min_eigenvalue": a0min, "pass": bool(ok)})
    output.write_json(out / f"check_{m.tag}.json", report)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_run(m: RunManifest, out: Path) -> int:
    model = m.build_model()
    grid = m.grid()
    times = checkpoint_times(m.t_end, m.t_end / m.checkpoints)
    traj = run_penalized(model, grid, m.solver_config(), PenaltyConfig(m.eps, m.penalty_mode()),
                         times, tag=m.tag)
    x = grid.centers
    for k, t in enumerate(traj.times):
        v = traj.values[k]
        output.write_checkpoint(out, "run", m.tag, t, x, v, model.chart.from_v(None, v))
    if m.plots:
        v = traj.values[-1]
        u = model.chart.from_v(None, v)
        curves = {f"v_{j + 1}": v[:, j] for j in range(v.shape[1])}
        curves.update({f"u_{j + 1}": u[:, j] for j in range(u.shape[1])})
        plotting.plot_profiles(x, curves, out / f"run_{m.tag}.png",
                               title=f"t = {traj.times[-1]:g}, eps = {m.eps:g}")
    _note(f"run: {len(traj.times)} checkpoints, {traj.n_steps} steps")
    return EXIT_OK


def cmd_converge(m: RunManifest, out: Path) -> int:
    model = m.build_model()
    table = ex.convergence_study(model, m.grid(), m.solver_config(), m.eps_list, m.penalty_mode(),
                                 _sample_times(m))
    name = f"converge_{m.tag}"
    output.write_csv(out / f"{name}.csv", ["epsilon", "err_l2", "err_linf", "err_h1", "pv_max"],
                     [(r.epsilon, r.err_l2, r.err_linf, r.err_h1, r.pv_max) for r in table.rows])
    output.write_json(out / f"{name}.json", {"table": table.as_dict(), "manifest": m.as_dict()})
    output.gnuplot_script(out / f"{name}.gp", f"{name}.csv", "penalisation error on x > 0",
                          "eps", "error", [(1, 2, "L2"), (1, 4, "H1"), (1, 5, "max |Pv|")],
                          png_name=f"{name}_gnuplot.png")
    if m.plots:
        plotting.plot_error_table(table, out / f"{name}.png")
    _note(f"converge: slope L2 {table.fitted_slope:.4f}, H1 {table.slope_h1:.4f}, "
          f"|Pv| {table.slope_pv:.4f} over eps in [{table.fit_window[0]:g}, {table.fit_window[1]:g}]")
    return EXIT_OK


def cmd_layer(m: RunManifest, out: Path) -> int:
    model = m.build_model()
    reps = ex.layer_probe(model, m.grid(), m.solver_config(), m.eps_list, times=_sample_times(m))
    name = f"layer_{m.tag}"
    modes = list(reps)
    header = ["epsilon"] + [f"{md}_{side}" for md in modes for side in ("minus", "plus")]
    eps = reps[modes[0]].epsilons
    rows = [[e] + [v for md in modes for v in (reps[md].metric[i], reps[md].metric_plus[i])]
            for i, e in enumerate(eps)]
    output.write_csv(out / f"{name}.csv", header, rows)
    output.write_json(out / f"{name}.json", {"reports": {k: r.as_dict() for k, r in reps.items()},
                                             "manifest": m.as_dict()})
    output.gnuplot_script(out / f"{name}.gp", f"{name}.csv", "wall gradient next to x = 0", "eps",
                          "max |dv/dx|", [(1, 2 + 2 * i, f"{md} obstacle side") for i, md in enumerate(modes)],
                          png_name=f"{name}_gnuplot.png")
    if m.plots:
        plotting.plot_layer(reps, out / f"{name}.png")
    for md, r in reps.items():
        _note(f"layer: {md} growth ratios " + ", ".join(f"{a:g}->{b:g}: {g:.3f}" for a, b, g in r.growth_ratios))
    return EXIT_OK


def cmd_expand(m: RunManifest, out: Path) -> int:
    model = m.build_model()
    grid = m.grid()
    scfg = m.solver_config()
    per = int(np.ceil(np.ceil(m.t_end / grid.dx) / m.checkpoints))
    times = np.linspace(0.0, m.t_end, per * m.checkpoints + 1)
    prof = build_profile(model, grid, scfg, times)
    xm = grid.minus().centers
    for k in range(0, len(times), per):
        t = times[k]
        v0 = prof.v0_minus[k]
        output.write_checkpoint(out, "v0minus", m.tag, t, xm, v0, model.chart.from_v(None, v0))
        output.write_checkpoint(out, "pv1minus", m.tag, t, xm, prof.pv1_minus[k])
    jump = interface_jump(prof)
    bound = 5.0 * grid.dx * float(np.max(np.abs(prof.v0())))
    rows = []
    for eps in m.eps_list:
        tr = run_penalized(model, grid, scfg, PenaltyConfig(eps, m.penalty_mode()), times)
        r0, r1 = expansion_residual(tr, prof, eps)
        rows.append((eps, r0, r1))
    name = f"expand_{m.tag}"
    output.write_csv(out / f"{name}.csv", ["epsilon", "residual0", "residual1"], rows)
    summary = {"interface_jump_max": float(np.max(jump)), "interface_bound": bound,
               "rows": [dict(zip(("epsilon", "residual0", "residual1"), r)) for r in rows],
               "manifest": m.as_dict()}
    if len(rows) >= 2:
        summary["slope_residual0"] = ex.fit_slope([r[0] for r in rows], [r[1] for r in rows])
    output.write_json(out / f"{name}.json", summary)
    output.gnuplot_script(out / f"{name}.gp", f"{name}.csv", "expansion residual", "eps", "residual",
                          [(1, 2, "order 0"), (1, 3, "with eps P V1")], png_name=f"{name}_gnuplot.png")
    if m.plots:
        k = len(times) - 1
        curves = {f"V0-, component {j + 1}": prof.v0_minus[k, :, j] for j in range(prof.v0_minus.shape[2])}
        curves.update({f"P V1-, component {j + 1}": prof.pv1_minus[k, :, j] for j in range(prof.p)})
        plotting.plot_profiles(xm, curves, out / f"{name}_profile.png", title=f"t = {times[k]:g}")
        if len(rows) >= 2:
            plotting.plot_series([r[0] for r in rows], {"order 0": [r[1] for r in rows],
                                                        "with eps P V1": [r[2] for r in rows]},
                                 out / f"{name}.png", "eps", "residual")
    _note(f"expand: interface jump {np.max(jump):.3e} (bound {bound:.3e})")
    return EXIT_OK


def cmd_compare(m: RunManifest, out: Path) -> int:
    model = m.build_model()
    grid = m.grid()
    rows = [(eps, ex.cross_formulation_check(model, grid, m.solver_config(), eps, _sample_times(m)))
            for eps in m.eps_list]
    name = f"compare_{m.tag}"
    output.write_csv(out / f"{name}.csv", ["epsilon", "l2_difference"], rows)
    output.write_json(out / f"{name}.json", {"rows": [{"epsilon": e, "l2_difference": d} for e, d in rows],
                                             "modes": [PenaltyMode.PROJECTOR_IN_V.value,
                                                       PenaltyMode.ORIGINAL_VARIABLE_M.value],
                                             "manifest": m.as_dict()})
    output.gnuplot_script(out / f"{name}.gp", f"{name}.csv", "difference between penalty formulations",
                          "eps", "L2 difference", [(1, 2, "L2 difference")], png_name=f"{name}_gnuplot.png")
    if m.plots and len(rows) >= 2:
        plotting.plot_series([r[0] for r in rows], {"L2 difference": [r[1] for r in rows]},
                             out / f"{name}.png", "eps", "L2 difference on x > 0")
    _note("compare: " + ", ".join(f"eps {e:g}: {d:.3e}" for e, d in rows))
    return EXIT_OK


COMMANDS = {"check": cmd_check, "run": cmd_run, "converge": cmd_converge,
            "layer": cmd_layer, "expand": cmd_expand, "compare": cmd_compare}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        manifest = parse_config(args.config, check_only=args.subcommand == "check")
        if args.out:
            manifest.out_dir = args.out
        if args.tag:
            manifest.tag = check_tag(args.tag)
        out = Path(manifest.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.subcommand](manifest, out)
    except ValidationFailure as exc:
        return _fail(exc.kind, exc, EXIT_VALIDATION)
    except RuntimeFailure as exc:
        return _fail(exc.kind, exc, EXIT_RUNTIME)
    except ValueError as exc:
        return _fail("ValidationError", exc, EXIT_VALIDATION)
    except OSError as exc:
        return _fail("IOError", exc, EXIT_RUNTIME)
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to the runtime exit code
        return _fail(type(exc).__name__, exc, EXIT_RUNTIME)


if __name__ == "__main__":
    sys.exit(main())
