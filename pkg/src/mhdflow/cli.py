"""Command-line surface: run, verify, compare, sweep.

Exit codes: 0 all requested verdicts pass, 1 verdict failure,
2 usage or configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .config import Config, load_config
from .diagnostics import gronwall_fit, relative_energy, zeta, zeta_gap
from .errors import ConfigError, SolverFailure
from .grid import build_grid
from .io import (load_trajectory_states, read_steps, save_trajectory,
                 write_fields, write_report)
from .solver import SimulationProblem, Trajectory, continuation, run_simulation
from .transport import domination_check


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mhdflow",
        description="Viscous compressible flow with a transported magnetic "
                    "amplitude on inflow-outflow domains.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a config and write a trajectory")
    p_run.add_argument("config")
    p_run.add_argument("-o", "--outdir", default=None,
                       help="trajectory directory (default: <config>.out)")
    p_run.add_argument("--vtk", action="store_true",
                       help="also write VTK snapshots of the stored states")

    p_ver = sub.add_parser("verify", help="re-check a stored trajectory")
    p_ver.add_argument("trajdir")

    p_cmp = sub.add_parser("compare",
                           help="relative energy between two trajectories")
    p_cmp.add_argument("dir1")
    p_cmp.add_argument("dir2")
    p_cmp.add_argument("--slack", type=float, default=0.0,
                       help="allowed envelope offset added to E(0)")

    p_swp = sub.add_parser("sweep",
                           help="continuation over regularization levels")
    p_swp.add_argument("config")
    p_swp.add_argument("--eps", required=True,
                       help="comma-separated eps ladder, e.g. 1e-2,1e-3,1e-4")
    p_swp.add_argument("--delta", default=None,
                       help="matching delta ladder (default: keep config value)")
    p_swp.add_argument("-o", "--outdir", default=None)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "compare":
            return _cmd_compare(args)
        return _cmd_sweep(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        for v in exc.violations:
            print(f"  violation: {v}", file=sys.stderr)
        return 2
    except SolverFailure as exc:
        print(f"solver failure at t={exc.time:.6g}: {exc}", file=sys.stderr)
        return 3


def _verdict_line(name: str, ok: bool, detail: str = "") -> str:
    tail = f" ({detail})" if detail else ""
    return f"verdict {name} = {'pass' if ok else 'FAIL'}{tail}"


def _run_verdicts(cfg: Config, problem: SimulationProblem,
                  traj: Trajectory) -> tuple[dict, dict]:
    """Per-run verdicts from the committed step reports."""
    tols = cfg.tols
    verdicts = {}
    details = {}

    worst_rel = max((r.energy.residual / r.energy.scale for r in traj.reports),
                    default=0.0)
    verdicts["energy_inequality"] = worst_rel <= tols.tol_energy
    details["energy_inequality"] = f"worst residual {worst_rel:.3e} of scale"

    mass_scale = max(abs(traj.states[0].rho.values.sum()
                         * problem.grid.cell_area), 1.0)
    per_step = max((max(abs(r.mass_rho_defect), abs(r.mass_b_defect))
                    for r in traj.reports), default=0.0)
    acc_rho = abs(sum(r.mass_rho_defect for r in traj.reports))
    acc_b = abs(sum(r.mass_b_defect for r in traj.reports))
    verdicts["mass_ledger"] = (per_step <= tols.tol_energy * mass_scale
                               and max(acc_rho, acc_b) <= 100 * tols.tol_energy * mass_scale)
    details["mass_ledger"] = f"worst step defect {per_step:.3e}"

    worst_min = min((min(r.min_rho, r.min_b) for r in traj.reports), default=0.0)
    level = max(max((max(abs(r.max_rho), abs(r.max_b)) for r in traj.reports),
                    default=1.0), 1.0)
    verdicts["positivity"] = worst_min >= -tols.tol_neg * level
    details["positivity"] = f"min value {worst_min:.3e}"

    if problem.c_star is not None:
        worst_dom = max((r.domination.worst_violation() for r in traj.reports),
                        default=0.0)
        verdicts["domination"] = worst_dom <= tols.tol_dom * level
        details["domination"] = f"worst violation {worst_dom:.3e}"

    # loosest-bracket min/max bound over every committed step
    m, M, div_norm = _data_bounds(problem, traj)
    T = traj.reports[-1].time - traj.states[0].time if traj.reports else 0.0
    lo = m * np.exp(-T * div_norm) - tols.tol_mp * max(abs(M), 1.0)
    hi = M * np.exp(T * div_norm) + tols.tol_mp * max(abs(M), 1.0)
    inside = all(r.min_rho >= lo and r.min_b >= lo
                 and r.max_rho <= hi and r.max_b <= hi for r in traj.reports)
    verdicts["min_max_bounds"] = inside
    details["min_max_bounds"] = (f"bracket [{lo:.4g}, {hi:.4g}], "
                                 f"div norm {div_norm:.4g}")
    return verdicts, details


def _data_bounds(problem: SimulationProblem, traj: Trajectory):
    s0 = traj.states[0]
    m = min(float(s0.rho.values.min()), float(s0.b.values.min()))
    M = max(float(s0.rho.values.max()), float(s0.b.values.max()))
    g = problem.grid
    if g.inflow_faces.size:
        m = min(m, float(problem.rho_B[g.inflow_faces].min()),
                float(problem.b_B[g.inflow_faces].min()))
        M = max(M, float(problem.rho_B[g.inflow_faces].max()),
                float(problem.b_B[g.inflow_faces].max()))
    speeds = np.linalg.norm(problem.visc.ub_cells, axis=1)
    fspeeds = np.linalg.norm(problem.visc.ub_faces, axis=1)
    M = max(M, float(speeds.max()), float(fspeeds.max()))
    div_norm = max((r.divu_norm for r in traj.reports), default=0.0)
    return m, M, div_norm


def _report_entries(cfg: Config, problem, traj, verdicts, details) -> dict:
    e0 = problem.energy_of(traj.states[0])
    e1 = problem.energy_of(traj.final)
    entries = {
        "grid": f"{problem.grid.nx}x{problem.grid.ny}",
        "time_initial": traj.states[0].time,
        "time_final": traj.final.time,
        "steps": len(traj.reports),
        "energy_initial": e0,
        "energy_final": e1,
        "worst_energy_residual_rel": max(
            (r.energy.residual / r.energy.scale for r in traj.reports), default=0.0),
        "worst_mass_defect": max(
            (max(abs(r.mass_rho_defect), abs(r.mass_b_defect))
             for r in traj.reports), default=0.0),
        "min_rho": min((r.min_rho for r in traj.reports),
                       default=float(traj.states[0].rho.values.min())),
        "min_b": min((r.min_b for r in traj.reports),
                     default=float(traj.states[0].b.values.min())),
        "max_divu_norm": max((r.divu_norm for r in traj.reports), default=0.0),
        "picard_iters_max": max((r.picard_iters for r in traj.reports), default=0),
    }
    for name in sorted(verdicts):
        entries[f"verdict_{name}"] = verdicts[name]
    entries["verdict_all"] = all(verdicts.values())
    return entries


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    problem, state0 = cfg.build()
    traj = run_simulation(problem, state0, cfg.T, cfg.dt,
                          out_every=cfg.out_every)
    outdir = args.outdir or args.config + ".out"
    save_trajectory(traj, outdir, config_text=cfg.text)
    if args.vtk:
        for k, st in enumerate(traj.states):
            write_fields(st, os.path.join(outdir, "states",
                                          f"state_{k:06d}.vtk"), fmt="vtk")
    verdicts, details = _run_verdicts(cfg, problem, traj)
    write_report(_report_entries(cfg, problem, traj, verdicts, details),
                 os.path.join(outdir, "report.txt"))
    print(f"wrote {outdir}: {len(traj.reports)} steps, "
          f"{len(traj.states)} stored states")
    ok = True
    for name in sorted(verdicts):
        print(_verdict_line(name, verdicts[name], details.get(name, "")))
        ok = ok and verdicts[name]
    return 0 if ok else 1


def _cmd_verify(args) -> int:
    d = args.trajdir
    cfg_path = os.path.join(d, "config.cfg")
    steps_path = os.path.join(d, "steps.tsv")
    if not (os.path.isfile(cfg_path) and os.path.isfile(steps_path)):
        raise ConfigError(f"{d}: not a trajectory directory "
                          "(need config.cfg and steps.tsv)")
    cfg = load_config(cfg_path)
    problem, _ = cfg.build()
    cols = read_steps(steps_path)
    states = load_trajectory_states(d, problem.grid)
    tols = cfg.tols
    failures = []

    scale = np.maximum.reduce([np.abs(cols["energy_old"]),
                               np.abs(cols["energy_new"]),
                               cols["dissipation"],
                               np.ones_like(cols["residual"])])
    bad = np.flatnonzero(cols["residual"] > tols.tol_energy * scale)
    if bad.size:
        failures.append(f"energy inequality fails at step {int(cols['step'][bad[0]])} "
                        f"(residual {cols['residual'][bad[0]]:.3e})")
    defect = np.abs(cols["lhs"] - cols["rhs"] - cols["residual"])
    bad = np.flatnonzero(defect > 1e-12 * scale)
    if bad.size:
        failures.append(f"budget table inconsistent at step {int(cols['step'][bad[0]])}")

    mass_scale = max(abs(states[0].rho.values.sum() * problem.grid.cell_area), 1.0)
    worst_mass = np.maximum(np.abs(cols["mass_rho_defect"]),
                            np.abs(cols["mass_b_defect"]))
    bad = np.flatnonzero(worst_mass > tols.tol_energy * mass_scale)
    if bad.size:
        failures.append(f"mass ledger fails at step {int(cols['step'][bad[0]])} "
                        f"(defect {worst_mass[bad[0]]:.3e})")

    level = max(float(np.max(cols["max_rho"], initial=1.0)),
                float(np.max(cols["max_b"], initial=1.0)), 1.0)
    worst_min = np.minimum(cols["min_rho"], cols["min_b"])
    bad = np.flatnonzero(worst_min < -tols.tol_neg * level)
    if bad.size:
        failures.append(f"positivity fails at step {int(cols['step'][bad[0]])} "
                        f"(min {worst_min[bad[0]]:.3e})")

    for k, st in enumerate(states):
        rep = domination_check(st.rho, st.b, cfg.c_star, cfg.c_star_upper)
        if not rep.ok(tols.tol_dom * level):
            cell = rep.worst_cell_lower if rep.lower_margin <= rep.upper_margin \
                else rep.worst_cell_upper
            failures.append(f"domination fails at stored step {k}, cell {cell} "
                            f"(violation {rep.worst_violation():.3e})")
            break

    from .transport import check_max_principle
    times = [st.time for st in states]
    for name, cs, cb in (("rho", [st.rho.values for st in states], problem.rho_B),
                         ("b", [st.b.values for st in states], problem.b_B)):
        mp = check_max_principle(problem.grid, times, cs,
                                 [st.u.values for st in states], cb,
                                 cfg.u_B, tol_mp=tols.tol_mp)
        if not mp.ok:
            failures.append(f"min/max bounds fail for {name} "
                            f"(worst violation {mp.worst_violation:.3e})")

    print(f"verified {d}: {len(states)} states, {cols['step'].size} steps")
    if failures:
        for f in failures:
            print(_verdict_line("stored_trajectory", False, f))
        return 1
    print(_verdict_line("stored_trajectory", True,
                        "energy, mass, positivity, domination, min/max bounds"))
    return 0


def _block_average(values: np.ndarray, nx: int, ny: int, r: int) -> np.ndarray:
    if values.ndim == 1:
        return values.reshape(ny // r, r, nx // r, r).mean(axis=(1, 3)).ravel()
    comps = [_block_average(values[:, j], nx, ny, r)
             for j in range(values.shape[1])]
    return np.column_stack(comps)


def _restrict(state, grid_c):
    """Block-average a state onto a coarser grid of integer ratio."""
    from .fields import ScalarField, VectorField
    from .solver import State

    g = state.rho.grid
    r = g.nx // grid_c.nx
    if g.nx != r * grid_c.nx or g.ny != r * grid_c.ny:
        raise ConfigError(f"grids {g.nx}x{g.ny} and {grid_c.nx}x{grid_c.ny} "
                          "are not related by an integer ratio")
    return State(state.time,
                 ScalarField(grid_c, _block_average(state.rho.values, g.nx, g.ny, r)),
                 ScalarField(grid_c, _block_average(state.b.values, g.nx, g.ny, r)),
                 VectorField(grid_c, _block_average(state.u.values, g.nx, g.ny, r)))


def _cmd_compare(args) -> int:
    cfg1_path = os.path.join(args.dir1, "config.cfg")
    if not os.path.isfile(cfg1_path):
        raise ConfigError(f"{args.dir1}: missing config.cfg")
    cfg1 = load_config(cfg1_path)
    states1 = load_trajectory_states(args.dir1)
    states2 = load_trajectory_states(args.dir2)

    g1 = states1[0].rho.grid
    g2 = states2[0].rho.grid
    if g1.n_cells <= g2.n_cells:
        gc = build_grid(g1.nx, g1.ny, g1.lx, g1.ly)
        states2 = [_restrict(s, gc) for s in states2]
        states1 = [_restrict(s, gc) for s in states1] if g1.nx != gc.nx else states1
    else:
        gc = build_grid(g2.nx, g2.ny, g2.lx, g2.ly)
        states1 = [_restrict(s, gc) for s in states1]

    t2 = {round(s.time, 12): s for s in states2}
    pairs = [(s1, t2[round(s1.time, 12)]) for s1 in states1
             if round(s1.time, 12) in t2]
    if not pairs:
        raise ConfigError("trajectories share no output times")

    times, values = [], []
    print("time\trelative_energy\tkinetic\tpressure\tmagnetic")
    for s1, s2 in pairs:
        rep = relative_energy(gc, s1.rho.values, s1.u.values, s1.b.values,
                              s2.rho.values, s2.u.values, s2.b.values,
                              cfg1.phys.gamma)
        times.append(s1.time)
        values.append(rep.value)
        print(f"{s1.time:.6g}\t{rep.value:.6e}\t{rep.kinetic_gap:.6e}"
              f"\t{rep.pressure_gap:.6e}\t{rep.magnetic_gap:.6e}")

    fit = gronwall_fit(times, values, slack=args.slack)
    print(f"gronwall rate = {fit.rate:.6g}, initial = {fit.initial:.6e}, "
          f"slack = {fit.slack:.6e}")
    print(_verdict_line("gronwall_envelope", fit.ok,
                        f"worst excess {fit.worst_excess:.3e}"))
    return 0 if fit.ok else 1


def _parse_ladder(text: str, length: int | None = None) -> list[float]:
    vals = [float(tok) for tok in text.split(",") if tok.strip()]
    if not vals:
        raise ConfigError("empty parameter ladder")
    if length is not None and len(vals) not in (1, length):
        raise ConfigError(f"ladder length {len(vals)} does not match {length}")
    if length is not None and len(vals) == 1:
        vals = vals * length
    return vals


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    eps_list = _parse_ladder(args.eps)
    if args.delta is not None:
        delta_list = _parse_ladder(args.delta, len(eps_list))
    else:
        delta_list = [cfg.reg.delta] * len(eps_list)

    problems = []
    for eps, delta in zip(eps_list, delta_list):
        reg = replace(cfg.reg, eps=eps, delta=delta)
        problems.append(SimulationProblem(
            cfg.grid, cfg.u_B, cfg.rho_B, cfg.b_B, cfg.phys, reg,
            tols=cfg.tols, c_star=cfg.c_star, c_star_upper=cfg.c_star_upper))

    _, state0 = cfg.build()
    trajs = continuation(problems, state0, cfg.T, cfg.dt,
                         out_every=cfg.out_every)

    outdir = args.outdir or args.config + ".sweep"
    ok = True
    for k, (traj, problem) in enumerate(zip(trajs, problems)):
        leg = os.path.join(outdir, f"leg_{k:02d}")
        save_trajectory(traj, leg, config_text=cfg.text)
        verdicts, details = _run_verdicts(cfg, problem, traj)
        write_report(_report_entries(cfg, problem, traj, verdicts, details),
                     os.path.join(leg, "report.txt"))
        print(f"leg {k}: eps={eps_list[k]:g} delta={delta_list[k]:g} "
              f"-> {leg}")
        for name in sorted(verdicts):
            print("  " + _verdict_line(name, verdicts[name], details.get(name, "")))
            ok = ok and verdicts[name]

    g = cfg.grid
    area = g.cell_area
    print("consecutive final-state distances:")
    dists, gaps = [], []
    for k in range(len(trajs) - 1):
        a, b = trajs[k].final, trajs[k + 1].final
        d2 = area * (np.sum((a.rho.values - b.rho.values) ** 2)
                     + np.sum((a.b.values - b.b.values) ** 2)
                     + np.sum((a.u.values - b.u.values) ** 2))
        dists.append(float(np.sqrt(d2)))
        zref = zeta(b.rho.values, b.b.values, cfg.c_star, cfg.c_star_upper)
        gaps.append(zeta_gap(g, a.rho.values, a.b.values, zref,
                             cfg.c_star, cfg.c_star_upper))
        print(f"  legs {k}->{k + 1}: L2 distance {dists[-1]:.6e}, "
              f"zeta gap {gaps[-1]:.6e}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
