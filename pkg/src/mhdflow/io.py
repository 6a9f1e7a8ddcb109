"""Serialization: field files, checkpoints, per-step tables, reports.

Two field formats: a tabular text format that round-trips doubles
bit-exactly (17 significant digits) and is the native state store, and
legacy VTK ASCII structured points for external visualization (write
only). Checkpoints are versioned npz archives. Per-step diagnostics go
to a tab-separated table with a fixed column order; summary reports are
"key = value" lines in insertion order, so outputs diff cleanly.

A trajectory directory holds config.cfg, steps.tsv, report.txt, a
states/ subdirectory of tabular snapshots, and a final checkpoint.
"""

from __future__ import annotations

import os
import re

import numpy as np

from .errors import ConfigError
from .fields import ScalarField, VectorField
from .grid import Grid, build_grid
from .solver import State, StepReport, Trajectory

FIELD_FORMAT_VERSION = 1
CHECKPOINT_VERSION = 1

#: exact double round-trip
FLOAT_FMT = "%.17g"

STEP_COLUMNS = (
    "step", "time", "dt", "picard_iters", "picard_gap",
    "energy_old", "energy_new", "lhs", "rhs", "residual",
    "dissipation", "numerical_dissipation", "leak",
    "mass_rho_defect", "mass_b_defect",
    "min_rho", "max_rho", "min_b", "max_b",
    "divu_norm", "linear_residual",
    "dom_lower", "dom_upper", "dom_lower_outflow", "dom_upper_outflow",
)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return FLOAT_FMT % float(x)


def write_fields(state: State, path: str, fmt: str = "tabular") -> None:
    if fmt == "tabular":
        _write_tabular(state, path)
    elif fmt == "vtk":
        _write_vtk(state, path)
    else:
        raise ValueError(f"unknown field format {fmt!r}; use 'tabular' or 'vtk'")


def _write_tabular(state: State, path: str) -> None:
    g = state.rho.grid
    lines = [
        f"# mhdflow-fields version {FIELD_FORMAT_VERSION}",
        f"# nx {g.nx} ny {g.ny} lx {_fmt(g.lx)} ly {_fmt(g.ly)}",
        f"# time {_fmt(state.time)}",
        "# fields rho b ux uy",
        "# columns: cell rho b ux uy",
    ]
    u = state.u.values
    for c in range(g.n_cells):
        lines.append(" ".join([str(c), _fmt(state.rho.values[c]), _fmt(state.b.values[c]),
                               _fmt(u[c, 0]), _fmt(u[c, 1])]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


_HEADER_RE = {
    "version": re.compile(r"^# mhdflow-fields version (\d+)$"),
    "dims": re.compile(r"^# nx (\d+) ny (\d+) lx (\S+) ly (\S+)$"),
    "time": re.compile(r"^# time (\S+)$"),
}


def read_fields(path: str, grid: Grid | None = None) -> State:
    """Read a tabular field file; verifies dimensions against `grid` if given."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not _HEADER_RE["version"].match(lines[0]):
        raise ValueError(f"{path}: not a tabular field file")
    version = int(_HEADER_RE["version"].match(lines[0]).group(1))
    if version != FIELD_FORMAT_VERSION:
        raise ValueError(f"{path}: format version {version}, "
                         f"expected {FIELD_FORMAT_VERSION}")
    m = _HEADER_RE["dims"].match(lines[1])
    if not m:
        raise ValueError(f"{path}: malformed dimension header")
    nx, ny = int(m.group(1)), int(m.group(2))
    lx, ly = float(m.group(3)), float(m.group(4))
    mt = _HEADER_RE["time"].match(lines[2])
    if not mt:
        raise ValueError(f"{path}: malformed time header")
    time = float(mt.group(1))

    if grid is not None:
        if (nx, ny) != (grid.nx, grid.ny):
            raise ValueError(
                f"{path}: grid is {nx}x{ny}, expected {grid.nx}x{grid.ny}")
        if not (np.isclose(lx, grid.lx) and np.isclose(ly, grid.ly)):
            raise ValueError(
                f"{path}: extents ({lx}, {ly}), expected ({grid.lx}, {grid.ly})")
        g = grid
    else:
        g = build_grid(nx, ny, lx, ly)

    data = np.loadtxt([ln for ln in lines if not ln.startswith("#")],
                      ndmin=2)
    if data.shape != (g.n_cells, 5):
        raise ValueError(f"{path}: payload shape {data.shape}, "
                         f"expected ({g.n_cells}, 5)")
    order = np.argsort(data[:, 0].astype(int))
    data = data[order]
    return State(time, ScalarField(g, data[:, 1]), ScalarField(g, data[:, 2]),
                 VectorField(g, data[:, 3:5]))


def _write_vtk(state: State, path: str) -> None:
    """Legacy VTK ASCII structured points, data on the cell-center lattice."""
    g = state.rho.grid
    out = [
        "# vtk DataFile Version 3.0",
        f"mhdflow fields time={_fmt(state.time)}",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {g.nx} {g.ny} 1",
        f"ORIGIN {_fmt(g.dx / 2)} {_fmt(g.dy / 2)} 0",
        f"SPACING {_fmt(g.dx)} {_fmt(g.dy)} 1",
        f"POINT_DATA {g.n_cells}",
    ]
    for name, vals in (("rho", state.rho.values), ("b", state.b.values)):
        out.append(f"SCALARS {name} double 1")
        out.append("LOOKUP_TABLE default")
        out.extend(_fmt(v) for v in vals)
    out.append("VECTORS velocity double")
    u = state.u.values
    out.extend(f"{_fmt(u[c, 0])} {_fmt(u[c, 1])} 0" for c in range(g.n_cells))
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def save_checkpoint(state: State, path: str) -> None:
    g = state.rho.grid
    np.savez(path, version=CHECKPOINT_VERSION, nx=g.nx, ny=g.ny,
             lx=g.lx, ly=g.ly, time=state.time,
             rho=state.rho.values, b=state.b.values, u=state.u.values)


def load_checkpoint(path: str, grid: Grid | None = None) -> State:
    with np.load(path) as z:
        version = int(z["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: checkpoint version {version}, "
                             f"expected {CHECKPOINT_VERSION}")
        nx, ny = int(z["nx"]), int(z["ny"])
        lx, ly = float(z["lx"]), float(z["ly"])
        if grid is not None and (nx, ny) != (grid.nx, grid.ny):
            raise ValueError(f"{path}: grid is {nx}x{ny}, "
                             f"expected {grid.nx}x{grid.ny}")
        g = grid if grid is not None else build_grid(nx, ny, lx, ly)
        return State(float(z["time"]), ScalarField(g, z["rho"].copy()),
                     ScalarField(g, z["b"].copy()),
                     VectorField(g, z["u"].copy()))


def _report_row(k: int, r: StepReport) -> list[str]:
    e = r.energy
    dom = r.domination
    vals = [
        k, r.time, r.dt, r.picard_iters, r.picard_gap,
        e.e_old, e.e_new, e.lhs, e.rhs, e.residual,
        e.dissipation, e.numerical_dissipation, e.leak,
        r.mass_rho_defect, r.mass_b_defect,
        r.min_rho, r.max_rho, r.min_b, r.max_b,
        r.divu_norm, r.linear_residual,
        dom.lower_margin if dom else np.nan,
        dom.upper_margin if dom else np.nan,
        dom.lower_margin_outflow if dom else np.nan,
        dom.upper_margin_outflow if dom else np.nan,
    ]
    return [_fmt(v) for v in vals]


def write_steps(reports, path: str) -> None:
    lines = ["\t".join(STEP_COLUMNS)]
    for k, r in enumerate(reports, start=1):
        lines.append("\t".join(_report_row(k, r)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_steps(path: str) -> dict[str, np.ndarray]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty step table")
    cols = lines[0].split("\t")
    rows = [ln.split("\t") for ln in lines[1:] if ln]
    data = np.array(rows, dtype=float) if rows else np.zeros((0, len(cols)))
    if data.shape[1] != len(cols):
        raise ValueError(f"{path}: ragged step table")
    return {c: data[:, j] for j, c in enumerate(cols)}


def write_report(entries: dict, path: str) -> None:
    """Stable key = value lines; floats at full precision."""
    lines = []
    for key, val in entries.items():
        if isinstance(val, (bool, np.bool_)):
            txt = "pass" if val else "FAIL"
        elif isinstance(val, (int, np.integer)):
            txt = str(int(val))
        elif isinstance(val, (float, np.floating)):
            txt = FLOAT_FMT % float(val)
        else:
            txt = str(val)
        lines.append(f"{key} = {txt}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_report(path: str) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for ln in fh:
            ln = ln.strip()
            if not ln or "=" not in ln:
                continue
            key, val = ln.split("=", 1)
            out[key.strip()] = val.strip()
    return out


STATE_FILE_FMT = "state_{:06d}.dat"


def save_trajectory(traj: Trajectory, outdir: str,
                    config_text: str | None = None) -> None:
    """Lay out the standard trajectory directory."""
    os.makedirs(outdir, exist_ok=True)
    states_dir = os.path.join(outdir, "states")
    os.makedirs(states_dir, exist_ok=True)
    if config_text is not None:
        with open(os.path.join(outdir, "config.cfg"), "w") as fh:
            fh.write(config_text)
    write_steps(traj.reports, os.path.join(outdir, "steps.tsv"))
    for k, state in enumerate(traj.states):
        write_fields(state, os.path.join(states_dir, STATE_FILE_FMT.format(k)))
    save_checkpoint(traj.final, os.path.join(outdir, "checkpoint.npz"))


def load_trajectory_states(outdir: str, grid: Grid | None = None) -> list[State]:
    """Read back every stored state, in step order."""
    states_dir = os.path.join(outdir, "states")
    if not os.path.isdir(states_dir):
        raise ConfigError(f"{outdir}: no states/ directory")
    names = sorted(n for n in os.listdir(states_dir)
                   if n.startswith("state_") and n.endswith(".dat"))
    if not names:
        raise ConfigError(f"{outdir}: no stored states")
    out = []
    for name in names:
        st = read_fields(os.path.join(states_dir, name), grid)
        grid = grid if grid is not None else st.rho.grid
        out.append(st)
    return out
