"""Plain-text configuration: parsing, admissibility checks, problem assembly.

Sectioned key = value files (INI syntax). Every admissibility hypothesis
of the well-posedness theory maps to one named check, and validation is
total: a bad file reports every violated hypothesis at once, not just
the first. Initial fields accept either a catalogue expression or
"file:<path>" pointing at a tabular field file.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .expressions import parse_scalar, parse_vector
from .fields import boundary_scalar
from .grid import Grid, build_grid, classify_boundary
from .momentum import CheckTolerances, PhysParams, RegParams
from .solver import SimulationProblem, State

_REQUIRED = {
    "grid": ("nx", "ny"),
    "physics": ("gamma", "mu", "lambda"),
    "regularization": ("eps", "delta"),
    "time": ("T", "dt"),
    "boundary": ("u_B", "rho_B", "b_B"),
    "initial": ("rho0", "b0", "u0"),
}


@dataclass
class Config:
    """Validated run description."""

    grid: Grid
    phys: PhysParams
    reg: RegParams
    tols: CheckTolerances
    c_star: float
    c_star_upper: float
    T: float
    dt: float
    out_every: int
    u_B: object
    rho_B: object
    b_B: object
    rho0: object
    b0: object
    u0: object
    text: str = ""
    violations: list = field(default_factory=list)

    def build(self) -> tuple[SimulationProblem, State]:
        problem = SimulationProblem(
            self.grid, self.u_B, self.rho_B, self.b_B, self.phys, self.reg,
            tols=self.tols, c_star=self.c_star, c_star_upper=self.c_star_upper)
        state0 = problem.initial_state(self.rho0, self.b0, self.u0)
        return problem, state0


def _initial_field(spec: str, grid: Grid, component: str):
    """Expression, or file:<path> loading one component of a field file."""
    spec = spec.strip()
    if spec.startswith("file:"):
        from .io import read_fields

        state = read_fields(spec[len("file:"):].strip(), grid)
        if component == "rho":
            return state.rho
        if component == "b":
            return state.b
        return state.u
    if component == "u":
        return parse_vector(spec)
    return parse_scalar(spec)


def load_config(path: str) -> Config:
    """Parse and validate; raises ConfigError listing every violation."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            text = fh.read()
        parser.read_string(text, source=path)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc

    problems: list[str] = []
    for section, keys in _REQUIRED.items():
        if not parser.has_section(section):
            problems.append(f"missing section [{section}]")
            continue
        for key in keys:
            if not parser.has_option(section, key):
                problems.append(f"missing key {key} in [{section}]")
    if problems:
        raise ConfigError("invalid config: " + "; ".join(problems), problems)

    def num(section, key, default=None):
        raw = parser.get(section, key, fallback=None)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            problems.append(f"[{section}] {key}: not a number: {raw!r}")
            return default

    def integer(section, key, default=None):
        raw = parser.get(section, key, fallback=None)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            problems.append(f"[{section}] {key}: not an integer: {raw!r}")
            return default

    nx = integer("grid", "nx")
    ny = integer("grid", "ny")
    lx = num("grid", "lx", 1.0)
    ly = num("grid", "ly", 1.0)
    gamma = num("physics", "gamma")
    mu = num("physics", "mu")
    lam = num("physics", "lambda")
    c_star = num("physics", "C_star", 0.5)
    c_star_upper = num("physics", "C_star_upper", 2.0)
    eps = num("regularization", "eps")
    delta = num("regularization", "delta")
    beta = num("regularization", "beta", 4.0)
    eps_init = num("regularization", "eps_init", 0.0)
    T = num("time", "T")
    dt = num("time", "dt")
    out_every = integer("time", "out_every", 1)

    tols = CheckTolerances(
        tol_energy=num("tolerances", "tol_energy", 1e-8),
        tol_dom=num("tolerances", "tol_dom", 1e-10),
        tol_mp=num("tolerances", "tol_mp", 1e-8),
        tol_neg=num("tolerances", "tol_neg", 1e-12),
    )
    picard_tol = num("tolerances", "picard_tol", 1e-11)
    tol_lin = num("tolerances", "tol_lin", 1e-11)
    picard_max = integer("tolerances", "picard_max", 50)
    max_lin = integer("tolerances", "max_lin", 500)
    if problems:
        raise ConfigError("invalid config: " + "; ".join(problems), problems)

    grid = None
    try:
        grid = build_grid(nx, ny, lx, ly)
    except (ValueError, TypeError) as exc:
        problems.append(f"grid: {exc}")

    phys = None
    try:
        phys = PhysParams(gamma=gamma, mu=mu, lam=lam)
    except ValueError as exc:
        problems.append(f"physics: {exc}")

    reg = None
    try:
        reg = RegParams(eps=eps, delta=delta, beta=beta, eps_init=eps_init,
                        picard_tol=picard_tol, picard_max=picard_max,
                        tol_lin=tol_lin, max_lin=max_lin)
    except ValueError as exc:
        problems.append(f"regularization: {exc}")

    if not 0 < c_star < c_star_upper:
        problems.append("admissible domination constants: "
                        f"need 0 < C_star < C_star_upper, got "
                        f"({c_star:g}, {c_star_upper:g})")
    if T is None or not T > 0:
        problems.append(f"time horizon T must be positive, got {T}")
    if dt is None or not dt > 0:
        problems.append(f"time step dt must be positive, got {dt}")
    if out_every is not None and out_every < 1:
        problems.append(f"out_every must be at least 1, got {out_every}")

    exprs = {}
    for section, key, kind in (("boundary", "u_B", "u"),
                               ("boundary", "rho_B", "rho"),
                               ("boundary", "b_B", "b"),
                               ("initial", "u0", "u"),
                               ("initial", "rho0", "rho"),
                               ("initial", "b0", "b")):
        raw = parser.get(section, key)
        try:
            if section == "boundary":
                exprs[key] = (parse_vector if kind == "u" else parse_scalar)(raw)
            else:
                exprs[key] = _initial_field(raw, grid, kind)
        except (ValueError, OSError) as exc:
            problems.append(f"[{section}] {key}: {exc}")

    if problems:
        raise ConfigError("invalid config: " + "; ".join(problems), problems)

    grid = classify_boundary(grid, exprs["u_B"])
    problems.extend(_hypothesis_violations(
        grid, exprs, phys, reg, c_star, c_star_upper))
    if problems:
        raise ConfigError("invalid config: " + "; ".join(problems), problems)

    return Config(grid=grid, phys=phys, reg=reg, tols=tols,
                  c_star=c_star, c_star_upper=c_star_upper,
                  T=T, dt=dt, out_every=out_every,
                  u_B=exprs["u_B"], rho_B=exprs["rho_B"], b_B=exprs["b_B"],
                  rho0=exprs["rho0"], b0=exprs["b0"], u0=exprs["u0"],
                  text=text)


def _hypothesis_violations(grid, exprs, phys, reg, c_star, c_star_upper):
    """Data admissibility: one named check per theory hypothesis."""
    from .fields import ScalarField
    found = []

    inflow = grid.inflow_faces
    rho_bf = boundary_scalar(grid, exprs["rho_B"])
    b_bf = boundary_scalar(grid, exprs["b_B"])
    if inflow.size:
        if not np.all(rho_bf[inflow] > 0):
            k = inflow[int(np.argmin(rho_bf[inflow]))]
            found.append("positive inflow density: rho_B = "
                         f"{rho_bf[k]:.6g} at boundary face {k}")
        if not np.all(b_bf[inflow] > 0):
            k = inflow[int(np.argmin(b_bf[inflow]))]
            found.append("positive inflow magnetic amplitude: b_B = "
                         f"{b_bf[k]:.6g} at boundary face {k}")
        lo = b_bf[inflow] - c_star * rho_bf[inflow]
        hi = c_star_upper * rho_bf[inflow] - b_bf[inflow]
        if lo.min() < 0:
            k = inflow[int(np.argmin(lo))]
            found.append(f"boundary lower domination: margin {lo.min():.6g} "
                         f"at boundary face {k}")
        if hi.min() < 0:
            k = inflow[int(np.argmin(hi))]
            found.append(f"boundary upper domination: margin {hi.min():.6g} "
                         f"at boundary face {k}")

    xc, yc = grid.cell_centers[:, 0], grid.cell_centers[:, 1]

    def cellvals(key):
        obj = exprs[key]
        if isinstance(obj, ScalarField):
            return obj.values
        return np.asarray(obj(xc, yc), dtype=float) * np.ones(grid.n_cells)

    rho0 = cellvals("rho0")
    b0 = cellvals("b0")
    if not np.all(np.isfinite(rho0)) or not np.all(np.isfinite(b0)):
        found.append("finite initial energy: non-finite initial data")
    else:
        if rho0.min() < 0:
            found.append("nonnegative initial density: min rho0 = "
                         f"{rho0.min():.6g} at cell {int(np.argmin(rho0))}")
        if b0.min() < 0:
            found.append("nonnegative initial magnetic amplitude: min b0 = "
                         f"{b0.min():.6g} at cell {int(np.argmin(b0))}")
        lo = b0 - c_star * rho0
        hi = c_star_upper * rho0 - b0
        if lo.min() < 0:
            found.append(f"lower domination: margin {lo.min():.6g} "
                         f"at cell {int(np.argmin(lo))}")
        if hi.min() < 0:
            found.append(f"upper domination: margin {hi.min():.6g} "
                         f"at cell {int(np.argmin(hi))}")

    u0obj = exprs["u0"]
    from .fields import VectorField
    if isinstance(u0obj, VectorField):
        u0 = u0obj.values
    else:
        u0 = np.asarray(u0obj(xc, yc), dtype=float) * np.ones((grid.n_cells, 2))
    if not np.all(np.isfinite(u0)):
        found.append("finite initial energy: non-finite initial velocity")
    return found
