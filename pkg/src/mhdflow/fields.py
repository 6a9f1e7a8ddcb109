"""Cell-centered fields on a structured grid, with quadrature and traces.

Scalars are flat arrays of length ``grid.n_cells`` ordered row-major
(j*nx + i); velocities are ``(n_cells, 2)``. Derivative reconstructions
use second-order central differences on the logically Cartesian layout
and are meant for diagnostics, not for the scheme itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid


@dataclass
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.grid.n_cells)

    @classmethod
    def from_expression(cls, grid: Grid, expr) -> "ScalarField":
        xc = grid.cell_centers
        return cls(grid, expr(xc[:, 0], xc[:, 1]))

    def as_grid(self) -> np.ndarray:
        """(ny, nx) view for plotting and finite differences."""
        return self.values.reshape(self.grid.ny, self.grid.nx)

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


@dataclass
class VectorField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.grid.n_cells, 2)

    @classmethod
    def from_expression(cls, grid: Grid, expr) -> "VectorField":
        xc = grid.cell_centers
        return cls(grid, expr(xc[:, 0], xc[:, 1]))

    def as_grid(self) -> np.ndarray:
        """(ny, nx, 2) view."""
        return self.values.reshape(self.grid.ny, self.grid.nx, 2)

    def copy(self) -> "VectorField":
        return VectorField(self.grid, self.values.copy())


def integrate(grid: Grid, values: np.ndarray) -> float:
    """Midpoint-rule cell integral of a cell array (any trailing shape)."""
    v = np.asarray(values, dtype=float)
    return float(grid.cell_area * v.sum()) if v.ndim == 1 else float(grid.cell_area * v.sum(axis=0).sum())


def boundary_integrate(grid: Grid, g: np.ndarray, subset: str = "all") -> float:
    """Sum of A_f * g_f over a tagged subset of boundary faces."""
    idx = grid.face_subset(subset)
    g = np.asarray(g, dtype=float)
    if g.shape[0] != grid.n_boundary_faces:
        raise ValueError("g must be given on all boundary faces")
    return float(np.sum(grid.bf_area[idx] * g[idx]))


def gradient(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Central-difference gradient, (n_cells, 2), second order inside."""
    f = np.asarray(values, dtype=float).reshape(grid.ny, grid.nx)
    dfdy, dfdx = np.gradient(f, grid.dy, grid.dx, edge_order=2)
    out = np.empty((grid.n_cells, 2))
    out[:, 0] = dfdx.reshape(-1)
    out[:, 1] = dfdy.reshape(-1)
    return out


def divergence(grid: Grid, vec: np.ndarray) -> np.ndarray:
    """Central-difference divergence of a (n_cells, 2) vector array."""
    v = np.asarray(vec, dtype=float).reshape(grid.ny, grid.nx, 2)
    dvx_dx = np.gradient(v[:, :, 0], grid.dx, axis=1, edge_order=2)
    dvy_dy = np.gradient(v[:, :, 1], grid.dy, axis=0, edge_order=2)
    return (dvx_dx + dvy_dy).reshape(-1)


def velocity_gradient(grid: Grid, vec: np.ndarray) -> np.ndarray:
    """Full gradient tensor G[c, i, j] = d u_i / d x_j, shape (n_cells, 2, 2)."""
    v = np.asarray(vec, dtype=float).reshape(grid.ny, grid.nx, 2)
    out = np.empty((grid.ny, grid.nx, 2, 2))
    for i in range(2):
        dy_, dx_ = np.gradient(v[:, :, i], grid.dy, grid.dx, edge_order=2)
        out[:, :, i, 0] = dx_
        out[:, :, i, 1] = dy_
    return out.reshape(grid.n_cells, 2, 2)


def extrema(values: np.ndarray) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    return float(v.min()), float(v.max())


def boundary_trace(grid: Grid, values: np.ndarray, order: int = 1) -> np.ndarray:
    """Field trace at boundary-face midpoints.

    order 1: adjacent cell value (what the scheme itself sees).
    order 2: linear extrapolation 1.5*c0 - 0.5*c1 through the two nearest
             cells along the face normal.
    """
    v = np.asarray(values, dtype=float)
    first = v[grid.bf_cell]
    if order == 1:
        return first.copy()
    if order != 2:
        raise ValueError("order must be 1 or 2")
    return 1.5 * first - 0.5 * v[grid.bf_cell2]


def boundary_trace_vector(grid: Grid, vec: np.ndarray, order: int = 1) -> np.ndarray:
    v = np.asarray(vec, dtype=float).reshape(grid.n_cells, 2)
    first = v[grid.bf_cell]
    if order == 1:
        return first.copy()
    if order != 2:
        raise ValueError("order must be 1 or 2")
    return 1.5 * first - 0.5 * v[grid.bf_cell2]


def extrema_boundary(grid: Grid, values: np.ndarray, subset: str = "all",
                     order: int = 1) -> tuple[float, float]:
    """Extremes of a field's trace over a tagged boundary subset."""
    idx = grid.face_subset(subset)
    if idx.size == 0:
        return (np.inf, -np.inf)
    tr = boundary_trace(grid, values, order=order)[idx]
    return float(tr.min()), float(tr.max())


def boundary_scalar(grid: Grid, expr) -> np.ndarray:
    """Evaluate a scalar expression at boundary-face midpoints."""
    mid = grid.bf_mid
    return np.asarray(expr(mid[:, 0], mid[:, 1]), dtype=float).reshape(grid.n_boundary_faces)


def boundary_velocity(grid: Grid, expr) -> np.ndarray:
    """Evaluate a vector expression at boundary-face midpoints, (n_bf, 2)."""
    mid = grid.bf_mid
    return np.asarray(expr(mid[:, 0], mid[:, 1]), dtype=float).reshape(grid.n_boundary_faces, 2)
