"""Structured rectangular grid with tagged boundary faces.

Cell-centered layout on [0, lx] x [0, ly]: cell (i, j) covers
[i*dx, (i+1)*dx] x [j*dy, (j+1)*dy], its center sits at
((i+0.5)*dx, (j+0.5)*dy), and the flat index is j*nx + i.

Interior faces are enumerated once with a fixed P -> N orientation (normal
along +x or +y).  Boundary faces carry the outward normal and midpoint and,
after `classify_boundary`, an inflow/outflow/characteristic tag decided by
the sign of u_B . n at the midpoint.  Faces where |u_B . n| falls below the
classification tolerance are characteristic: the scheme treats them as
walls, so the cached normal velocity `bf_un_eff` is exactly zero there.

Grids are immutable; `classify_boundary` returns a new tagged grid.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

CHARACTERISTIC = "characteristic"
INFLOW = "inflow"
OUTFLOW = "outflow"

TAG_CHARACTERISTIC = 0
TAG_INFLOW = 1
TAG_OUTFLOW = 2

_TAG_NAMES = {
    TAG_CHARACTERISTIC: CHARACTERISTIC,
    TAG_INFLOW: INFLOW,
    TAG_OUTFLOW: OUTFLOW,
}

#: relative tolerance for calling a face characteristic
TAG_RTOL = 1e-12


@dataclass(frozen=True)
class BoundaryFace:
    """One boundary face of the rectangle.

    Attributes
    ----------
    index : position in the grid's boundary-face enumeration
    cell : flat index of the adjacent cell
    midpoint : face midpoint (on the domain boundary)
    normal : outward unit normal
    length : face measure (dy on vertical edges, dx on horizontal ones)
    tag : "inflow" | "outflow" | "characteristic", None before classification
    """

    index: int
    cell: int
    midpoint: tuple[float, float]
    normal: tuple[float, float]
    length: float
    tag: str | None = None


@dataclass(frozen=True, eq=False)
class Grid:
    nx: int
    ny: int
    lx: float
    ly: float
    dx: float
    dy: float
    cell_centers: np.ndarray            # (n_cells, 2)
    boundary_faces: tuple[BoundaryFace, ...]

    # interior faces, P -> N orientation (normal = +x for axis 0, +y for axis 1)
    if_p: np.ndarray                    # (n_if,) owner cell index
    if_n: np.ndarray                    # (n_if,) neighbour cell index
    if_area: np.ndarray                 # (n_if,) face measure
    if_dist: np.ndarray                 # (n_if,) center-to-center distance
    if_axis: np.ndarray                 # (n_if,) 0 = x-face, 1 = y-face

    # boundary faces, flat arrays parallel to `boundary_faces`
    bf_cell: np.ndarray                 # adjacent cell
    bf_cell2: np.ndarray                # next cell inward (extrapolated traces)
    bf_area: np.ndarray
    bf_half: np.ndarray                 # center-to-face distance
    bf_normal: np.ndarray               # (n_bf, 2) outward unit normal
    bf_mid: np.ndarray                  # (n_bf, 2)

    # filled by classify_boundary
    bf_tag: np.ndarray | None = None    # int codes (TAG_*)
    bf_un: np.ndarray | None = None     # u_B . n at face midpoints
    bf_un_eff: np.ndarray | None = None  # scheme value: 0 on characteristic faces

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def n_boundary_faces(self) -> int:
        return len(self.boundary_faces)

    def cell_index(self, i: int, j: int) -> int:
        return j * self.nx + i

    @property
    def tagged(self) -> bool:
        return self.bf_tag is not None

    def _require_tags(self) -> np.ndarray:
        if self.bf_tag is None:
            raise ValueError("grid has no boundary tags; call classify_boundary first")
        return self.bf_tag

    @property
    def inflow_faces(self) -> np.ndarray:
        return np.flatnonzero(self._require_tags() == TAG_INFLOW)

    @property
    def outflow_faces(self) -> np.ndarray:
        return np.flatnonzero(self._require_tags() == TAG_OUTFLOW)

    @property
    def characteristic_faces(self) -> np.ndarray:
        return np.flatnonzero(self._require_tags() == TAG_CHARACTERISTIC)

    def face_subset(self, subset: str) -> np.ndarray:
        """Indices of boundary faces in a named subset."""
        if subset == "all":
            return np.arange(self.n_boundary_faces)
        if subset == INFLOW:
            return self.inflow_faces
        if subset == OUTFLOW:
            return self.outflow_faces
        if subset == CHARACTERISTIC:
            return self.characteristic_faces
        raise ValueError(f"unknown boundary subset {subset!r}")


def build_grid(nx: int, ny: int, lx: float = 1.0, ly: float = 1.0) -> Grid:
    """Construct the grid, enumerating interior and boundary faces.

    Requires nx, ny >= 2 and positive extents.
    """
    if not (isinstance(nx, (int, np.integer)) and isinstance(ny, (int, np.integer))):
        raise ValueError("nx and ny must be integers")
    if nx < 2 or ny < 2:
        raise ValueError(f"need nx, ny >= 2, got ({nx}, {ny})")
    if not (lx > 0 and ly > 0):
        raise ValueError(f"need positive extents, got ({lx}, {ly})")
    nx, ny = int(nx), int(ny)
    dx, dy = lx / nx, ly / ny

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
    centers = np.column_stack([
        ((ii + 0.5) * dx).ravel(),
        ((jj + 0.5) * dy).ravel(),
    ])

    # interior x-faces: between (i, j) and (i+1, j)
    ix, jx = np.meshgrid(np.arange(nx - 1), np.arange(ny))
    xp = (jx * nx + ix).ravel()
    xn = xp + 1
    # interior y-faces: between (i, j) and (i, j+1)
    iy, jy = np.meshgrid(np.arange(nx), np.arange(ny - 1))
    yp = (jy * nx + iy).ravel()
    yn = yp + nx

    if_p = np.concatenate([xp, yp]).astype(np.int64)
    if_n = np.concatenate([xn, yn]).astype(np.int64)
    n_xf = xp.size
    if_area = np.concatenate([np.full(n_xf, dy), np.full(yp.size, dx)])
    if_dist = np.concatenate([np.full(n_xf, dx), np.full(yp.size, dy)])
    if_axis = np.concatenate([
        np.zeros(n_xf, dtype=np.int64),
        np.ones(yp.size, dtype=np.int64),
    ])

    # boundary faces: left, right, bottom, top (stable order)
    j_edge = np.arange(ny)
    i_edge = np.arange(nx)
    cells = np.concatenate([
        j_edge * nx,                  # left column
        j_edge * nx + (nx - 1),       # right column
        i_edge,                       # bottom row
        (ny - 1) * nx + i_edge,       # top row
    ]).astype(np.int64)
    cells2 = np.concatenate([
        np.minimum(j_edge * nx + 1, j_edge * nx + (nx - 1)),
        j_edge * nx + (nx - 2),
        nx + i_edge,
        (ny - 2) * nx + i_edge,
    ]).astype(np.int64)
    normals = np.concatenate([
        np.tile([-1.0, 0.0], (ny, 1)),
        np.tile([1.0, 0.0], (ny, 1)),
        np.tile([0.0, -1.0], (nx, 1)),
        np.tile([0.0, 1.0], (nx, 1)),
    ])
    mids = np.concatenate([
        np.column_stack([np.zeros(ny), (j_edge + 0.5) * dy]),
        np.column_stack([np.full(ny, lx), (j_edge + 0.5) * dy]),
        np.column_stack([(i_edge + 0.5) * dx, np.zeros(nx)]),
        np.column_stack([(i_edge + 0.5) * dx, np.full(nx, ly)]),
    ])
    areas = np.concatenate([
        np.full(ny, dy), np.full(ny, dy), np.full(nx, dx), np.full(nx, dx),
    ])
    halves = np.concatenate([
        np.full(ny, dx / 2), np.full(ny, dx / 2),
        np.full(nx, dy / 2), np.full(nx, dy / 2),
    ])

    faces = tuple(
        BoundaryFace(
            index=k,
            cell=int(cells[k]),
            midpoint=(float(mids[k, 0]), float(mids[k, 1])),
            normal=(float(normals[k, 0]), float(normals[k, 1])),
            length=float(areas[k]),
        )
        for k in range(cells.size)
    )

    return Grid(
        nx=nx, ny=ny, lx=float(lx), ly=float(ly), dx=dx, dy=dy,
        cell_centers=centers, boundary_faces=faces,
        if_p=if_p, if_n=if_n, if_area=if_area, if_dist=if_dist, if_axis=if_axis,
        bf_cell=cells, bf_cell2=cells2, bf_area=areas, bf_half=halves,
        bf_normal=normals, bf_mid=mids,
    )


def classify_boundary(grid: Grid, u_b) -> Grid:
    """Tag boundary faces by the sign of u_B . n at their midpoints.

    `u_b` is any callable (x, y) -> (..., 2) boundary velocity.  The
    tolerance below which a face counts as characteristic is
    TAG_RTOL * max |u_B| over the face midpoints; those faces get
    bf_un_eff = 0 so every downstream consumer sees a true wall.
    """
    vals = np.asarray(u_b(grid.bf_mid[:, 0], grid.bf_mid[:, 1]), dtype=float)
    vals = vals.reshape(grid.n_boundary_faces, 2)
    if not np.all(np.isfinite(vals)):
        raise ValueError("boundary velocity produced non-finite values")
    un = np.einsum("fd,fd->f", vals, grid.bf_normal)
    speed = np.linalg.norm(vals, axis=1)
    tol = TAG_RTOL * (speed.max() if speed.size else 0.0)

    tags = np.full(grid.n_boundary_faces, TAG_CHARACTERISTIC, dtype=np.int8)
    tags[un < -tol] = TAG_INFLOW
    tags[un > tol] = TAG_OUTFLOW
    un_eff = np.where(tags == TAG_CHARACTERISTIC, 0.0, un)

    faces = tuple(
        replace(f, tag=_TAG_NAMES[int(tags[k])])
        for k, f in enumerate(grid.boundary_faces)
    )
    return replace(grid, boundary_faces=faces, bf_tag=tags, bf_un=un, bf_un_eff=un_eff)


def refine(grid: Grid, factor: int = 2) -> Grid:
    """Uniformly refined copy of the same rectangle (tags not carried over)."""
    if factor < 1:
        raise ValueError("refinement factor must be >= 1")
    return build_grid(grid.nx * factor, grid.ny * factor, grid.lx, grid.ly)
