"""Grid construction, face enumeration, boundary classification."""

import numpy as np
import pytest

from mhdflow import build_grid, classify_boundary, refine
from mhdflow.expressions import parse_vector, uniform
from mhdflow.grid import TAG_CHARACTERISTIC, TAG_INFLOW, TAG_OUTFLOW


def test_cell_layout_and_indexing():
    g = build_grid(5, 3, 2.0, 1.5)
    assert g.n_cells == 15
    assert g.dx == pytest.approx(0.4)
    assert g.dy == pytest.approx(0.5)
    for j in range(3):
        for i in range(5):
            k = g.cell_index(i, j)
            assert k == j * 5 + i
            assert g.cell_centers[k, 0] == pytest.approx((i + 0.5) * g.dx)
            assert g.cell_centers[k, 1] == pytest.approx((j + 0.5) * g.dy)


def test_interior_face_counts_and_orientation():
    nx, ny = 6, 4
    g = build_grid(nx, ny)
    n_xf = (nx - 1) * ny
    n_yf = nx * (ny - 1)
    assert g.if_p.shape == (n_xf + n_yf,)
    # P -> N along the positive axis: N is the +x or +y neighbour of P
    step = np.where(g.if_axis == 0, 1, nx)
    assert np.array_equal(g.if_n, g.if_p + step)
    assert np.all(g.if_area[g.if_axis == 0] == pytest.approx(g.dy))
    assert np.all(g.if_area[g.if_axis == 1] == pytest.approx(g.dx))
    assert np.all(g.if_dist[g.if_axis == 0] == pytest.approx(g.dx))
    # every unordered neighbour pair appears exactly once
    pairs = set(zip(g.if_p.tolist(), g.if_n.tolist()))
    assert len(pairs) == g.if_p.shape[0]


def test_boundary_face_geometry():
    g = build_grid(4, 3, 1.0, 1.0)
    assert g.n_boundary_faces == 2 * (4 + 3)
    # outward normals are unit and the midpoint lies on the rectangle edge
    assert np.allclose(np.linalg.norm(g.bf_normal, axis=1), 1.0)
    on_edge = (np.isclose(g.bf_mid[:, 0], 0.0) | np.isclose(g.bf_mid[:, 0], 1.0)
               | np.isclose(g.bf_mid[:, 1], 0.0) | np.isclose(g.bf_mid[:, 1], 1.0))
    assert on_edge.all()
    # perimeter from face measures
    assert g.bf_area.sum() == pytest.approx(4.0)
    # the second cell inward lies one stride along the inward normal
    for k in range(g.n_boundary_faces):
        c, c2 = g.bf_cell[k], g.bf_cell2[k]
        assert c != c2
    # boundary cell centers sit half a stride from the face
    d = np.einsum("fd,fd->f", g.cell_centers[g.bf_cell] - g.bf_mid, g.bf_normal)
    assert np.allclose(d, -g.bf_half)


def test_build_grid_validation():
    with pytest.raises(ValueError):
        build_grid(1, 4)
    with pytest.raises(ValueError):
        build_grid(4, 4, -1.0, 1.0)
    with pytest.raises(ValueError):
        build_grid(4.5, 4)


def test_classification_splits_boundary():
    g = build_grid(6, 6)
    ub = parse_vector("uniform(1.0, 0.0)")
    t = classify_boundary(g, ub)
    left = np.isclose(t.bf_mid[:, 0], 0.0)
    right = np.isclose(t.bf_mid[:, 0], 1.0)
    horiz = ~(left | right)
    assert np.all(t.bf_tag[left] == TAG_INFLOW)
    assert np.all(t.bf_tag[right] == TAG_OUTFLOW)
    assert np.all(t.bf_tag[horiz] == TAG_CHARACTERISTIC)
    assert np.all(t.bf_un_eff[horiz] == 0.0)
    assert np.all(t.bf_un_eff[left] == pytest.approx(-1.0))
    assert t.inflow_faces.size == 6
    assert t.outflow_faces.size == 6
    assert t.characteristic_faces.size == 12


def test_classification_flips_with_velocity_sign():
    g = build_grid(5, 7)
    fwd = classify_boundary(g, parse_vector("pair(affine(0.8, 0.0, 0.3); constant(0.25))"))
    bwd = classify_boundary(g, parse_vector("pair(affine(-0.8, 0.0, -0.3); constant(-0.25))"))
    assert np.array_equal(fwd.bf_tag == TAG_INFLOW, bwd.bf_tag == TAG_OUTFLOW)
    assert np.array_equal(fwd.bf_tag == TAG_OUTFLOW, bwd.bf_tag == TAG_INFLOW)
    assert np.allclose(fwd.bf_un, -bwd.bf_un)


def test_untagged_grid_refuses_tag_queries():
    g = build_grid(4, 4)
    assert not g.tagged
    with pytest.raises(ValueError, match="classify_boundary"):
        g.inflow_faces
    tagged = classify_boundary(g, uniform(0.3, -0.1))
    assert tagged.tagged
    # original is untouched
    assert not g.tagged


def test_face_subset_names():
    t = classify_boundary(build_grid(4, 4), uniform(1.0, 0.0))
    assert t.face_subset("all").size == t.n_boundary_faces
    assert np.array_equal(t.face_subset("inflow"), t.inflow_faces)
    with pytest.raises(ValueError, match="unknown boundary subset"):
        t.face_subset("sideways")


def test_refinement_nests_cells():
    g = build_grid(3, 4, 1.2, 0.8)
    f = refine(g, 2)
    assert (f.nx, f.ny) == (6, 8)
    assert (f.lx, f.ly) == (g.lx, g.ly)
    # each coarse center is the mean of its four fine children
    fine = f.cell_centers.reshape(f.ny, f.nx, 2)
    for j in range(g.ny):
        for i in range(g.nx):
            block = fine[2 * j:2 * j + 2, 2 * i:2 * i + 2].reshape(4, 2)
            assert np.allclose(block.mean(axis=0),
                               g.cell_centers[g.cell_index(i, j)])
    with pytest.raises(ValueError):
        refine(g, 0)


def test_non_finite_boundary_velocity_rejected():
    g = build_grid(4, 4)

    def bad(x, y):
        out = np.full(np.broadcast(x, y).shape + (2,), np.nan)
        return out

    with pytest.raises(ValueError, match="non-finite"):
        classify_boundary(g, bad)
