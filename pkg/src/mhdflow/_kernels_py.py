"""Pure NumPy face-sweep kernels.

These are the per-iteration hot loops of the implicit scheme: sparse-matrix
entry generation for the upwind transport operator, total mass-flux
reconstruction, and the upwind convection operator for momentum. A compiled
twin of this module may be available as ``mhdflow._kernels``; both must
produce bit-identical arrays in the same entry order, which the test suite
enforces.

Entry layout contracts (relied on by tests and by the compiled twin):
  transport_matrix_coo: n diagonal entries first, then 4 entries per
    interior face in the order (P,P), (P,N), (N,N), (N,P), then one
    diagonal entry per outflow face.
  convection_matrix_coo: 2 entries per interior face, (P,up), (N,up),
    then one diagonal entry per outflow face.
  pair_matrix_coo: 4 entries per interior face, (P,P), (P,N), (N,N), (N,P).
"""

from __future__ import annotations

import numpy as np

IMPL = "python"


def transport_matrix_coo(diag0, if_p, if_n, adv, dif, out_cell, out_coef):
    """COO triplets of the implicit upwind transport operator.

    diag0: base diagonal (cell_area/dt per cell).
    adv:   signed advective coefficient A*un per interior face, P -> N.
    dif:   diffusive coefficient eps*A/h per interior face, >= 0.
    out_cell/out_coef: outflow boundary faces, coef = A*un_eff > 0.

    Column sums over the interior-face block vanish, which is what makes
    the assembled operator an M-matrix and the solve positivity-preserving.
    """
    n = diag0.shape[0]
    nf = if_p.shape[0]
    nout = out_cell.shape[0]
    rows = np.empty(n + 4 * nf + nout, dtype=np.int64)
    cols = np.empty_like(rows)
    vals = np.empty(rows.shape[0], dtype=np.float64)

    rows[:n] = np.arange(n)
    cols[:n] = rows[:n]
    vals[:n] = diag0

    aplus = np.maximum(adv, 0.0)
    aminus = np.maximum(-adv, 0.0)
    blk = slice(n, n + 4 * nf)
    r = rows[blk].reshape(nf, 4)
    c = cols[blk].reshape(nf, 4)
    v = vals[blk].reshape(nf, 4)
    r[:, 0] = if_p; c[:, 0] = if_p; v[:, 0] = aplus + dif
    r[:, 1] = if_p; c[:, 1] = if_n; v[:, 1] = -(aminus + dif)
    r[:, 2] = if_n; c[:, 2] = if_n; v[:, 2] = aminus + dif
    r[:, 3] = if_n; c[:, 3] = if_p; v[:, 3] = -(aplus + dif)

    rows[n + 4 * nf:] = out_cell
    cols[n + 4 * nf:] = out_cell
    vals[n + 4 * nf:] = out_coef
    return rows, cols, vals


def mass_fluxes(c_new, if_p, if_n, adv, dif):
    """Total (advective upwind + diffusive) mass flux per interior face, P -> N."""
    cp = c_new[if_p]
    cn = c_new[if_n]
    return np.maximum(adv, 0.0) * cp - np.maximum(-adv, 0.0) * cn + dif * (cp - cn)


def convection_matrix_coo(F, if_p, if_n, out_cell, out_flux):
    """COO triplets of upwind momentum convection with given mass fluxes.

    Per interior face the momentum flux is F * w_up with up chosen by
    sign(F); outflow faces contribute F_out on the diagonal. Inflow faces
    carry boundary data and are assembled on the right-hand side instead.
    """
    nf = if_p.shape[0]
    nout = out_cell.shape[0]
    rows = np.empty(2 * nf + nout, dtype=np.int64)
    cols = np.empty_like(rows)
    vals = np.empty(rows.shape[0], dtype=np.float64)

    up = np.where(F >= 0.0, if_p, if_n)
    r = rows[: 2 * nf].reshape(nf, 2)
    c = cols[: 2 * nf].reshape(nf, 2)
    v = vals[: 2 * nf].reshape(nf, 2)
    r[:, 0] = if_p; c[:, 0] = up; v[:, 0] = F
    r[:, 1] = if_n; c[:, 1] = up; v[:, 1] = -F

    rows[2 * nf:] = out_cell
    cols[2 * nf:] = out_cell
    vals[2 * nf:] = out_flux
    return rows, cols, vals


def pair_matrix_coo(q, if_p, if_n):
    """COO triplets of the face-pair form q_f*(w_N - w_P)*(e_P + e_N)/2.

    Used for the density-gradient velocity coupling: row P and row N both
    receive q/2*(w_N - w_P).
    """
    nf = if_p.shape[0]
    rows = np.empty(4 * nf, dtype=np.int64)
    cols = np.empty_like(rows)
    vals = np.empty(rows.shape[0], dtype=np.float64)
    half = 0.5 * q
    r = rows.reshape(nf, 4)
    c = cols.reshape(nf, 4)
    v = vals.reshape(nf, 4)
    r[:, 0] = if_p; c[:, 0] = if_p; v[:, 0] = -half
    r[:, 1] = if_p; c[:, 1] = if_n; v[:, 1] = half
    r[:, 2] = if_n; c[:, 2] = if_n; v[:, 2] = half
    r[:, 3] = if_n; c[:, 3] = if_p; v[:, 3] = -half
    return rows, cols, vals
