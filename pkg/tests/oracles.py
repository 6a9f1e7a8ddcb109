"""Dense single-purpose reference implementations of both implicit steps.

Everything here is rebuilt from the scheme definition with plain Python
loops over (i, j) cells and dense NumPy linear algebra: no sparse kernels,
no reuse of the package's assembly code, and an independent boundary-face
sweep (left, right, bottom, top, re-derived from the rectangle geometry).
Agreement with the package solvers is required to 1e-10 in the sup norm.
"""

import numpy as np

RTOL_CHAR = 1e-12  # same characteristic-face tolerance as the grid tagging


def _boundary_faces(nx, ny, dx, dy, u_B):
    """Independent enumeration: (cell, midpoint, normal, area, half-dist)."""
    faces = []
    for j in range(ny):  # left
        faces.append((j * nx + 0, (0.0, (j + 0.5) * dy), (-1.0, 0.0), dy, dx / 2))
    for j in range(ny):  # right
        faces.append((j * nx + nx - 1, (nx * dx, (j + 0.5) * dy), (1.0, 0.0), dy, dx / 2))
    for i in range(nx):  # bottom
        faces.append((0 * nx + i, ((i + 0.5) * dx, 0.0), (0.0, -1.0), dx, dy / 2))
    for i in range(nx):  # top
        faces.append(((ny - 1) * nx + i, ((i + 0.5) * dx, ny * dy), (0.0, 1.0), dx, dy / 2))

    speeds = []
    for _, mid, _, _, _ in faces:
        g = np.asarray(u_B(mid[0], mid[1]), dtype=float).reshape(2)
        speeds.append(float(np.hypot(g[0], g[1])))
    tol = RTOL_CHAR * max(speeds)

    out = []
    for cell, mid, nrm, area, half in faces:
        g = np.asarray(u_B(mid[0], mid[1]), dtype=float).reshape(2)
        un = g[0] * nrm[0] + g[1] * nrm[1]
        if abs(un) <= tol:
            un = 0.0
        out.append({"cell": cell, "mid": mid, "normal": nrm, "area": area,
                    "half": half, "un": un, "g": g})
    return out


def _interior_faces(nx, ny, dx, dy):
    """(cellP, cellN, area, dist, axis) with the normal along +x or +y."""
    faces = []
    for j in range(ny):
        for i in range(nx - 1):
            faces.append((j * nx + i, j * nx + i + 1, dy, dx, 0))
    for j in range(ny - 1):
        for i in range(nx):
            faces.append((j * nx + i, (j + 1) * nx + i, dx, dy, 1))
    return faces


def dense_transport_solve(nx, ny, dx, dy, u_cells, u_B, eps, dt, c_old,
                          c_B_fn, source=None):
    """One backward-Euler upwind transport step, dense assembly.

    u_cells is (n, 2); c_B_fn maps a midpoint to the inflow datum.
    Returns the advanced cell array.
    """
    n = nx * ny
    area_K = dx * dy
    A = np.zeros((n, n))
    rhs = area_K / dt * np.asarray(c_old, dtype=float).copy()
    if source is not None:
        rhs += area_K * np.asarray(source, dtype=float)
    for k in range(n):
        A[k, k] += area_K / dt

    for P, N, fa, dist, axis in _interior_faces(nx, ny, dx, dy):
        un = 0.5 * (u_cells[P, axis] + u_cells[N, axis])
        adv = fa * un
        dif = eps * fa / dist
        ap, am = max(adv, 0.0), max(-adv, 0.0)
        A[P, P] += ap + dif
        A[P, N] -= am + dif
        A[N, N] += am + dif
        A[N, P] -= ap + dif

    for f in _boundary_faces(nx, ny, dx, dy, u_B):
        coef = f["area"] * f["un"]
        if f["un"] > 0.0:
            A[f["cell"], f["cell"]] += coef
        elif f["un"] < 0.0:
            rhs[f["cell"]] -= coef * float(c_B_fn(f["mid"]))
    return np.linalg.solve(A, rhs)


def dense_momentum_solve(nx, ny, dx, dy, u_B, u_guess, rho_old, rho_new,
                         u_old, pressure, rho_B_fn, eps, dt, mu, lam,
                         source=None):
    """One implicit momentum step, dense assembly in the full velocity.

    Mass fluxes are recomputed here from rho_new and the frozen velocity
    iterate, exactly as the scalar step defines them. Unknown layout is
    [u_x; u_y] of length 2n. Returns the (n, 2) velocity.
    """
    n = nx * ny
    area_K = dx * dy
    S = np.zeros((n, n))        # shared scalar block
    D = np.zeros((n, 2 * n))    # face-averaged divergence
    rhs = np.zeros((n, 2))

    for k in range(n):
        S[k, k] += area_K * rho_new[k] / dt
        rhs[k] += area_K / dt * rho_old[k] * u_old[k]
        if source is not None:
            rhs[k] += area_K * source[k]

    for P, N, fa, dist, axis in _interior_faces(nx, ny, dx, dy):
        un = 0.5 * (u_guess[P, axis] + u_guess[N, axis])
        adv = fa * un
        dif = eps * fa / dist
        F = max(adv, 0.0) * rho_new[P] - max(-adv, 0.0) * rho_new[N] \
            + dif * (rho_new[P] - rho_new[N])
        up = P if F >= 0.0 else N
        S[P, up] += F
        S[N, up] -= F

        t = mu * fa / dist
        S[P, P] += t
        S[P, N] -= t
        S[N, N] += t
        S[N, P] -= t

        if eps > 0.0:
            q = 0.5 * (eps * fa / dist) * (rho_new[N] - rho_new[P])
            S[P, P] -= q
            S[P, N] += q
            S[N, N] += q
            S[N, P] -= q

        w = fa / (2.0 * area_K)
        D[P, axis * n + P] += w
        D[P, axis * n + N] += w
        D[N, axis * n + P] -= w
        D[N, axis * n + N] -= w

    div_lift = np.zeros(n)
    for f in _boundary_faces(nx, ny, dx, dy, u_B):
        c = f["cell"]
        if f["un"] > 0.0:
            S[c, c] += f["area"] * f["un"] * rho_new[c]
        elif f["un"] < 0.0:
            F_in = f["area"] * f["un"] * float(rho_B_fn(f["mid"]))
            rhs[c] -= F_in * f["g"]
        t = mu * f["area"] / f["half"]
        S[c, c] += t
        rhs[c] += t * f["g"]
        div_lift[c] += f["area"] * f["un"] / area_K

    full = np.zeros((2 * n, 2 * n))
    full[:n, :n] = S
    full[n:, n:] = S
    full += (mu + lam) * area_K * (D.T @ D)

    rhs_flat = rhs.T.ravel().copy()
    rhs_flat += area_K * (D.T @ np.asarray(pressure, dtype=float))
    rhs_flat -= (mu + lam) * area_K * (D.T @ div_lift)
    sol = np.linalg.solve(full, rhs_flat)
    return sol.reshape(2, n).T
