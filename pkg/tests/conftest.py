"""Shared fixtures: small tagged grids and a general inflow-outflow problem."""

import numpy as np
import pytest

from mhdflow import (PhysParams, RegParams, SimulationProblem, build_grid,
                     classify_boundary, parse_scalar, parse_vector)


@pytest.fixture
def grid8():
    return build_grid(8, 8, 1.0, 1.0)


@pytest.fixture
def mixed_ub():
    # left/bottom inflow, right/top outflow, nonconstant along the boundary
    return parse_vector("pair(affine(1.0, 0.0, 0.4); constant(0.2))")


@pytest.fixture
def tagged8(grid8, mixed_ub):
    return classify_boundary(grid8, mixed_ub)


@pytest.fixture
def phys():
    return PhysParams(gamma=1.4, mu=0.1, lam=0.05)


@pytest.fixture
def reg():
    return RegParams(eps=0.01, delta=0.05, beta=4.0)


def make_problem(nx=12, eps=0.01, delta=0.05, ub_spec=None, c_star=0.5,
                 c_star_upper=2.0, **reg_kw):
    """General inflow-outflow setup used across solver-level tests."""
    ub = parse_vector(ub_spec or "pair(affine(1.0, 0.0, 0.4); constant(0.2))")
    prob = SimulationProblem(
        build_grid(nx, nx, 1.0, 1.0), ub,
        parse_scalar("constant(1.1)"), parse_scalar("constant(1.0)"),
        PhysParams(gamma=1.4, mu=0.1, lam=0.05),
        RegParams(eps=eps, delta=delta, beta=4.0, **reg_kw),
        c_star=c_star, c_star_upper=c_star_upper)
    state0 = prob.initial_state(
        parse_scalar("gaussian(0.3, 0.4, 0.5, 0.2, 1.0)"),
        parse_scalar("trig(1.1, 0.08, 1, 1)"),
        parse_vector("pair(constant(0.9); constant(0.2))"))
    return prob, state0


def smooth_cell_scalar(grid, rng, lo=0.8, hi=1.4):
    """Random smooth positive cell array (few low trig modes)."""
    x, y = grid.cell_centers[:, 0], grid.cell_centers[:, 1]
    base = rng.uniform(lo + 0.2, hi - 0.2)
    vals = np.full(grid.n_cells, base)
    for _ in range(3):
        ax = rng.uniform(-0.08, 0.08)
        kx, ky = rng.integers(0, 3, 2)
        vals += ax * np.cos(kx * np.pi * x) * np.cos(ky * np.pi * y)
    return np.clip(vals, lo, hi)


def smooth_cell_velocity(grid, rng, scale=1.0):
    x, y = grid.cell_centers[:, 0], grid.cell_centers[:, 1]
    out = np.empty((grid.n_cells, 2))
    for d in range(2):
        base = rng.uniform(-0.5, 0.5) * scale
        out[:, d] = base
        for _ in range(2):
            a = rng.uniform(-0.2, 0.2) * scale
            kx, ky = rng.integers(0, 3, 2)
            out[:, d] += a * np.cos(kx * np.pi * x) * np.cos(ky * np.pi * y)
    return out
