"""Timing comparison of the compiled face-sweep kernels vs the NumPy reference.

Both implementations are imported directly (bypassing the runtime selector
in mhdflow.kernels), checked for bit-identical output on shared inputs, and
then timed with timeit on a ladder of grid sizes.

Usage:
    python3 benchmarks/bench_kernels.py [--sizes 64,128,256] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from mhdflow import build_grid, classify_boundary, parse_vector
from mhdflow import _kernels_py

try:
    from mhdflow import _kernels
except ImportError:
    _kernels = None


def make_inputs(nx, seed=0, dt=1e-3):
    ub = parse_vector("pair(affine(1.0, 0.0, 0.4); constant(0.2))")
    g = classify_boundary(build_grid(nx, nx, 1.0, 1.0), ub)
    rng = np.random.default_rng(seed)
    nf = g.if_p.shape[0]
    out = g.outflow_faces
    adv = g.if_area * rng.normal(0.0, 1.0, nf)
    dif = 0.01 * g.if_area / g.if_dist
    diag0 = np.full(g.n_cells, g.cell_area / dt)
    out_cell = g.bf_cell[out]
    out_coef = g.bf_area[out] * np.abs(g.bf_un_eff[out])
    c_new = rng.uniform(0.5, 1.5, g.n_cells)
    F = g.if_area * rng.normal(0.0, 1.0, nf)
    q = rng.uniform(0.1, 1.0, nf)
    return g, dict(
        transport_matrix_coo=(diag0, g.if_p, g.if_n, adv, dif, out_cell, out_coef),
        mass_fluxes=(c_new, g.if_p, g.if_n, adv, dif),
        convection_matrix_coo=(F, g.if_p, g.if_n, out_cell, out_coef),
        pair_matrix_coo=(q, g.if_p, g.if_n),
    )


def check_parity(inputs):
    for name, args in inputs.items():
        got = getattr(_kernels, name)(*args)
        want = getattr(_kernels_py, name)(*args)
        got = got if isinstance(got, tuple) else (got,)
        want = want if isinstance(want, tuple) else (want,)
        for a, b in zip(got, want):
            if not np.array_equal(np.asarray(a), np.asarray(b)):
                raise AssertionError(f"parity failure in {name}")


def bench(fn, args, repeat, number):
    times = timeit.repeat(lambda: fn(*args), repeat=repeat, number=number)
    return min(times) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="64,128,256",
                    help="comma-separated grid sizes (nx = ny)")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    if _kernels is None:
        print("compiled extension not available; nothing to compare")
        return

    print(f"backends: compiled={_kernels.IMPL!r}  reference={_kernels_py.IMPL!r}")
    header = f"{'kernel':<24} {'nx':>5} {'compiled':>12} {'python':>12} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for nx in sizes:
        _, inputs = make_inputs(nx)
        check_parity(inputs)
        number = max(1, 200_000 // (nx * nx))
        for name, a in inputs.items():
            tc = bench(getattr(_kernels, name), a, args.repeat, number)
            tp = bench(getattr(_kernels_py, name), a, args.repeat, number)
            print(f"{name:<24} {nx:>5} {tc * 1e6:>10.1f}us {tp * 1e6:>10.1f}us "
                  f"{tp / tc:>7.2f}x")


if __name__ == "__main__":
    main()
