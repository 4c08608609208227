"""Numba kernels against their numpy twins on a few mesh sizes.

    python3 benchmarks/bench_kernels.py [--repeat 50] [--json out.json]

Both implementations are imported directly, so the GRIDNLS_NUMBA flag
does not matter here. The first numba call (compilation) is excluded.
"""
import argparse
import json
import timeit

import numpy as np

from gridnls import kernels
from gridnls.functions import build_mesh
from gridnls.grid import GridSpec, build_grid

SIZES = [(2, 8), (3, 8), (3, 32)]
P = 4.0


def cases(mesh, vals):
    l, r, h = mesh.left, mesh.right, mesh.h
    grad = np.empty_like(vals)
    return {
        "power_integral": (
            lambda: kernels.power_integral_numba(vals, l, r, h, P),
            lambda: kernels.power_integral_numpy(vals, l, r, h, P),
        ),
        "mass_integral": (
            lambda: kernels.mass_integral_numba(vals, l, r, h),
            lambda: kernels.mass_integral_numpy(vals, l, r, h),
        ),
        "derivative_sums": (
            lambda: kernels.derivative_sums_numba(vals, l, r, h),
            lambda: kernels.derivative_sums_numpy(vals, l, r, h),
        ),
        "energy_and_gradient": (
            lambda: kernels.energy_and_gradient_numba(vals, l, r, h, P, grad),
            lambda: kernels.energy_and_gradient_numpy(vals, l, r, h, P, grad),
        ),
    }


def best_of(fn, repeat):
    number = 20
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--json", help="also write the table as JSON")
    args = ap.parse_args()

    rows = []
    print(f"{'R':>3} {'n':>4} {'nodes':>8}  {'kernel':<20} {'numba us':>10} {'numpy us':>10} {'speedup':>8}")
    for radius, n in SIZES:
        mesh = build_mesh(build_grid(GridSpec(3, 1.0, radius)), n)
        vals = np.random.default_rng(0).standard_normal(mesh.n_nodes)
        for name, (fast, slow) in cases(mesh, vals).items():
            a, b = fast(), slow()  # warm-up, and the two must agree
            if not np.allclose(a, b, rtol=1e-10):
                raise SystemExit(f"{name}: backends disagree ({a} vs {b})")
            t_fast = best_of(fast, args.repeat) * 1e6
            t_slow = best_of(slow, args.repeat) * 1e6
            rows.append({"radius": radius, "n": n, "nodes": mesh.n_nodes, "kernel": name,
                         "numba_us": t_fast, "numpy_us": t_slow})
            print(f"{radius:>3} {n:>4} {mesh.n_nodes:>8}  {name:<20} {t_fast:>10.1f} "
                  f"{t_slow:>10.1f} {t_slow / t_fast:>7.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
