#!/usr/bin/env python3
"""Throughput comparison of the numba kernels against the numpy fallback.

Times the four window kernels (scatter, gather, squared scatter, fused
normal product) on a synthetic smoothing workload and prints one table row
per kernel and backend.  Useful for checking whether the jit path is worth
it on a given machine, and for spotting regressions in either path.

    python3 benchmarks/kernel_benchmark.py [--n 200000] [--dim 3] [--level 5]
"""
import argparse
import time

import numpy as np

from splinemg import build_space, kernels
from splinemg.system import design_factors


def make_workload(n, dim, level, degree=3, seed=0):
    gen = np.random.default_rng(seed)
    spaces = tuple(build_space(0.0, 1.0, level, degree) for _ in range(dim))
    factors = design_factors(spaces, gen.random((n, dim)))
    x_cols = gen.standard_normal(factors.n_cols)
    x_rows = gen.standard_normal(factors.n_rows)
    return factors, x_cols, x_rows


def bench(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=200_000, help="data points")
    parser.add_argument("--dim", type=int, default=3, help="covariate dimension")
    parser.add_argument("--level", type=int, default=5, help="grid level")
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    f, x_cols, x_rows = make_workload(args.n, args.dim, args.level)
    print(
        f"workload: n={args.n}, dim={args.dim}, level={args.level}, "
        f"coefficients={f.n_rows}, window={f.rel.shape[0]}"
    )

    runs = {
        "scatter": lambda k: k["scatter"](
            f.values, f.base, f.rel, f.digits, x_cols, np.zeros(f.n_rows)
        ),
        "gather": lambda k: k["gather"](
            f.values, f.base, f.rel, f.digits, x_rows, np.empty(f.n_cols)
        ),
        "scatter_squares": lambda k: k["scatter_squares"](
            f.values, f.base, f.rel, f.digits, np.zeros(f.n_rows)
        ),
        "gram_matvec": lambda k: k["gram_matvec"](
            f.values, f.base, f.rel, f.digits, x_rows, np.zeros(f.n_rows)
        ),
    }

    backends = ["numpy"]
    if kernels.NUMBA_ENABLED:
        backends.insert(0, "numba")
    else:
        print("numba unavailable; timing the numpy fallback only")

    print(f"{'kernel':<16} " + " ".join(f"{b + ' [ms]':>12}" for b in backends) +
          ("  speedup" if len(backends) == 2 else ""))
    for name, run in runs.items():
        row = [f"{name:<16}"]
        timings = []
        for backend in backends:
            table = kernels.get_backend(backend)
            run(table)  # warm-up / jit compile
            timings.append(bench(lambda: run(table), args.repeats))
            row.append(f"{timings[-1] * 1e3:>12.2f}")
        if len(timings) == 2:
            row.append(f"  {timings[1] / timings[0]:>6.1f}x")
        print(" ".join(row))


if __name__ == "__main__":
    main()
