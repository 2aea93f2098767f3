#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Times the two hot recurrences (block LDL* inertia count, RK4 Riccati sweep)
on representative problem sizes and prints a comparison table.

Usage:
    python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import numpy as np

from spectralstrip import kernels


def random_field(seed, n, dim, scale=3.0):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, dim, dim)) + 1j * rng.standard_normal((n, dim, dim))
    return np.ascontiguousarray(-scale * (B @ B.conj().swapaxes(1, 2)) / dim)


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="smaller sizes, fewer repeats")
    args = ap.parse_args()

    if kernels.BACKEND != "compiled":
        print("compiled extension not available; build it first "
              "(python setup.py build_ext --inplace)")
        return 1

    if args.quick:
        cases = [(6001, 1), (6001, 3)]
        repeats_c, repeats_p = 3, 1
    else:
        cases = [(6001, 1), (6001, 3), (60001, 1), (60001, 3)]
        repeats_c, repeats_p = 5, 1

    rows = []
    for n, dim in cases:
        V = random_field(n * dim, n, dim)
        h = 24.0 / (n - 1)

        t_c = timeit(lambda: kernels.inertia_count(V, h, -0.5), repeats_c)
        t_p = timeit(lambda: kernels.pure_inertia_count(V, h, -0.5), repeats_p)
        rows.append((f"inertia_count  n={n:6d} N={dim}", t_c, t_p))

        lam = 2.0 * float(np.max(np.abs(V)))
        t_c = timeit(lambda: kernels.riccati_sweep(V, h, lam, 1e6, 4, n), repeats_c)
        t_p = timeit(lambda: kernels.pure_riccati_sweep(V, h, lam, 1e6, 4, n), repeats_p)
        rows.append((f"riccati_sweep  n={n:6d} N={dim}", t_c, t_p))

    print(f"{'kernel':34s} {'compiled':>12s} {'pure':>12s} {'speedup':>9s}")
    for name, t_c, t_p in rows:
        print(f"{name:34s} {t_c * 1e3:10.2f}ms {t_p * 1e3:10.2f}ms {t_p / t_c:8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
