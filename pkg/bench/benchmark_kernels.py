"""Benchmark the numba-jitted hot kernels against their pure-numpy fallbacks.

Usage: python bench/benchmark_kernels.py [--n 2000] [--reps 5]

The same functions are selected at import time by DISTREG_NO_NUMBA; here both
implementations are invoked directly so one process can compare them.
"""

import argparse
import time

import numpy as np

from distreg import _kernels


def timeit(fn, *args, reps=5):
    fn(*args)  # warm-up / JIT compile
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--reps", type=int, default=5)
    args = ap.parse_args()
    n = args.n

    if not _kernels.USING_NUMBA:
        print("numba path unavailable (DISTREG_NO_NUMBA set or import failed); "
              "benchmarking numpy against itself")
    numba_impls = _kernels._impls
    numpy_impls = _kernels._NUMPY_IMPLS

    rng = np.random.default_rng(0)
    a = rng.normal(size=n)
    b = rng.normal(size=n)
    w = np.full(n, 1.0 / n)
    xs = np.linspace(-3, 3, n)
    bw = np.full(n, 0.3)
    A = rng.normal(size=(400, 8))
    B = rng.normal(size=(400, 8))

    cases = [
        ("kernel_cross_mean", (a, w, b, w, 0, 1.0)),
        ("kde_pdf", (xs, a, w, bw, 0)),
        ("kde_cdf", (xs, a, w, bw, 0)),
        ("pairwise_sq_dists", (A, B)),
        ("ecdf", (xs, a, w)),
    ]
    print(f"{'kernel':22s} {'numpy':>12s} {'numba':>12s} {'speedup':>9s}")
    for name, fnargs in cases:
        t_np = timeit(numpy_impls[name], *fnargs, reps=args.reps)
        t_nb = timeit(numba_impls[name], *fnargs, reps=args.reps)
        ref = np.asarray(numpy_impls[name](*fnargs))
        got = np.asarray(numba_impls[name](*fnargs))
        assert np.allclose(ref, got, rtol=1e-10, atol=1e-12), name
        print(f"{name:22s} {t_np * 1e3:10.3f}ms {t_nb * 1e3:10.3f}ms "
              f"{t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
