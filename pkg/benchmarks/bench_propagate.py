"""Time the compiled and pure-Python propagation kernels on the same inputs.

    python3 benchmarks/bench_propagate.py [--steps N] [--repeat R]
"""

import argparse
import time

import numpy as np

from twomembrane.propagate import BACKENDS


def make_inputs(n=12, r=2, steps=200_000, seed=0):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    A = 0.9 * A / np.max(np.abs(np.linalg.eigvals(A)))  # contractive recursion
    Phi = np.vstack([A, rng.standard_normal((r, n))])
    w = rng.standard_normal((steps, n + r))
    return Phi, np.zeros(n), w


def bench(kernel, Phi, x0, w, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = kernel(Phi, x0, w, 0)
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    Phi, x0, w = make_inputs(steps=args.steps)
    results = {}
    for name, kernel in sorted(BACKENDS.items()):
        t, out = bench(kernel, Phi, x0, w, args.repeat)
        results[name] = out
        print(f"{name:>7s}: {t:8.4f} s  ({args.steps / t:,.0f} steps/s)")
    if {"cython", "python"} <= results.keys():
        dz = np.max(np.abs(results["cython"][0] - results["python"][0]))
        print(f"max |z_cython - z_python| = {dz:.3g}")
    else:
        print("compiled kernel not built; only the Python fallback was timed")


if __name__ == "__main__":
    main()
