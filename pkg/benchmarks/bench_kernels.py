"""Time the HJB solve with the compiled and the numpy kernel.

    python3 benchmarks/bench_kernels.py [--scale 1.0] [--repeat 3]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from harvestreg._backend import BACKENDS
from harvestreg.hjb import PdeGrid, solve
from harvestreg.model import reference_params


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--scale", type=float, default=1.0, help="grid scale relative to 2000x5000")
    ap.add_argument("--repeat", type=int, default=3)
    ns = ap.parse_args()
    params = reference_params()
    grid = PdeGrid.from_params(params).scaled(ns.scale)
    print(f"grid {grid.n_space} x {grid.n_time}")
    results = {}
    for name in sorted(BACKENDS):
        results[name] = solve(params, grid, backend=name).w
        t = best_of(lambda: solve(params, grid, backend=name), ns.repeat)
        print(f"{name:>7}: {t:8.3f} s")
    if len(results) == 2:
        print(f"max |cython - python| = {np.max(np.abs(results['cython'] - results['python'])):.2e}")


if __name__ == "__main__":
    main()
