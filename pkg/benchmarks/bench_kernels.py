#!/usr/bin/env python3
"""Benchmark the compiled Kaczmarz trial kernel against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--trials 50] [--k-max 2000]
"""

import argparse
import time

import numpy as np

from kaczlab import FixedNoise, gen_gaussian, make_measurements, row_norm_distribution
from kaczlab.kernels import BACKEND, run_trial_errors, run_trial_errors_python
from kaczlab.rka import sample_rows


def bench(fn, args, trials):
    best = np.inf
    for _ in range(3):
        t0 = time.perf_counter()
        for _ in range(trials):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / trials)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--k-max", type=int, default=2000)
    ap.add_argument("--m", type=int, default=150)
    ap.add_argument("--n", type=int, default=50)
    args = ap.parse_args()

    sys_ = gen_gaussian(args.m, args.n, 1.0, 1)
    dist = row_norm_distribution(sys_)
    rng = np.random.default_rng(2)
    eta = rng.standard_normal(args.m) * 0.1
    y, _ = make_measurements(sys_, FixedNoise(eta))
    rows = sample_rows(dist, rng.random(args.k_max))
    x0 = rng.standard_normal(args.n)
    inv = 1.0 / sys_.row_norms**2
    call = (sys_.a, y, inv, rows, x0, sys_.x_true)

    print(f"system {args.m}x{args.n}, k_max={args.k_max}, {args.trials} trials/run")
    print(f"selected backend at import: {BACKEND}")
    t_py = bench(run_trial_errors_python, call, max(args.trials // 10, 1))
    print(f"python  : {t_py * 1e3:9.3f} ms/trial")
    if BACKEND == "compiled":
        t_c = bench(run_trial_errors, call, args.trials)
        print(f"compiled: {t_c * 1e3:9.3f} ms/trial  ({t_py / t_c:5.1f}x speedup)")
        a = run_trial_errors(*call)
        b = run_trial_errors_python(*call)
        print(f"max |diff| between backends: {np.max(np.abs(a - b)):.3e}")
    else:
        print("compiled kernel unavailable; only the fallback was timed")


if __name__ == "__main__":
    main()
