#!/usr/bin/env python3
"""Timing comparison of the numba and numpy kernel backends.

Runs the three hot kernels (damped Newton grids, greedy separated-set
extraction, escape-time iteration) on identical inputs through both
backends, checks that the outputs agree, and reports best-of-repeat wall
times.  The jit warmup call is excluded from the timings.

    python3 bench/bench_kernels.py [--size N] [--repeats R]
"""

import argparse
import time

import numpy as np

from hfbound._kernels import numpy_backend
from hfbound.expr import parse_map


def best_time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(size=20000, repeats=3, out=print):
    try:
        from hfbound._kernels import numba_backend
    except ImportError:
        out("numba backend unavailable; nothing to compare")
        return []

    f = parse_map("z^2-0.1")
    rng = np.random.default_rng(17)

    seeds = rng.normal(size=size) + 1j * rng.normal(size=size)
    targets = np.zeros(size, dtype=np.complex128)
    tols = np.full(size, 1e-12)

    orbit_n = min(size // 10, 1500)
    orbits = np.cumsum(
        0.05 * (rng.normal(size=(orbit_n, 24)) + 1j * rng.normal(size=(orbit_n, 24))),
        axis=1,
    )

    escape_seeds = 2.2 * (rng.random(size) - 0.5) + 2.2j * (rng.random(size) - 0.5)

    cases = [
        (
            "newton_solve",
            lambda b: b.newton_solve(f, seeds, targets, tols),
            lambda a, b: np.allclose(a[0][a[1]], b[0][b[1]]) and (a[1] == b[1]).all(),
        ),
        (
            "greedy_counts",
            lambda b: b.greedy_counts(orbits, 0.1, 24),
            lambda a, b: (a == b).all(),
        ),
        (
            "escape_counts",
            lambda b: b.escape_counts(f, escape_seeds, 64, 2.0),
            lambda a, b: (a == b).all(),
        ),
    ]

    rows = []
    out(f"kernel backends on {size} seeds, best of {repeats}")
    out(f"{'kernel':<16} {'numpy':>10} {'numba':>10} {'speedup':>9}")
    for name, run, agree in cases:
        got_numba = run(numba_backend)  # warmup compiles here
        got_numpy = run(numpy_backend)
        if not agree(got_numpy, got_numba):
            raise AssertionError(f"{name}: backends disagree, timings are meaningless")
        t_numpy = best_time(lambda: run(numpy_backend), repeats)
        t_numba = best_time(lambda: run(numba_backend), repeats)
        rows.append((name, t_numpy, t_numba))
        out(f"{name:<16} {t_numpy * 1e3:>8.2f}ms {t_numba * 1e3:>8.2f}ms {t_numpy / t_numba:>8.1f}x")
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=20000, help="seeds per kernel")
    ap.add_argument("--repeats", type=int, default=3, help="timed repeats, best kept")
    args = ap.parse_args()
    bench(args.size, args.repeats)


if __name__ == "__main__":
    main()
