#!/usr/bin/env python3
"""Benchmark the compiled compute kernels against the pure-Python backend.

Runs the three hot kernels (``ascending_series``, ``miller_ladder``,
``accumulate_angles``) on representative workloads with both backends,
checks that the results agree to near machine precision, and prints a
timing table with speedups.

Usage::

    python3 benchmarks/bench_kernels.py [--repeats N]

Exits non-zero if the compiled extension is unavailable or if the two
backends disagree beyond tolerance.
"""
import argparse
import sys
import time

import numpy as np

try:
    from abpaths import _kernels as compiled
except ImportError:
    print("compiled extension abpaths._kernels is not importable; "
          "build it with `pip install -e . --no-build-isolation`",
          file=sys.stderr)
    sys.exit(1)
from abpaths import _kernels_py as pure


def _time(fn, repeats):
    """Best-of-``repeats`` wall time of ``fn()`` in seconds."""
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        dt = time.perf_counter() - t0
        if dt < best:
            best = dt
    return best


def _rel(a, b):
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    denom = max(float(np.max(np.abs(b))), 1e-300)
    return float(np.max(np.abs(a - b))) / denom


def bench_ascending_series(repeats):
    orders = np.linspace(0.0, 12.0, 40)
    args = [0.3 + 0.0j, 1.0 + 0.5j, 2.0 - 1.0j, 0.05 + 0.0j]

    def run(mod):
        out = []
        for z in args:
            for nu in orders:
                val, _ = mod.ascending_series(float(nu), z)
                out.append(val)
        return np.array(out)

    ref = run(pure)
    got = run(compiled)
    err = _rel(got, ref)
    t_py = _time(lambda: run(pure), repeats)
    t_c = _time(lambda: run(compiled), repeats)
    return "ascending_series", t_py, t_c, err


def bench_miller_ladder(repeats):
    cases = [(0.25, 60, 8.0 + 0.0j), (0.0, 80, 20.0 + 0.0j),
             (0.5, 60, 5.0 - 2.0j), (0.75, 40, 1.0 + 1.0j)]

    def run(mod):
        out = []
        for nu0, n, z in cases:
            vals, _ = mod.miller_ladder(nu0, n, z)
            out.append(np.asarray(vals))
        return np.concatenate(out)

    ref = run(pure)
    got = run(compiled)
    err = _rel(got, ref)
    t_py = _time(lambda: run(pure), repeats)
    t_c = _time(lambda: run(compiled), repeats)
    return "miller_ladder", t_py, t_c, err


def bench_accumulate_angles(repeats):
    rng = np.random.default_rng(7)
    # A long random walk that stays away from the puncture points.
    steps = rng.normal(scale=0.3, size=(4000, 2))
    vertices = np.cumsum(steps, axis=0) + np.array([5.0, 5.0])
    centers = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])

    def run(mod):
        acc, clr = mod.accumulate_angles(vertices, centers)
        return np.concatenate([np.asarray(acc), [clr]])

    ref = run(pure)
    got = run(compiled)
    err = _rel(got, ref)
    t_py = _time(lambda: run(pure), repeats)
    t_c = _time(lambda: run(compiled), repeats)
    return "accumulate_angles", t_py, t_c, err


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats per kernel (best-of)")
    args = parser.parse_args(argv)

    rows = [
        bench_ascending_series(args.repeats),
        bench_miller_ladder(args.repeats),
        bench_accumulate_angles(args.repeats),
    ]
    print(f"{'kernel':<20} {'python (ms)':>12} {'compiled (ms)':>14} "
          f"{'speedup':>8} {'max rel diff':>13}")
    failed = False
    for name, t_py, t_c, err in rows:
        speed = t_py / t_c if t_c > 0 else float("inf")
        print(f"{name:<20} {t_py * 1e3:>12.3f} {t_c * 1e3:>14.3f} "
              f"{speed:>7.1f}x {err:>13.2e}")
        if err > 1e-12:
            failed = True
    if failed:
        print("backend disagreement above 1e-12", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
