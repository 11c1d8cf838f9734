#!/usr/bin/env python3
"""Compare the numba and numpy row kernels.

Usage:
    python benchmarks/bench_kernels.py [--rows 4000] [--repeat 50]

Prints the median wall time per call for each kernel and backend, the speedup,
and the largest absolute difference between the two results. The first numba
call (compilation or cache load) is excluded from the timings.
"""
import argparse
import statistics
import time

import numpy as np

from saginmec import _kernels as K


def _inputs(m, rng):
    v = rng.uniform(-40, 40, (m, 2))
    a = rng.uniform(-4, 4, (m, 2))
    om = np.linalg.norm(v, axis=1) + 0.5
    w = rng.uniform(0.1, 1.0, m)
    energy = (v, a, om, w, 9.26e-4, 2250.0, 2250.0 / 9.8 ** 2)

    q = rng.uniform(0, 10000, (m, 2))
    p = rng.uniform(0, 10000, (m, 2))
    s0 = np.sum((q + rng.normal(0, 50, (m, 2)) - p) ** 2, axis=1)
    r0u = rng.uniform(1e6, 5e6, m)
    c1u = rng.uniform(1e-3, 1e-1, m)
    r0d = rng.uniform(1e6, 5e6, m)
    c1d = rng.uniform(1e-3, 1e-1, m)
    latency = (q, p, s0, r0u, c1u, rng.uniform(1e5, 1e6, m), r0d, c1d,
               rng.uniform(1e5, 1e6, m), rng.uniform(1.0, 3.0, m))

    z = rng.uniform(0, 1, m)
    decision = (z, rng.uniform(1e5, 1e6, m), rng.uniform(1e5, 1e6, m), rng.uniform(1e8, 1e9, m),
                np.full(m, 0.8), 1e11, 5e10, 5e6, rng.uniform(1, 100, m), rng.uniform(1, 1000, m), 5e6,
                rng.uniform(1, 100, m), rng.uniform(1, 1000, m))
    return {"energy_rows": energy, "latency_rows": latency, "decision_latency": decision}


def _time(fn, args, repeat):
    out = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        out.append(time.perf_counter() - t)
    return statistics.median(out)


def _maxdiff(x, y):
    if isinstance(x, tuple):
        return max(_maxdiff(a, b) for a, b in zip(x, y))
    x, y = np.asarray(x), np.asarray(y)
    finite = np.isfinite(x) & np.isfinite(y)
    if not np.array_equal(np.isfinite(x), np.isfinite(y)):
        return np.inf
    return float(np.max(np.abs(x[finite] - y[finite]), initial=0.0))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=4000)
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if not K._HAVE_NUMBA:
        print("numba is not importable; only the numpy kernels exist")
        return
    rng = np.random.default_rng(args.seed)
    inputs = _inputs(args.rows, rng)
    print(f"rows={args.rows} repeat={args.repeat}")
    print(f"{'kernel':18s} {'numpy [us]':>12s} {'numba [us]':>12s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, a in inputs.items():
        f_np = K.IMPLEMENTATIONS["numpy"][name]
        f_nb = K.IMPLEMENTATIONS["numba"][name]
        a = tuple(np.ascontiguousarray(x, dtype=float) if isinstance(x, np.ndarray) else float(x)
                  for x in a)
        f_nb(*a)  # compile or load from cache
        t_np = _time(f_np, a, args.repeat)
        t_nb = _time(f_nb, a, args.repeat)
        diff = _maxdiff(f_np(*a), f_nb(*a))
        print(f"{name:18s} {t_np * 1e6:12.1f} {t_nb * 1e6:12.1f} {t_np / t_nb:8.2f} {diff:11.3e}")


if __name__ == "__main__":
    main()
