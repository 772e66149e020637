"""Time the compiled kernels against their pure-numpy twins.

Imports both implementations directly, so one process measures the pair
regardless of XAL_BACKEND. The first numba call pays JIT compilation;
a warmup round keeps that out of the timings. Each kernel is also
cross-checked: both backends must produce the same answer on the same
workload before their times are reported.

Usage: python3 benchmarks/bench_backends.py [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from xal._kernels import numpy_impl

try:
    from xal._kernels import numba_impl
except ImportError:
    numba_impl = None


def timed(fn, *args, repeats: int) -> tuple[float, object]:
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def workload_logistic(rng):
    n, d = 4000, 12
    X = rng.normal(size=(n, d))
    truth = rng.normal(size=d)
    y = (X @ truth + 0.5 * rng.normal(size=n) > 0).astype(np.float64)
    return (np.ascontiguousarray(X), y, 1e-3, 0.5, 1e-6, 2000)


def workload_stump(rng):
    n, d = 4000, 40
    X = np.ascontiguousarray(rng.normal(size=(n, d)))
    sort_idx = np.ascontiguousarray(np.argsort(X, axis=0).T)
    w = np.full(n, 1.0 / n)
    y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    return (X, sort_idx, w, y)


def workload_lloyd(rng):
    # sparse signed vectors, the shape the cluster module feeds it
    X = np.zeros((3000, 33))
    for i in range(3000):
        dims = rng.choice(33, size=2, replace=False)
        X[i, dims] = rng.uniform(-0.5, 0.5, size=2)
    centroids = X[rng.choice(3000, size=40, replace=False)].copy()
    return (np.ascontiguousarray(X), np.ascontiguousarray(centroids), 100, 1e-6)


def workload_cut(rng):
    values = np.sort(rng.normal(size=100_000))
    targets = (rng.random(100_000) < 0.4).astype(np.float64)
    return (values, targets)


def same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        if a.dtype.kind in "iu":
            return bool(np.array_equal(a, b))
        return bool(np.allclose(a, b, rtol=1e-9, atol=1e-12))
    if isinstance(a, float):
        return bool(np.isclose(a, b, rtol=1e-9, atol=1e-12))
    return a == b


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats per kernel; best is kept")
    args = parser.parse_args()

    if numba_impl is None:
        print("numba is not importable; nothing to compare")
        return

    rng = np.random.default_rng(0)
    kernels = [
        ("logistic_gd", "logistic_gd", workload_logistic(rng)),
        ("best_stump", "best_stump", workload_stump(rng)),
        ("lloyd", "lloyd", workload_lloyd(rng)),
        ("best_cut", "best_cut", workload_cut(rng)),
    ]

    print(f"{'kernel':<14} {'numpy':>10} {'numba':>10} {'speedup':>9}")
    for name, attr, work in kernels:
        np_fn = getattr(numpy_impl, attr)
        nb_fn = getattr(numba_impl, attr)
        nb_fn(*work)  # JIT warmup
        t_np, out_np = timed(np_fn, *work, repeats=args.repeats)
        t_nb, out_nb = timed(nb_fn, *work, repeats=args.repeats)
        if not same(out_np, out_nb):
            raise SystemExit(f"{name}: backends disagree on the same workload")
        print(f"{name:<14} {t_np * 1e3:>8.2f}ms {t_nb * 1e3:>8.2f}ms "
              f"{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
