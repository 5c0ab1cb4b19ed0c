"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_core.py [--repeat N]

Each kernel runs on identical inputs under both backends; the table reports
the best wall time of ``--repeat`` runs and the speed-up. Outputs are checked
for equality before timing so that a faster but wrong kernel cannot pass.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from mddra import _kernels
from mddra.segmentation import _prefix_sums


def _cases():
    rng = np.random.default_rng(0)
    scores = rng.random(200_000)
    p1, p2 = _prefix_sums(np.sort(rng.random(100_000)))
    tol = 64 * np.finfo(float).eps * float(p2[-1])
    X = rng.normal(size=(5_000, 12))
    y = rng.integers(0, 3, 5_000).astype(np.int64)
    rows = np.arange(5_000, dtype=np.int64)
    features = np.arange(12, dtype=np.int64)
    state = (0x180EC6D33CFD0ABA, 0xD5A61266F0C9392C, 0xA9582618E03FC9AA, 0x39ABDC4529B1661C)
    return {
        "sliding_mean 2e5, w=5": lambda k: k.sliding_mean(scores, 5),
        "partition_dp 1e5, k=7": lambda k: k.partition_dp(p1, p2, 7, tol),
        "gini_best_split 5000x12": lambda k: k.gini_best_split(X, y, rows, features, 3, 1),
        "xoshiro256** 1e5 draws": lambda k: k.xoshiro256ss(state, 100_000),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    fast = _kernels.backend("compiled")
    slow = _kernels.backend("python")
    print(f"{'kernel':<26}{'compiled s':>12}{'python s':>12}{'speed-up':>10}")
    for name, run in _cases().items():
        if not _same(run(fast), run(slow)):
            raise SystemExit(f"{name}: backends disagree")
        tc = _best(lambda: run(fast), args.repeat)
        tp = _best(lambda: run(slow), args.repeat)
        print(f"{name:<26}{tc:>12.4f}{tp:>12.4f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
