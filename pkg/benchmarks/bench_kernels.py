"""Time the compiled kernels against the numpy fallback on representative inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import time

import numpy as np

from wsdfm import _fallback

try:
    from wsdfm import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def cases(rng):
    V = 128
    data = rng.integers(0, V, (100_000, 2))
    drafts = rng.integers(0, V, (2_000, 2))
    tokens = rng.integers(0, V, (100_000, 2))
    probs = rng.random((100_000, V))
    u = rng.random(100_000)
    src = rng.integers(0, 8, (16, 2))
    dst = rng.integers(0, 8, (16, 2))
    x = rng.integers(0, 8, (20_000, 2))
    kap = rng.random(20_000)
    return {
        "knn_indices (2k x 100k, k=5)": lambda m: m.knn_indices(drafts, data, 5),
        "histogram2d (100k)": lambda m: m.histogram2d(tokens, V),
        "categorical_rows (100k x 128)": lambda m: m.categorical_rows(probs, u),
        "pair_posterior (20k states, 16 pairs)": lambda m: m.pair_posterior(x, src, dst, kap, 8),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':40s} {'python [s]':>12s} {'cython [s]':>12s} {'speed-up':>9s}")
    for name, call in cases(rng).items():
        t_py = best_of(lambda: call(_fallback), args.repeat)
        if _kernels is None:
            print(f"{name:40s} {t_py:12.4f} {'n/a':>12s} {'':>9s}")
            continue
        t_cy = best_of(lambda: call(_kernels), args.repeat)
        print(f"{name:40s} {t_py:12.4f} {t_cy:12.4f} {t_py / t_cy:8.1f}x")


if __name__ == "__main__":
    main()
