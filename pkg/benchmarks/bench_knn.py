#!/usr/bin/env python3
"""Benchmark the kNN kernels: compiled extension vs pure-numpy fallback.

The two backends are bit-identical by contract; this script shows what
the compiled core buys on the shapes the pipeline actually runs:
spatial graphs over full 12,000-point scans and feature-space graphs
inside the dynamic-graph model.

Usage: python benchmarks/bench_knn.py [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from vortexseg import _core_py

try:
    from vortexseg import _core
except ImportError:
    _core = None

CASES = [
    # (label, n, d, k, kernel)
    ("scan spatial kNN", 12_000, 2, 20, "grid"),
    ("scan spatial kNN", 12_000, 2, 20, "brute"),
    ("training cloud spatial", 1_024, 2, 20, "grid"),
    ("edgeconv features d=3", 1_024, 3, 20, "brute"),
    ("edgeconv features d=64", 1_024, 64, 20, "brute"),
    ("edgeconv features d=64", 4_096, 64, 20, "brute"),
]


def _run(module, kernel: str, pts: np.ndarray, k: int, repeats: int) -> float:
    fn = module.knn_grid if kernel == "grid" else module.knn_bruteforce
    fn(pts, k)  # warm up
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(pts, k)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    if _core is None:
        print("compiled core not built; showing the python fallback only\n")

    rng = np.random.default_rng(12345)
    header = f"{'case':>28} {'kernel':>6} {'python':>10} {'compiled':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for label, n, d, k, kernel in CASES:
        pts = np.ascontiguousarray(rng.uniform(0.0, 700.0, size=(n, d)))
        t_py = _run(_core_py, kernel, pts, k, args.repeats)
        if _core is not None:
            t_c = _run(_core, kernel, pts, k, args.repeats)
            same = np.array_equal(
                (_core.knn_grid if kernel == "grid" else _core.knn_bruteforce)(pts, k),
                (_core_py.knn_grid if kernel == "grid" else _core_py.knn_bruteforce)(pts, k),
            )
            assert same, "backends disagree!"
            print(f"{label:>28} {kernel:>6} {t_py * 1e3:9.1f}ms {t_c * 1e3:9.1f}ms "
                  f"{t_py / t_c:7.1f}x")
        else:
            print(f"{label:>28} {kernel:>6} {t_py * 1e3:9.1f}ms {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()
