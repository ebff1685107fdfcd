#!/usr/bin/env python3
"""Compare the numba and pure-numpy kernel paths on batch-sized inputs.

Usage: python3 benchmarks/bench_kernels.py [--rows 2000000] [--repeats 5]

The same kernels power trip extraction (pair_scan) and bulk distance work
(haversine_arrays); the selected path at import time follows the
SCOOTERTRIPS_NUMBA environment flag, but this script times both explicitly.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from scootertrips import kernels


def make_columns(rows: int, seed: int = 7):
    rng = np.random.default_rng(seed)
    codes = np.sort(rng.integers(0, rows // 300 + 1, size=rows)).astype(np.int64)
    days = rng.integers(737094, 737108, size=rows).astype(np.int64)
    order = np.lexsort((days, codes))
    lats = rng.uniform(33.7484, 33.7892, size=rows)
    lons = rng.uniform(-84.4056, -84.3597, size=rows)
    return codes[order], days[order], lats, lons


def best_of(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=2_000_000)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    codes, days, lats, lons = make_columns(args.rows)
    half = args.rows // 2
    h_args = (lats[:half], lons[:half], lats[half : 2 * half], lons[half : 2 * half])

    rows = []
    rows.append(
        ("haversine_arrays", "numpy", best_of(lambda: kernels.haversine_arrays_numpy(*h_args), args.repeats))
    )
    rows.append(("pair_scan", "numpy", best_of(lambda: kernels.pair_scan_numpy(codes, days, lats, lons, 1.0), args.repeats)))
    if kernels._NUMBA_AVAILABLE:
        kernels.haversine_arrays_numba(*(a[:10] for a in h_args))  # compile outside the timed region
        kernels.pair_scan_numba(codes[:10], days[:10], lats[:10], lons[:10], 1.0)
        rows.append(
            ("haversine_arrays", "numba", best_of(lambda: kernels.haversine_arrays_numba(*h_args), args.repeats))
        )
        rows.append(
            ("pair_scan", "numba", best_of(lambda: kernels.pair_scan_numba(codes, days, lats, lons, 1.0), args.repeats))
        )
    else:
        print("numba unavailable; timing the numpy path only")

    print(f"\nrows={args.rows:,}  best of {args.repeats}")
    print(f"{'kernel':<20}{'path':<8}{'seconds':>10}{'rows/s':>14}")
    for kernel, path, seconds in rows:
        per = args.rows / seconds if seconds else float("inf")
        print(f"{kernel:<20}{path:<8}{seconds:>10.4f}{per:>14,.0f}")
    by_kernel: dict[str, dict[str, float]] = {}
    for kernel, path, seconds in rows:
        by_kernel.setdefault(kernel, {})[path] = seconds
    for kernel, paths in by_kernel.items():
        if "numba" in paths and "numpy" in paths:
            print(f"{kernel}: numba is {paths['numpy'] / paths['numba']:.1f}x the numpy path")


if __name__ == "__main__":
    main()
