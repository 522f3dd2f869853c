"""Timing comparison of the numba and numpy kernel backends.

Runs each raster kernel on synthetic inputs sized like a fundus photo
and prints per-backend wall times plus the speedup.  The first numba
call in each benchmark is discarded so compilation is not billed to
the measurement.

Usage: python3 benchmarks/bench_kernels.py [--size 512] [--repeats 3]
"""

from __future__ import annotations

import argparse
import os
import time

import numpy as np

from avtree import _kernels


def _photo(rng: np.random.Generator, size: int) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    base = 90 + 50 * np.sin(xx / 37.0) + 30 * np.cos(yy / 53.0)
    noisy = base + rng.normal(0.0, 12.0, (size, size))
    return np.floor(np.clip(noisy, 0, 255)).astype(np.float32)


def _blobs(rng: np.random.Generator, size: int, count: int) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    mask = np.zeros((size, size), dtype=bool)
    for _ in range(count):
        cy, cx = rng.integers(size // 8, 7 * size // 8, 2)
        r = rng.integers(size // 40, size // 10)
        mask |= (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    return mask


def _time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=512, help="image side length")
    parser.add_argument("--repeats", type=int, default=3, help="timed runs per case")
    args = parser.parse_args()

    rng = np.random.default_rng(7)
    photo = _photo(rng, args.size)
    mask = _blobs(rng, args.size, 12)
    kernel = 2 * (args.size // 20) + 1

    cases = [
        ("median_filter (k=%d)" % kernel, lambda: _kernels.median_filter(photo, kernel)),
        ("zhang_suen", lambda: _kernels.zhang_suen(mask)),
        ("label_components", lambda: _kernels.label_components(mask)),
    ]

    print(f"image {args.size}x{args.size}, best of {args.repeats}")
    print(f"{'kernel':<24} {'numpy':>10} {'numba':>10} {'speedup':>9}")
    for name, fn in cases:
        os.environ[_kernels.BACKEND_ENV] = "numba"
        fn()  # compile outside the timed region
        t_numba = _time(fn, args.repeats)
        os.environ[_kernels.BACKEND_ENV] = "numpy"
        t_numpy = _time(fn, args.repeats)
        os.environ.pop(_kernels.BACKEND_ENV, None)
        print(f"{name:<24} {t_numpy:>9.3f}s {t_numba:>9.3f}s {t_numpy / t_numba:>8.1f}x")


if __name__ == "__main__":
    main()
