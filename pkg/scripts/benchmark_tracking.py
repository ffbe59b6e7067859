"""Tracking throughput versus slice count for a fixed number of objects.

    python scripts/benchmark_tracking.py --points 50 --slices 2500 5000 10000
"""

import argparse
import gc
import time

import numpy as np

from slicetrack.core import DetectionSlice, Point, TrackerConfig
from slicetrack.matching import track


def drifting_grid(n_slices, n_points, seed=0):
    cols = 10
    rows = -(-n_points // cols)
    gx, gy = np.meshgrid(np.arange(cols) * 25.0 + 5, np.arange(rows) * 25.0 + 5)
    base = np.c_[gx.ravel(), gy.ravel()][:n_points]
    rng = np.random.default_rng(seed)
    phase = rng.uniform(0, 2 * np.pi, size=base.shape)
    freq = rng.uniform(0.05, 0.2, size=base.shape)
    return [
        DetectionSlice(s, tuple(Point(x, y) for x, y in
                                (base + s * np.array([0.5, 0.2]) + 1.5 * np.sin(freq * s + phase)).tolist()))
        for s in range(n_slices)
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=50)
    ap.add_argument("--slices", type=int, nargs="+", default=[2500, 5000, 10000])
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    config = TrackerConfig(2.0)
    cases = {n: drifting_grid(n, args.points) for n in args.slices}
    for sl in cases.values():
        track(sl, config)
    best = {n: np.inf for n in cases}
    for _ in range(args.repeats):
        for n, sl in cases.items():
            gc.collect()
            t0 = time.perf_counter()
            track(sl, config)
            best[n] = min(best[n], time.perf_counter() - t0)
    first = min(best)
    for n, t in best.items():
        print(f"{n:>7} slices: {t:.3f}s  {1e6 * t / n:6.1f} us/slice  "
              f"x{t / best[first]:.2f} time for x{n / first:.2f} slices")


if __name__ == "__main__":
    main()
