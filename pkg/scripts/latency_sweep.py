#!/usr/bin/env python3
"""Wall-clock scalability sweep: per-point latency versus stream length.

Runs one detector per family over streams of increasing length at a fixed
window size and prints total and per-point times. With bounded state the
per-point latency should stay flat as the stream grows.

Usage:
    python scripts/latency_sweep.py --lengths 4000 8000 12000 16000 20000
"""

from __future__ import annotations

import argparse
import time

from refstream.detector import StreamPoint, build_detector, named_config
from refstream.synthetic import gaussian_stream

DETECTORS = ("sw-nn", "sw-den", "sw-cc", "sw-freq")


def time_run(name: str, n_points: int, window: int, seed: int) -> float:
    config = named_config(
        name, window=window, ks_window=window, probation_len=window, seed=seed,
        rep_window=1 if name != "sw-freq" else 16, k=5,
    )
    detector = build_detector(config)
    values = gaussian_stream(n_points, seed=seed)
    points = [StreamPoint(i + 1, float(v)) for i, v in enumerate(values)]
    start = time.perf_counter()
    detector.run(points)
    return time.perf_counter() - start


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--lengths", type=int, nargs="+",
                        default=[4000, 8000, 12000, 16000, 20000])
    parser.add_argument("--window", type=int, default=150)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    print(f"{'detector':10s} {'points':>8s} {'total_s':>9s} {'us/point':>9s}")
    for name in DETECTORS:
        for n in args.lengths:
            best = min(time_run(name, n, args.window, args.seed + r)
                       for r in range(args.repeats))
            print(f"{name:10s} {n:8d} {best:9.3f} {best / n * 1e6:9.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
