#!/usr/bin/env python3
"""Generate a labelled synthetic corpus plus a ready-to-run grid manifest.

Usage:
    python scripts/make_synthetic_corpus.py out_corpus --datasets 10 --length 1500

Then:
    refstream grid out_corpus/manifest.ini
"""

from __future__ import annotations

import argparse
from pathlib import Path

from refstream.datasets import write_csv
from refstream.synthetic import benchmark_stream

KINDS = ("drift", "regime", "periodic", "noisy")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--datasets", type=int, default=10)
    parser.add_argument("--length", type=int, default=1500)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--detectors", default="all-20")
    args = parser.parse_args()

    args.out_dir.mkdir(parents=True, exist_ok=True)
    names, groups = [], []
    for i in range(args.datasets):
        kind = KINDS[i % len(KINDS)]
        values, marks = benchmark_stream(args.length, seed=args.seed + i, kind=kind)
        name = f"{kind}_{i:02d}"
        write_csv(args.out_dir / f"{name}.csv", values, anomalies=marks)
        names.append(name)
        groups.append((name, "drifting" if kind in ("drift", "regime") else "stable"))

    manifest = args.out_dir / "manifest.ini"
    lines = [
        "[manifest]",
        "datasets = " + ", ".join(f"{n}.csv" for n in names),
        f"detectors = {args.detectors}",
        "output_dir = results",
        f"seed = {args.seed}",
        "parallelism = 1",
        "",
        "[groups]",
    ]
    lines += [f"{name} = {label}" for name, label in groups]
    manifest.write_text("\n".join(lines) + "\n")
    print(f"wrote {args.datasets} datasets and {manifest}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
