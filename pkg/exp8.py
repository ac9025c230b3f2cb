"""Scratch harness for the directional-ordering experiment (not shipped)."""
import sys
import time
import tempfile
import pathlib

import numpy as np

from refstream.synthetic import benchmark_stream
from refstream.datasets import write_csv
from refstream.grid import load_manifest, run_grid

KINDS = ["drift", "regime", "periodic", "drift", "periodic",
         "regime", "drift", "periodic", "regime", "periodic"]


def experiment(corpus_seed, length, defaults, detectors=None):
    root = pathlib.Path(tempfile.mkdtemp())
    names = []
    for i, kind in enumerate(KINDS):
        values, marks = benchmark_stream(length, seed=corpus_seed + i, kind=kind)
        name = f"{kind}_{i:02d}"
        write_csv(root / f"{name}.csv", values, anomalies=marks)
        names.append(name)
    dets = detectors or sorted(
        {f"sw-{m}" for m in ("nn", "den", "cc", "freq")}
        | {f"fr-{m}" for m in ("nn", "den", "cc", "freq")}
        | {f"{ls}-nn" for ls in ("fr", "lw", "sw", "ures", "ares")}
        | {f"{ls}-cc" for ls in ("fr", "lw", "sw", "ures", "ares")})
    (root / "manifest.ini").write_text(
        "[manifest]\n"
        f"datasets = {', '.join(n + '.csv' for n in names)}\n"
        f"detectors = {', '.join(dets)}\n"
        "output_dir = results\nseed = 11\n"
        "[defaults]\n" + "\n".join(f"{k} = {v}" for k, v in defaults.items()) + "\n")
    report = run_grid(load_manifest(root / "manifest.ini"))
    assert not report["failures"], report["failures"]
    return report


def means(report):
    def mean_auc(sel):
        vals = [p["roc_auc"] for p in report["pairs"]
                if sel(p["detector"]) and p["roc_auc"] is not None]
        return float(np.mean(vals))
    return {lab: mean_auc(sel) for lab, sel in
            (("sw", lambda d: d.startswith("sw-")),
             ("fr", lambda d: d.startswith("fr-")),
             ("lw", lambda d: d.startswith("lw-")),
             ("ures", lambda d: d.startswith("ures-")),
             ("ares", lambda d: d.startswith("ares-")),
             ("cc", lambda d: d.endswith("-cc")),
             ("nn", lambda d: d.endswith("-nn")),
             ("den", lambda d: d.endswith("-den")),
             ("freq", lambda d: d.endswith("-freq")))}


if __name__ == "__main__":
    length = int(sys.argv[1]) if len(sys.argv) > 1 else 3000
    seeds = [int(s) for s in sys.argv[2].split(",")] if len(sys.argv) > 2 else [100]
    defaults = {"ks_window": 60}
    if len(sys.argv) > 3:
        for tok in sys.argv[3].split(","):
            k, v = tok.split("=")
            defaults[k] = v
    for corpus_seed in seeds:
        t0 = time.perf_counter()
        m = means(experiment(corpus_seed, length, defaults))
        ok1 = "OK " if m["sw"] > m["fr"] else "FAIL"
        ok2 = "OK " if m["cc"] > m["nn"] else "FAIL"
        print(f"seed={corpus_seed} T={length} {defaults}: "
              f"sw={m['sw']:.3f} fr={m['fr']:.3f} {ok1} cc={m['cc']:.3f} nn={m['nn']:.3f} {ok2} "
              f"| lw={m['lw']:.3f} ures={m['ures']:.3f} ares={m['ares']:.3f} "
              f"den={m['den']:.3f} freq={m['freq']:.3f} ({time.perf_counter()-t0:.0f}s)",
              flush=True)
