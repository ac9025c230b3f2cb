"""Command-line interface.

Subcommands: run (one detector, one dataset), grid (manifest), score
(metrics from an existing score file), characterize (dataset descriptors),
report (relative-performance tables). Exit codes: 0 success, 1 usage or
configuration error, 2 data error, 3 partial grid failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .datasets import load_csv, load_label_file
from .detector import DETECTOR_GRID, build_detector, named_config
from .errors import ConfigError, DataError, DegenerateGroupError
from .evaluation import NAB_PROFILES
from .grid import (
    delta_table,
    evaluate_records,
    load_manifest,
    read_config_overrides,
    read_score_csv,
    relative_table,
    run_grid,
    write_reference_config,
    write_score_csv,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PARTIAL = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refstream",
        description="streaming anomaly detection over evolving reference groups",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one detector over one dataset")
    run_p.add_argument("dataset", nargs="?", help="input CSV")
    run_p.add_argument("--detector", default="sw-nn",
                       help=f"one of {', '.join(DETECTOR_GRID)}")
    run_p.add_argument("--labels", help="sidecar JSON label file")
    run_p.add_argument("--config", help="detector config file")
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--out", help="score CSV path (default <dataset>__<detector>.csv)")
    run_p.add_argument("--profile", default="standard", choices=sorted(NAB_PROFILES))
    run_p.add_argument("--write-reference-config", metavar="PATH",
                       help="write a config file with every default and exit")

    grid_p = sub.add_parser("grid", help="run a manifest of detectors x datasets")
    grid_p.add_argument("manifest")

    score_p = sub.add_parser("score", help="evaluate an existing score file")
    score_p.add_argument("scores", help="score CSV produced by run/grid")
    score_p.add_argument("--dataset", required=True)
    score_p.add_argument("--labels")
    score_p.add_argument("--profile", default="standard", choices=sorted(NAB_PROFILES))

    char_p = sub.add_parser("characterize", help="dataset descriptors")
    char_p.add_argument("dataset")
    char_p.add_argument("--labels")
    char_p.add_argument("--scores-dir",
                        help="directory of <dataset>__<detector>.csv files for "
                             "difficulty/diversity")
    char_p.add_argument("--profile", default="standard", choices=sorted(NAB_PROFILES))

    rep_p = sub.add_parser("report", help="relative-performance tables from a grid report")
    rep_p.add_argument("report", help="report.json produced by grid")
    rep_p.add_argument("--metric", default="roc_auc", choices=["roc_auc", "nab"])
    rep_p.add_argument("--groups",
                       help="INI file with a [groups] section mapping dataset to label "
                            "(defaults to groups stored in the manifest)")
    return parser


def _cmd_run(args) -> int:
    if args.write_reference_config:
        path = write_reference_config(args.write_reference_config)
        print(f"wrote {path}")
        return EXIT_OK
    if not args.dataset:
        print("error: dataset argument is required", file=sys.stderr)
        return EXIT_USAGE
    overrides = read_config_overrides(args.config) if args.config else {}
    overrides.setdefault("seed", args.seed)
    labels = load_label_file(args.labels) if args.labels else None
    bundle = load_csv(args.dataset, labels=labels,
                      probationary_fraction=overrides.get("probationary_fraction", 0.15))
    config = named_config(args.detector, **overrides)
    detector = build_detector(config, n_points=bundle.n_points)
    records = detector.run(bundle.points())
    out = args.out or f"{bundle.name}__{args.detector}.csv"
    write_score_csv(out, records)
    auc, nab, _ = evaluate_records(records, bundle, args.profile)
    summary = {
        "dataset": bundle.name,
        "detector": args.detector,
        "records": len(records),
        "flagged": sum(1 for r in records if r.flagged),
        "roc_auc": auc,
        "nab": nab,
        "score_file": str(out),
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _cmd_grid(args) -> int:
    manifest = load_manifest(args.manifest)
    report = run_grid(manifest)
    out_dir = Path(manifest.output_dir)
    print(f"wrote {out_dir / 'report.json'} and {out_dir / 'report.txt'}")
    if report["failures"]:
        for f in report["failures"]:
            print(f"failed: {f['dataset']} / {f['detector']}: {f['error']}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_score(args) -> int:
    labels = load_label_file(args.labels) if args.labels else None
    bundle = load_csv(args.dataset, labels=labels)
    rows = read_score_csv(args.scores)
    auc, nab, _ = evaluate_records(rows, bundle, args.profile)
    print(json.dumps({
        "dataset": bundle.name,
        "records": len(rows),
        "flagged": sum(1 for r in rows if r.flagged),
        "roc_auc": auc,
        "nab": nab,
    }, indent=2))
    return EXIT_OK


def _cmd_characterize(args) -> int:
    labels = load_label_file(args.labels) if args.labels else None
    bundle = load_csv(args.dataset, labels=labels)
    from .evaluation import clusteredness, difficulty_diversity

    nc = None
    if len(bundle.anomalies) >= 2 and bundle.n_points - len(bundle.anomalies) >= 2:
        marks = np.array(sorted(bundle.anomalies)) - 1
        normal = np.delete(bundle.values, marks)
        nc = clusteredness(float(np.var(normal, ddof=1)),
                           float(np.var(bundle.values[marks], ddof=1)))
    result = {
        "dataset": bundle.name,
        "n_points": bundle.n_points,
        "n_anomalies": len(bundle.anomalies),
        "nc": nc,
        "anomaly_type": None if nc is None else ("clustered" if nc > 0 else "scattered"),
    }
    if args.scores_dir:
        anomaly_scores, metric_values = {}, {}
        for path in sorted(Path(args.scores_dir).glob(f"{bundle.name}__*.csv")):
            det = path.stem.split("__", 1)[1]
            rows = read_score_csv(path)
            auc, nab, a_scores = evaluate_records(rows, bundle, args.profile)
            anomaly_scores[det] = a_scores
            metric_values[det] = auc
        difficulty, diversity = difficulty_diversity(anomaly_scores, metric_values)
        result["difficulty_mean_score"] = difficulty
        result["difficulty"] = None if difficulty is None else 1.0 - difficulty
        result["diversity_roc_auc"] = diversity
        result["detectors"] = sorted(anomaly_scores)
    print(json.dumps(result, indent=2))
    return EXIT_OK


def _cmd_report(args) -> int:
    with open(args.report) as fh:
        report = json.load(fh)
    groups = dict(report.get("manifest", {}).get("groups") or {})
    if args.groups:
        import configparser

        parser = configparser.ConfigParser()
        if not parser.read(args.groups):
            raise ConfigError(f"cannot read groups file {args.groups}")
        if not parser.has_section("groups"):
            raise ConfigError(f"{args.groups}: missing [groups] section")
        groups = dict(parser["groups"])
    rel = relative_table(report, args.metric)
    output: dict = {"metric": args.metric, "relative_performance": rel}
    if groups:
        output["delta"] = delta_table(report, args.metric, groups)
    print(json.dumps(output, indent=2))
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "grid": _cmd_grid,
    "score": _cmd_score,
    "characterize": _cmd_characterize,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, DegenerateGroupError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
