"""Run manifests: detector grids over corpora, score files, reports.

Score files are CSVs with the fixed column order (timestamp,
nonconformity, p_value, final_score, flagged); floats carry 9 significant
digits. The grid report aggregates ROC-AUC and normalised NAB scores per
(detector, dataset) pair, per-method means, win counts, and dataset
descriptors, and is emitted both as JSON and as plain text tables.
"""

from __future__ import annotations

import concurrent.futures
import configparser
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .datasets import DatasetBundle, load_csv, load_label_file
from .detector import (
    DETECTOR_GRID,
    DetectorConfig,
    MEASURES,
    STRATEGIES,
    build_detector,
    named_config,
)
from .errors import ConfigError, DataError
from .evaluation import (
    NAB_PROFILES,
    clusteredness,
    delta_performance,
    nab_score,
    normalize_nab,
    relative_performance,
    roc_auc,
)

METRICS = ("roc_auc", "nab")

SCORE_COLUMNS = ("timestamp", "nonconformity", "p_value", "final_score", "flagged")


class ScoreRow(NamedTuple):
    timestamp: int
    nonconformity: float
    p_value: float
    final_score: float
    flagged: bool


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def write_score_csv(path, records) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(SCORE_COLUMNS) + "\n")
        for rec in records:
            fh.write(
                f"{rec.timestamp},{_fmt(rec.nonconformity)},{_fmt(rec.p_value)},"
                f"{_fmt(rec.final_score)},{1 if rec.flagged else 0}\n"
            )
    return path


def read_score_csv(path) -> list[ScoreRow]:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != SCORE_COLUMNS:
            raise DataError(f"{path}: unexpected score file header {header}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise DataError(f"{path}:{lineno}: expected 5 columns")
            try:
                rows.append(
                    ScoreRow(
                        int(parts[0]),
                        float(parts[1]),
                        float(parts[2]),
                        float(parts[3]),
                        parts[4] == "1",
                    )
                )
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return rows


# ---------------------------------------------------------------------------
# detector config files (flat key-value with sections per component)

_CONFIG_LAYOUT = {
    "representation": {"kind": "representation", "window": "rep_window",
                       "segments": "sax_segments", "alphabet": "sax_alphabet"},
    "strategy": {"kind": "strategy", "window": "window", "landmark": "landmark",
                 "decay": "decay"},
    "measure": {"kind": "measure", "k": "k", "clusters": "n_clusters",
                "recompute_factor": "recompute_factor"},
    "scoring": {"ks_window": "ks_window", "test_period": "test_period",
                "threshold": "threshold"},
    "run": {"probationary_fraction": "probationary_fraction", "seed": "seed",
            "refresh": "refresh"},
}

_INT_FIELDS = {"rep_window", "sax_segments", "sax_alphabet", "window", "landmark",
               "k", "n_clusters", "ks_window", "test_period", "probation_len", "seed"}
_FLOAT_FIELDS = {"decay", "recompute_factor", "threshold", "probationary_fraction"}


def write_reference_config(path) -> Path:
    """Emit a config file carrying every documented default."""
    defaults = DetectorConfig()
    parser = configparser.ConfigParser()
    for section, mapping in _CONFIG_LAYOUT.items():
        parser[section] = {}
        for key, attr in mapping.items():
            value = getattr(defaults, attr)
            parser[section][key] = "" if value is None else str(value)
    path = Path(path)
    with open(path, "w") as fh:
        fh.write("# detector configuration; blank window/ks_window default to the\n")
        fh.write("# probationary length of the dataset being processed\n")
        parser.write(fh)
    return path


def read_config_overrides(path) -> dict:
    """Parse a detector config file into DetectorConfig field overrides."""
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigError(f"cannot read config file {path}")
    overrides: dict = {}
    for section, mapping in _CONFIG_LAYOUT.items():
        if not parser.has_section(section):
            continue
        for key, raw in parser[section].items():
            if key not in mapping:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            if raw.strip() == "":
                continue
            overrides[mapping[key]] = _coerce(mapping[key], raw, path)
    return overrides


def _coerce(attr: str, raw: str, origin):
    raw = raw.strip()
    try:
        if attr in _INT_FIELDS:
            return int(raw)
        if attr in _FLOAT_FIELDS:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{origin}: invalid value {raw!r} for {attr}") from None
    return raw


# ---------------------------------------------------------------------------
# manifests


@dataclass
class RunManifest:
    datasets: list[Path]
    detectors: list[str]
    output_dir: Path
    labels: Path | None = None
    seed: int = 0
    parallelism: int = 1
    metrics: tuple[str, ...] = METRICS
    profile: str = "standard"
    probationary_fraction: float = 0.15
    groups: dict[str, str] = field(default_factory=dict)
    overrides: dict[str, dict] = field(default_factory=dict)  # "defaults" or detector name

    def validate(self):
        if not self.datasets:
            raise ConfigError("manifest lists no datasets")
        for ds in self.datasets:
            if not Path(ds).exists():
                raise ConfigError(f"dataset file not found: {ds}")
        if self.labels is not None and not Path(self.labels).exists():
            raise ConfigError(f"label file not found: {self.labels}")
        if self.profile not in NAB_PROFILES:
            raise ConfigError(f"unknown profile {self.profile!r}; choose from {sorted(NAB_PROFILES)}")
        for metric in self.metrics:
            if metric not in METRICS:
                raise ConfigError(f"unknown metric {metric!r}; choose from {METRICS}")
        if self.parallelism < 1:
            raise ConfigError(f"parallelism must be >= 1, got {self.parallelism}")
        for name in self.detectors:
            cfg = self._config_for(name)
            cfg.validate()

    def _config_for(self, detector_name: str) -> DetectorConfig:
        merged = dict(self.overrides.get("defaults", {}))
        merged.update(self.overrides.get(detector_name, {}))
        merged.setdefault("probationary_fraction", self.probationary_fraction)
        return named_config(detector_name, **merged)


def _job_seed(base: int, detector: str, dataset: str) -> int:
    return (base + zlib.crc32(f"{detector}|{dataset}".encode())) % (2**31)


def expand_detectors(spec: str) -> list[str]:
    names = [tok.strip().lower() for tok in spec.replace(";", ",").split(",") if tok.strip()]
    if names in (["all-20"], ["all"]):
        return list(DETECTOR_GRID)
    for name in names:
        if name not in DETECTOR_GRID:
            raise ConfigError(f"unknown detector {name!r}; choose from {DETECTOR_GRID}")
    return names


def load_manifest(path) -> RunManifest:
    path = Path(path)
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigError(f"cannot read manifest {path}")
    if not parser.has_section("manifest"):
        raise ConfigError(f"{path}: missing [manifest] section")
    sec = parser["manifest"]
    base = path.parent

    def _resolve(p: str) -> Path:
        cand = Path(p.strip())
        return cand if cand.is_absolute() else base / cand

    datasets = [_resolve(tok) for tok in sec.get("datasets", "").split(",") if tok.strip()]
    detectors = expand_detectors(sec.get("detectors", "all-20"))
    labels = _resolve(sec["labels"]) if sec.get("labels", "").strip() else None
    metrics = tuple(
        tok.strip() for tok in sec.get("metrics", ",".join(METRICS)).split(",") if tok.strip()
    )
    groups = dict(parser["groups"]) if parser.has_section("groups") else {}
    overrides: dict[str, dict] = {}
    for section in parser.sections():
        if section in ("manifest", "groups"):
            continue
        key = section.lower()
        if key != "defaults" and key not in DETECTOR_GRID:
            raise ConfigError(f"{path}: unknown section [{section}]")
        overrides[key] = {
            attr: _coerce(attr, raw, path)
            for attr, raw in parser[section].items()
        }
    return RunManifest(
        datasets=datasets,
        detectors=detectors,
        output_dir=_resolve(sec.get("output_dir", "out")),
        labels=labels,
        seed=sec.getint("seed", fallback=0),
        parallelism=sec.getint("parallelism", fallback=1),
        metrics=metrics,
        profile=sec.get("profile", "standard").strip(),
        probationary_fraction=sec.getfloat("probationary_fraction", fallback=0.15),
        groups=groups,
        overrides=overrides,
    )


# ---------------------------------------------------------------------------
# running


def evaluate_records(records, bundle: DatasetBundle, profile_name: str = "standard"):
    """ROC-AUC and normalised NAB score of one record sequence."""
    profile = NAB_PROFILES[profile_name]
    scored = {rec.timestamp: rec.final_score for rec in records}
    anomaly_scores = [s for t, s in scored.items() if t in bundle.anomalies]
    nominal_scores = [s for t, s in scored.items() if t not in bundle.anomalies]
    auc = roc_auc(anomaly_scores, nominal_scores) if anomaly_scores and nominal_scores else None
    flags = [rec.timestamp for rec in records if rec.flagged]
    nab = None
    if bundle.windows:
        raw = nab_score(flags, bundle.windows, bundle.n_points, profile)
        nab = normalize_nab(raw, len(bundle.windows), profile)
    return auc, nab, anomaly_scores


def _run_job(args: dict) -> dict:
    labels = load_label_file(args["labels"]) if args["labels"] else None
    bundle = load_csv(args["dataset"], labels=labels,
                      probationary_fraction=args["probationary_fraction"])
    overrides = dict(args["overrides"])
    overrides.setdefault("probationary_fraction", args["probationary_fraction"])
    overrides["seed"] = _job_seed(args["seed"], args["detector"], bundle.name)
    config = named_config(args["detector"], **overrides)
    detector = build_detector(config, n_points=bundle.n_points)
    records = detector.run(bundle.points())
    score_path = Path(args["out_dir"]) / f"{bundle.name}__{args['detector']}.csv"
    write_score_csv(score_path, records)
    auc, nab, anomaly_scores = evaluate_records(records, bundle, args["profile"])
    return {
        "dataset": bundle.name,
        "detector": args["detector"],
        "roc_auc": auc,
        "nab": nab,
        "anomaly_scores": anomaly_scores,
        "score_file": str(score_path),
    }


def run_grid(manifest: RunManifest) -> dict:
    """Execute every (detector, dataset) job and assemble the report."""
    manifest.validate()
    out_dir = Path(manifest.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = str(manifest.labels) if manifest.labels else None

    jobs = []
    for ds in manifest.datasets:
        for det in manifest.detectors:
            merged = dict(manifest.overrides.get("defaults", {}))
            merged.update(manifest.overrides.get(det, {}))
            jobs.append(
                {
                    "dataset": str(ds),
                    "detector": det,
                    "labels": labels,
                    "overrides": merged,
                    "seed": manifest.seed,
                    "out_dir": str(out_dir),
                    "profile": manifest.profile,
                    "probationary_fraction": manifest.probationary_fraction,
                }
            )

    results, failures = [], []
    if manifest.parallelism > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=manifest.parallelism) as pool:
            futures = {pool.submit(_run_job, job): job for job in jobs}
            for fut in concurrent.futures.as_completed(futures):
                job = futures[fut]
                try:
                    results.append(fut.result())
                except Exception as exc:  # job isolation: record, keep going
                    failures.append(
                        {"dataset": Path(job["dataset"]).stem, "detector": job["detector"],
                         "error": f"{type(exc).__name__}: {exc}"}
                    )
    else:
        for job in jobs:
            try:
                results.append(_run_job(job))
            except Exception as exc:
                failures.append(
                    {"dataset": Path(job["dataset"]).stem, "detector": job["detector"],
                     "error": f"{type(exc).__name__}: {exc}"}
                )

    results.sort(key=lambda r: (r["dataset"], r["detector"]))
    report = assemble_report(results, failures, manifest)
    with open(out_dir / "report.json", "w") as fh:
        json.dump(report, fh, indent=2)
    with open(out_dir / "report.txt", "w") as fh:
        fh.write(render_report_text(report))
    return report


def _mean_std(values: list[float]):
    if not values:
        return None
    arr = np.asarray(values, dtype=float)
    return {"mean": float(arr.mean()), "std": float(arr.std()), "count": int(arr.size)}


def assemble_report(results: list[dict], failures: list[dict], manifest: RunManifest) -> dict:
    pairs = [
        {k: r[k] for k in ("dataset", "detector", "roc_auc", "nab", "score_file")}
        for r in results
    ]
    metrics = [m for m in manifest.metrics if m in METRICS]

    method_summary: dict = {}
    for metric in metrics:
        by_strategy = {
            ls: _mean_std(
                [r[metric] for r in results
                 if r["detector"].startswith(f"{ls}-") and r[metric] is not None]
            )
            for ls in STRATEGIES
        }
        by_measure = {
            ncm: _mean_std(
                [r[metric] for r in results
                 if r["detector"].endswith(f"-{ncm}") and r[metric] is not None]
            )
            for ncm in MEASURES
        }
        method_summary[metric] = {"by_strategy": by_strategy, "by_measure": by_measure}

    # win counts: strict unique maximum per (dataset, metric) slot
    win = {det: 0 for det in manifest.detectors}
    datasets = sorted({r["dataset"] for r in results})
    slots = 0
    for ds in datasets:
        for metric in metrics:
            scored = [(r["detector"], r[metric]) for r in results
                      if r["dataset"] == ds and r[metric] is not None]
            if not scored:
                continue
            slots += 1
            best = max(v for _, v in scored)
            leaders = [det for det, v in scored if v == best]
            if len(leaders) == 1:
                win[leaders[0]] += 1
    win_matrix = {
        ls: {ncm: win.get(f"{ls}-{ncm}", 0) for ncm in MEASURES} for ls in STRATEGIES
    }

    dataset_info = _describe_datasets(results, manifest, metrics)

    return {
        "manifest": {
            "datasets": [str(d) for d in manifest.datasets],
            "detectors": list(manifest.detectors),
            "seed": manifest.seed,
            "profile": manifest.profile,
            "metrics": metrics,
            "groups": dict(manifest.groups),
        },
        "pairs": pairs,
        "failures": failures,
        "method_summary": method_summary,
        "win_counts": {"matrix": win_matrix, "per_detector": win,
                       "scored_slots": slots, "total_wins": sum(win.values())},
        "datasets": dataset_info,
    }


def _describe_datasets(results, manifest: RunManifest, metrics) -> dict:
    labels = load_label_file(manifest.labels) if manifest.labels else None
    info: dict = {}
    by_dataset: dict[str, list[dict]] = {}
    for r in results:
        by_dataset.setdefault(r["dataset"], []).append(r)
    for ds_path in manifest.datasets:
        try:
            bundle = load_csv(ds_path, labels=labels,
                              probationary_fraction=manifest.probationary_fraction)
        except DataError:
            continue
        entry: dict = {
            "n_points": bundle.n_points,
            "n_anomalies": len(bundle.anomalies),
            "n_windows": len(bundle.windows),
            "probation_len": bundle.probation_len,
            "group": manifest.groups.get(bundle.name),
        }
        nc = None
        if bundle.anomalies:
            marks = np.array(sorted(bundle.anomalies)) - 1
            normal = np.delete(bundle.values, marks)
            if len(marks) >= 2 and len(normal) >= 2:
                nc = clusteredness(float(np.var(normal, ddof=1)),
                                   float(np.var(bundle.values[marks], ddof=1)))
        entry["nc"] = nc
        entry["anomaly_type"] = (
            None if nc is None else ("clustered" if nc > 0 else "scattered")
        )
        rs = by_dataset.get(bundle.name, [])
        pooled = [s for r in rs for s in r["anomaly_scores"]]
        entry["difficulty_mean_score"] = float(np.mean(pooled)) if pooled else None
        entry["difficulty"] = (
            None if not pooled else 1.0 - float(np.mean(pooled))
        )
        entry["diversity"] = {
            metric: (
                float(np.std([r[metric] for r in rs if r[metric] is not None]))
                if len([r for r in rs if r[metric] is not None]) >= 2
                else None
            )
            for metric in metrics
        }
        info[bundle.name] = entry
    return info


# ---------------------------------------------------------------------------
# relative-performance tables (method deltas across dataset groups)


def method_members(method: str) -> list[str]:
    if method in STRATEGIES:
        return [f"{method}-{ncm}" for ncm in MEASURES]
    if method in MEASURES:
        return [f"{ls}-{method}" for ls in STRATEGIES]
    raise ConfigError(f"unknown method {method!r}")


def relative_table(report: dict, metric: str) -> dict[str, dict[str, float]]:
    """Rel value of every method on every dataset for one metric."""
    if metric not in METRICS:
        raise ConfigError(f"unknown metric {metric!r}")
    by_dataset: dict[str, dict[str, float]] = {}
    for pair in report["pairs"]:
        if pair[metric] is None:
            continue
        by_dataset.setdefault(pair["dataset"], {})[pair["detector"]] = pair[metric]
    table: dict[str, dict[str, float]] = {}
    for method in list(STRATEGIES) + list(MEASURES):
        members = set(method_members(method))
        row: dict[str, float] = {}
        for ds, scores in by_dataset.items():
            mine = [v for det, v in scores.items() if det in members]
            others = [v for det, v in scores.items() if det not in members]
            if mine and others:
                row[ds] = relative_performance(mine, others)
        table[method] = row
    return table


def delta_table(report: dict, metric: str, groups: dict[str, str]) -> dict:
    """Relative performance difference of each method between two groups."""
    labels = sorted(set(groups.values()))
    if len(labels) != 2:
        raise ConfigError(f"need exactly 2 group labels, got {labels}")
    first, second = labels
    rel = relative_table(report, metric)
    out = {}
    for method, row in rel.items():
        rels_first = [v for ds, v in row.items() if groups.get(ds) == first]
        rels_second = [v for ds, v in row.items() if groups.get(ds) == second]
        out[method] = delta_performance(rels_first, rels_second)
    return {"metric": metric, "first": first, "second": second, "delta": out}


# ---------------------------------------------------------------------------
# rendering


def _fmt_cell(value, width=9):
    if value is None:
        return "-".rjust(width)
    return f"{value:.3f}".rjust(width)


def render_report_text(report: dict) -> str:
    lines = []
    lines.append("per-pair scores")
    lines.append(f"{'dataset':24s} {'detector':12s} {'roc_auc':>9s} {'nab':>9s}")
    for pair in report["pairs"]:
        lines.append(
            f"{pair['dataset'][:24]:24s} {pair['detector']:12s} "
            f"{_fmt_cell(pair['roc_auc'])} {_fmt_cell(pair['nab'])}"
        )
    if report["failures"]:
        lines.append("")
        lines.append("failures")
        for f in report["failures"]:
            lines.append(f"  {f['dataset']} / {f['detector']}: {f['error']}")
    for metric, summary in report["method_summary"].items():
        lines.append("")
        lines.append(f"{metric}: mean +/- std by method")
        for title, block in (("strategy", summary["by_strategy"]),
                             ("measure", summary["by_measure"])):
            for name, stats in block.items():
                if stats is None:
                    lines.append(f"  {title:9s} {name:6s} -")
                else:
                    lines.append(
                        f"  {title:9s} {name:6s} "
                        f"{stats['mean']:.3f} +/- {stats['std']:.3f} (n={stats['count']})"
                    )
    lines.append("")
    lines.append("win counts (strict unique maxima per dataset-metric slot)")
    header = "          " + "".join(f"{ncm:>8s}" for ncm in MEASURES) + "   total"
    lines.append(header)
    matrix = report["win_counts"]["matrix"]
    for ls in STRATEGIES:
        row = matrix[ls]
        total = sum(row.values())
        lines.append(f"{ls:10s}" + "".join(f"{row[ncm]:8d}" for ncm in MEASURES) + f"{total:8d}")
    lines.append(
        f"total wins {report['win_counts']['total_wins']} over "
        f"{report['win_counts']['scored_slots']} slots"
    )
    lines.append("")
    lines.append("datasets")
    for name, entry in report["datasets"].items():
        nc = "-" if entry["nc"] is None else f"{entry['nc']:.3f}"
        diff = "-" if entry["difficulty"] is None else f"{entry['difficulty']:.3f}"
        lines.append(
            f"  {name}: T={entry['n_points']} anomalies={entry['n_anomalies']} "
            f"windows={entry['n_windows']} nc={nc} "
            f"type={entry['anomaly_type'] or '-'} difficulty={diff}"
        )
    return "\n".join(lines) + "\n"
