"""Corpus loading: CSV streams, inline or sidecar ground truth.

Input files are header-bearing CSVs with columns (timestamp, value) or
(timestamp, value, is_anomaly). Timestamps are either integers or
ISO-8601 datetimes; both are mapped to the ordinal index 1..T. Sidecar
labels are a single JSON document mapping dataset names to lists of
anomaly timestamps.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from .detector import StreamPoint
from .errors import DataError
from .evaluation import make_windows

MIN_LENGTH = 20


@dataclass
class DatasetBundle:
    """One loaded time series with ground truth and derived windows."""

    name: str
    values: np.ndarray
    raw_timestamps: list[str]
    anomalies: set[int]  # ordinal indices, 1-based
    windows: list[tuple[int, int]] = field(default_factory=list)
    probationary_fraction: float = 0.15

    @property
    def n_points(self) -> int:
        return len(self.values)

    @property
    def probation_len(self) -> int:
        return max(1, math.floor(self.probationary_fraction * self.n_points))

    def points(self) -> list[StreamPoint]:
        return [StreamPoint(i + 1, float(v)) for i, v in enumerate(self.values)]


def _parse_timestamp(token: str):
    token = token.strip()
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return datetime.fromisoformat(token)
    except ValueError:
        raise DataError(f"unparseable timestamp {token!r}") from None


def load_label_file(path) -> dict[str, list]:
    """JSON sidecar: dataset name -> list of anomaly timestamps."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise DataError(f"{path}: label file must be a JSON object")
    return data


def _labels_for(name: str, labels: dict[str, list]) -> list | None:
    stem = Path(name).stem
    for key in (name, Path(name).name, stem):
        if key in labels:
            return labels[key]
    for key, value in labels.items():
        if Path(key).stem == stem:
            return value
    return None


def load_csv(
    path,
    labels: dict[str, list] | None = None,
    probationary_fraction: float = 0.15,
) -> DatasetBundle:
    """Load and validate one dataset file."""
    path = Path(path)
    values: list[float] = []
    raw_ts: list[str] = []
    anomalies: set[int] = set()
    prev = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        has_label_col = len(header) >= 3
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise DataError(f"{path}:{lineno}: expected at least 2 columns")
            ts = _parse_timestamp_at(path, lineno, row[0])
            if prev is not None and ts <= prev:
                raise DataError(f"{path}:{lineno}: non-monotone timestamp {row[0]!r}")
            prev = ts
            try:
                value = float(row[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: unparseable value {row[1]!r}") from None
            if not math.isfinite(value):
                raise DataError(f"{path}:{lineno}: non-finite value {row[1]!r}")
            raw_ts.append(row[0].strip())
            values.append(value)
            if has_label_col and len(row) >= 3 and row[2].strip():
                flag = row[2].strip()
                if flag not in ("0", "1"):
                    raise DataError(f"{path}:{lineno}: is_anomaly must be 0 or 1, got {flag!r}")
                if flag == "1":
                    anomalies.add(len(values))
    if len(values) < MIN_LENGTH:
        raise DataError(f"{path}: need at least {MIN_LENGTH} rows, found {len(values)}")

    if labels is not None:
        marks = _labels_for(str(path), labels)
        if marks is not None:
            index = {ts: i + 1 for i, ts in enumerate(raw_ts)}
            for mark in marks:
                ordinal = _resolve_label(path, str(mark), index)
                anomalies.add(ordinal)

    bundle = DatasetBundle(
        name=path.stem,
        values=np.asarray(values, dtype=float),
        raw_timestamps=raw_ts,
        anomalies=anomalies,
        probationary_fraction=probationary_fraction,
    )
    bundle.windows = make_windows(bundle.n_points, sorted(anomalies))
    return bundle


def _parse_timestamp_at(path, lineno, token):
    try:
        return _parse_timestamp(token)
    except DataError as exc:
        raise DataError(f"{path}:{lineno}: {exc}") from None


def _resolve_label(path, mark: str, index: dict[str, int]) -> int:
    mark = mark.strip()
    if mark in index:
        return index[mark]
    # NAB labels carry fractional seconds that the data files omit
    trimmed = mark.split(".")[0]
    if trimmed in index:
        return index[trimmed]
    raise DataError(f"{path}: label timestamp {mark!r} not present in the series")


def write_csv(path, values, anomalies=None, timestamps=None):
    """Write a dataset in the supported input format (used by experiments)."""
    path = Path(path)
    marks = set(anomalies or ())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if anomalies is None:
            writer.writerow(["timestamp", "value"])
            for i, v in enumerate(values, start=1):
                writer.writerow([timestamps[i - 1] if timestamps else i, repr(float(v))])
        else:
            writer.writerow(["timestamp", "value", "is_anomaly"])
            for i, v in enumerate(values, start=1):
                ts = timestamps[i - 1] if timestamps else i
                writer.writerow([ts, repr(float(v)), 1 if i in marks else 0])
    return path
