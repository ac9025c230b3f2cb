"""Detector pipeline: representation -> strategy -> measure -> scorer.

A detector consumes stream points one at a time. During the probationary
prefix it only learns; at the probation boundary it seeds the scorer with
leave-one-out nonconformity scores of the reference group; afterwards each
point is scored first and learned second, so the anomaly-aware reservoir
sees the score emitted for the same timestamp. After every group update
the stored reference scores are refreshed against the new group, either
incrementally or by full recomputation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, NamedTuple

import numpy as np

from .errors import ConfigError, DataError, DegenerateGroupError
from .learning import (
    AnomalyAwareReservoir,
    FixedReference,
    LandmarkWindow,
    SlidingWindow,
    UniformReservoir,
)
from .nonconformity import ClusterModel, FrequencyMeasure, NeighborIndex
from .representation import MeanStdFeatures, SaxFeatures
from .scoring import AnomalyScorer

REPRESENTATIONS = ("meanstd", "sax")
STRATEGIES = ("fr", "lw", "sw", "ures", "ares")
MEASURES = ("nn", "den", "cc", "freq")

# frequency measures work on symbolic words, the proximity measures on
# numeric vectors; this pairing fixes the representation per measure
REPRESENTATION_FOR_MEASURE = {"nn": "meanstd", "den": "meanstd", "cc": "meanstd", "freq": "sax"}

DETECTOR_GRID = tuple(f"{ls}-{ncm}" for ls in STRATEGIES for ncm in MEASURES)


class StreamPoint(NamedTuple):
    """One raw observation: a strictly increasing time index and a value."""

    timestamp: int
    value: float


class ScoreRecord(NamedTuple):
    """Per-timestamp scoring chain emitted after the probationary period."""

    timestamp: int
    nonconformity: float
    p_value: float
    ks_significance: float
    final_score: float
    flagged: bool


@dataclass(frozen=True)
class DetectorConfig:
    """Full parameterisation of one detector.

    ``window``, ``ks_window`` and ``probation_len`` may be left unset; they
    then default to the probationary length derived from the stream size.
    """

    representation: str = "meanstd"
    rep_window: int = 10  # N for meanstd, n for SAX
    sax_segments: int = 4
    sax_alphabet: int = 5
    strategy: str = "sw"
    window: int | None = None  # w
    landmark: int = 0
    decay: float = 0.96
    measure: str = "nn"
    k: int = 10
    n_clusters: int = 5
    recompute_factor: float = 0.25
    ks_window: int | None = None
    test_period: int = 1
    threshold: float = 0.9
    probationary_fraction: float = 0.15
    probation_len: int | None = None
    seed: int = 0
    refresh: str = "incremental"

    def validate(self):
        if self.representation not in REPRESENTATIONS:
            raise ConfigError(f"representation must be one of {REPRESENTATIONS}, got {self.representation!r}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.measure not in MEASURES:
            raise ConfigError(f"measure must be one of {MEASURES}, got {self.measure!r}")
        required = REPRESENTATION_FOR_MEASURE[self.measure]
        if self.representation != required:
            raise ConfigError(
                f"measure {self.measure!r} requires representation {required!r}, got {self.representation!r}"
            )
        if self.rep_window < 1:
            raise ConfigError(f"rep_window must be >= 1, got {self.rep_window}")
        if self.representation == "sax":
            if self.sax_alphabet < 2:
                raise ConfigError(f"sax_alphabet must be >= 2, got {self.sax_alphabet}")
            if self.sax_segments < 1 or self.rep_window % self.sax_segments:
                raise ConfigError(
                    f"rep_window {self.rep_window} must be divisible by sax_segments {self.sax_segments}"
                )
        if self.window is not None and self.window < 1:
            raise ConfigError(f"window must be >= 1, got {self.window}")
        if not 0.0 < self.decay <= 1.0:
            raise ConfigError(f"decay must be in (0, 1], got {self.decay}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.n_clusters < 1:
            raise ConfigError(f"n_clusters must be >= 1, got {self.n_clusters}")
        if self.recompute_factor <= 0:
            raise ConfigError(f"recompute_factor must be > 0, got {self.recompute_factor}")
        if self.ks_window is not None and self.ks_window < 1:
            raise ConfigError(f"ks_window must be >= 1, got {self.ks_window}")
        if self.test_period < 1:
            raise ConfigError(f"test_period must be >= 1, got {self.test_period}")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError(f"threshold must be in (0, 1), got {self.threshold}")
        if not 0.0 < self.probationary_fraction < 1.0:
            raise ConfigError(
                f"probationary_fraction must be in (0, 1), got {self.probationary_fraction}"
            )
        if self.probation_len is not None and self.probation_len < 1:
            raise ConfigError(f"probation_len must be >= 1, got {self.probation_len}")
        if self.refresh not in ("incremental", "exact"):
            raise ConfigError(f"refresh must be 'incremental' or 'exact', got {self.refresh!r}")

    def resolve(self, n_points: int | None = None) -> "DetectorConfig":
        """Fill in the size-dependent defaults (p, w = p, K-S window = p)."""
        p = self.probation_len
        if p is None:
            if n_points is None:
                raise ConfigError("probation_len unset and stream length unknown")
            p = max(1, math.floor(self.probationary_fraction * n_points))
        window = self.window if self.window is not None else p
        ks_window = self.ks_window if self.ks_window is not None else p
        return replace(self, probation_len=p, window=window, ks_window=ks_window)


def named_config(name: str, **overrides) -> DetectorConfig:
    """Config for one of the 20 grid detectors, e.g. 'ares-freq'."""
    try:
        strategy, measure = name.lower().split("-")
    except ValueError:
        raise ConfigError(f"detector name must look like 'sw-nn', got {name!r}") from None
    if strategy not in STRATEGIES or measure not in MEASURES:
        raise ConfigError(f"unknown detector {name!r}; choose from {DETECTOR_GRID}")
    base = dict(
        strategy=strategy,
        measure=measure,
        representation=REPRESENTATION_FOR_MEASURE[measure],
    )
    if measure == "freq" and "rep_window" not in overrides and "sax_segments" not in overrides:
        base["rep_window"] = 16
    base.update(overrides)
    return DetectorConfig(**base)


class Detector:
    """Single-threaded stateful detector over one stream."""

    def __init__(self, config: DetectorConfig):
        config.validate()
        if config.probation_len is None or config.window is None or config.ks_window is None:
            raise ConfigError("config not resolved; call config.resolve(n_points) first")
        self.config = config
        self.probation_len = config.probation_len
        ss = np.random.SeedSequence(config.seed)
        strategy_rng, measure_rng = (np.random.default_rng(c) for c in ss.spawn(2))

        if config.representation == "meanstd":
            self.representation = MeanStdFeatures(config.rep_window)
        else:
            self.representation = SaxFeatures(
                config.rep_window, config.sax_segments, config.sax_alphabet
            )

        if config.strategy == "fr":
            self.strategy = FixedReference(config.probation_len)
        elif config.strategy == "lw":
            self.strategy = LandmarkWindow(config.landmark)
        elif config.strategy == "sw":
            self.strategy = SlidingWindow(config.window)
        elif config.strategy == "ures":
            self.strategy = UniformReservoir(config.window, strategy_rng)
        else:
            self.strategy = AnomalyAwareReservoir(config.window, config.decay, strategy_rng)

        if config.measure == "nn":
            self.measure = NeighborIndex(config.k, mode="distance")
        elif config.measure == "den":
            self.measure = NeighborIndex(config.k, mode="density")
        elif config.measure == "cc":
            self.measure = ClusterModel(config.n_clusters, config.recompute_factor, measure_rng)
        else:
            self.measure = FrequencyMeasure()

        self.scorer = AnomalyScorer(config.ks_window, config.test_period)
        self._last_t: int | None = None

    @property
    def group_size(self) -> int:
        return len(self.strategy)

    def _apply_update(self, added, removed):
        if removed is not None:
            self.measure.remove(removed.arrival, removed.feature)
        if added is not None:
            self.measure.insert(added.arrival, added.feature)

    def _reference_scores(self) -> np.ndarray:
        if self.config.refresh == "exact":
            return self.measure.recompute_member_scores()
        return self.measure.member_scores()

    def _bootstrap(self):
        scores = self._reference_scores()
        if scores.size < 2 or not np.isfinite(scores).all():
            raise DegenerateGroupError(
                f"reference group of size {self.group_size} cannot seed the scorer "
                f"(k={self.config.k}, measure={self.config.measure!r}); "
                "increase the probationary period or shrink k"
            )
        self.scorer.bootstrap(scores)

    def process(self, point: StreamPoint) -> ScoreRecord | None:
        t, value = int(point[0]), float(point[1])
        if not math.isfinite(value):
            raise DataError(f"non-finite value at t={t}")
        if self._last_t is not None and t <= self._last_t:
            raise DataError(f"non-monotone timestamp {t} after {self._last_t}")
        self._last_t = t

        feature = self.representation.push(value)
        if feature is None:
            return None

        if t <= self.probation_len:
            added, removed = self.strategy.update(feature, t, 0.0)
            self._apply_update(added, removed)
            if t == self.probation_len:
                self._bootstrap()
            return None

        if not self.scorer.bootstrapped:
            # representation warmed up after the boundary; seed late
            self._bootstrap()

        a_t = self.measure.score(feature)
        pv, significance, final = self.scorer.step(a_t)
        record = ScoreRecord(t, a_t, pv, significance, final, final >= self.config.threshold)

        added, removed = self.strategy.update(feature, t, final)
        self._apply_update(added, removed)
        self.scorer.set_reference_scores(self._reference_scores())
        return record

    def run(self, points: Iterable[StreamPoint]) -> list[ScoreRecord]:
        """Fold process() over a stream, annotating errors with the timestamp."""
        records = []
        for point in points:
            try:
                record = self.process(point)
            except (ConfigError, DataError, DegenerateGroupError) as exc:
                raise type(exc)(f"at t={point[0]}: {exc}") from exc
            if record is not None:
                records.append(record)
        return records


def build_detector(config: DetectorConfig, n_points: int | None = None) -> Detector:
    """Validate the config, resolve size-dependent defaults, build the detector."""
    config.validate()
    return Detector(config.resolve(n_points))


def run_stream(detector: Detector, points: Iterable[StreamPoint]) -> list[ScoreRecord]:
    return detector.run(points)
