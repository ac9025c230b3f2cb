"""Reference-group maintenance policies.

Every strategy consumes one feature per step and reports which entry it
admitted and which it evicted, so downstream structures can mirror the
group incrementally. The reservoir strategies own their RNG; an update is
the only operation that consumes randomness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_NO_ARRIVAL = np.iinfo(np.int64).max


@dataclass
class ReferenceEntry:
    """One member of the reference group.

    ``priority`` is populated by the reservoir strategies only.
    """

    feature: object
    arrival: int
    priority: float | None = None


def ares_weight(score: float, decay: float) -> float:
    """Admission weight exp(-decay * score); high scores get low weight."""
    if score < 0:
        raise ValueError(f"anomaly score must be >= 0, got {score}")
    return math.exp(-decay * score)


class FixedReference:
    """Static group: collects features during probation, frozen afterwards."""

    def __init__(self, probation_len: int):
        self.probation_len = probation_len
        self.entries: list[ReferenceEntry] = []

    def __len__(self):
        return len(self.entries)

    def update(self, feature, t: int, score: float = 0.0):
        if t > self.probation_len:
            return None, None
        entry = ReferenceEntry(feature, t)
        self.entries.append(entry)
        return entry, None


class LandmarkWindow:
    """Keeps everything observed after the landmark; never evicts."""

    def __init__(self, landmark: int = 0):
        self.landmark = landmark
        self.entries: list[ReferenceEntry] = []

    def __len__(self):
        return len(self.entries)

    def update(self, feature, t: int, score: float = 0.0):
        if t <= self.landmark:
            return None, None
        entry = ReferenceEntry(feature, t)
        self.entries.append(entry)
        return entry, None


class SlidingWindow:
    """Keeps exactly the ``window`` most recent features."""

    def __init__(self, window: int):
        if window < 1:
            raise ValueError(f"window must be >= 1, got {window}")
        self.window = window
        self.entries: list[ReferenceEntry] = []

    def __len__(self):
        return len(self.entries)

    def update(self, feature, t: int, score: float = 0.0):
        evicted = None
        if len(self.entries) == self.window:
            evicted = self.entries.pop(0)
        entry = ReferenceEntry(feature, t)
        self.entries.append(entry)
        return entry, evicted


class UniformReservoir:
    """Classic single-pass reservoir sampling.

    Fills the reservoir with the first ``window`` arrivals, then replaces a
    uniformly chosen member with probability window / arrivals_seen.
    """

    def __init__(self, window: int, rng: np.random.Generator):
        if window < 1:
            raise ValueError(f"window must be >= 1, got {window}")
        self.window = window
        self.rng = rng
        self.entries: list[ReferenceEntry] = []
        self.seen = 0

    def __len__(self):
        return len(self.entries)

    def update(self, feature, t: int, score: float = 0.0):
        self.seen += 1
        if len(self.entries) < self.window:
            entry = ReferenceEntry(feature, t)
            self.entries.append(entry)
            return entry, None
        if self.rng.random() < self.window / self.seen:
            idx = int(self.rng.integers(self.window))
            evicted = self.entries[idx]
            entry = ReferenceEntry(feature, t)
            self.entries[idx] = entry
            return entry, evicted
        return None, None


class AnomalyAwareReservoir:
    """Reservoir sampling biased against anomalous samples.

    Each arrival draws priority u ** (1 / exp(-decay * score)) with
    u ~ Uniform(0, 1), so high anomaly scores push priorities toward zero.
    Once the reservoir is full, an arrival replaces the oldest member whose
    priority is strictly below its own; with no such candidate it is
    discarded. Ties keep the incumbent.
    """

    def __init__(self, window: int, decay: float, rng: np.random.Generator):
        if window < 1:
            raise ValueError(f"window must be >= 1, got {window}")
        if not 0 < decay <= 1:
            raise ValueError(f"decay must be in (0, 1], got {decay}")
        self.window = window
        self.decay = decay
        self.rng = rng
        self.entries: list[ReferenceEntry] = []
        self._priorities = np.empty(window, dtype=float)
        self._arrivals = np.full(window, _NO_ARRIVAL, dtype=np.int64)

    def __len__(self):
        return len(self.entries)

    def _draw_priority(self, score: float) -> float:
        u = self.rng.random()
        while u == 0.0:  # keep u in the open interval (0, 1)
            u = self.rng.random()
        return u ** (1.0 / ares_weight(score, self.decay))

    def update(self, feature, t: int, score: float = 0.0):
        p_t = self._draw_priority(score)
        n = len(self.entries)
        if n < self.window:
            entry = ReferenceEntry(feature, t, p_t)
            self._priorities[n] = p_t
            self._arrivals[n] = t
            self.entries.append(entry)
            return entry, None
        candidates = self._priorities < p_t
        if not candidates.any():
            return None, None
        idx = int(np.where(candidates, self._arrivals, _NO_ARRIVAL).argmin())
        evicted = self.entries[idx]
        entry = ReferenceEntry(feature, t, p_t)
        self.entries[idx] = entry
        self._priorities[idx] = p_t
        self._arrivals[idx] = t
        return entry, evicted
