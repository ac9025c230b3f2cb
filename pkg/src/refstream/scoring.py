"""Conformal anomaly scoring.

Nonconformity scores are converted to conformal p-values against the
reference group's scores, the recent p-values are tested for uniformity
with a sliding one-sample Kolmogorov-Smirnov test, and the resulting
significance levels are unified into final scores in [0, 1] via
log-inversion, running-moment normalisation and Gaussian scaling.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateGroupError

SIGNIFICANCE_FLOOR = 1e-300


def p_value(a_t: float, reference_scores) -> float:
    """Fraction of reference nonconformity scores at least as large as a_t."""
    ref = np.asarray(reference_scores)
    if ref.size == 0:
        raise DegenerateGroupError("reference score set is empty")
    return float(np.count_nonzero(ref >= a_t) / ref.size)


def loo_p_values(reference_scores) -> np.ndarray:
    """Leave-one-out p-value of each reference score against the others."""
    ref = np.asarray(reference_scores, dtype=float)
    m = ref.size
    if m < 2:
        raise DegenerateGroupError(f"need at least 2 reference scores, have {m}")
    srt = np.sort(ref)
    at_least = m - np.searchsorted(srt, ref, side="left")  # includes self
    return (at_least - 1) / (m - 1)


def ks_statistic(p_values) -> float:
    """Exact sup-distance between the empirical CDF of p-values and uniform."""
    p = np.sort(np.asarray(p_values, dtype=float))
    n = p.size
    if n == 0:
        raise DegenerateGroupError("empty p-value window")
    i = np.arange(1, n + 1)
    return float(max((i / n - p).max(), (p - (i - 1) / n).max(), 0.0))


def ks_significance(d: float, n: int) -> float:
    """Two-sided significance of a one-sample K-S statistic.

    Uses the asymptotic Kolmogorov series with the finite-sample corrected
    argument (sqrt(n) + 0.12 + 0.11/sqrt(n)) * d, summed until terms drop
    below 1e-10, clamped to [0, 1]. Arguments small enough that the
    survival value is 1 within 1e-10 short-circuit to 1.
    """
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    rn = math.sqrt(n)
    lam = (rn + 0.12 + 0.11 / rn) * d
    if lam < 0.1:
        return 1.0
    total = 0.0
    sign = 1.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * lam * lam)
        total += sign * term
        if term < 1e-10:
            break
        sign = -sign
        k += 1
    return min(1.0, max(0.0, 2.0 * total))


@dataclass
class UnifierState:
    """Running moments of regularised scores (Welford recurrence)."""

    count: int = 0
    mean: float = 0.0
    _m2: float = field(default=0.0, repr=False)

    @property
    def std(self) -> float:
        return math.sqrt(self._m2 / self.count) if self.count else 0.0

    def update(self, reg: float):
        self.count += 1
        delta = reg - self.mean
        self.mean += delta / self.count
        self._m2 += delta * (reg - self.mean)

    def scale(self, reg: float) -> float:
        """Gaussian scaling of one regularised score against the moments."""
        std = self.std
        if std == 0.0:
            return 0.0
        return max(0.0, math.erf((reg - self.mean) / (std * math.sqrt(2.0))))


def regularize(significance: float) -> float:
    return -math.log(max(significance, SIGNIFICANCE_FLOOR))


def unify(significance: float, state: UnifierState) -> float:
    """Fold one K-S significance into the state and return the final score."""
    reg = regularize(significance)
    state.update(reg)
    return state.scale(reg)


class AnomalyScorer:
    """Streaming scorer: p-value, sliding K-S test, unification.

    Must be bootstrapped once with the reference group's leave-one-out
    nonconformity scores; those seed both the conformal reference set and
    the p-value window. The K-S test runs every ``test_period`` steps and
    the last significance is held in between.
    """

    def __init__(self, ks_window: int, test_period: int = 1):
        if ks_window < 1:
            raise ConfigError(f"ks_window must be >= 1, got {ks_window}")
        if test_period < 1:
            raise ConfigError(f"test_period must be >= 1, got {test_period}")
        self.ks_window = ks_window
        self.test_period = test_period
        self.window: deque[float] = deque(maxlen=ks_window)
        self.unifier = UnifierState()
        self._reference: np.ndarray | None = None
        self._steps = 0
        self._held_significance = 1.0
        self._bootstrapped = False

    @property
    def bootstrapped(self) -> bool:
        return self._bootstrapped

    def bootstrap(self, reference_scores):
        """Seed the scorer with the first reference group's scores."""
        ref = np.asarray(reference_scores, dtype=float)
        if not np.isfinite(ref).all():
            raise DegenerateGroupError("reference scores are not finite")
        for pv in loo_p_values(ref):
            self.window.append(float(pv))
        self._reference = ref
        self._bootstrapped = True

    def set_reference_scores(self, reference_scores):
        ref = np.asarray(reference_scores, dtype=float)
        if ref.size == 0:
            raise DegenerateGroupError("reference score set is empty")
        self._reference = ref

    def step(self, a_t: float) -> tuple[float, float, float]:
        """Score one nonconformity value; returns (p_value, significance, final)."""
        if not self._bootstrapped:
            raise DegenerateGroupError("scorer used before bootstrap")
        pv = p_value(a_t, self._reference)
        self.window.append(pv)
        if self._steps % self.test_period == 0:
            d = ks_statistic(self.window)
            self._held_significance = ks_significance(d, len(self.window))
        self._steps += 1
        final = unify(self._held_significance, self.unifier)
        return pv, self._held_significance, final
