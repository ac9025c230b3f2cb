"""Feature extraction from the raw stream.

Two representations are provided: a rolling (mean, std) pair over the last
N observations, and SAX words (z-normalise, piecewise-aggregate, quantise
against equiprobable standard-normal breakpoints) over the last n
observations.
"""

from __future__ import annotations

import string
from collections import deque

import numpy as np
from scipy.special import ndtri

from .errors import ConfigError

SAX_ALPHABET = string.ascii_lowercase


def breakpoints(alphabet_size: int) -> np.ndarray:
    """Cut points splitting the standard normal into equiprobable regions.

    Returns the ``alphabet_size - 1`` quantiles at i/alphabet_size, strictly
    increasing and symmetric about zero.
    """
    if alphabet_size < 2:
        raise ConfigError(f"alphabet_size must be >= 2, got {alphabet_size}")
    return ndtri(np.arange(1, alphabet_size) / alphabet_size)


def meanstd_transform(values) -> np.ndarray:
    """Mean and population standard deviation of a full window."""
    arr = np.asarray(values, dtype=float)
    return np.array([arr.mean(), arr.std()])


def paa(values, segments: int) -> np.ndarray:
    """Piecewise aggregate approximation: means of equal-sized segments."""
    arr = np.asarray(values, dtype=float)
    if arr.size % segments:
        raise ConfigError(
            f"window length {arr.size} is not divisible by {segments} segments"
        )
    return arr.reshape(segments, -1).mean(axis=1)


def symbolize(paa_values, alphabet_size: int, cuts: np.ndarray | None = None) -> str:
    """Map PAA segment means to letters via equiprobable breakpoints."""
    if cuts is None:
        cuts = breakpoints(alphabet_size)
    idx = np.searchsorted(cuts, np.asarray(paa_values, dtype=float), side="right")
    return "".join(SAX_ALPHABET[i] for i in idx)


def sax_transform(
    values, segments: int, alphabet_size: int, cuts: np.ndarray | None = None
) -> str:
    """SAX word for one subsequence.

    A zero-variance subsequence cannot be z-normalised; every segment then
    maps to the middle symbol (lower middle for even alphabets).
    """
    x = np.asarray(values, dtype=float)
    sd = x.std()
    if np.all(x == x[0]) or sd == 0.0:
        mid = (alphabet_size + 1) // 2 - 1
        return SAX_ALPHABET[mid] * segments
    z = (x - x.mean()) / sd
    return symbolize(paa(z, segments), alphabet_size, cuts)


class MeanStdFeatures:
    """Streaming rolling-window (mean, std) features.

    Consumes one value per step and emits a feature once the FIFO buffer
    holds ``window`` values; before that it returns None (not warm).
    """

    def __init__(self, window: int):
        if window < 1:
            raise ConfigError(f"representation window must be >= 1, got {window}")
        self.window = window
        self._buf: deque[float] = deque(maxlen=window)

    def push(self, value: float) -> np.ndarray | None:
        self._buf.append(value)
        if len(self._buf) < self.window:
            return None
        return meanstd_transform(self._buf)

    def buffer_len(self) -> int:
        return len(self._buf)


class SaxFeatures:
    """Streaming SAX words over overlapping subsequences of the last n values."""

    def __init__(self, window: int, segments: int, alphabet_size: int):
        if window < 1:
            raise ConfigError(f"representation window must be >= 1, got {window}")
        if segments < 1 or window % segments:
            raise ConfigError(
                f"window {window} must be divisible by segments {segments}"
            )
        if not 2 <= alphabet_size <= len(SAX_ALPHABET):
            raise ConfigError(
                f"alphabet_size must be in [2, {len(SAX_ALPHABET)}], got {alphabet_size}"
            )
        self.window = window
        self.segments = segments
        self.alphabet_size = alphabet_size
        self._cuts = breakpoints(alphabet_size)
        self._buf: deque[float] = deque(maxlen=window)

    def push(self, value: float) -> str | None:
        self._buf.append(value)
        if len(self._buf) < self.window:
            return None
        return sax_transform(self._buf, self.segments, self.alphabet_size, self._cuts)

    def buffer_len(self) -> int:
        return len(self._buf)
