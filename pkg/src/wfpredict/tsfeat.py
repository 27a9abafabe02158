"""Time-reversal asymmetry feature extraction and zero-padding helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np


@dataclass(frozen=True)
class TrevConfig:
    """Lag (window offset) for the asymmetry statistic."""

    lag: int = 2

    def __post_init__(self):
        if self.lag < 1:
            raise ValueError(f"lag must be >= 1, got {self.lag}")


def trev(values: Sequence[float], cfg: TrevConfig) -> float:
    """Time-reversal asymmetry statistic of a series at the configured lag.

    mean(d^3) / mean(d^2)^1.5 over lagged differences d = x[t+l] - x[t].
    Degenerate inputs (too short, or all differences zero) yield 0.0.
    Differences at the float rounding level of the series (relative 1e-9)
    also count as degenerate: a constant series that picked up 1-ulp wobble
    from upstream arithmetic must not produce an O(1) statistic.
    """
    x = np.asarray(values, dtype=float)
    l = cfg.lag
    if x.size <= l:
        return 0.0
    d = x[l:] - x[:-l]
    m2 = float(np.mean(d * d))
    scale = float(np.max(np.abs(x)))
    if m2 == 0.0 or math.sqrt(m2) <= 1e-9 * scale:
        return 0.0
    m3 = float(np.mean(d * d * d))
    return m3 / m2 ** 1.5


def pad_to_length(values: Sequence[float], n: int) -> List[float]:
    """Extend a sequence with trailing zeros to length n. Never truncates."""
    v = list(values)
    if n < len(v):
        raise ValueError(f"cannot pad to {n}: input has {len(v)} elements")
    return v + [0.0] * (n - len(v))


def strip_padding(values: Sequence[float]) -> List[float]:
    """Drop trailing zeros; interior zeros are preserved."""
    v = list(values)
    end = len(v)
    while end > 0 and v[end - 1] == 0.0:
        end -= 1
    return v[:end]
