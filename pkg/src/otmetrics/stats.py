"""Correlation and sensitivity statistics.

Correlations: Pearson (and its absolute value), Spearman on mid-ranks,
tie-corrected Kendall tau-b, and the relative-ranking tau used for human
better/worse judgments, where a metric tie counts as discordant by default.

Sensitivity: relative difference RD(a, b) = (a - b) / b * 100, absolute
difference, range, and the coefficient of variation with the sample (n - 1)
standard deviation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateSeries, TooFewValues, ZeroMean, ZeroReference


@dataclass(frozen=True)
class PairedSeries:
    x: tuple[float, ...]
    y: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))
        if len(self.x) != len(self.y):
            raise ValueError("series lengths differ")
        if len(self.x) < 2:
            raise ValueError("need at least two pairs")
        if any(math.isnan(v) for v in self.x + self.y):
            raise ValueError("series must not contain NaN")

    def __len__(self) -> int:
        return len(self.x)


@dataclass(frozen=True)
class RelativeRankingSet:
    """One (score_better, score_worse) pair per human better/worse judgment."""

    items: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "items", tuple((float(a), float(b)) for a, b in self.items)
        )
        if not self.items:
            raise ValueError("need at least one ranked pair")


def pearson(s: PairedSeries) -> float:
    x = np.asarray(s.x)
    y = np.asarray(s.y)
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(np.sqrt(xc @ xc))
    sy = float(np.sqrt(yc @ yc))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateSeries("pearson undefined for a zero-variance series")
    return float(np.clip(xc @ yc / (sx * sy), -1.0, 1.0))


def abs_pearson(s: PairedSeries) -> float:
    return abs(pearson(s))


def _midranks(values: Sequence[float]) -> np.ndarray:
    arr = np.asarray(values)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(len(arr))
    i = 0
    while i < len(arr):
        j = i
        while j + 1 < len(arr) and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(s: PairedSeries) -> float:
    return pearson(PairedSeries(tuple(_midranks(s.x)), tuple(_midranks(s.y))))


def kendall_tau_b(s: PairedSeries) -> float:
    """Tie-corrected Kendall rank correlation, quadratic-time pair counting."""
    x = np.asarray(s.x)
    y = np.asarray(s.y)
    n = len(x)
    concordant = discordant = ties_x = ties_y = 0
    for i in range(n - 1):
        dx = x[i + 1 :] - x[i]
        dy = y[i + 1 :] - y[i]
        prod = np.sign(dx) * np.sign(dy)
        concordant += int(np.sum(prod > 0))
        discordant += int(np.sum(prod < 0))
        ties_x += int(np.sum((dx == 0) & (dy != 0)))
        ties_y += int(np.sum((dy == 0) & (dx != 0)))
    denom = math.sqrt(
        (concordant + discordant + ties_x) * (concordant + discordant + ties_y)
    )
    if denom == 0.0:
        raise DegenerateSeries("kendall tau-b undefined when one series is all ties")
    return (concordant - discordant) / denom


def kendall_tau_a(s: PairedSeries) -> float:
    x = np.asarray(s.x)
    y = np.asarray(s.y)
    n = len(x)
    concordant = discordant = 0
    for i in range(n - 1):
        prod = np.sign(x[i + 1 :] - x[i]) * np.sign(y[i + 1 :] - y[i])
        concordant += int(np.sum(prod > 0))
        discordant += int(np.sum(prod < 0))
    return (concordant - discordant) / (n * (n - 1) / 2)


class TieRule(enum.Enum):
    TIES_DISCORDANT = "ties-discordant"
    TIES_EXCLUDED = "ties-excluded"


def wmt_kendall_like(
    r: RelativeRankingSet, tie_rule: TieRule = TieRule.TIES_DISCORDANT
) -> float:
    """(concordant - discordant) / (concordant + discordant) over better/worse pairs.

    A pair is concordant when the metric scores the human-preferred side
    strictly higher. Under the default rule metric ties count as discordant;
    under TIES_EXCLUDED they are dropped from both counts.
    """
    concordant = discordant = 0
    for better, worse in r.items:
        if better > worse:
            concordant += 1
        elif better < worse or tie_rule is TieRule.TIES_DISCORDANT:
            discordant += 1
    total = concordant + discordant
    if total == 0:
        raise DegenerateSeries("all pairs tied and ties are excluded")
    return (concordant - discordant) / total


def rd(a: float, b: float) -> float:
    """Relative difference of a against reference b, in percent."""
    if b == 0.0:
        raise ZeroReference("relative difference needs a nonzero reference value")
    return (a - b) / b * 100.0


def ad(a: float, b: float) -> float:
    return a - b


def range_of(xs: Sequence[float]) -> float:
    if len(xs) < 2:
        raise TooFewValues("range needs at least two values")
    return float(max(xs) - min(xs))


def cv(xs: Sequence[float]) -> float:
    """Coefficient of variation in percent, sample (n - 1) standard deviation."""
    if len(xs) < 2:
        raise TooFewValues("cv needs at least two values")
    arr = np.asarray(xs, dtype=np.float64)
    mean = float(arr.mean())
    if mean == 0.0:
        raise ZeroMean("cv undefined for a zero mean")
    return float(arr.std(ddof=1) / mean * 100.0)
