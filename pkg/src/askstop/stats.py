"""Descriptive statistics over event logs: correlation, elapsed-time table, histograms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats as sps

from .eventlog import EventLog, derive_close_stats
from .logit import significance_stars

Z_95 = 1.96


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    ci_low: float
    ci_high: float
    p_value: float
    n: int
    degenerate: bool = False

    @property
    def stars(self) -> str:
        return significance_stars(self.p_value)


def pearson_correlation(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """Pearson r with a 95% Fisher-z interval and a two-sided t-test p-value.

    At |r| = 1 the interval collapses onto r and p is reported as 0 with
    ``degenerate=True``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D sequences of equal length")
    n = len(x)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("constant input")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    r = min(1.0, max(-1.0, r))
    if abs(r) >= 1.0 - 1e-15:
        r = math.copysign(1.0, r)
        return CorrelationResult(r, r, r, 0.0, n, degenerate=True)
    if n < 4:
        raise ValueError("Fisher interval needs at least 4 pairs")
    z = math.atanh(r)
    half = Z_95 / math.sqrt(n - 3)
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    p = float(2.0 * sps.t.sf(abs(t), n - 2))
    return CorrelationResult(r, math.tanh(z - half), math.tanh(z + half), p, n)


def close_stats_arrays(event_log: EventLog) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """TotalAnswers, ElapsedTime and open hours as parallel arrays."""
    rows = [derive_close_stats(r) for r in event_log.records]
    if not rows:
        return np.empty(0, dtype=int), np.empty(0), np.empty(0)
    total, elapsed, open_h = zip(*rows)
    return np.array(total), np.array(elapsed), np.array(open_h)


def answers_elapsed_correlation(event_log: EventLog) -> CorrelationResult:
    total, elapsed, _ = close_stats_arrays(event_log)
    return pearson_correlation(total, elapsed)


@dataclass(frozen=True)
class ElapsedByCount:
    rows: list[tuple[int, float, int]]

    def spearman_trend(self) -> float:
        """Rank correlation between answer count and mean elapsed time across rows."""
        if len(self.rows) < 2:
            return float("nan")
        n, mean, _ = zip(*self.rows)
        return float(sps.spearmanr(n, mean).statistic)


def elapsed_by_count(event_log: EventLog, max_n: int = 18) -> ElapsedByCount:
    if len(event_log) == 0:
        raise ValueError("empty log")
    total, elapsed, _ = close_stats_arrays(event_log)
    rows = []
    for k in np.unique(total):
        if k > max_n:
            break
        sel = elapsed[total == k]
        rows.append((int(k), float(sel.mean()), int(sel.size)))
    return ElapsedByCount(rows)


@dataclass(frozen=True)
class OpenDurationHistogram:
    bins: list[tuple[float, int]]
    bin_hours: float
    fraction_closed_within_24h: float | None


def open_duration_histogram(event_log: EventLog, bin_hours: float = 1.0) -> OpenDurationHistogram:
    """Left-closed, right-open bins of close offsets starting at 0.

    Empty bins between occupied ones are listed with count 0.
    """
    if not bin_hours > 0:
        raise ValueError("bin_hours must be positive")
    _, _, open_h = close_stats_arrays(event_log)
    if open_h.size == 0:
        return OpenDurationHistogram([], bin_hours, None)
    idx = np.floor(open_h / bin_hours).astype(np.int64)
    counts = np.bincount(idx)
    bins = [(float(i * bin_hours), int(c)) for i, c in enumerate(counts)]
    frac = float(np.mean(open_h < 24.0))
    return OpenDurationHistogram(bins, bin_hours, frac)


def format_tsv(header: Sequence[str], rows) -> str:
    out = ["\t".join(header)]
    for row in rows:
        out.append("\t".join(_cell(v) for v in row))
    return "\n".join(out) + "\n"


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".6g")
    return str(v)
