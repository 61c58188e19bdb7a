"""Inverse Gaussian toolkit for answers-per-question counts.

Integer counts are treated as draws from the continuous density; no
discretization correction is applied.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
from scipy import optimize, special


@dataclass(frozen=True)
class InvGaussianParams:
    mu: float
    lam: float

    def __post_init__(self):
        if not (self.mu > 0 and self.lam > 0 and math.isfinite(self.mu) and math.isfinite(self.lam)):
            raise ValueError(f"inverse Gaussian needs finite mu, lambda > 0, got ({self.mu}, {self.lam})")

    @property
    def variance(self) -> float:
        return self.mu**3 / self.lam


def _positive(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("inverse Gaussian is only defined for x > 0")
    return x


def invgauss_pdf(params: InvGaussianParams, x):
    x = _positive(x)
    mu, lam = params.mu, params.lam
    out = np.sqrt(lam / (2.0 * np.pi)) * x**-1.5 * np.exp(-lam * (x - mu) ** 2 / (2.0 * mu * mu * x))
    return float(out) if out.ndim == 0 else out


def invgauss_logpdf(params: InvGaussianParams, x):
    x = _positive(x)
    mu, lam = params.mu, params.lam
    return 0.5 * np.log(lam / (2.0 * np.pi)) - 1.5 * np.log(x) - lam * (x - mu) ** 2 / (2.0 * mu * mu * x)


def invgauss_cdf(params: InvGaussianParams, x):
    x = _positive(x)
    mu, lam = params.mu, params.lam
    s = np.sqrt(lam / x)
    first = special.ndtr(s * (x / mu - 1.0))
    # exp(2 lam / mu) overflows long before the product does
    second = np.exp(2.0 * lam / mu + special.log_ndtr(-s * (x / mu + 1.0)))
    out = np.clip(first + second, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def invgauss_loglik(params: InvGaussianParams, sample) -> float:
    return float(np.sum(invgauss_logpdf(params, sample)))


def _materialize(sample) -> np.ndarray:
    if not hasattr(sample, "__len__"):
        sample = list(sample)
    return np.asarray(sample, dtype=float)


def _check_sample(sample) -> np.ndarray:
    x = _materialize(sample)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("need at least two observations")
    if np.any(x == 0):
        raise ValueError(
            "zero counts are not allowed: asker-closed questions always have at least one answer"
        )
    if np.any(~(x > 0)):
        raise ValueError("all observations must be positive and finite")
    return x


def fit_invgauss_mle(sample: Iterable[float]) -> InvGaussianParams:
    """Closed-form MLE: mu = mean, lambda = n / sum(1/x - 1/mu)."""
    x = _check_sample(_materialize(sample))
    mu = float(np.mean(x))
    denom = float(np.sum(1.0 / x - 1.0 / mu))
    if not denom > 0:
        raise ValueError("degenerate sample: lambda estimate is unbounded")
    return InvGaussianParams(mu, x.size / denom)


def fit_invgauss_numeric(sample: Iterable[float], start: InvGaussianParams | None = None) -> InvGaussianParams:
    """Direct numerical maximization of the log-likelihood over (log mu, log lambda)."""
    x = _check_sample(_materialize(sample))
    n = x.size
    slog = float(np.sum(np.log(x)))

    def nll(theta):
        mu, lam = np.exp(theta)
        return -(0.5 * n * math.log(lam / (2 * math.pi)) - 1.5 * slog - lam * np.sum((x - mu) ** 2 / x) / (2 * mu * mu))

    if start is None:
        m = float(np.median(x))
        start = InvGaussianParams(m, m)
    res = optimize.minimize(
        nll, np.log([start.mu, start.lam]), method="Nelder-Mead",
        options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20_000, "maxfev": 40_000},
    )
    mu, lam = np.exp(res.x)
    return InvGaussianParams(float(mu), float(lam))


def ks_statistic(sample: Iterable[float], params: InvGaussianParams) -> float:
    """Sup distance between the right-continuous empirical CDF and the fitted CDF."""
    x = np.sort(_materialize(sample))
    if x.size == 0:
        raise ValueError("empty sample")
    n = x.size
    F = invgauss_cdf(params, x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def cdf_table(sample: Iterable[float], params: InvGaussianParams) -> list[tuple[float, float, float]]:
    """(x, empirical CDF, fitted CDF) at each distinct sample value."""
    x = np.sort(_materialize(sample))
    vals, counts = np.unique(x, return_counts=True)
    ecdf = np.cumsum(counts) / x.size
    fitted = np.atleast_1d(invgauss_cdf(params, vals))
    return [(float(v), float(e), float(f)) for v, e, f in zip(vals, ecdf, fitted)]


def integer_histogram(values: Iterable[int]) -> dict[int, int]:
    return dict(sorted(Counter(int(v) for v in values).items()))


@dataclass(frozen=True)
class TailSlopeResult:
    slope: float
    intercept: float
    fit_range: tuple[float, float]
    points_used: int


def tail_slope(counts: Mapping[int, float], x_min: float, min_bin_count: float = 5) -> TailSlopeResult:
    """Least-squares line through (log x, log relative frequency) over tail bins.

    Bins qualify when ``x >= x_min`` and their count is at least ``min_bin_count``.
    """
    total = float(sum(counts.values()))
    pts = sorted((float(x), float(c)) for x, c in counts.items() if x >= x_min and c >= min_bin_count and x > 0)
    if len(pts) < 3 or total <= 0:
        raise ValueError(f"insufficient tail support: {len(pts)} qualifying bins at x >= {x_min}")
    lx = np.log([p[0] for p in pts])
    lf = np.log([p[1] / total for p in pts])
    slope, intercept = np.polyfit(lx, lf, 1)
    return TailSlopeResult(float(slope), float(intercept), (pts[0][0], pts[-1][0]), len(pts))


def loglog_table(counts: Mapping[int, float]) -> list[tuple[float, float]]:
    total = float(sum(counts.values()))
    return [(math.log(x), math.log(c / total)) for x, c in sorted(counts.items()) if x > 0 and c > 0]


def default_tail_start(params: InvGaussianParams) -> int:
    return math.ceil(params.mu)
