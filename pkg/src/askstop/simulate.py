"""Synthetic askers: the myopic logit closer, the threshold random walk,
exact inverse Gaussian first-passage draws, and a Bellman threshold solver.

Every generator is a pure function of its configuration and seed.  Each
question draws from its own Philox substream whose counter is keyed by the
question index, so output does not depend on the order questions are run in.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special

from .eventlog import EventLog, QuestionRecord, format_float
from .expansion import SNAP_HOURS, grid_visit_counts
from .logit import logistic

log = logging.getLogger(__name__)

# substream domains, so the same seed never reuses draws across generators
_LOG_STREAM = 1
_WALK_STREAM = 2
_IG_STREAM = 3
_ARRIVAL_CHUNK = 64
_WALK_CHUNK = 64


class SimulationError(RuntimeError):
    pass


def substream(seed: int, domain: int, index: int = 0) -> np.random.Generator:
    if seed < 0:
        raise ValueError("seed must be non-negative")
    key = np.array([seed, domain], dtype=np.uint64)
    counter = np.array([0, 0, 0, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def _canonical(x: float) -> float:
    # the value a saved-and-reloaded log would carry
    return float(format_float(x))


@dataclass(frozen=True)
class ArrivalProcess:
    kind: str = "poisson"
    rate_per_hour: float = 0.25
    log_mean: float = 0.0
    log_sd: float = 1.0

    def __post_init__(self):
        if self.kind == "poisson":
            if not self.rate_per_hour > 0:
                raise ValueError("poisson rate must be positive")
        elif self.kind == "lognormal":
            if not self.log_sd > 0:
                raise ValueError("lognormal log_sd must be positive")
        else:
            raise ValueError(f"unknown arrival kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "ArrivalProcess":
        """``poisson:RATE`` or ``lognormal:M,S`` (parameters of log inter-arrival hours)."""
        kind, _, params = text.partition(":")
        try:
            if kind == "poisson":
                return cls("poisson", rate_per_hour=float(params))
            if kind == "lognormal":
                m, s = params.split(",")
                return cls("lognormal", log_mean=float(m), log_sd=float(s))
        except ValueError:
            pass
        raise ValueError(f"bad arrival spec {text!r}; expected poisson:RATE or lognormal:M,S")

    def inter_arrivals(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "poisson":
            return rng.exponential(1.0 / self.rate_per_hour, size)
        return rng.lognormal(self.log_mean, self.log_sd, size)


@dataclass(frozen=True)
class LogitAskerConfig:
    alpha: float
    beta1: float
    beta2: float
    beta3: float
    check_interval_hours: float = 1.0
    horizon_hours: float = 1000.0
    random_phase: bool = False

    def __post_init__(self):
        if not self.horizon_hours > 0:
            raise ValueError("horizon_hours must be positive")
        if not self.check_interval_hours > 0:
            raise ValueError("check_interval_hours must be positive")


def _nudge_ties(a: np.ndarray, floor: float) -> np.ndarray:
    # canonical rounding can (rarely) create ties; separate them like ingestion does
    prev = floor
    for i in range(a.size):
        if a[i] <= prev:
            a[i] = prev + 1e-9
        prev = a[i]
    return a


def _first_visits(asker: LogitAskerConfig, a: np.ndarray, phase: float | None) -> np.ndarray:
    h = asker.check_interval_hours
    if phase is None:
        return a + h
    # first point of the absolute grid phase + j*h strictly after each answer
    f = phase + h * (np.floor((a - phase) / h) + 1.0)
    return np.where(f - a <= SNAP_HOURS, f + h, f)


def _simulate_question(asker: LogitAskerConfig, arrivals: ArrivalProcess, rng: np.random.Generator):
    """One question's (answers, close), or None if it never closes before the horizon.

    Arrivals are drawn in chunks; after each chunk the check windows of every
    answer whose successor is known are scanned for a closing draw.
    """
    h = asker.check_interval_hours
    horizon = asker.horizon_hours
    phase = rng.uniform(0.0, h) if asker.random_phase else None
    a = np.empty(0)
    start = 0
    while True:
        t = a[-1] if a.size else 0.0
        chunk = np.array([_canonical(x) for x in t + np.cumsum(arrivals.inter_arrivals(rng, _ARRIVAL_CHUNK))])
        a = np.concatenate((a, _nudge_ties(chunk, t)))
        stop = a.size - 1
        seg = np.arange(start, stop)
        live = seg[a[seg] < horizon]
        if live.size:
            prev = np.where(live > 0, a[live - 1], 0.0)
            l = a[live] - prev
            end = np.minimum(a[live + 1], horizon)
            first = _first_visits(asker, a[live], phase)
            m = grid_visit_counts(end - first + h, h)
            src = np.repeat(np.arange(live.size), m)
            j = np.arange(int(m.sum())) - np.repeat(np.cumsum(m) - m, m)
            times = first[src] + j * h
            n = live[src] + 1
            w = times - a[live][src]
            p = logistic(asker.alpha + asker.beta1 * n + asker.beta2 * l[src] + asker.beta3 * w)
            hits = np.flatnonzero(rng.random(times.size) < p)
            if hits.size:
                i = hits[0]
                return tuple(float(x) for x in a[: n[i]]), _canonical(float(times[i]))
        if live.size < seg.size:
            return None
        start = stop


def simulate_log(
    asker: LogitAskerConfig,
    arrivals: ArrivalProcess,
    n_questions: int,
    seed: int,
    max_discard_rate: float = 0.99,
) -> EventLog:
    """Generate ``n_questions`` asker-closed questions.

    Candidate question ``i`` draws from substream ``(seed, i)``; candidates
    that get no answer or never close before the horizon are discarded and the
    next index is tried.
    """
    if n_questions < 1:
        raise ValueError("n_questions must be >= 1")
    records = []
    index = 0
    while len(records) < n_questions:
        out = _simulate_question(asker, arrivals, substream(seed, _LOG_STREAM, index))
        index += 1
        if out is not None:
            answers, close = out
            records.append(QuestionRecord(f"q{index - 1:07d}", answers, close))
        elif index >= 1000 and len(records) < (1.0 - max_discard_rate) * index:
            raise SimulationError(
                f"discard rate above {max_discard_rate:.0%} after {index} candidates: "
                f"horizon {asker.horizon_hours}h too short for alpha={asker.alpha}, beta1={asker.beta1}, "
                f"beta2={asker.beta2}, beta3={asker.beta3} with arrivals {arrivals}"
            )
    discarded = index - len(records)
    meta = {
        "generator": "logit-asker",
        "seed": seed,
        "asker": asdict(asker),
        "arrivals": asdict(arrivals),
        "n_questions": n_questions,
        "candidates": index,
        "discarded": discarded,
    }
    log.info("simulated %d questions (%d discarded)", n_questions, discarded)
    return EventLog(records, meta)


@dataclass(frozen=True)
class RandomWalkConfig:
    x0: float
    x_star: float
    step_mean: float = -0.5
    step_sd: float = 1.0
    max_steps: int = 100_000
    deterministic: bool = False

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not self.deterministic and not self.step_sd > 0:
            raise ValueError("step_sd must be positive (use deterministic=True for a constant step)")


@dataclass
class WalkCounts:
    counts: np.ndarray
    censored: np.ndarray
    config: RandomWalkConfig
    seed: int

    def __len__(self) -> int:
        return len(self.counts)

    def tolist(self) -> list[int]:
        return [int(c) for c in self.counts]


def _walk_one(cfg: RandomWalkConfig, rng: np.random.Generator) -> tuple[int, bool]:
    gap = cfg.x0 - cfg.x_star
    if cfg.deterministic:
        if cfg.step_mean >= 0:
            return cfg.max_steps, True
        # count of constant steps needed to reach the threshold
        k = math.ceil(gap / -cfg.step_mean - 1e-12)
        return (k, False) if k <= cfg.max_steps else (cfg.max_steps, True)
    pos = gap
    done = 0
    while done < cfg.max_steps:
        size = min(_WALK_CHUNK, cfg.max_steps - done)
        path = pos + np.cumsum(rng.normal(cfg.step_mean, cfg.step_sd, size))
        hit = np.flatnonzero(path <= 0.0)
        if hit.size:
            return done + int(hit[0]) + 1, False
        pos = path[-1]
        done += size
    return cfg.max_steps, True


def simulate_threshold_walk(config: RandomWalkConfig, n_questions: int, seed: int) -> WalkCounts:
    """Answers per question under the threshold stopping rule.

    The walk starts at ``x0`` and stops on the first step whose value is at or
    below ``x_star`` (indifference closes); that step is counted.
    """
    if config.x0 <= config.x_star:
        raise ValueError("x0 must exceed x_star (otherwise the question stops with no answers)")
    counts = np.empty(n_questions, dtype=np.int64)
    censored = np.zeros(n_questions, dtype=bool)
    for i in range(n_questions):
        counts[i], censored[i] = _walk_one(config, substream(seed, _WALK_STREAM, i))
    return WalkCounts(counts, censored, config, seed)


def sample_brownian_passage(mu: float, lam: float, n: int, seed: int) -> np.ndarray:
    """Exact inverse Gaussian draws (transformation with one rejection step)."""
    if not (mu > 0 and lam > 0):
        raise ValueError("mu and lambda must be positive")
    if n == 0:
        return np.empty(0)
    rng = substream(seed, _IG_STREAM)
    nu = rng.standard_normal(n)
    u = rng.random(n)
    y = nu * nu
    x = mu + mu * mu * y / (2.0 * lam) - mu / (2.0 * lam) * np.sqrt(4.0 * mu * lam * y + (mu * y) ** 2)
    return np.where(u <= mu / (mu + x), x, mu * mu / x)


@dataclass(frozen=True)
class BellmanConfig:
    discount: float = 0.9
    x_min: float = -20.0
    x_max: float = 40.0
    dx: float = 0.05
    step_mean: float = 0.0
    step_sd: float = 1.0
    tol: float = 1e-12
    max_iter: int = 20_000

    def __post_init__(self):
        if not 0.0 <= self.discount < 1.0:
            raise ValueError("discount must lie in [0, 1)")
        if not (self.dx > 0 and self.x_max - self.x_min > 2 * self.dx):
            raise ValueError("grid needs positive spacing and at least three points")
        if self.step_sd < 0:
            raise ValueError("step_sd must be non-negative")

    def grid(self) -> np.ndarray:
        lo = math.ceil(self.x_min / self.dx - 1e-9)
        hi = math.floor(self.x_max / self.dx + 1e-9)
        return self.dx * np.arange(lo, hi + 1)


@dataclass
class ThresholdSolution:
    x_star: float
    grid: np.ndarray
    values: np.ndarray
    continuation: np.ndarray
    iterations: int
    always_stop: bool = False
    monotone_every_iteration: bool = True
    config: BellmanConfig = field(default_factory=BellmanConfig)

    def value(self, x):
        return _interp_extrap(np.asarray(x, dtype=float), self.grid, self.values)


def _interp_extrap(x: np.ndarray, grid: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = np.interp(x, grid, v)
    lo_slope = (v[1] - v[0]) / (grid[1] - grid[0])
    hi_slope = (v[-1] - v[-2]) / (grid[-1] - grid[-2])
    out = np.where(x < grid[0], v[0] + lo_slope * (x - grid[0]), out)
    return np.where(x > grid[-1], v[-1] + hi_slope * (x - grid[-1]), out)


def _hinge_expectations(grid: np.ndarray, cfg: BellmanConfig) -> np.ndarray:
    """K[j, i] = E[(grid[j] + Z - grid[i])_+] for the interior knots i."""
    knots = grid[1:-1]
    shift = grid[:, None] + cfg.step_mean - knots[None, :]
    d = shift / cfg.step_sd
    return cfg.step_sd * np.exp(-0.5 * d * d) / math.sqrt(2.0 * math.pi) + shift * special.ndtr(d)


def _continuation(grid, v, cfg: BellmanConfig, hinges) -> np.ndarray:
    """E[V(x + Z)] for the piecewise-linear interpolant of V, exact for normal Z."""
    if cfg.step_sd == 0:
        return _interp_extrap(grid + cfg.step_mean, grid, v)
    # V(y) = v0 + b0 (y - g0) + sum_i (b_i - b_{i-1}) (y - g_i)_+ reproduces the linear extrapolation
    slopes = np.diff(v) / np.diff(grid)
    return v[0] + slopes[0] * (grid + cfg.step_mean - grid[0]) + hinges @ np.diff(slopes)


def solve_threshold(config: BellmanConfig) -> ThresholdSolution:
    """Value iteration for V(x) = x + max(0, delta * E[V(x + Z)]), Z ~ Normal.

    V lives on the grid as a piecewise-linear interpolant (linear beyond the
    ends), whose expectation against the normal step is evaluated in closed form.

    The stopping threshold is the zero of the continuation value E[V(x + Z)],
    located by linear interpolation between the grid points that bracket it.
    Indifference resolves to stopping.
    """
    grid = config.grid()
    if config.discount == 0.0:
        return ThresholdSolution(-math.inf, grid, grid.copy(), np.zeros_like(grid), 0, True, True, config)
    hinges = _hinge_expectations(grid, config) if config.step_sd > 0 else None
    v = grid.copy()
    monotone = True
    for it in range(1, config.max_iter + 1):
        cont = _continuation(grid, v, config, hinges)
        v_new = grid + np.maximum(0.0, config.discount * cont)
        monotone &= bool(np.all(np.diff(v_new) >= -1e-12))
        change = float(np.max(np.abs(v_new - v)))
        v = v_new
        if change < config.tol:
            break
    else:
        raise SimulationError(f"value iteration did not converge in {config.max_iter} iterations")

    cont = _continuation(grid, v, config, hinges)
    above = np.flatnonzero(cont >= 0.0)
    if above.size == 0 or above[0] == 0:
        raise SimulationError(
            f"continuation value has no sign change on [{grid[0]}, {grid[-1]}]; widen the grid"
        )
    i = above[0]
    c0, c1 = cont[i - 1], cont[i]
    x_star = float(grid[i - 1] + (0.0 - c0) / (c1 - c0) * (grid[i] - grid[i - 1]))
    return ThresholdSolution(x_star, grid, v, cont, it, False, monotone, config)
