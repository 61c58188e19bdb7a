"""Binary logit estimation by Newton-Raphson with step halving.

Model: P(close) = logistic(alpha + beta1 * n + beta2 * l + beta3 * w).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

COEF_NAMES = ("alpha", "beta1", "beta2", "beta3")
STAR_LEVELS = ((0.001, "***"), (0.005, "**"), (0.01, "*"))


class LogitError(RuntimeError):
    pass


class ConvergenceError(LogitError):
    def __init__(self, message: str, iterations: int):
        self.iterations = iterations
        super().__init__(message)


class SeparationError(LogitError):
    def __init__(self, message: str, direction: np.ndarray):
        self.direction = direction
        super().__init__(message)


class RankDeficiencyError(LogitError):
    pass


def logistic(z):
    """Numerically stable logistic function; accepts scalars or arrays."""
    z = np.asarray(z, dtype=float)
    out = np.exp(-np.logaddexp(0.0, -z))
    return float(out) if out.ndim == 0 else out


def log_likelihood(beta: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
    z = X @ beta
    # y*z - log(1 + e^z), summed pairwise by numpy for a fixed order
    return float(np.sum(y * z - np.logaddexp(0.0, z)))


def gradient(beta: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    return X.T @ (y - logistic(X @ beta))


def hessian(beta: np.ndarray, X: np.ndarray) -> np.ndarray:
    p = logistic(X @ beta)
    return -(X.T * (p * (1.0 - p))) @ X


def significance_stars(p_value: float) -> str:
    for level, stars in STAR_LEVELS:
        if p_value < level:
            return stars
    return ""


@dataclass
class LogitFit:
    coefficients: np.ndarray
    standard_errors: np.ndarray
    log_likelihood: float
    n_observations: int
    converged: bool
    iterations: int
    last_step_norm: float = float("nan")
    names: tuple[str, ...] = COEF_NAMES
    ridge: float = 0.0
    history: list[float] = field(default_factory=list, repr=False)

    @property
    def z_values(self) -> np.ndarray:
        return self.coefficients / self.standard_errors

    @property
    def p_values(self) -> np.ndarray:
        return 2.0 * stats.norm.sf(np.abs(self.z_values))

    def stars(self) -> list[str]:
        return [significance_stars(p) for p in self.p_values]

    def as_dict(self) -> dict:
        return {
            "names": list(self.names),
            "coefficients": [float(c) for c in self.coefficients],
            "standard_errors": [float(s) for s in self.standard_errors],
            "p_values": [float(p) for p in self.p_values],
            "log_likelihood": self.log_likelihood,
            "n_observations": self.n_observations,
            "converged": self.converged,
            "iterations": self.iterations,
            "last_step_norm": self.last_step_norm,
            "ridge": self.ridge,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LogitFit":
        return cls(
            coefficients=np.array(d["coefficients"], dtype=float),
            standard_errors=np.array(d["standard_errors"], dtype=float),
            log_likelihood=float(d["log_likelihood"]),
            n_observations=int(d["n_observations"]),
            converged=bool(d["converged"]),
            iterations=int(d["iterations"]),
            last_step_norm=float(d.get("last_step_norm", float("nan"))),
            names=tuple(d.get("names", COEF_NAMES)),
            ridge=float(d.get("ridge", 0.0)),
        )


def fit_logit(
    X: np.ndarray,
    y: np.ndarray,
    tol: float = 1e-8,
    max_iter: int = 100,
    ridge: float | None = None,
    separation_norm: float = 50.0,
) -> LogitFit:
    """Maximum-likelihood logit fit.

    Newton steps are halved until the log-likelihood does not decrease.
    Iteration stops once the absolute log-likelihood improvement drops below
    ``tol``.  Standard errors come from the inverse observed information.
    ``ridge`` adds ``ridge * ||beta||^2 / 2`` as a penalty (exploratory use only;
    the usual choice is 1e-6).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-D with one row per label")
    if len(y) == 0:
        raise ValueError("no observations")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("y must be binary")
    k = X.shape[1]
    rank = np.linalg.matrix_rank(X)
    if rank < k:
        raise RankDeficiencyError(f"design matrix has rank {rank} < {k} columns")
    lam = float(ridge or 0.0)

    def objective(b):
        return log_likelihood(b, X, y) - 0.5 * lam * float(b @ b)

    beta = np.zeros(k)
    ybar = y.mean()
    if np.allclose(X[:, 0], 1.0) and 0.0 < ybar < 1.0:
        beta[0] = math.log(ybar / (1.0 - ybar))
    ll = objective(beta)
    history = [ll]
    step_norm = float("nan")
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = gradient(beta, X, y) - lam * beta
        H = hessian(beta, X) - lam * np.eye(k)
        try:
            step = np.linalg.solve(-H, g)
        except np.linalg.LinAlgError:
            raise RankDeficiencyError("information matrix is singular at the current iterate") from None
        t = 1.0
        while True:
            cand = beta + t * step
            ll_new = objective(cand)
            if ll_new >= ll or t < 1e-10:
                break
            t *= 0.5
        step_norm = float(np.max(np.abs(cand - beta)))
        improvement = ll_new - ll
        beta, ll = cand, ll_new
        history.append(ll)
        if not lam and np.linalg.norm(beta) > separation_norm and -ll < 1e-6 * len(y):
            direction = beta / np.linalg.norm(beta)
            raise SeparationError(
                "complete separation: coefficients diverge along direction "
                + np.array2string(direction, precision=4),
                direction,
            )
        if abs(improvement) < tol:
            converged = True
            break
    if not converged:
        if not lam and np.linalg.norm(beta) > separation_norm:
            direction = beta / np.linalg.norm(beta)
            raise SeparationError(
                "coefficients diverge (likely quasi-separation) along direction "
                + np.array2string(direction, precision=4),
                direction,
            )
        raise ConvergenceError(f"no convergence after {it} iterations (last step {step_norm:.3g})", it)

    info = -hessian(beta, X) + lam * np.eye(k)
    cov = np.linalg.inv(info)
    se = np.sqrt(np.diag(cov))
    names = COEF_NAMES if k == 4 else tuple(f"b{i}" for i in range(k))
    return LogitFit(beta, se, log_likelihood(beta, X, y), len(y), True, it, step_norm, names, lam, history)


def predict_close_probability(fit: LogitFit, n: float, l: float, w: float) -> float:
    if not fit.converged:
        raise LogitError("fit did not converge")
    a, b1, b2, b3 = fit.coefficients
    return logistic(a + b1 * n + b2 * l + b3 * w)


def format_fit_table(fit: LogitFit, label: str = "Estimate") -> str:
    """Human-readable coefficient table: estimate, SE in parentheses, stars."""
    lines = [f"{'':<8}{label:>24}"]
    for name, c, s, st in zip(fit.names, fit.coefficients, fit.standard_errors, fit.stars()):
        lines.append(f"{name:<8}{f'{c:.3f}{st} ({s:.4f})':>24}")
    lines.append(f"{'LogLik':<8}{fit.log_likelihood:>24.3f}")
    lines.append(f"{'N':<8}{fit.n_observations:>24,d}")
    lines.append("*, ** and *** denote significance at 1%, 0.5% and 0.1%; standard errors in parentheses.")
    return "\n".join(lines)


def fit_records(fit: LogitFit) -> list[dict]:
    """Machine-readable rows mirroring the human table, one dict per line."""
    rows = [
        {"term": name, "estimate": float(c), "se": float(s), "p_value": float(p), "stars": st}
        for name, c, s, p, st in zip(fit.names, fit.coefficients, fit.standard_errors, fit.p_values, fit.stars())
    ]
    rows.append({"term": "_summary", **{k: v for k, v in fit.as_dict().items() if k not in ("names",)}})
    return rows


def dumps_fit_records(fit: LogitFit) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in fit_records(fit))


__all__ = [
    "ConvergenceError",
    "LogitError",
    "LogitFit",
    "RankDeficiencyError",
    "SeparationError",
    "fit_logit",
    "format_fit_table",
    "gradient",
    "hessian",
    "log_likelihood",
    "logistic",
    "predict_close_probability",
    "significance_stars",
]
