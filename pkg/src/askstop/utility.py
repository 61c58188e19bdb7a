"""Asker utility and waiting-cost primitives recovered from a logit fit.

The logit index splits as ``expected_cost(l, w) - marginal_benefit(n)``, so a
fit pins down beta1..beta3 and the difference ``alpha_c - alpha_u`` but not
``alpha_u`` itself; callers must supply it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .logit import LogitError, LogitFit


@dataclass(frozen=True)
class UtilityModel:
    alpha_u: float
    beta1: float
    u0: float = 0.0


@dataclass(frozen=True)
class CostModel:
    alpha_c: float
    beta2: float
    beta3: float


def marginal_benefit(model: UtilityModel, n: int) -> float:
    """u(n+1) - u(n)."""
    return model.alpha_u - model.beta1 * n


def utility_value(model: UtilityModel, n: int) -> float:
    """Quadratic utility u(n) = (alpha_u + beta1/2) n - (beta1/2) n^2 + u0."""
    half = model.beta1 / 2
    return (model.alpha_u + half) * n - half * n * n + model.u0


def utility_curve(model: UtilityModel, n_max: int = 50) -> list[tuple[int, float]]:
    return [(n, utility_value(model, n)) for n in range(n_max + 1)]


def utility_peak(model: UtilityModel) -> int:
    """Smallest n maximizing u(n) over the non-negative integers.

    Utility rises while the marginal benefit is positive, so the peak is the
    first n whose marginal benefit is <= 0.
    """
    if model.beta1 <= 0:
        raise ValueError("beta1 must be positive for an interior utility peak")
    if model.alpha_u <= 0:
        raise ValueError("alpha_u must be positive")
    k = max(0, math.ceil(model.alpha_u / model.beta1))
    while k > 0 and marginal_benefit(model, k - 1) <= 0:
        k -= 1
    while marginal_benefit(model, k) > 0:
        k += 1
    return k


def expected_cost(model: CostModel, l: float, w: float) -> float:
    """E[c(T(l, w))] = alpha_c + beta2 l + beta3 w."""
    return model.alpha_c + model.beta2 * l + model.beta3 * w


def prefers_close(utility: UtilityModel, cost: CostModel, n: int, l: float, w: float) -> bool:
    """Noiseless myopic rule; indifference resolves to closing."""
    return marginal_benefit(utility, n) <= expected_cost(cost, l, w)


def linear_index(utility: UtilityModel, cost: CostModel, n: int, l: float, w: float) -> float:
    return expected_cost(cost, l, w) - marginal_benefit(utility, n)


def decompose_fit(fit: LogitFit, alpha_u: float, u0: float = 0.0) -> tuple[UtilityModel, CostModel]:
    if not fit.converged:
        raise LogitError("fit did not converge")
    alpha, b1, b2, b3 = (float(c) for c in fit.coefficients)
    return UtilityModel(alpha_u, b1, u0), CostModel(alpha + alpha_u, b2, b3)


def recompose(utility: UtilityModel, cost: CostModel) -> tuple[float, float, float, float]:
    """Logit coefficients implied by the two models."""
    return cost.alpha_c - utility.alpha_u, utility.beta1, cost.beta2, cost.beta3
