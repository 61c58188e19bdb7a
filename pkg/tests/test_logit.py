import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from askstop.logit import (
    ConvergenceError,
    LogitFit,
    RankDeficiencyError,
    SeparationError,
    dumps_fit_records,
    fit_logit,
    format_fit_table,
    gradient,
    log_likelihood,
    logistic,
    predict_close_probability,
    significance_stars,
)

REFERENCE_COEFS = np.array([-4.408, 0.027, 0.028, 0.021])

# hand-built, overlapping classes so the MLE is finite
TOY_X = np.array(
    [
        [1, 0.5, 2.0],
        [1, 1.0, 1.0],
        [1, 1.5, 3.0],
        [1, 2.0, 0.5],
        [1, 2.5, 2.5],
        [1, 3.0, 1.5],
        [1, 3.5, 0.0],
        [1, 4.0, 2.0],
    ]
)
TOY_Y = np.array([0, 0, 1, 0, 1, 0, 1, 1])


def naive_nll(beta, X, y):
    total = 0.0
    for row, label in zip(X, y):
        p = 1.0 / (1.0 + math.exp(-sum(b * v for b, v in zip(beta, row))))
        total -= math.log(p) if label else math.log(1.0 - p)
    return total


def simulated_design(seed, rows=3000, beta=(-1.0, 0.3, -0.2, 0.1)):
    rng = np.random.default_rng(seed)
    X = np.column_stack((np.ones(rows), rng.integers(1, 10, rows), rng.exponential(2.0, rows), rng.uniform(0, 5, rows)))
    y = (rng.random(rows) < logistic(X @ np.array(beta))).astype(float)
    return X, y


def test_logistic_values():
    assert logistic(0.0) == 0.5
    for z in (-30, -1, 1, 30):
        assert logistic(z) + logistic(-z) == pytest.approx(1.0, abs=1e-15)
    for z in (-700, 700, -1e4, 1e4):
        v = logistic(z)
        assert 0.0 <= v <= 1.0 and math.isfinite(v)
    assert logistic(700) == 1.0
    assert 0.0 < logistic(-700) < 1e-300


def test_logistic_reference_point():
    eta = REFERENCE_COEFS @ np.array([1, 5, 2, 10])
    assert eta == pytest.approx(-4.007, abs=1e-12)
    assert logistic(eta) == pytest.approx(1 / (1 + math.exp(4.007)), rel=1e-12)
    assert logistic(eta) == pytest.approx(0.0178630, abs=1e-7)
    assert logistic(eta) == pytest.approx(0.01787, abs=1e-5)


def test_intercept_only_closed_form():
    y = np.array([1.0] * 25 + [0.0] * 75)
    fit = fit_logit(np.ones((100, 1)), y)
    assert fit.coefficients[0] == pytest.approx(math.log(0.25 / 0.75), abs=1e-12)
    assert fit.standard_errors[0] == pytest.approx(math.sqrt(1 / (100 * 0.25 * 0.75)), rel=1e-10)
    assert round(fit.coefficients[0], 4) == -1.0986
    assert round(fit.standard_errors[0], 4) == 0.2309


def test_toy_against_nelder_mead():
    fit = fit_logit(TOY_X, TOY_Y)
    res = optimize.minimize(
        naive_nll, np.zeros(3), args=(TOY_X, TOY_Y), method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000},
    )
    assert np.max(np.abs(fit.coefficients - res.x)) < 1e-3
    assert fit.log_likelihood == pytest.approx(-res.fun, abs=1e-8)


def test_gradient_vanishes_and_matches_differences():
    X, y = simulated_design(0)
    fit = fit_logit(X, y)
    assert np.max(np.abs(gradient(fit.coefficients, X, y))) < 1e-6
    rng = np.random.default_rng(1)
    b = fit.coefficients + rng.normal(0, 0.1, 4)
    g = gradient(b, X, y)
    h = 1e-5
    fd = np.array([(log_likelihood(b + h * e, X, y) - log_likelihood(b - h * e, X, y)) / (2 * h) for e in np.eye(4)])
    assert np.allclose(fd, g, rtol=1e-4, atol=1e-6)


def test_local_maximum():
    X, y = simulated_design(2)
    fit = fit_logit(X, y)
    rng = np.random.default_rng(3)
    for _ in range(50):
        d = rng.standard_normal(4)
        d *= 1e-6 / np.linalg.norm(d)
        assert log_likelihood(fit.coefficients + d, X, y) <= fit.log_likelihood + 1e-9


def test_concavity():
    X, y = simulated_design(4, rows=500)
    rng = np.random.default_rng(5)
    for _ in range(100):
        a, b = rng.normal(0, 1, (2, 4))
        mid = log_likelihood((a + b) / 2, X, y)
        assert mid >= (log_likelihood(a, X, y) + log_likelihood(b, X, y)) / 2 - 1e-12


def test_permutation_invariance():
    X, y = simulated_design(6)
    perm = np.random.default_rng(7).permutation(len(y))
    a, b = fit_logit(X, y), fit_logit(X[perm], y[perm])
    assert np.allclose(a.coefficients, b.coefficients, atol=1e-9)
    assert np.allclose(a.standard_errors, b.standard_errors, rtol=1e-7)


@pytest.mark.parametrize("c", [0.1, 3.0, 60.0])
def test_rescaling_l(c):
    X, y = simulated_design(8)
    Xc = X.copy()
    Xc[:, 2] *= c
    a, b = fit_logit(X, y), fit_logit(Xc, y)
    assert b.coefficients[2] == pytest.approx(a.coefficients[2] / c, rel=1e-6)
    assert np.allclose(logistic(X @ a.coefficients), logistic(Xc @ b.coefficients), atol=1e-8)


def test_recovers_simulated_truth():
    truth = np.array([-1.0, 0.3, -0.2, 0.1])
    X, y = simulated_design(9, rows=20000, beta=truth)
    fit = fit_logit(X, y)
    assert np.all(np.abs(fit.coefficients - truth) < 3 * fit.standard_errors)


def test_complete_separation():
    X = np.column_stack((np.ones(8), np.arange(8.0)))
    y = (np.arange(8) >= 4).astype(float)
    with pytest.raises(SeparationError, match="direction") as exc:
        fit_logit(X, y)
    assert exc.value.direction[1] > 0


def test_ridge_tames_separation():
    X = np.column_stack((np.ones(8), np.arange(8.0)))
    y = (np.arange(8) >= 4).astype(float)
    fit = fit_logit(X, y, ridge=1e-6)
    assert fit.converged and np.all(np.isfinite(fit.coefficients))
    assert fit.ridge == 1e-6


def test_rank_deficiency():
    X = np.column_stack((np.ones(6), np.arange(6.0), 2 * np.arange(6.0)))
    with pytest.raises(RankDeficiencyError):
        fit_logit(X, np.array([0, 1, 0, 1, 1, 0.0]))


def test_non_convergence_is_reported():
    X, y = simulated_design(10)
    with pytest.raises(ConvergenceError) as exc:
        fit_logit(X, y, max_iter=1)
    assert exc.value.iterations == 1


def test_input_validation():
    with pytest.raises(ValueError, match="binary"):
        fit_logit(np.ones((3, 1)), np.array([0, 2, 1]))
    with pytest.raises(ValueError, match="no observations"):
        fit_logit(np.ones((0, 1)), np.array([]))


def test_stars():
    assert [significance_stars(p) for p in (0.0005, 0.001, 0.004, 0.009, 0.01, 0.5)] == ["***", "**", "**", "*", "", ""]


def _fit(coefs):
    return LogitFit(np.array(coefs, dtype=float), np.ones(4), -1.0, 10, True, 3)


def test_predict():
    assert predict_close_probability(_fit(REFERENCE_COEFS), 5, 2.0, 10.0) == pytest.approx(0.01787, abs=1e-5)
    assert predict_close_probability(_fit([0, 0, 0, 0]), 7, 3.3, 9.1) == 0.5
    unconverged = _fit(REFERENCE_COEFS)
    unconverged.converged = False
    with pytest.raises(Exception, match="converge"):
        predict_close_probability(unconverged, 1, 1.0, 1.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40), st.floats(0.01, 50), st.floats(0, 90), st.sampled_from(["n", "l", "w"]))
def test_predict_monotone(n, l, w, which):
    fit = _fit(REFERENCE_COEFS)
    base = predict_close_probability(fit, n, l, w)
    bumped = {"n": (n + 1, l, w), "l": (n, l + 1, w), "w": (n, l, w + 1)}[which]
    assert predict_close_probability(fit, *bumped) > base


def test_serialization_round_trip():
    fit = fit_logit(TOY_X[:, :2].repeat(3, axis=0), np.tile(TOY_Y, 3))
    again = LogitFit.from_dict(fit.as_dict())
    assert np.array_equal(again.coefficients, fit.coefficients)
    assert np.array_equal(again.standard_errors, fit.standard_errors)
    text = format_fit_table(_fit(REFERENCE_COEFS))
    assert "-4.408" in text and "(1.0000)" in text
    assert dumps_fit_records(fit).count("\n") == 3
