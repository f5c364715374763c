import warnings

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2

from fraudnet.errors import ConfigError
from fraudnet.mlkit.dataset import LabeledDataset
from fraudnet.mlkit.logistic import (
    CollinearityWarning,
    ConstantFeatureWarning,
    ModelFit,
    PerfectSeparationWarning,
    fit_logistic,
    gradient,
    log_likelihood,
    stepwise_select,
)


def dataset(X, y, names=None):
    X = np.asarray(X, dtype=float)
    names = names or [f"x{i}" for i in range(X.shape[1])]
    return LabeledDataset(pd.DataFrame(X, columns=names), y)


def simulate(rng, n, beta, intercept=-1.0):
    X = rng.normal(size=(n, len(beta)))
    p = 1 / (1 + np.exp(-(intercept + X @ beta)))
    return X, (rng.random(n) < p).astype(int)


def test_intercept_only_is_logit_of_rate():
    y = np.array([1] * 25 + [0] * 75)
    fit = fit_logistic(dataset(np.zeros((100, 0)), y), [])
    assert abs(fit.intercept - np.log(0.25 / 0.75)) <= 1e-8


def test_gradient_vanishes_and_matches_differences():
    rng = np.random.default_rng(5)
    X, y = simulate(rng, 200, np.array([0.8, -0.5, 0.3]))
    ds = dataset(X, y)
    fit = fit_logistic(ds)
    Z = fit.design(ds)
    assert np.abs(gradient(fit.beta, Z, y)).max() < 1e-6
    probe = fit.beta + np.array([0.1, -0.2, 0.05, 0.3])
    g = gradient(probe, Z, y)
    h = 1e-6
    fd = np.array([(log_likelihood(probe + h * e, Z, y) - log_likelihood(probe - h * e, Z, y)) / (2 * h)
                   for e in np.eye(4)])
    np.testing.assert_allclose(g, fd, rtol=1e-4)


def test_matches_reference_coefficients():
    # Newton's method from a different start, on the same standardized design
    rng = np.random.default_rng(1)
    X, y = simulate(rng, 500, np.array([1.0, -2.0]))
    fit = fit_logistic(dataset(X, y))
    Z = fit.design(dataset(X, y))
    b = np.zeros(3)
    for _ in range(50):
        p = 1 / (1 + np.exp(-Z @ b))
        b += np.linalg.solve(Z.T @ (Z * (p * (1 - p))[:, None]), Z.T @ (y - p))
    np.testing.assert_allclose(fit.beta, b, atol=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31))
def test_mean_prediction_equals_rate(seed):
    rng = np.random.default_rng(seed)
    X, y = simulate(rng, 300, rng.normal(size=3) * 0.5)
    if y.min() == y.max():
        return
    ds = dataset(X, y)
    fit = fit_logistic(ds)
    assert abs(fit.predict_proba(ds).mean() - y.mean()) <= 1e-8


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.01, 100), st.floats(-50, 50))
def test_affine_rescaling_leaves_predictions(seed, scale, shift):
    rng = np.random.default_rng(seed)
    X, y = simulate(rng, 200, np.array([0.7, -0.4]))
    a = fit_logistic(dataset(X, y))
    X2 = X.copy()
    X2[:, 0] = scale * X2[:, 0] + shift
    b = fit_logistic(dataset(X2, y))
    np.testing.assert_allclose(a.predict_proba(dataset(X, y)), b.predict_proba(dataset(X2, y)), atol=1e-8)


def test_separation_is_flagged():
    x = np.array([0.0] * 10 + [1.0] * 10)
    y = 1 - x.astype(int)
    with pytest.warns(PerfectSeparationWarning):
        fit = fit_logistic(dataset(x[:, None], y))
    assert fit.separated
    assert fit.coefficients["x0"] < 0


def test_constant_column_dropped():
    rng = np.random.default_rng(0)
    X, y = simulate(rng, 100, np.array([1.0]))
    X = np.column_stack([X, np.ones(100)])
    with pytest.warns(ConstantFeatureWarning):
        fit = fit_logistic(dataset(X, y))
    assert fit.features == ["x0"] and fit.dropped == ["x1"]


def test_collinear_columns_warn():
    rng = np.random.default_rng(0)
    X, y = simulate(rng, 200, np.array([1.0]))
    X = np.column_stack([X, 2 * X[:, 0] + 1])
    with pytest.warns(CollinearityWarning):
        fit = fit_logistic(dataset(X, y))
    assert fit.collinear


def test_too_few_rows():
    with pytest.raises(ConfigError):
        fit_logistic(dataset(np.arange(6.0).reshape(3, 2), [0, 1, 0]))


def test_model_roundtrip():
    rng = np.random.default_rng(2)
    X, y = simulate(rng, 100, np.array([1.0, 0.5]))
    fit = fit_logistic(dataset(X, y))
    again = ModelFit.from_dict(fit.to_dict())
    np.testing.assert_array_equal(again.predict_proba(dataset(X, y)), fit.predict_proba(dataset(X, y)))
    assert fit.to_dict()["aic"] == pytest.approx(-2 * fit.log_likelihood + 2 * 3)


def _signal_and_noise(seed):
    rng = np.random.default_rng(seed)
    signal = rng.normal(size=2000)
    noise = rng.normal(size=2000)
    y = (rng.random(2000) < 1 / (1 + np.exp(-(-1 + signal)))).astype(int)
    return dataset(np.column_stack([signal, noise]), y, ["signal", "noise"])


def test_stepwise_keeps_signal_and_drops_noise():
    # AIC admits a null feature when its LR statistic exceeds 2: P(chi2_1 > 2) = 0.157
    seeds = range(200)
    fits = [stepwise_select(_signal_and_noise(s)) for s in seeds]
    assert all("signal" in f.features for f in fits)
    excluded = np.mean(["noise" not in f.features for f in fits])
    assert abs(excluded - (1 - chi2.sf(2.0, 1))) < 0.06


def test_pvalue_stepwise_excludes_noise_nine_times_in_ten():
    fits = [stepwise_select(_signal_and_noise(s), criterion="pvalue") for s in range(100)]
    assert all("signal" in f.features for f in fits)
    assert np.mean(["noise" not in f.features for f in fits]) >= 0.9


def test_stepwise_without_signal_is_intercept_only():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(500, 3))
    y = (rng.random(500) < 0.3).astype(int)
    fit = stepwise_select(dataset(X, y))
    assert fit.features == []
    assert fit.selection_trace[0]["action"] == "start"


def test_stepwise_picks_one_copy_of_duplicate():
    rng = np.random.default_rng(4)
    x = rng.normal(size=1000)
    y = (rng.random(1000) < 1 / (1 + np.exp(-x))).astype(int)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fit = stepwise_select(dataset(np.column_stack([x, x]), y, ["a", "b"]))
    assert len(fit.features) == 1


def test_stepwise_pvalue_mode():
    rng = np.random.default_rng(6)
    X, y = simulate(rng, 1500, np.array([1.0, 0.0]))
    fit = stepwise_select(dataset(X, y), criterion="pvalue")
    assert fit.features == ["x0"]
    with pytest.raises(ConfigError):
        stepwise_select(dataset(X, y), criterion="bic")
