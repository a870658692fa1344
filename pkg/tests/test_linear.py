import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from textcausal.errors import NumericError, ParameterError, ShapeError
from textcausal.learners import (
    LinearModel,
    fit_elastic_net,
    fit_logistic,
    fit_ols,
    load_model,
    predict,
    save_model,
)
from textcausal.learners.linear import soft_threshold


def test_ols_exact_line():
    m = fit_ols([[0], [1], [2]], [1, 3, 5])
    assert m.intercept == pytest.approx(1, abs=1e-12)
    assert m.weights[0] == pytest.approx(2, abs=1e-12)


def test_ols_constant_target():
    X = np.random.default_rng(0).normal(size=(20, 1))
    m = fit_ols(X, np.full(20, 0.37))
    assert m.weights[0] == pytest.approx(0, abs=1e-12)
    assert m.intercept == pytest.approx(0.37, abs=1e-12)


def test_ols_residual_orthogonality(rng):
    X = rng.normal(size=(50, 3))
    y = X @ [1.0, -2.0, 0.5] + rng.normal(size=50)
    m = fit_ols(X, y)
    resid = y - m.predict(X)
    assert abs(resid.sum()) < 1e-8
    for j in range(3):
        assert abs(resid @ X[:, j]) < 1e-8


def test_ols_collinear_uses_jitter(rng):
    x = rng.normal(size=30)
    X = np.column_stack([x, x])
    m = fit_ols(X, 2 * x + 1)
    assert np.allclose(m.predict(X), 2 * x + 1, atol=1e-6)


def test_ols_errors():
    with pytest.raises(NumericError):
        fit_ols([[0], [np.nan], [2]], [1, 2, 3])
    with pytest.raises(ParameterError):
        fit_ols([[0, 1]], [1])
    with pytest.raises(ShapeError):
        fit_ols([[0], [1]], [1, 2, 3])


def test_predict_linear_model():
    m = LinearModel(intercept=1.0, weights=np.array([2.0]))
    assert predict(m, [[3.0]])[0] == 7.0
    with pytest.raises(ShapeError):
        predict(m, [[1.0, 2.0]])


def test_enet_without_penalty_matches_ols(rng):
    X = rng.normal(size=(80, 4))
    y = X @ [0.3, -1.0, 2.0, 0.0] + 0.1 * rng.normal(size=80)
    ols = fit_ols(X, y)
    en = fit_elastic_net(X, y, 0.0, 0.0)
    assert en.converged
    assert np.max(np.abs(en.weights - ols.weights)) < 1e-6
    assert en.intercept == pytest.approx(ols.intercept, abs=1e-6)


def test_enet_huge_l1_zeroes(rng):
    X = rng.normal(size=(40, 3))
    y = rng.normal(size=40)
    m = fit_elastic_net(X, y, l1=1e6)
    assert np.all(m.weights == 0)
    assert m.intercept == pytest.approx(y.mean(), abs=1e-12)


@pytest.mark.parametrize("l1,l2", [(0.5, 0.0), (3.0, 1.0), (40.0, 0.0)])
def test_enet_univariate_closed_form(rng, l1, l2):
    x = rng.normal(size=25)
    y = 0.8 * x + rng.normal(size=25)
    xc, yc = x - x.mean(), y - y.mean()
    rho = float(xc @ yc)
    expected = soft_threshold(rho, l1) / (float(xc @ xc) + l2)
    m = fit_elastic_net(x[:, None], y, l1, l2)
    assert m.weights[0] == pytest.approx(expected, abs=1e-12)


def test_soft_threshold():
    assert soft_threshold(3.0, 1.0) == 2.0
    assert soft_threshold(-3.0, 1.0) == -2.0
    assert soft_threshold(0.5, 1.0) == 0.0


def test_enet_zero_variance_column(rng):
    X = np.column_stack([rng.normal(size=30), np.ones(30)])
    m = fit_elastic_net(X, X[:, 0] + 1, 0.1, 0.0)
    assert m.weights[1] == 0.0


@given(seed=st.integers(0, 10_000), l1=st.floats(0.0, 5.0), l2=st.floats(0.0, 2.0))
def test_enet_kkt(seed, l1, l2):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 5))
    y = X[:, 0] - 0.5 * X[:, 2] + rng.normal(size=40)
    tol = 1e-10
    m = fit_elastic_net(X, y, l1, l2, tol=tol)
    assert m.converged
    Xc = X - X.mean(axis=0)
    resid = (y - y.mean()) - Xc @ m.weights
    grad = Xc.T @ resid - l2 * m.weights
    active = m.weights != 0
    # stationarity on active coordinates, subgradient bound elsewhere
    slack = 1e-6 * (1 + np.abs(Xc).sum())
    assert np.all(np.abs(grad[active] - l1 * np.sign(m.weights[active])) <= slack)
    assert np.all(np.abs(grad[~active]) <= l1 + slack)


def test_enet_nonconvergence_is_flag_not_error(rng):
    X = rng.normal(size=(30, 3))
    X[:, 1] = X[:, 0] + 1e-3 * rng.normal(size=30)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        m = fit_elastic_net(X, X[:, 0] - X[:, 1] + X[:, 2], 0.0, 0.0, max_iter=2)
    assert not m.converged
    assert any(issubclass(w.category, RuntimeWarning) for w in caught)


def test_enet_negative_penalty():
    with pytest.raises(ParameterError):
        fit_elastic_net([[0], [1]], [0, 1], l1=-1)


def test_logistic_recovers_coefficients():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(20_000, 2))
    p = 1 / (1 + np.exp(-(0.3 + X @ [1.0, -0.5])))
    t = (rng.uniform(size=20_000) < p).astype(int)
    m = fit_logistic(X, t)
    assert m.converged and m.link == "logistic"
    assert m.intercept == pytest.approx(0.3, abs=0.06)
    assert np.allclose(m.weights, [1.0, -0.5], atol=0.06)
    prob = predict(m, X)
    assert np.all((prob > 0) & (prob < 1))


def test_logistic_separable_stays_finite():
    X = np.arange(10.0)[:, None]
    m = fit_logistic(X, (X[:, 0] > 4.5).astype(int))
    assert np.isfinite(m.weights).all()
    assert np.all(m.predict(X)[5:] > 0.5) and np.all(m.predict(X)[:5] < 0.5)


def test_logistic_rejects_non_binary():
    with pytest.raises(ParameterError):
        fit_logistic([[0], [1]], [0, 2])


def test_linear_save_load(tmp_path, rng):
    X = rng.normal(size=(30, 2))
    m = fit_elastic_net(X, X[:, 0], 0.1, 0.2)
    save_model(m, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert np.array_equal(back.weights, m.weights) and back.intercept == m.intercept
    assert back.regularization == {"kind": "l1+l2", "l1": 0.1, "l2": 0.2}
    assert np.array_equal(back.predict(X), m.predict(X))
