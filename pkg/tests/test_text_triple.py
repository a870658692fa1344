import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from textcausal.errors import NormalizationError, ParameterError, ShapeError
from textcausal.features import FeaturizerConfig
from textcausal.learners import (
    TextTripleModel,
    TripleTrainParams,
    fit_text_triple,
    fit_text_triple_matrix,
    load_model,
    predict_triple,
    save_model,
    triple_loss,
)
from textcausal.synthetic import SyntheticConfig, generate

FAST = TripleTrainParams(epochs=3, batch_size=4)


def _bce(p, t):
    return -(t * math.log(p) + (1 - t) * math.log(1 - p))


def test_two_unit_hand_loss():
    # unit 0 treated, unit 1 control; heads fixed by hand
    y = np.array([0.4, 0.2])
    t = np.array([1, 0])
    g1 = np.array([0.55, 0.9])
    g0 = np.array([0.1, 0.25])
    mu = np.array([0.7, 0.4])
    lam, ybar = 0.8, 0.3
    hand_treated = (abs(0.55 - 0.4) + 0.0) / 2 / ybar
    hand_control = (0.0 + abs(0.25 - 0.2)) / 2 / ybar
    hand_bce = lam * (_bce(0.7, 1) + _bce(0.4, 0)) / 2
    out = triple_loss(g1, g0, mu, y, t, lam, ybar)
    assert abs(out.treated - hand_treated) < 1e-10
    assert abs(out.control - hand_control) < 1e-10
    assert abs(out.bce - hand_bce) < 1e-10
    assert abs(out.total - (hand_treated + hand_control + hand_bce)) < 1e-10


def test_model_reports_same_loss_as_formula():
    # one-hot features so head outputs equal the chosen weights
    W = np.array([[0.55, 0.1, math.log(0.7 / 0.3)], [0.9, 0.25, math.log(0.4 / 0.6)]])
    model = TextTripleModel(featurizer=None, weights=W, bias=np.zeros(3), lam=0.8, y_mean=0.3)
    X = np.eye(2)
    reported = model.loss(X, [0.4, 0.2], [1, 0])
    g1, g0, mu = model.predict_matrix(X)
    direct = triple_loss(g1, g0, mu, [0.4, 0.2], [1, 0], 0.8, 0.3)
    assert abs(reported.total - direct.total) < 1e-10
    assert abs(reported.total - 0.5 * (0.15 + 0.05) / 0.3
               - 0.8 * (_bce(0.7, 1) + _bce(0.4, 0)) / 2) < 1e-10


def test_single_treated_exact_fit_zero_loss():
    out = triple_loss([0.3], [0.9], [0.5], [0.3], [1], lam=0.0, y_mean=0.3)
    assert out.total == 0.0


def test_sqrt_form_equals_masked_abs():
    rng = np.random.default_rng(1)
    y = rng.uniform(size=20)
    t = rng.integers(0, 2, size=20)
    g1, g0 = rng.uniform(size=20), rng.uniform(size=20)
    mu = rng.uniform(0.1, 0.9, size=20)
    ybar = y.mean()
    sq = np.mean(np.sqrt(t * (g1 - y) ** 2) / ybar + np.sqrt((1 - t) * (g0 - y) ** 2) / ybar)
    out = triple_loss(g1, g0, mu, y, t, 0.0, ybar)
    assert abs(out.total - sq) < 1e-12


@given(seed=st.integers(0, 2 ** 31), lam=st.floats(0, 5), n=st.integers(1, 40))
def test_loss_decomposition(seed, lam, n):
    rng = np.random.default_rng(seed)
    y = rng.uniform(0.01, 1, size=n)
    t = rng.integers(0, 2, size=n)
    g1, g0 = rng.uniform(size=n), rng.uniform(size=n)
    mu = rng.uniform(0.01, 0.99, size=n)
    ybar = float(y.mean())
    out = triple_loss(g1, g0, mu, y, t, lam, ybar)
    treated = math.fsum(t * np.abs(g1 - y)) / n / ybar
    control = math.fsum((1 - t) * np.abs(g0 - y)) / n / ybar
    bce = lam * math.fsum(-(t * np.log(mu) + (1 - t) * np.log(1 - mu))) / n
    assert abs(out.total - (treated + control + bce)) < 1e-10


def test_zero_mean_outcome_rejected():
    with pytest.raises(NormalizationError):
        triple_loss([0.0], [0.0], [0.5], [0.0], [1], 1.0, 0.0)
    with pytest.raises(NormalizationError):
        fit_text_triple(["a", "b"], [0.0, 0.0], [1, 0], params=FAST)


def test_lambda_zero_leaves_mu_head_alone():
    texts = ["red box", "blue box", "red ball", "green cube"] * 5
    t = np.array([1, 0, 1, 0] * 5)
    y = np.linspace(0.1, 0.9, 20)
    m = fit_text_triple(texts, y, t, lam=0.0, params=FAST)
    assert np.all(m.weights[:, 2] == 0)
    assert m.bias[2] == 0.0  # log-odds of the 50% base rate
    assert "mu" in m.untrained
    assert np.any(m.weights[:, 0] != 0)


def test_single_arm_flags_untrained_head():
    texts = ["a b", "c d", "e f"]
    m = fit_text_triple(texts, [0.2, 0.3, 0.4], [1, 1, 1], params=FAST)
    assert m.untrained == ("g0",)
    assert np.all(m.weights[:, 1] == 0)


def test_predictions_shape_range_duplicates():
    texts = ["Shiny red widget.", "dull grey gadget", "Shiny red widget.", ""]
    m = fit_text_triple(texts * 3, np.linspace(0.2, 0.8, 12), [1, 0, 0, 1] * 3, params=FAST)
    g1, g0, mu = predict_triple(m, texts)
    assert g1.shape == g0.shape == mu.shape == (4,)
    assert (g1[0], g0[0], mu[0]) == (g1[2], g0[2], mu[2])
    assert np.all((mu > 0) & (mu < 1))


def test_empty_prediction():
    m = fit_text_triple(["a", "b"], [0.2, 0.4], [1, 0], params=FAST)
    out = predict_triple(m, [])
    assert all(v.shape == (0,) for v in out)


def test_seeded_determinism():
    texts = [f"item {i % 7} tone {i % 3}" for i in range(60)]
    y = np.linspace(0.1, 0.9, 60)
    t = np.arange(60) % 2
    a = fit_text_triple(texts, y, t, params=TripleTrainParams(epochs=4, seed=5))
    b = fit_text_triple(texts, y, t, params=TripleTrainParams(epochs=4, seed=5))
    assert np.array_equal(a.weights, b.weights) and np.array_equal(a.bias, b.bias)


def test_training_reduces_loss():
    ds, _ = generate(SyntheticConfig(n_units=2000, seed=2))
    m = fit_text_triple(ds.text, ds.outcome, ds.treatment)
    hist = m.loss_history
    assert hist[-1] < hist[0]


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_g1_tracks_truth_on_synthetic_corpus(seed):
    ds, truth = generate(SyntheticConfig(n_units=4000, seed=seed))
    m = fit_text_triple(ds.text, ds.outcome, ds.treatment,
                        params=TripleTrainParams(seed=seed))
    g1, _, mu = predict_triple(m, ds.text)
    assert np.corrcoef(g1, truth.true_g1)[0, 1] > 0.5
    assert np.corrcoef(mu, truth.true_mu)[0, 1] > 0.5


def test_save_load_roundtrip(tmp_path):
    texts = ["alpha beta", "gamma", "beta gamma delta", "alpha"] * 4
    m = fit_text_triple(texts, np.linspace(0.1, 0.7, 16), [1, 0] * 8,
                        featurizer=FeaturizerConfig(hash_dim=2 ** 10), params=FAST)
    save_model(m, tmp_path / "t.json")
    back = load_model(tmp_path / "t.json")
    assert back.featurizer == m.featurizer
    for a, b in zip(predict_triple(m, texts), predict_triple(back, texts)):
        assert np.array_equal(a, b)


def test_parameter_errors():
    with pytest.raises(ParameterError):
        fit_text_triple(["a"], [0.1], [1], lam=-1.0)
    with pytest.raises(ParameterError):
        TripleTrainParams(batch_size=0).validate()
    with pytest.raises(ShapeError):
        fit_text_triple_matrix(np.eye(3), [0.1, 0.2], [1, 0])
