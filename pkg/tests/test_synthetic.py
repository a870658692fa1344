import math

import numpy as np
import pytest
from scipy import stats

from textcausal.data import write_dataset
from textcausal.drcore import dr_bias_terms
from textcausal.errors import ConfigError, CoverageError, ShapeError
from textcausal.synthetic import (
    ConstantEffect,
    GroupEffect,
    LinearEffect,
    SyntheticConfig,
    SyntheticTruth,
    corrupt_nuisances,
    decode_text,
    effect_from_dict,
    feature_levels,
    generate,
    oracle_estimands,
    truth_provider,
)


@pytest.fixture(scope="module")
def linear_synth():
    return generate(SyntheticConfig(n_units=5000, effect=LinearEffect(), seed=5))


def test_rct_treatment_rate():
    n = 20_000
    ds, truth = generate(SyntheticConfig(n_units=n, confounding_strength=0.0, seed=1))
    assert np.all(truth.true_mu == 0.5)
    assert abs(ds.treatment.mean() - 0.5) <= 3 * math.sqrt(0.25 / n)


def test_constant_effect_oracle():
    ds, truth = generate(SyntheticConfig(n_units=3000, effect=ConstantEffect(-0.01), seed=2))
    o = oracle_estimands(truth, ds)
    assert o["ate"] == o["atet"] == -0.01
    assert set(o["gate"].values()) == {-0.01}
    assert np.all(o["cate"] == -0.01)


def test_group_effect_oracle():
    effects = (-0.02, 0.0, 0.0, 0.0)
    ds, truth = generate(SyntheticConfig(n_units=4000, n_groups=4,
                                         effect=GroupEffect(effects=effects), seed=3))
    o = oracle_estimands(truth, ds)
    share_a = float(np.mean(ds.group == "Group_A"))
    assert o["gate"]["Group_A"] == pytest.approx(-0.02, abs=1e-15)
    assert o["gate"]["Group_B"] == 0.0
    assert o["ate"] == pytest.approx(share_a * -0.02, abs=1e-15)


def test_atet_differs_from_ate_under_confounding(linear_synth):
    ds, truth = linear_synth
    o = oracle_estimands(truth, ds)
    direct = truth.true_theta[ds.treatment == 1].mean()
    assert o["atet"] == pytest.approx(direct, abs=1e-15)
    # effect falls with the features that raise the propensity
    assert o["atet"] < o["ate"] - 1e-3


def test_text_decodes_to_bins(linear_synth):
    ds, _ = linear_synth
    X = ds.tabular[:, :5]
    levels = feature_levels(X)
    codes = ds.tabular[:, 5].astype(int)
    for i in range(len(ds)):
        lv, g = decode_text(ds.text[i], 5)
        assert lv == levels[i].tolist() and g == codes[i]


def test_text_decodes_beyond_builtin_vocab():
    ds, _ = generate(SyntheticConfig(n_units=200, n_features=10, n_groups=30, seed=4))
    levels = feature_levels(ds.tabular[:, :10])
    for i in range(len(ds)):
        lv, g = decode_text(ds.text[i], 10)
        assert lv == levels[i].tolist() and g == int(ds.tabular[i, 10])


def test_positivity_and_consistency(linear_synth):
    ds, truth = linear_synth
    assert truth.true_mu.min() >= 0.05 and truth.true_mu.max() <= 0.95
    t = ds.treatment
    assert np.array_equal(ds.outcome, t * truth.y1 + (1 - t) * truth.y0)
    # theta is the drawn effect itself; g1 - g0 reproduces it up to rounding
    assert np.allclose(truth.true_theta, truth.true_g1 - truth.true_g0, rtol=0, atol=1e-15)
    assert ds.outcome.min() >= 0 and ds.outcome.max() <= 1


def test_unconfoundedness(linear_synth):
    ds, truth = linear_synth
    t = ds.treatment.astype(float)
    resid = truth.y0 - truth.true_g0
    # within each cell of the binned covariates, T is independent of the noise
    cells = [tuple(r) for r in feature_levels(ds.tabular[:, :2])]
    cell_ids = {c: i for i, c in enumerate(sorted(set(cells)))}
    k = np.array([cell_ids[c] for c in cells])
    t_dm = t - np.bincount(k, t)[k] / np.bincount(k)[k]
    r_dm = resid - np.bincount(k, resid)[k] / np.bincount(k)[k]
    assert stats.pearsonr(t_dm, r_dm)[1] > 0.01


def test_noise_modes():
    _, shared = generate(SyntheticConfig(n_units=500, seed=6))
    assert np.allclose(shared.y1 - shared.y0, shared.true_theta, atol=1e-12)
    _, indep = generate(SyntheticConfig(n_units=500, seed=6, noise_mode="independent"))
    assert not np.allclose(indep.y1 - indep.y0, indep.true_theta)


def test_determinism(tmp_path):
    cfg = SyntheticConfig(n_units=300, effect=GroupEffect(), seed=9)
    for name in ("a", "b"):
        ds, truth = generate(cfg)
        write_dataset(ds, tmp_path / f"{name}.csv")
        truth.to_csv(tmp_path / f"{name}_truth.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a_truth.csv").read_bytes() == (tmp_path / "b_truth.csv").read_bytes()
    ds2, _ = generate(SyntheticConfig(n_units=300, effect=GroupEffect(), seed=10))
    assert ds2.fingerprint() != generate(cfg)[0].fingerprint()


def test_truth_csv_roundtrip(tmp_path):
    _, truth = generate(SyntheticConfig(n_units=50, seed=2))
    truth.to_csv(tmp_path / "t.csv")
    back = SyntheticTruth.from_csv(tmp_path / "t.csv")
    for name in ("true_g1", "true_g0", "true_mu", "true_theta", "y1", "y0"):
        assert np.array_equal(getattr(back, name), getattr(truth, name))


def test_corruptions_bias_terms(linear_synth):
    _, truth = linear_synth
    for mode in ("propensity_shift", "outcome_shift"):
        p = corrupt_nuisances(truth, mode)
        b1, b2 = dr_bias_terms(truth.true_g1, truth.true_g0, truth.true_mu, p.g1, p.g0,
                               np.clip(p.mu, 0.01, 0.99))
        assert np.allclose(b1 + b2, 0, atol=1e-12)
    both = corrupt_nuisances(truth, "both")
    b1, b2 = dr_bias_terms(truth.true_g1, truth.true_g0, truth.true_mu, both.g1, both.g0,
                           np.clip(both.mu, 0.01, 0.99))
    assert np.mean(b1 + b2) != 0
    with pytest.raises(ConfigError):
        corrupt_nuisances(truth, "sideways")


def test_provider_lookup(linear_synth):
    _, truth = linear_synth
    p = truth_provider(truth)
    ids = list(truth.ids[[5, 2]])
    g1, _, mu = p.lookup(ids)
    assert g1[0] == truth.true_g1[5] and mu[1] == truth.true_mu[2]
    with pytest.raises(CoverageError):
        p.lookup(["nope"])


def test_oracle_alignment_check(linear_synth):
    ds, _ = linear_synth
    _, other = generate(SyntheticConfig(n_units=10, seed=1))
    with pytest.raises(ShapeError):
        oracle_estimands(other, ds)


@pytest.mark.parametrize("bad", [{"n_units": 1}, {"confounding_strength": -1},
                                 {"noise_sd": -0.1}, {"noise_mode": "odd"}, {"n_groups": 0}])
def test_bad_config(bad):
    with pytest.raises(ConfigError):
        generate(SyntheticConfig(**bad))


def test_config_dict_roundtrip():
    cfg = SyntheticConfig(effect=GroupEffect(effects=(0.1, 0.2)), n_groups=2)
    assert SyntheticConfig.from_dict(cfg.to_dict()) == cfg
    assert effect_from_dict({"kind": "linear", "slopes": [0.1]}) == LinearEffect(slopes=(0.1,))
    with pytest.raises(ConfigError):
        effect_from_dict({"kind": "wavy"})
    with pytest.raises(ConfigError):
        SyntheticConfig.from_dict({"units": 5})
    with pytest.raises(ConfigError):
        generate(SyntheticConfig(n_groups=3, effect=GroupEffect(effects=(0.0,))))
