"""Synthetic observational data with known nuisances.

Covariates are uniform on [0, 1]. Treatment follows a logistic propensity
squeezed into [0.05, 0.95]; outcomes are ``g_T(Z) + U`` clamped to [0, 1].
Each unit also gets a product-style text description in which every
feature's quartile is spelled by one adjective and the group by one code
word, so the text carries the same (binned) information as the table.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from .data import Dataset, Modality
from .errors import ConfigError, CoverageError, ShapeError

# (feature name, noun phrase, adjectives for quartiles 1..4)
FEATURE_VOCAB = [
    ("sales", "sales", ("sluggish", "steady", "brisk", "booming")),
    ("reviews", "customer reviews", ("few", "some", "many", "countless")),
    ("returns", "returns", ("rare", "occasional", "frequent", "constant")),
    ("price", "pricing", ("budget", "midrange", "premium", "luxury")),
    ("rating", "ratings", ("poor", "fair", "good", "excellent")),
    ("popularity", "buzz", ("obscure", "niche", "popular", "trending")),
    ("tenure", "listing history", ("fresh", "recent", "established", "veteran")),
    ("stock", "inventory", ("scarce", "limited", "ample", "abundant")),
]

GROUP_WORDS = ("alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel",
               "india", "juliett", "kilo", "lima", "mike", "november", "oscar", "papa",
               "quebec", "romeo", "sierra", "tango", "uniform", "victor", "whiskey",
               "xray", "yankee", "zulu")

FILLERS = (
    "Ships within two days.",
    "Ideal gift for friends and family.",
    "Satisfaction guaranteed.",
    "Special edition colors available.",
    "Packed with care.",
    "Designed for everyday use.",
    "Easy to clean and store.",
    "Backed by our support team.",
    "Lightweight and durable.",
    "Now with improved packaging.",
)

SENTENCE_FRAMES = (
    "{adj} {noun}.",
    "This item shows {adj} {noun}.",
    "- {noun}: {adj}",
    "Known for {adj} {noun}.",
)

LEVELS = 4


def group_name(k: int) -> str:
    letters = ""
    k += 1
    while k:
        k, r = divmod(k - 1, 26)
        letters = chr(ord("A") + r) + letters
    return f"Group_{letters}"


def group_word(k: int) -> str:
    base = GROUP_WORDS[k % len(GROUP_WORDS)]
    return base if k < len(GROUP_WORDS) else f"{base}{k // len(GROUP_WORDS)}"


def feature_vocab(j: int):
    if j < len(FEATURE_VOCAB):
        return FEATURE_VOCAB[j]
    return (f"attr{j}", f"attribute {j} level",
            tuple(f"a{j}tier{lvl}" for lvl in range(1, LEVELS + 1)))


# ---------------------------------------------------------------------------
# config

@dataclass(frozen=True)
class ConstantEffect:
    tau: float = -0.01
    kind: str = "constant"

    def __call__(self, X, group_idx):
        return np.full(X.shape[0], float(self.tau))


@dataclass(frozen=True)
class LinearEffect:
    """``intercept + sum_j slopes[j] * (x_j - 0.5)``."""

    intercept: float = -0.01
    slopes: tuple = (-0.03, 0.02)
    kind: str = "linear"

    def __call__(self, X, group_idx):
        s = np.asarray(self.slopes, dtype=np.float64)
        if len(s) > X.shape[1]:
            raise ConfigError("more slopes than features", "synthetic.effect.slopes")
        return self.intercept + (X[:, :len(s)] - 0.5) @ s


@dataclass(frozen=True)
class GroupEffect:
    """Per-group constant effects. ``effects=None`` spreads the groups evenly
    over ``[low, high]`` in a seeded random order."""

    effects: tuple | None = None
    low: float = -0.10
    high: float = 0.0
    kind: str = "group"

    def values(self, n_groups: int, seed: int) -> np.ndarray:
        if self.effects is not None:
            if len(self.effects) != n_groups:
                raise ConfigError(f"need {n_groups} group effects, got {len(self.effects)}",
                                  "synthetic.effect.effects")
            return np.asarray(self.effects, dtype=np.float64)
        grid = np.linspace(self.low, self.high, n_groups)
        return grid[np.random.default_rng([seed, 17]).permutation(n_groups)]

    def __call__(self, X, group_idx, n_groups=None, seed=0):
        vals = self.values(n_groups if n_groups is not None else int(group_idx.max()) + 1, seed)
        return vals[group_idx]


def effect_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind", "constant")
    try:
        if kind == "constant":
            return ConstantEffect(**d)
        if kind == "linear":
            return LinearEffect(intercept=d.get("intercept", -0.01),
                                slopes=tuple(d.get("slopes", (-0.03, 0.02))))
        if kind == "group":
            eff = d.pop("effects", None)
            return GroupEffect(effects=tuple(eff) if eff is not None else None, **d)
    except TypeError as exc:
        raise ConfigError(str(exc), "synthetic.effect") from None
    raise ConfigError(f"unknown effect kind {kind!r}", "synthetic.effect.kind")


@dataclass(frozen=True)
class SyntheticConfig:
    n_units: int = 20_000
    n_features: int = 5
    effect: object = field(default_factory=ConstantEffect)
    confounding_strength: float = 1.0
    noise_sd: float = 0.05
    n_groups: int = 10
    text_template_seed: int = 0
    seed: int = 0
    noise_mode: str = "shared"  # shared | independent

    def validate(self):
        if self.n_units < 2:
            raise ConfigError("must be >= 2", "synthetic.n_units")
        if self.n_features < 2:
            raise ConfigError("must be >= 2", "synthetic.n_features")
        if self.confounding_strength < 0:
            raise ConfigError("must be >= 0", "synthetic.confounding_strength")
        if self.noise_sd < 0:
            raise ConfigError("must be >= 0", "synthetic.noise_sd")
        if self.n_groups < 1:
            raise ConfigError("must be >= 1", "synthetic.n_groups")
        if self.noise_mode not in ("shared", "independent"):
            raise ConfigError(f"unknown noise mode {self.noise_mode!r}", "synthetic.noise_mode")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["effect"] = asdict(self.effect)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticConfig":
        d = dict(d)
        if "effect" in d:
            d["effect"] = effect_from_dict(d["effect"])
        names = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}", "synthetic")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class SyntheticTruth:
    ids: np.ndarray
    true_g1: np.ndarray
    true_g0: np.ndarray
    true_mu: np.ndarray
    true_theta: np.ndarray
    y1: np.ndarray
    y0: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "true_g1", "true_g0", "true_mu", "true_theta", "y1", "y0"])
            for i in range(len(self.ids)):
                w.writerow([self.ids[i], *(repr(float(a[i])) for a in
                            (self.true_g1, self.true_g0, self.true_mu, self.true_theta,
                             self.y1, self.y0))])

    @classmethod
    def from_csv(cls, path) -> "SyntheticTruth":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        col = lambda k: np.array([float(r[k]) for r in rows])  # noqa: E731
        return cls(ids=np.array([r["id"] for r in rows], dtype=object),
                   true_g1=col("true_g1"), true_g0=col("true_g0"), true_mu=col("true_mu"),
                   true_theta=col("true_theta"), y1=col("y1"), y0=col("y0"))


# ---------------------------------------------------------------------------
# generation

def propensity(X: np.ndarray, strength: float) -> np.ndarray:
    """Logistic in the first two features, squeezed into [0.05, 0.95]."""
    score = 3.0 * (X[:, 0] - 0.5) + 2.0 * (X[:, 1] - 0.5)
    return 0.05 + 0.9 * expit(strength * score)


def baseline_outcome(X: np.ndarray) -> np.ndarray:
    """Control-arm mean outcome; stays within about [0.23, 0.64]."""
    g0 = 0.35 + 0.15 * X[:, 0] + 0.10 * X[:, 1]
    if X.shape[1] > 2:
        g0 = g0 - 0.08 * X[:, 2]
    if X.shape[1] > 3:
        g0 = g0 + 0.04 * np.sin(2 * np.pi * X[:, 3])
    return g0


def feature_levels(X: np.ndarray) -> np.ndarray:
    return np.minimum((X * LEVELS).astype(np.int64), LEVELS - 1)


def bin_midpoints(levels: np.ndarray) -> np.ndarray:
    return (np.asarray(levels, dtype=np.float64) + 0.5) / LEVELS


def render_text(levels: Sequence[int], group_idx: int, rng: np.random.Generator) -> str:
    parts = []
    for j, lvl in enumerate(levels):
        _, noun, adjs = feature_vocab(j)
        frame = SENTENCE_FRAMES[rng.integers(len(SENTENCE_FRAMES))]
        sentence = frame.format(adj=adjs[lvl], noun=noun)
        parts.append(sentence[0].upper() + sentence[1:])
    for k in rng.choice(len(FILLERS), size=rng.integers(0, 3), replace=False):
        parts.append(FILLERS[k])
    order = rng.permutation(len(parts))
    body = " ".join(parts[i] for i in order)
    return f"Category: {group_word(group_idx).capitalize()} line. {body}"


def decode_text(text: str, n_features: int):
    """Recover (feature levels, group index) from a rendered description."""
    from .features import tokenize

    tokens = set(tokenize(text))
    levels = []
    for j in range(n_features):
        adjs = feature_vocab(j)[2]
        hits = [lvl for lvl, a in enumerate(adjs) if a in tokens]
        levels.append(hits[0] if len(hits) == 1 else -1)
    group = -1
    for k in range(len(GROUP_WORDS) * 4):
        if group_word(k) in tokens:
            group = k
            break
    return levels, group


def generate(config: SyntheticConfig):
    """Draw a dataset and its ground truth. Same config -> identical output."""
    config.validate()
    n, p = config.n_units, config.n_features
    rng = np.random.default_rng([config.seed, 0])
    X = rng.uniform(size=(n, p))
    group_idx = rng.integers(0, config.n_groups, size=n)
    levels = feature_levels(X)
    # Nuisances depend on X only through its bins, which the text also carries,
    # so both modalities satisfy unconfoundedness.
    Xb = bin_midpoints(levels)
    mu = propensity(Xb, config.confounding_strength)
    t = (rng.uniform(size=n) < mu).astype(np.int8)
    g0 = baseline_outcome(Xb)
    if isinstance(config.effect, GroupEffect):
        tau = config.effect(Xb, group_idx, config.n_groups, config.seed)
    else:
        tau = config.effect(Xb, group_idx)
    g1 = g0 + tau
    u1 = rng.normal(0.0, config.noise_sd, size=n)
    u0 = u1 if config.noise_mode == "shared" else rng.normal(0.0, config.noise_sd, size=n)
    y1 = np.clip(g1 + u1, 0.0, 1.0)
    y0 = np.clip(g0 + u0, 0.0, 1.0)
    y = np.where(t == 1, y1, y0)

    text_rng = np.random.default_rng([config.seed, config.text_template_seed, 1])
    texts = [render_text(levels[i], int(group_idx[i]), text_rng) for i in range(n)]

    width = len(str(n - 1))
    ids = [f"u{i:0{width}d}" for i in range(n)]
    names = [feature_vocab(j)[0] for j in range(p)] + ["group_code"]
    tabular = np.column_stack([X, group_idx.astype(np.float64)])
    dataset = Dataset(ids=ids, outcome=y, treatment=t,
                      group=[group_name(int(k)) for k in group_idx], tabular=tabular,
                      text=texts, feature_names=tuple(names), modality=Modality.BOTH)
    truth = SyntheticTruth(ids=np.asarray(ids, dtype=object), true_g1=g1, true_g0=g0,
                           true_mu=mu, true_theta=tau, y1=y1, y0=y0)
    return dataset, truth


# ---------------------------------------------------------------------------
# oracles

def _fmean(x) -> float:
    # shifted so that a constant vector returns its value exactly
    x = np.asarray(x, dtype=np.float64)
    return float(x[0]) + math.fsum(x - x[0]) / len(x)


def oracle_estimands(truth: SyntheticTruth, dataset: Dataset) -> dict:
    """Sample-analog estimands from the true effects."""
    if len(truth.ids) != len(dataset) or list(truth.ids) != list(dataset.ids):
        raise ShapeError("truth is not aligned with the dataset")
    theta = truth.true_theta
    treated = dataset.treatment == 1
    groups = {}
    for g in sorted(set(dataset.group)):
        groups[g] = _fmean(theta[dataset.group == g])
    return {"ate": _fmean(theta), "atet": _fmean(theta[treated]), "gate": groups,
            "cate": theta.copy()}


@dataclass(frozen=True, eq=False)
class NuisanceProvider:
    """Per-unit (g1, g0, mu) values keyed by unit id."""

    ids: np.ndarray
    g1: np.ndarray
    g0: np.ndarray
    mu: np.ndarray

    def lookup(self, ids: Sequence[str]):
        index = {u: i for i, u in enumerate(self.ids)}
        missing = [u for u in ids if u not in index]
        if missing:
            raise CoverageError(f"provider lacks {len(missing)} units, e.g. {missing[:5]}")
        pos = np.array([index[u] for u in ids], dtype=np.int64)
        return self.g1[pos], self.g0[pos], self.mu[pos]


def truth_provider(truth: SyntheticTruth) -> NuisanceProvider:
    return NuisanceProvider(truth.ids, truth.true_g1.copy(), truth.true_g0.copy(),
                            truth.true_mu.copy())


def corrupt_nuisances(truth: SyntheticTruth, mode: str, propensity_delta: float = 0.2,
                      outcome_delta: float = 0.1, eps: float = 0.01) -> NuisanceProvider:
    """Misspecified nuisances for robustness experiments.

    ``propensity_shift``: mu + delta (clipped to [eps, 1 - eps]), outcome models exact.
    ``outcome_shift``: g1 + delta and g0 + delta, propensity exact.
    ``both``: both shifts at once. With positive deltas the two bias terms
    share a sign, so their effects add up rather than cancel.
    """
    g1, g0, mu = truth.true_g1.copy(), truth.true_g0.copy(), truth.true_mu.copy()
    if mode not in ("propensity_shift", "outcome_shift", "both"):
        raise ConfigError(f"unknown corruption mode {mode!r}", "mode")
    if mode in ("propensity_shift", "both"):
        mu = np.clip(mu + propensity_delta, eps, 1 - eps)
    if mode in ("outcome_shift", "both"):
        g1 = g1 + outcome_delta
        g0 = g0 + outcome_delta
    return NuisanceProvider(truth.ids, g1, g0, mu)
