"""Joint text model predicting (g1, g0, mu) from one shared feature space.

Per-unit training loss, with ``ybar`` the mean outcome over the training
slice (fixed before training):

    sqrt(T (g1 - Y)^2) / ybar + sqrt((1 - T) (g0 - Y)^2) / ybar + lam * BCE(mu, T)

For T in {0, 1} the square roots are masked absolute errors, which is how
they are computed here (subgradient 0 at a zero residual).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from ..errors import NormalizationError, ParameterError, ShapeError
from ..features import FeaturizerConfig, encode_texts

HEADS = ("g1", "g0", "mu")


@dataclass(frozen=True)
class TripleTrainParams:
    epochs: int = 20
    batch_size: int = 256
    learning_rate: float = 0.02
    seed: int = 0
    l2: float = 1e-3
    cosine_decay: bool = True

    def validate(self):
        if self.epochs < 0:
            raise ParameterError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ParameterError("learning_rate must be > 0")
        if self.l2 < 0:
            raise ParameterError("l2 must be >= 0")


class LossBreakdown(NamedTuple):
    total: float
    treated: float
    control: float
    bce: float


def triple_loss(g1_pred, g0_pred, mu_pred, y, t, lam: float, y_mean: float) -> LossBreakdown:
    """Batch-mean joint loss and its three additive parts.

    ``mu_pred`` is a probability in (0, 1). ``bce`` is already multiplied by
    ``lam``, so ``total == treated + control + bce``.
    """
    if not y_mean > 0:
        raise NormalizationError(f"outcome mean must be > 0 to normalise, got {y_mean}")
    g1_pred, g0_pred, mu_pred, y, t = (np.asarray(a, dtype=np.float64)
                                       for a in (g1_pred, g0_pred, mu_pred, y, t))
    treated = np.mean(t * np.abs(g1_pred - y)) / y_mean
    control = np.mean((1 - t) * np.abs(g0_pred - y)) / y_mean
    bce = lam * np.mean(-(t * np.log(mu_pred) + (1 - t) * np.log1p(-mu_pred)))
    return LossBreakdown(float(treated + control + bce), float(treated), float(control), float(bce))


def _loss_from_logits(g1, g0, z, y, t, lam, y_mean) -> LossBreakdown:
    treated = np.mean(t * np.abs(g1 - y)) / y_mean
    control = np.mean((1 - t) * np.abs(g0 - y)) / y_mean
    bce = lam * np.mean(np.logaddexp(0.0, z) - t * z)
    return LossBreakdown(float(treated + control + bce), float(treated), float(control), float(bce))


@dataclass(frozen=True, eq=False)
class TextTripleModel:
    """Three linear heads (columns g1, g0, mu) over a shared feature space."""

    featurizer: object
    weights: np.ndarray          # (width, 3)
    bias: np.ndarray             # (3,)
    lam: float
    y_mean: float
    untrained: tuple = ()
    loss_history: tuple = ()
    params: TripleTrainParams = field(default_factory=TripleTrainParams)

    @property
    def width(self) -> int:
        return self.weights.shape[0]

    def _scores(self, features):
        if features.shape[1] != self.width:
            raise ShapeError(f"model expects width {self.width}, got {features.shape[1]}")
        out = features @ self.weights
        return np.asarray(out) + self.bias

    def predict_matrix(self, features):
        """(g1_hat, g0_hat, mu_hat) for a pre-encoded feature matrix."""
        if features.shape[0] == 0:
            empty = np.zeros(0)
            return empty, empty.copy(), empty.copy()
        s = self._scores(features)
        return s[:, 0].copy(), s[:, 1].copy(), expit(s[:, 2])

    def loss(self, features, y, t) -> LossBreakdown:
        s = self._scores(features)
        return _loss_from_logits(s[:, 0], s[:, 1], s[:, 2], np.asarray(y, float),
                                 np.asarray(t, float), self.lam, self.y_mean)


def _init_bias(y, t):
    treated, control = t == 1, t == 0
    overall = float(y.mean())
    b1 = float(y[treated].mean()) if treated.any() else overall
    b0 = float(y[control].mean()) if control.any() else overall
    rate = float(np.clip(t.mean(), 1e-3, 1 - 1e-3))
    return np.array([b1, b0, np.log(rate / (1 - rate))])


def fit_text_triple_matrix(features, outcomes, treatments, lam: float = 1.0,
                           params: TripleTrainParams | None = None,
                           featurizer=None) -> TextTripleModel:
    """Train the three heads on an already-encoded feature matrix.

    Mini-batch Adam over a seeded per-epoch shuffle. A head whose arm is
    absent from the slice keeps its initial parameters and is listed in
    ``untrained``.
    """
    params = params or TripleTrainParams()
    params.validate()
    if lam < 0:
        raise ParameterError("lambda must be >= 0")
    y = np.asarray(outcomes, dtype=np.float64).ravel()
    t = np.asarray(treatments, dtype=np.float64).ravel()
    n = y.shape[0]
    if features.shape[0] != n or t.shape[0] != n:
        raise ShapeError("features, outcomes and treatments must have equal length")
    if n == 0:
        raise ParameterError("cannot train on an empty slice")
    y_mean = float(y.mean())
    if not y_mean > 0:
        raise NormalizationError(f"mean outcome over the training slice is {y_mean}; must be > 0")
    X = features.tocsr() if sp.issparse(features) else np.ascontiguousarray(features, float)
    d = X.shape[1]

    W = np.zeros((d, 3))
    b = _init_bias(y, t)
    mW, vW = np.zeros_like(W), np.zeros_like(W)
    mb, vb = np.zeros(3), np.zeros(3)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    rng = np.random.default_rng(params.seed)
    steps_per_epoch = -(-n // params.batch_size)
    total_steps = max(1, params.epochs * steps_per_epoch)
    step = 0
    history = []
    for _ in range(params.epochs):
        order = rng.permutation(n)
        for start in range(0, n, params.batch_size):
            rows = order[start:start + params.batch_size]
            Xb = X[rows]
            yb, tb = y[rows], t[rows]
            s = np.asarray(Xb @ W) + b
            m = len(rows)
            grad = np.empty((m, 3))
            grad[:, 0] = tb * np.sign(s[:, 0] - yb) / y_mean
            grad[:, 1] = (1 - tb) * np.sign(s[:, 1] - yb) / y_mean
            grad[:, 2] = lam * (expit(s[:, 2]) - tb)
            grad /= m
            gW = np.asarray(Xb.T @ grad)
            if params.l2:
                gW += params.l2 * W
            gb = grad.sum(axis=0)

            step += 1
            lr = params.learning_rate
            if params.cosine_decay:
                lr *= 0.5 * (1 + np.cos(np.pi * (step - 1) / total_steps))
            c1 = 1 - beta1 ** step
            c2 = 1 - beta2 ** step
            mW *= beta1
            mW += (1 - beta1) * gW
            vW *= beta2
            vW += (1 - beta2) * gW * gW
            W -= lr * (mW / c1) / (np.sqrt(vW / c2) + eps)
            mb = beta1 * mb + (1 - beta1) * gb
            vb = beta2 * vb + (1 - beta2) * gb * gb
            b = b - lr * (mb / c1) / (np.sqrt(vb / c2) + eps)
        s = np.asarray(X @ W) + b
        history.append(_loss_from_logits(s[:, 0], s[:, 1], s[:, 2], y, t, lam, y_mean).total)

    untrained = []
    if not (t == 1).any():
        untrained.append("g1")
    if not (t == 0).any():
        untrained.append("g0")
    if lam == 0:
        untrained.append("mu")
    return TextTripleModel(featurizer=featurizer, weights=W, bias=b, lam=float(lam),
                           y_mean=y_mean, untrained=tuple(untrained),
                           loss_history=tuple(history), params=params)


def fit_text_triple(texts: Sequence[str], outcomes, treatments, lam: float = 1.0,
                    params: TripleTrainParams | None = None,
                    featurizer=None) -> TextTripleModel:
    """Encode ``texts`` with ``featurizer`` and train the three heads jointly."""
    featurizer = featurizer or FeaturizerConfig()
    X = encode_texts(featurizer, list(texts))
    return fit_text_triple_matrix(X, outcomes, treatments, lam=lam, params=params,
                                  featurizer=featurizer)


def predict_triple(model: TextTripleModel, texts: Sequence[str]):
    """(g1_hat, g0_hat, mu_hat) for raw texts; mu_hat lies in (0, 1)."""
    texts = list(texts)
    if not texts:
        return np.zeros(0), np.zeros(0), np.zeros(0)
    return model.predict_matrix(encode_texts(model.featurizer, texts))
