"""Learner specifications and the fitted nuisance triple (g1, g0, mu)."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Union

import numpy as np

from ..errors import ConfigError, OrchestrationError
from ..features import FeaturizerConfig, featurizer_from_dict
from .gbt import LOGISTIC, SQUARED_ERROR, GbtModel, GbtParams, fit_gbt
from .linear import LinearModel, fit_elastic_net, fit_logistic, fit_ols
from .text_triple import TextTripleModel, TripleTrainParams, fit_text_triple_matrix


@dataclass(frozen=True)
class GbtLearner:
    params: GbtParams = field(default_factory=GbtParams)
    kind: str = "gbt"


@dataclass(frozen=True)
class ElasticNetLearner:
    l1: float = 0.0
    l2: float = 0.0
    max_iter: int = 10_000
    tol: float = 1e-10
    logistic_l2: float = 1e-4
    kind: str = "elastic_net"


@dataclass(frozen=True)
class OlsLearner:
    logistic_l2: float = 1e-4
    kind: str = "ols"


@dataclass(frozen=True)
class TextTripleLearner:
    lam: float = 1.0
    train: TripleTrainParams = field(default_factory=TripleTrainParams)
    featurizer: object = field(default_factory=FeaturizerConfig)
    kind: str = "text_triple"


LearnerSpec = Union[GbtLearner, ElasticNetLearner, OlsLearner, TextTripleLearner]


def learner_to_dict(spec: LearnerSpec) -> dict:
    if isinstance(spec, TextTripleLearner):
        return {"kind": spec.kind, "lam": spec.lam, "train": asdict(spec.train),
                "featurizer": spec.featurizer.to_dict()}
    if isinstance(spec, GbtLearner):
        return {"kind": spec.kind, **asdict(spec.params)}
    return asdict(spec)


def learner_from_dict(d: dict, path: str = "learner") -> LearnerSpec:
    d = dict(d)
    kind = d.pop("kind", "gbt")
    try:
        if kind == "gbt":
            return GbtLearner(GbtParams(**d))
        if kind == "elastic_net":
            return ElasticNetLearner(**d)
        if kind == "ols":
            return OlsLearner(**d)
        if kind == "text_triple":
            train = TripleTrainParams(**d.pop("train", {}))
            feat = featurizer_from_dict(d.pop("featurizer", {"kind": "hash"}))
            return TextTripleLearner(train=train, featurizer=feat, **d)
    except TypeError as exc:
        raise ConfigError(str(exc), path) from None
    raise ConfigError(f"unknown learner kind {kind!r}", f"{path}.kind")


def is_text_learner(spec) -> bool:
    return isinstance(spec, TextTripleLearner)


@dataclass(frozen=True, eq=False)
class NuisanceTriple:
    """Fitted (g1, g0, mu). For the text learner all three slots hold the
    same joint model."""

    g1: object
    g0: object
    mu: object
    trained_on: dict = field(default_factory=dict)

    @property
    def joint(self) -> bool:
        return isinstance(self.g1, TextTripleModel)

    def predict(self, features):
        if self.joint:
            return self.g1.predict_matrix(features)
        return (predict(self.g1, features), predict(self.g0, features),
                predict(self.mu, features))

    def diagnostics(self) -> dict:
        if self.joint:
            m = self.g1
            return {"train_loss": m.loss_history[-1] if m.loss_history else None,
                    "untrained_heads": list(m.untrained)}
        out = {}
        for name in ("g1", "g0", "mu"):
            model = getattr(self, name)
            if isinstance(model, GbtModel):
                out[f"{name}_train_loss"] = model.train_loss[-1]
            elif isinstance(model, LinearModel):
                out[f"{name}_converged"] = model.converged
        return out


def predict(model, features) -> np.ndarray:
    """Predictions of a fitted :class:`LinearModel` or :class:`GbtModel`.

    Logistic models return probabilities.
    """
    return model.predict(features)


def fit_nuisances(spec: LearnerSpec, features, outcomes, treatments) -> NuisanceTriple:
    """Fit the triple on one training slice.

    Tabular learners follow the two-model recipe: g1 on treated rows, g0 on
    control rows, mu on all rows. The text learner fits one joint model.
    """
    y = np.asarray(outcomes, dtype=np.float64)
    t = np.asarray(treatments)
    if is_text_learner(spec):
        model = fit_text_triple_matrix(features, y, t, lam=spec.lam, params=spec.train,
                                       featurizer=spec.featurizer)
        return NuisanceTriple(model, model, model)

    treated, control = t == 1, t == 0
    if not treated.any() or not control.any():
        raise OrchestrationError("training slice is missing a treatment arm")
    X = np.asarray(features, dtype=np.float64)
    if isinstance(spec, GbtLearner):
        g1 = fit_gbt(X[treated], y[treated], SQUARED_ERROR, spec.params)
        g0 = fit_gbt(X[control], y[control], SQUARED_ERROR, spec.params)
        mu = fit_gbt(X, t.astype(np.float64), LOGISTIC, spec.params)
    elif isinstance(spec, ElasticNetLearner):
        g1 = fit_elastic_net(X[treated], y[treated], spec.l1, spec.l2, spec.max_iter, spec.tol)
        g0 = fit_elastic_net(X[control], y[control], spec.l1, spec.l2, spec.max_iter, spec.tol)
        mu = fit_logistic(X, t, l2=spec.logistic_l2)
    elif isinstance(spec, OlsLearner):
        g1 = fit_ols(X[treated], y[treated])
        g0 = fit_ols(X[control], y[control])
        mu = fit_logistic(X, t, l2=spec.logistic_l2)
    else:
        raise ConfigError(f"unsupported learner {spec!r}", "learner")
    return NuisanceTriple(g1, g0, mu)
