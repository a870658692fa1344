"""Versioned JSON persistence for fitted models."""
from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..features import featurizer_from_dict
from .gbt import GbtModel, GbtParams, Tree
from .linear import LinearModel
from .text_triple import HEADS, TextTripleModel, TripleTrainParams

FORMAT = "textcausal-model"
VERSION = 1


def model_to_dict(model) -> dict:
    head = {"format": FORMAT, "version": VERSION}
    if isinstance(model, LinearModel):
        return {**head, "type": "linear", "intercept": float(model.intercept),
                "weights": [float(w) for w in model.weights],
                "regularization": model.regularization, "link": model.link,
                "converged": model.converged, "n_iter": model.n_iter}
    if isinstance(model, GbtModel):
        return {**head, "type": "gbt", "objective": model.objective,
                "base_score": float(model.base_score), "learning_rate": model.learning_rate,
                "n_features": model.n_features, "params": asdict(model.params),
                "train_loss": [float(v) for v in model.train_loss],
                "trees": [t.to_nested() for t in model.trees]}
    if isinstance(model, TextTripleModel):
        heads = {}
        for j, name in enumerate(HEADS):
            col = model.weights[:, j]
            nz = np.flatnonzero(col)
            heads[name] = {"bias": float(model.bias[j]), "index": nz.tolist(),
                           "weight": [float(v) for v in col[nz]]}
        return {**head, "type": "text_triple", "width": model.width, "heads": heads,
                "lambda": model.lam, "y_mean": model.y_mean,
                "untrained": list(model.untrained),
                "loss_history": [float(v) for v in model.loss_history],
                "params": asdict(model.params),
                "featurizer": model.featurizer.to_dict() if model.featurizer else None}
    raise TypeError(f"cannot serialise {type(model).__name__}")


def model_from_dict(d: dict):
    if d.get("format") != FORMAT:
        raise ConfigError("not a textcausal model file", "format")
    if d.get("version") != VERSION:
        raise ConfigError(f"unsupported model version {d.get('version')}", "version")
    kind = d["type"]
    if kind == "linear":
        return LinearModel(intercept=d["intercept"], weights=np.asarray(d["weights"], float),
                           regularization=d["regularization"], link=d["link"],
                           converged=d["converged"], n_iter=d["n_iter"])
    if kind == "gbt":
        return GbtModel(trees=[Tree.from_nested(t) for t in d["trees"]],
                        learning_rate=d["learning_rate"], base_score=d["base_score"],
                        objective=d["objective"], n_features=d["n_features"],
                        params=GbtParams(**d["params"]), train_loss=tuple(d["train_loss"]))
    if kind == "text_triple":
        W = np.zeros((d["width"], 3))
        bias = np.zeros(3)
        for j, name in enumerate(HEADS):
            h = d["heads"][name]
            W[np.asarray(h["index"], dtype=np.int64), j] = h["weight"]
            bias[j] = h["bias"]
        feat = featurizer_from_dict(d["featurizer"]) if d["featurizer"] else None
        return TextTripleModel(featurizer=feat, weights=W, bias=bias, lam=d["lambda"],
                               y_mean=d["y_mean"], untrained=tuple(d["untrained"]),
                               loss_history=tuple(d["loss_history"]),
                               params=TripleTrainParams(**d["params"]))
    raise ConfigError(f"unknown model type {kind!r}", "type")


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)), encoding="utf-8")


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
