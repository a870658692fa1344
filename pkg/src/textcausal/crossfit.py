"""K-fold cross-fitting: out-of-fold nuisances, DR scores, per-fold BLP and
pooled ATE / ATET / GATE."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import drcore
from .data import Dataset, FoldAssignment, partition_folds
from .drcore import BlpCoefficients, Estimate, ScoreRows
from .errors import (
    ConfigError,
    DataError,
    DegenerateBLPError,
    InvariantError,
    OrchestrationError,
    TextCausalError,
)
from .features import encode_texts
from .learners.nuisance import (
    GbtLearner,
    TextTripleLearner,
    fit_nuisances,
    is_text_learner,
    learner_from_dict,
    learner_to_dict,
)
from .learners.serialize import model_to_dict

RUN_FORMAT = "textcausal-run"
RUN_VERSION = 1


@dataclass(frozen=True)
class CrossfitConfig:
    k_folds: int = 5
    learner: object = field(default_factory=GbtLearner)
    modality: str = "tabular"
    propensity_eps: float = drcore.DEFAULT_EPS
    confidence: float = 0.95
    seed: int = 0
    blp_centered: bool = True
    min_group_size: int = 30

    def validate(self):
        if self.k_folds < 2:
            raise ConfigError("must be >= 2", "crossfit.k_folds")
        if not 0 < self.confidence < 1:
            raise ConfigError("must lie in (0, 1)", "crossfit.confidence")
        if not 0 < self.propensity_eps < 0.5:
            raise ConfigError("must lie in (0, 0.5)", "crossfit.propensity_eps")
        if self.modality not in ("tabular", "text"):
            raise ConfigError(f"unknown modality {self.modality!r}", "crossfit.modality")
        if (self.modality == "text") != is_text_learner(self.learner):
            raise ConfigError(f"learner {self.learner.kind!r} does not fit modality "
                              f"{self.modality!r}", "crossfit.modality")
        if self.min_group_size < 1:
            raise ConfigError("must be >= 1", "crossfit.min_group_size")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["learner"] = learner_to_dict(self.learner)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CrossfitConfig":
        d = dict(d)
        if "learner" in d:
            d["learner"] = learner_from_dict(d["learner"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}", "crossfit")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class CrossfitResult:
    score_rows: ScoreRows
    estimates: list
    blp_per_fold: list
    manifest: dict
    folds: FoldAssignment
    models: list = field(default_factory=list)

    @property
    def ate(self) -> Estimate:
        return self._get("ATE")

    @property
    def atet(self) -> Estimate:
        return self._get("ATET")

    @property
    def gates(self) -> dict:
        return {e.group: e for e in self.estimates if e.estimand == "GATE"}

    def _get(self, name) -> Estimate:
        for e in self.estimates:
            if e.estimand == name:
                return e
        raise KeyError(name)

    # -- persistence --------------------------------------------------------
    def save(self, directory, save_models: bool = False) -> Path:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        self.score_rows.to_csv(out / "scores.csv")
        _dump(out / "estimates.json", [e.to_dict() for e in self.estimates])
        _dump(out / "blp.json", [b.to_dict() for b in self.blp_per_fold])
        _dump(out / "manifest.json", self.manifest)
        (out / "folds.json").write_text(self.folds.to_json() + "\n", encoding="utf-8")
        if save_models and self.models:
            mdir = out / "models"
            mdir.mkdir(exist_ok=True)
            for k, triple in enumerate(self.models):
                names = ("joint",) if triple.joint else ("g1", "g0", "mu")
                for name in names:
                    model = triple.g1 if name == "joint" else getattr(triple, name)
                    _dump(mdir / f"fold{k}_{name}.json", model_to_dict(model))
        return out

    @classmethod
    def load(cls, directory) -> "CrossfitResult":
        d = Path(directory)
        for name in ("scores.csv", "estimates.json", "blp.json", "manifest.json", "folds.json"):
            if not (d / name).exists():
                raise DataError(f"{d} is not a result directory: missing {name}")
        rows = ScoreRows.from_csv(d / "scores.csv")
        estimates = [Estimate(**e) for e in _load(d / "estimates.json")]
        blp = [BlpCoefficients(**b) for b in _load(d / "blp.json")]
        folds = FoldAssignment.from_json((d / "folds.json").read_text(encoding="utf-8"))
        return cls(rows, estimates, blp, _load(d / "manifest.json"), folds)


def _dump(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n",
                          encoding="utf-8")


def _load(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def id_fingerprint(ids) -> str:
    """Order-independent SHA-256 of a set of unit ids."""
    return hashlib.sha256("\x1f".join(sorted(ids)).encode()).hexdigest()


def _fold_seed(seed: int, k: int) -> int:
    return int(np.random.SeedSequence([seed, k]).generate_state(1)[0])


def _seeded_learner(spec, seed):
    if isinstance(spec, GbtLearner):
        return replace(spec, params=replace(spec.params, seed=seed))
    if isinstance(spec, TextTripleLearner):
        return replace(spec, train=replace(spec.train, seed=seed))
    return spec


def _features(dataset: Dataset, config: CrossfitConfig, headers=None):
    if config.modality == "text":
        if not dataset.has_text:
            raise DataError("modality 'text' requires a non-empty text column")
        return encode_texts(config.learner.featurizer, list(dataset.text), headers)
    if dataset.width == 0:
        raise DataError("modality 'tabular' requires at least one numeric column")
    return np.asarray(dataset.tabular)


def _fit_fold(k, train_idx, score_idx, features, dataset, spec):
    t = np.asarray(dataset.treatment)
    train_ids = dataset.ids[train_idx]
    score_ids = dataset.ids[score_idx]
    if set(train_ids) & set(score_ids):
        raise InvariantError(f"fold {k}: scored units appear in the training slice")
    n1 = int(t[train_idx].sum())
    n0 = len(train_idx) - n1
    if n1 == 0 or n0 == 0:
        arm = "treated" if n1 == 0 else "control"
        raise OrchestrationError(f"fold {k}: training complement has no {arm} units")
    try:
        triple = fit_nuisances(spec, features[train_idx], dataset.outcome[train_idx],
                               t[train_idx])
        g1, g0, mu = triple.predict(features[score_idx])
    except TextCausalError as exc:
        exc.fold = k
        exc.args = (f"fold {k}: {exc}",)
        raise
    diag = {
        "fold": k,
        "n_train": int(len(train_idx)),
        "n_train_treated": n1,
        "n_train_control": n0,
        "n_scored": int(len(score_idx)),
        "train_fingerprint": id_fingerprint(train_ids),
        "score_fingerprint": id_fingerprint(score_ids),
        **triple.diagnostics(),
    }
    return g1, g0, mu, diag, triple


def run_crossfit(dataset: Dataset, config: CrossfitConfig, n_jobs: int = 1,
                 keep_models: bool = False, provider_headers: dict | None = None
                 ) -> CrossfitResult:
    """Cross-fitted DR estimation.

    For each fold k the nuisances are trained on every other fold and used to
    score fold k only. ``n_jobs`` parallelises over folds; results do not
    depend on it. ``provider_headers`` are passed to a remote embedder and
    never recorded.
    """
    config.validate()
    folds = partition_folds(dataset, config.k_folds, config.seed)
    features = _features(dataset, config, provider_headers)

    jobs = [(k, folds.complement(k), folds.indices(k),
             _seeded_learner(config.learner, _fold_seed(config.seed, k)))
            for k in range(config.k_folds)]
    if n_jobs == 1:
        outs = [_fit_fold(k, tr, sc, features, dataset, spec) for k, tr, sc, spec in jobs]
    else:
        from joblib import Parallel, delayed
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=1):
            outs = Parallel(n_jobs=n_jobs, backend="threading")(
                delayed(_fit_fold)(k, tr, sc, features, dataset, spec)
                for k, tr, sc, spec in jobs)

    n = len(dataset)
    g1, g0, mu = np.full(n, np.nan), np.full(n, np.nan), np.full(n, np.nan)
    per_fold, models = [], []
    for (k, _, score_idx, _), (p1, p0, pm, diag, triple) in zip(jobs, outs):
        g1[score_idx], g0[score_idx], mu[score_idx] = p1, p0, pm
        per_fold.append(diag)
        models.append(triple)
    return _assemble(dataset, folds, g1, g0, mu, config, per_fold,
                     models if keep_models else [])


def inject_nuisances(dataset: Dataset, provider, config: CrossfitConfig) -> CrossfitResult:
    """Score with externally supplied (g1, g0, mu) instead of trained models.

    ``provider.lookup(ids)`` must return aligned arrays for every unit. The
    fold split, clipping, BLP and estimation steps are the same as in
    :func:`run_crossfit`.
    """
    config.validate()
    folds = partition_folds(dataset, config.k_folds, config.seed)
    g1, g0, mu = (np.asarray(a, dtype=np.float64) for a in provider.lookup(list(dataset.ids)))
    per_fold = [{"fold": k, "injected": True, "n_scored": int(len(folds.indices(k)))}
                for k in range(config.k_folds)]
    return _assemble(dataset, folds, g1, g0, mu, config, per_fold, [])


def _assemble(dataset, folds, g1, g0, mu, config, per_fold, models) -> CrossfitResult:
    if not (np.all(np.isfinite(g1)) and np.all(np.isfinite(g0)) and np.all(np.isfinite(mu))):
        raise InvariantError("some units received no finite out-of-fold prediction")
    rows = ScoreRows.build(dataset.ids, folds.fold_of, dataset.outcome, dataset.treatment,
                           dataset.group, g1, g0, mu, eps=config.propensity_eps)

    cate = np.full(len(rows), np.nan)
    blps = []
    for k in range(folds.k_folds):
        idx = folds.indices(k)
        sub = rows.take(idx)
        try:
            coeffs = drcore.fit_blp(sub, fold=k, centered=config.blp_centered)
        except DegenerateBLPError:
            coeffs = drcore.blp_fallback(sub, fold=k)
        blps.append(coeffs)
        cate[idx] = drcore.cate_predict(coeffs, sub.theta_tilde)
    if not np.all(np.isfinite(cate)):
        raise InvariantError("non-finite CATE after BLP step")
    rows = rows.with_cate(cate)

    estimates = [drcore.estimate_ate(rows, config.confidence),
                 drcore.estimate_atet(rows, config.confidence)]
    skipped = {}
    group = np.asarray(dataset.group)
    for g in sorted(set(group)):
        mask = group == g
        if mask.sum() < config.min_group_size:
            skipped[g] = int(mask.sum())
            continue
        estimates.append(drcore.estimate_gate(rows, mask, config.confidence, group=g))

    manifest = {
        "format": RUN_FORMAT,
        "version": RUN_VERSION,
        "config": config.to_dict(),
        "dataset": {
            "fingerprint": dataset.fingerprint(),
            "n_units": len(dataset),
            "n_treated": int(dataset.treatment.sum()),
            "modality": dataset.modality.value,
            "feature_names": list(dataset.feature_names),
        },
        "folds": {"k": folds.k_folds, "seed": folds.seed, "sizes": folds.sizes().tolist(),
                  "fingerprint": folds.fingerprint()},
        "per_fold": per_fold,
        "skipped_groups": skipped,
        "degenerate_blp_folds": [b.fold for b in blps if b.degenerate],
    }
    return CrossfitResult(rows, estimates, blps, manifest, folds, models)


def verify_purity(result: CrossfitResult, ids) -> None:
    """Check each fold's recorded training fingerprint equals the complement
    of that fold and excludes every unit it scored."""
    ids = np.asarray(ids, dtype=object)
    for entry in result.manifest["per_fold"]:
        if entry.get("injected"):
            continue
        k = entry["fold"]
        in_fold = result.folds.fold_of == k
        if entry["train_fingerprint"] != id_fingerprint(ids[~in_fold]):
            raise InvariantError(f"fold {k}: training set is not the fold complement")
        if entry["score_fingerprint"] != id_fingerprint(ids[in_fold]):
            raise InvariantError(f"fold {k}: scored set is not the fold")
        scored = set(result.score_rows.unit_id[result.score_rows.fold == k])
        if scored & set(ids[~in_fold]):
            raise InvariantError(f"fold {k}: a unit was scored by its own training data")
