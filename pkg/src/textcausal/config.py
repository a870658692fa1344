"""Run configuration files (TOML or JSON) and their resolution into typed configs."""
from __future__ import annotations

import csv
import json
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .crossfit import CrossfitConfig
from .data import ColumnSchema
from .errors import ConfigError, DataError
from .features import EmbeddingProviderConfig
from .learners.nuisance import GbtLearner, TextTripleLearner, learner_from_dict
from .report import ReportOptions
from .synthetic import SyntheticConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EMBEDDING_TOKEN_ENV = "TEXTCAUSAL_EMBEDDING_TOKEN"

_DEFAULT_ROLES = {"id": "id", "group": "group", "text": "text"}


@dataclass(frozen=True)
class DataSection:
    """Column roles. ``None`` for id/group/text means "use the conventional
    column name if the file has it"."""

    outcome: str = "y"
    treatment: str = "t"
    id: str | None = None
    group: str | None = None
    text: str | None = None
    numeric: tuple | None = None
    outcome_bounds: str = "unit"

    def schema_for(self, header) -> ColumnSchema:
        header = list(header)
        roles = {}
        for role, default in _DEFAULT_ROLES.items():
            given = getattr(self, role)
            if given is not None:
                roles[role] = given
            elif default in header:
                roles[role] = default
        return ColumnSchema(outcome=self.outcome, treatment=self.treatment,
                            numeric=list(self.numeric) if self.numeric is not None else None,
                            outcome_bounds=self.outcome_bounds, **roles)


@dataclass(frozen=True)
class RunConfig:
    data: DataSection = field(default_factory=DataSection)
    crossfit: CrossfitConfig = field(default_factory=CrossfitConfig)
    embedding: EmbeddingProviderConfig | None = None
    report: ReportOptions = field(default_factory=ReportOptions)
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)

    def to_dict(self) -> dict:
        return {
            "data": {k: (list(v) if isinstance(v, tuple) else v)
                     for k, v in asdict(self.data).items()},
            "crossfit": self.crossfit.to_dict(),
            "embedding": None if self.embedding is None else asdict(self.embedding),
            "report": asdict(self.report),
            "synthetic": self.synthetic.to_dict(),
        }

    def effective_crossfit(self) -> CrossfitConfig:
        """Cross-fit config with the remote embedder swapped in when configured."""
        cf = self.crossfit
        if self.embedding is not None and isinstance(cf.learner, TextTripleLearner):
            cf = replace(cf, learner=replace(cf.learner, featurizer=self.embedding))
        return cf


def _section(cls, raw, path):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError("expected a table", path)
    names = {f.name for f in fields(cls)}
    for key in raw:
        if key not in names:
            raise ConfigError("unknown key", f"{path}.{key}")
    try:
        return cls(**raw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), path) from None


def _crossfit(raw: dict | None) -> CrossfitConfig:
    if raw is None:
        return CrossfitConfig()
    raw = dict(raw)
    modality = raw.get("modality", "tabular")
    if "learner" not in raw and modality == "text":
        raw["learner"] = {"kind": "text_triple"}
    for key in raw:
        if key not in CrossfitConfig.__dataclass_fields__:
            raise ConfigError("unknown key", f"crossfit.{key}")
    learner = raw.pop("learner", None)
    spec = GbtLearner() if learner is None else learner_from_dict(learner, "crossfit.learner")
    try:
        cfg = CrossfitConfig(learner=spec, **raw)
    except TypeError as exc:
        raise ConfigError(str(exc), "crossfit") from None
    cfg.validate()
    return cfg


def config_from_dict(raw: dict) -> RunConfig:
    allowed = {f.name for f in fields(RunConfig)}
    for key in raw:
        if key not in allowed:
            raise ConfigError("unknown section", key)
    data_raw = raw.get("data")
    if isinstance(data_raw, dict) and data_raw.get("numeric") is not None:
        data_raw = {**data_raw, "numeric": tuple(data_raw["numeric"])}
    emb = raw.get("embedding")
    syn = raw.get("synthetic")
    try:
        synthetic = SyntheticConfig.from_dict(syn) if syn is not None else SyntheticConfig()
        synthetic.validate()
    except TypeError as exc:
        raise ConfigError(str(exc), "synthetic") from None
    cfg = RunConfig(
        data=_section(DataSection, data_raw, "data"),
        crossfit=_crossfit(raw.get("crossfit")),
        embedding=None if emb is None else _section(EmbeddingProviderConfig, emb, "embedding"),
        report=_section(ReportOptions, raw.get("report"), "report"),
        synthetic=synthetic,
    )
    cfg.report.validate()
    return cfg


def load_config(path=None) -> RunConfig:
    """Read a ``.toml`` or ``.json`` run config; ``None`` gives defaults."""
    if path is None:
        return RunConfig()
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"no such file {p}", "config")
    text = p.read_text(encoding="utf-8")
    try:
        if p.suffix.lower() == ".json":
            raw = json.loads(text)
        else:
            raw = tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {p.name}: {exc}", "config") from None
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a table", "config")
    return config_from_dict(raw)


def with_overrides(cfg: RunConfig, seed=None, outcome=None, treatment=None, group=None,
                   text=None, modality=None) -> RunConfig:
    """Apply command-line flags on top of file values."""
    data = cfg.data
    for name, value in (("outcome", outcome), ("treatment", treatment), ("group", group),
                        ("text", text)):
        if value is not None:
            data = replace(data, **{name: value})
    cf = cfg.crossfit
    if modality is not None and modality != cf.modality:
        learner = TextTripleLearner() if modality == "text" else GbtLearner()
        cf = replace(cf, modality=modality, learner=learner)
    syn = cfg.synthetic
    if seed is not None:
        cf = replace(cf, seed=seed)
        syn = replace(syn, seed=seed)
    cf.validate()
    return replace(cfg, data=data, crossfit=cf, synthetic=syn)


def peek_columns(path) -> list:
    """Column names of a CSV header or the first JSONL record."""
    p = Path(path)
    if not p.exists():
        raise DataError(f"no such file {p}")
    with open(p, newline="", encoding="utf-8") as fh:
        if p.suffix.lower() in (".jsonl", ".ndjson"):
            for line in fh:
                if line.strip():
                    try:
                        return list(json.loads(line))
                    except ValueError as exc:
                        raise DataError(f"row 1: invalid JSON ({exc})") from None
            return []
        return next(csv.reader(fh), [])

