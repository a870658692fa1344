"""Observational data: units, datasets, file ingestion and fold partitioning.

A :class:`Dataset` is stored column-wise (one numpy array per field) and is
read-only after construction. :class:`Unit` is the row view.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    EmptyDatasetError,
    ParameterError,
    SchemaError,
    ShapeError,
    ValidationError,
)


class Modality(str, Enum):
    TABULAR = "tabular"
    TEXT = "text"
    BOTH = "both"


@dataclass(frozen=True)
class Unit:
    id: str
    outcome: float
    treatment: int
    group: str
    tabular: np.ndarray
    text: str = ""


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Columnar, immutable collection of units.

    Parameters
    ----------
    ids, outcome, treatment, group, text : array-like, length n
    tabular : array-like, shape (n, p)
    feature_names : sequence of str, length p
    modality : Modality
    outcome_bounds : {"unit", "none"}
        ``"unit"`` enforces outcomes in [0, 1].
    """

    ids: np.ndarray
    outcome: np.ndarray
    treatment: np.ndarray
    group: np.ndarray
    tabular: np.ndarray
    text: np.ndarray
    feature_names: tuple = ()
    modality: Modality = Modality.TABULAR
    outcome_bounds: str = "unit"

    def __post_init__(self):
        n = len(self.ids)
        if n == 0:
            raise EmptyDatasetError("dataset has no units")
        tab = np.asarray(self.tabular, dtype=np.float64)
        if tab.ndim == 1 and tab.size == 0:
            tab = tab.reshape(n, 0)
        if tab.ndim != 2 or tab.shape[0] != n:
            raise ShapeError(f"tabular block has shape {tab.shape}, expected ({n}, p)")
        cols = {
            "ids": np.asarray([str(i) for i in self.ids], dtype=object),
            "outcome": np.asarray(self.outcome, dtype=np.float64),
            "treatment": np.asarray(self.treatment, dtype=np.int8),
            "group": np.asarray([str(g) for g in self.group], dtype=object),
            "tabular": tab,
            "text": np.asarray([str(s) for s in self.text], dtype=object),
        }
        for name, arr in cols.items():
            if len(arr) != n:
                raise ShapeError(f"column {name!r} has length {len(arr)}, expected {n}")
        if len(self.feature_names) != tab.shape[1]:
            raise ShapeError(
                f"{len(self.feature_names)} feature names for tabular width {tab.shape[1]}"
            )
        if not np.all(np.isfinite(tab)):
            row = int(np.where(~np.isfinite(tab).all(axis=1))[0][0])
            raise ValidationError("non-finite tabular value", row=row + 1)
        y = cols["outcome"]
        bad = ~np.isfinite(y)
        if self.outcome_bounds == "unit":
            bad |= (y < 0) | (y > 1)
        elif self.outcome_bounds != "none":
            raise ParameterError(f"unknown outcome_bounds {self.outcome_bounds!r}")
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise ValidationError(f"outcome {y[row]!r} outside allowed range", row=row + 1)
        t_raw = np.asarray(self.treatment)
        tbad = (t_raw != 0) & (t_raw != 1)
        if tbad.any():
            row = int(np.flatnonzero(tbad)[0])
            raise ValidationError(f"treatment {t_raw[row]!r} not in {{0, 1}}", row=row + 1)
        t = cols["treatment"]
        if t.all() or not t.any():
            raise ValidationError("both treatment arms must be present")
        for name, arr in cols.items():
            object.__setattr__(self, name, _readonly(arr))
        object.__setattr__(self, "feature_names", tuple(str(f) for f in self.feature_names))
        object.__setattr__(self, "modality", Modality(self.modality))

    # -- construction -------------------------------------------------------
    @classmethod
    def from_units(cls, units: Sequence[Unit], feature_names=(), modality=Modality.TABULAR,
                   outcome_bounds="unit") -> "Dataset":
        units = list(units)
        if not units:
            raise EmptyDatasetError("dataset has no units")
        width = len(units[0].tabular)
        for j, u in enumerate(units):
            if len(u.tabular) != width:
                raise ShapeError(f"unit {j} has tabular width {len(u.tabular)}, expected {width}")
        tab = np.array([np.asarray(u.tabular, dtype=np.float64) for u in units]).reshape(len(units), width)
        return cls(
            ids=[u.id for u in units],
            outcome=[u.outcome for u in units],
            treatment=[u.treatment for u in units],
            group=[u.group for u in units],
            tabular=tab,
            text=[u.text for u in units],
            feature_names=tuple(feature_names),
            modality=modality,
            outcome_bounds=outcome_bounds,
        )

    # -- views --------------------------------------------------------------
    def __len__(self):
        return len(self.ids)

    def __getitem__(self, i) -> Unit:
        return Unit(
            id=self.ids[i],
            outcome=float(self.outcome[i]),
            treatment=int(self.treatment[i]),
            group=self.group[i],
            tabular=self.tabular[i],
            text=self.text[i],
        )

    def __iter__(self) -> Iterator[Unit]:
        for i in range(len(self)):
            yield self[i]

    @property
    def units(self) -> list:
        return list(self)

    @property
    def width(self) -> int:
        return self.tabular.shape[1]

    @property
    def has_text(self) -> bool:
        return any(s != "" for s in self.text)

    def fingerprint(self) -> str:
        """SHA-256 over the dataset content, independent of how it was loaded."""
        h = hashlib.sha256()
        h.update("\x1f".join(self.ids).encode())
        h.update(np.ascontiguousarray(self.outcome).tobytes())
        h.update(np.ascontiguousarray(self.treatment).tobytes())
        h.update("\x1f".join(self.group).encode())
        h.update(np.ascontiguousarray(self.tabular).tobytes())
        h.update("\x1f".join(self.text).encode())
        h.update("\x1f".join(self.feature_names).encode())
        return h.hexdigest()


# ---------------------------------------------------------------------------
# ingestion

@dataclass
class ColumnSchema:
    """Maps file columns to roles.

    ``numeric=None`` takes every column not assigned to another role, in
    file order.
    """

    outcome: str = "y"
    treatment: str = "t"
    id: str | None = None
    group: str | None = None
    text: str | None = None
    numeric: Sequence[str] | None = None
    outcome_bounds: str = "unit"

    def role_columns(self):
        return [c for c in (self.id, self.outcome, self.treatment, self.group, self.text) if c]

    def numeric_columns(self, header: Sequence[str]) -> list:
        if self.numeric is not None:
            return list(self.numeric)
        taken = set(self.role_columns())
        return [c for c in header if c not in taken]


def _parse_real(value, column, row):
    if value is None or (isinstance(value, str) and value.strip() == ""):
        raise ValidationError(f"missing value in column {column!r}", row=row)
    if isinstance(value, bool):
        raise ValidationError(f"column {column!r}: expected a number, got {value!r}", row=row)
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"column {column!r}: cannot parse {value!r} as a number", row=row) from None
    if not math.isfinite(x):
        raise ValidationError(f"column {column!r}: non-finite value {value!r}", row=row)
    return x


def _parse_treatment(value, column, row):
    x = _parse_real(value, column, row)
    if x not in (0.0, 1.0):
        raise ValidationError(f"treatment {value!r} not in {{0, 1}}", row=row)
    return int(x)


def _records_from_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        return header, list(reader)


def _records_from_jsonl(path):
    header, records = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"invalid JSON: {exc.msg}", row=lineno) from None
            if not isinstance(rec, dict):
                raise ValidationError("each line must be a JSON object", row=lineno)
            if not header:
                header = list(rec)
            records.append(rec)
    return header, records


def load_dataset(path, schema: ColumnSchema | None = None, fmt: str | None = None) -> Dataset:
    """Read a CSV or JSONL file into a :class:`Dataset`, preserving row order.

    Row numbers in error messages are 1-based data rows (header excluded).
    """
    schema = schema or ColumnSchema()
    path = Path(path)
    fmt = fmt or ("jsonl" if path.suffix.lower() in (".jsonl", ".ndjson") else "csv")
    if fmt == "csv":
        header, records = _records_from_csv(path)
    elif fmt == "jsonl":
        header, records = _records_from_jsonl(path)
    else:
        raise ParameterError(f"unknown dataset format {fmt!r}")
    if not records:
        raise EmptyDatasetError(f"{path} contains no rows")

    numeric = schema.numeric_columns(header)
    for col in schema.role_columns() + numeric:
        if col not in header:
            raise SchemaError(f"column {col!r} not found in {path.name} (have {header})")

    n = len(records)
    ids, y, t, grp, txt = [], np.empty(n), np.empty(n, dtype=np.int8), [], []
    tab = np.empty((n, len(numeric)))
    for i, rec in enumerate(records):
        row = i + 1
        ids.append(str(rec[schema.id]) if schema.id else str(i))
        y[i] = _parse_real(rec.get(schema.outcome), schema.outcome, row)
        if schema.outcome_bounds == "unit" and not 0.0 <= y[i] <= 1.0:
            raise ValidationError(f"outcome {y[i]!r} outside [0, 1]", row=row)
        t[i] = _parse_treatment(rec.get(schema.treatment), schema.treatment, row)
        grp.append(str(rec.get(schema.group, "")) if schema.group else "")
        value = rec.get(schema.text) if schema.text else ""
        txt.append("" if value is None else str(value))
        for j, col in enumerate(numeric):
            tab[i, j] = _parse_real(rec.get(col), col, row)

    if schema.text and numeric:
        modality = Modality.BOTH
    elif schema.text:
        modality = Modality.TEXT
    else:
        modality = Modality.TABULAR
    return Dataset(ids=ids, outcome=y, treatment=t, group=grp, tabular=tab, text=txt,
                   feature_names=tuple(numeric), modality=modality,
                   outcome_bounds=schema.outcome_bounds)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_dataset(dataset: Dataset, path, fmt: str | None = None) -> None:
    """Write ``dataset`` with columns ``id, y, t, group, <features...>, text``.

    Floats use shortest round-trip repr so reloading is exact.
    """
    path = Path(path)
    fmt = fmt or ("jsonl" if path.suffix.lower() in (".jsonl", ".ndjson") else "csv")
    names = list(dataset.feature_names)
    if fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "y", "t", "group", *names, "text"])
            for i in range(len(dataset)):
                w.writerow([dataset.ids[i], _fmt(dataset.outcome[i]), int(dataset.treatment[i]),
                            dataset.group[i], *(_fmt(v) for v in dataset.tabular[i]),
                            dataset.text[i]])
    elif fmt == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for i in range(len(dataset)):
                rec = {"id": dataset.ids[i], "y": float(dataset.outcome[i]),
                       "t": int(dataset.treatment[i]), "group": dataset.group[i]}
                rec.update({n: float(v) for n, v in zip(names, dataset.tabular[i])})
                rec["text"] = dataset.text[i]
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    else:
        raise ParameterError(f"unknown dataset format {fmt!r}")


def standard_schema(dataset: Dataset) -> ColumnSchema:
    """Schema matching the layout produced by :func:`write_dataset`."""
    return ColumnSchema(outcome="y", treatment="t", id="id", group="group", text="text",
                        numeric=list(dataset.feature_names),
                        outcome_bounds=dataset.outcome_bounds)


# ---------------------------------------------------------------------------
# folds

@dataclass(frozen=True, eq=False)
class FoldAssignment:
    k_folds: int
    fold_of: np.ndarray
    seed: int

    def __post_init__(self):
        f = np.asarray(self.fold_of, dtype=np.int64)
        if f.ndim != 1 or f.size and (f.min() < 0 or f.max() >= self.k_folds):
            raise ParameterError("fold indices must lie in [0, k_folds)")
        object.__setattr__(self, "fold_of", _readonly(f))

    def __eq__(self, other):
        return (isinstance(other, FoldAssignment) and self.k_folds == other.k_folds
                and self.seed == other.seed and np.array_equal(self.fold_of, other.fold_of))

    def indices(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == k)

    def complement(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != k)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.fold_of, minlength=self.k_folds)

    def to_json(self) -> str:
        return json.dumps({"k_folds": self.k_folds, "seed": self.seed,
                           "fold_of": self.fold_of.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "FoldAssignment":
        d = json.loads(text)
        return cls(k_folds=d["k_folds"], fold_of=np.asarray(d["fold_of"]), seed=d["seed"])

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def partition_folds(dataset: Dataset, k: int, seed: int) -> FoldAssignment:
    """Balanced K-fold assignment, stratified by treatment arm.

    Treated and control indices are shuffled separately, concatenated, and
    dealt round-robin. Fold sizes therefore differ by at most one, and each
    arm is spread as evenly as possible across folds.
    """
    n = len(dataset)
    if k < 2 or k > n:
        raise ParameterError(f"k must satisfy 2 <= k <= {n}, got {k}")
    rng = np.random.default_rng(seed)
    t = np.asarray(dataset.treatment)
    treated = rng.permutation(np.flatnonzero(t == 1))
    control = rng.permutation(np.flatnonzero(t == 0))
    order = np.concatenate([treated, control])
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[order] = np.arange(n) % k
    return FoldAssignment(k_folds=k, fold_of=fold_of, seed=seed)
