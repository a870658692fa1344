"""Out-of-fold prediction metrics and cross-modality comparison statistics."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import ComparisonError, ShapeError, UndefinedCorrelationError, UndefinedRatioError

MAPE_FLOOR = 1e-6


# ---------------------------------------------------------------------------
# correlations

def pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeError(f"pearson needs two equal-length vectors, got {x.shape} and {y.shape}")
    if len(x) < 2:
        raise UndefinedCorrelationError("need at least 2 points")
    dx = x - math.fsum(x) / len(x)
    dy = y - math.fsum(y) / len(y)
    sxx = math.fsum(dx * dx)
    syy = math.fsum(dy * dy)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelationError("zero variance input")
    r = math.fsum(dx * dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def spearman(x, y) -> float:
    """Pearson correlation of average ranks (ties share their mean rank)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeError(f"spearman needs two equal-length vectors, got {x.shape} and {y.shape}")
    return pearson(rankdata(x, method="average"), rankdata(y, method="average"))


def _maybe(fn, *args):
    try:
        return fn(*args)
    except UndefinedCorrelationError:
        return None


# ---------------------------------------------------------------------------
# prediction metrics

@dataclass(frozen=True)
class MetricsReport:
    """Per-arm outcome-model quality. ``None`` marks an undefined correlation."""

    corr_t: float | None
    corr_c: float | None
    mape: float | None
    n_t: int
    n_c: int
    n_mape_excluded: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["table"] = {"Corr T": self.corr_t, "Corr C": self.corr_c, "MAPE": self.mape}
        return d


def compute_metrics(score_rows, outcomes=None, treatments=None) -> MetricsReport:
    """Corr T over treated (g1_hat, Y), Corr C over control (g0_hat, Y), and
    MAPE of the observed-arm prediction over units with Y >= ``MAPE_FLOOR``."""
    y = np.asarray(score_rows.y if outcomes is None else outcomes, dtype=np.float64)
    t = np.asarray(score_rows.t if treatments is None else treatments)
    if len(y) != len(score_rows) or len(t) != len(score_rows):
        raise ShapeError("outcomes/treatments do not match the score rows")
    g1 = np.asarray(score_rows.g1_hat, dtype=np.float64)
    g0 = np.asarray(score_rows.g0_hat, dtype=np.float64)
    tr, co = t == 1, t == 0
    corr_t = _maybe(pearson, g1[tr], y[tr])
    corr_c = _maybe(pearson, g0[co], y[co])

    pred = np.where(tr, g1, g0)
    keep = y >= MAPE_FLOOR
    mape = math.fsum(np.abs(pred[keep] - y[keep]) / y[keep]) / keep.sum() if keep.any() else None
    return MetricsReport(corr_t, corr_c, mape, int(tr.sum()), int(co.sum()),
                         int((~keep).sum()))


# ---------------------------------------------------------------------------
# GATE ranking

@dataclass(frozen=True)
class RankRow:
    group: str
    point_a: float
    point_b: float
    rank_a: int
    rank_b: int


@dataclass(frozen=True)
class RankTable:
    rows: list
    pearson: float | None
    spearman: float | None

    def to_csv_rows(self):
        yield ("group", "point_a", "rank_a", "point_b", "rank_b")
        for r in self.rows:
            yield (r.group, repr(r.point_a), r.rank_a, repr(r.point_b), r.rank_b)


def _ranks(points: dict) -> dict:
    # rank 1 = most negative; ties broken by group name
    order = sorted(points, key=lambda g: (points[g], g))
    return {g: i + 1 for i, g in enumerate(order)}


def _point(v) -> float:
    return float(getattr(v, "point", v))


def gate_rank_table(gates_a: dict, gates_b: dict) -> RankTable:
    """Side-by-side GATE ranks for two runs over the same groups.

    Values may be :class:`~textcausal.drcore.Estimate` objects or plain floats.
    """
    ka, kb = set(gates_a), set(gates_b)
    if ka != kb:
        raise ComparisonError(f"group keys differ: only in a {sorted(ka - kb)}, "
                              f"only in b {sorted(kb - ka)}")
    keys = sorted(ka)
    pa = {g: _point(gates_a[g]) for g in keys}
    pb = {g: _point(gates_b[g]) for g in keys}
    ra, rb = _ranks(pa), _ranks(pb)
    rows = sorted((RankRow(g, pa[g], pb[g], ra[g], rb[g]) for g in keys),
                  key=lambda r: (r.rank_a, r.group))
    xa = [pa[g] for g in keys]
    xb = [pb[g] for g in keys]
    return RankTable(rows, _maybe(pearson, xa, xb), _maybe(spearman, xa, xb))


# ---------------------------------------------------------------------------
# curves

def cate_quantile_curve(cates, n_points: int = 101) -> list:
    """``n_points`` nearest-rank quantiles of ``cates`` at evenly spaced levels
    from 0 to 1 inclusive. Returns ``[(q, value), ...]``."""
    v = np.sort(np.asarray(cates, dtype=np.float64))
    if len(v) == 0:
        raise ShapeError("cate_quantile_curve needs a non-empty vector")
    if n_points < 2:
        raise ShapeError("n_points must be >= 2")
    n = len(v)
    out = []
    for j in range(n_points):
        q = j / (n_points - 1)
        idx = max(math.ceil(q * n - 1e-9) - 1, 0)
        out.append((q, float(v[idx])))
    return out


@dataclass(frozen=True)
class LiftCurve:
    """Cumulative gain against fraction targeted.

    ``area`` is the trapezoidal integral over every unit; ``points`` may be a
    subsample of the full-resolution curve for emission.
    """

    points: list
    area: float
    total_gain: float
    n: int

    @property
    def baseline_area(self) -> float:
        """Area under the straight line from (0, 0) to (1, total_gain)."""
        return 0.5 * self.total_gain


def lift_curve(sort_scores, gain_scores, n_points: int | None = 101, tie_break=None) -> LiftCurve:
    """Target units in descending ``sort_scores`` order and accumulate
    ``gain_scores`` (already oriented so that larger means better).

    Ties in ``sort_scores`` are resolved by ``tie_break`` (e.g. unit ids) when
    given, otherwise by input position.
    """
    s = np.asarray(sort_scores, dtype=np.float64)
    g = np.asarray(gain_scores, dtype=np.float64)
    if s.shape != g.shape or s.ndim != 1:
        raise ShapeError(f"sort and gain vectors differ: {s.shape} vs {g.shape}")
    n = len(s)
    if n == 0:
        raise ShapeError("lift_curve needs at least one unit")
    if tie_break is None:
        order = np.argsort(-s, kind="stable")
    else:
        order = np.lexsort((np.asarray(tie_break), -s))
    total = math.fsum(g)
    cum = np.concatenate([[0.0], np.cumsum(g[order])])
    cum[-1] = total  # exact endpoint regardless of order
    x = np.arange(n + 1) / n
    area = math.fsum((cum[1:] + cum[:-1]) * 0.5) / n

    if n_points is None or n_points >= n + 1:
        pick = np.arange(n + 1)
    else:
        pick = np.unique(np.round(np.linspace(0, n, n_points)).astype(np.int64))
    points = [(float(x[i]), float(cum[i])) for i in pick]
    return LiftCurve(points, float(area), total, n)


def area_ratio(curve_cross: LiftCurve, curve_optimal: LiftCurve,
               baseline: str = "diagonal") -> float:
    """Area of ``curve_cross`` relative to ``curve_optimal``.

    ``baseline="diagonal"`` subtracts the random-targeting area from both;
    ``"none"`` compares raw areas.
    """
    if curve_cross.n != curve_optimal.n or not math.isclose(
            curve_cross.total_gain, curve_optimal.total_gain, rel_tol=1e-9, abs_tol=1e-12):
        raise ComparisonError("curves were not built from the same gain vector")
    if baseline == "diagonal":
        num = curve_cross.area - curve_cross.baseline_area
        den = curve_optimal.area - curve_optimal.baseline_area
    elif baseline == "none":
        num, den = curve_cross.area, curve_optimal.area
    else:
        raise ValueError(f"unknown baseline {baseline!r}")
    if den == 0.0 or not math.isfinite(den):
        raise UndefinedRatioError("optimal curve has zero area")
    return num / den


@dataclass(frozen=True)
class Histogram:
    arm: str
    edges: np.ndarray
    predicted: np.ndarray
    actual: np.ndarray

    def overlap(self) -> int:
        return int(np.minimum(self.predicted, self.actual).sum())


def distribution_summary(predictions, actuals, arm: str = "all", bins: int = 50) -> Histogram:
    """Aligned histograms of predictions and actuals on a shared grid spanning
    the pooled range."""
    p = np.asarray(predictions, dtype=np.float64)
    a = np.asarray(actuals, dtype=np.float64)
    if len(p) == 0 or len(a) == 0:
        raise ShapeError("distribution_summary needs non-empty inputs")
    lo = min(p.min(), a.min())
    hi = max(p.max(), a.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    hp, _ = np.histogram(p, bins=edges)
    ha, _ = np.histogram(a, bins=edges)
    return Histogram(arm, edges, hp, ha)
