"""Doubly robust scores and the ATE / ATET / GATE / CATE estimators.

All reductions go through :func:`math.fsum`, which is correctly rounded, so
every estimate is bit-identical under any permutation of the rows.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np
from scipy.stats import norm

from .errors import DegenerateBLPError, EstimationError, NumericError, ParameterError, ShapeError
from .learners.linear import solve_normal_equations

DEFAULT_EPS = 0.01


# ---------------------------------------------------------------------------
# elementwise pieces

def clip_propensity(mu_raw, eps: float = DEFAULT_EPS):
    """Clamp propensities into ``[eps, 1 - eps]``."""
    if not 0 < eps < 0.5:
        raise ParameterError(f"eps must lie in (0, 0.5), got {eps}")
    out = np.clip(np.asarray(mu_raw, dtype=np.float64), eps, 1.0 - eps)
    return float(out) if out.ndim == 0 else out


def horvitz_thompson(t, mu_hat):
    """``t / mu - (1 - t) / (1 - mu)``."""
    t = np.asarray(t, dtype=np.float64)
    mu = np.asarray(mu_hat, dtype=np.float64)
    return t / mu - (1.0 - t) / (1.0 - mu)


def dr_label(g1_hat, g0_hat, y, t, mu_hat):
    """Doubly robust label ``g1 - g0 + (y - g_t) * H``.

    Works elementwise on arrays; scalars in give a float out.
    """
    args = [np.asarray(a, dtype=np.float64) for a in (g1_hat, g0_hat, y, t, mu_hat)]
    if not all(np.all(np.isfinite(a)) for a in args):
        raise NumericError("non-finite input to dr_label")
    g1, g0, y, t, mu = args
    if np.any((mu <= 0) | (mu >= 1)):
        raise NumericError("mu_hat must lie strictly inside (0, 1); clip first")
    g_t = np.where(t == 1, g1, g0)
    out = g1 - g0 + (y - g_t) * horvitz_thompson(t, mu)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# score table

_SCORE_FIELDS = ("unit_id", "fold", "y", "t", "group", "g1_hat", "g0_hat", "mu_hat",
                 "h_tilde", "theta_tilde", "dr_label", "cate")


@dataclass(frozen=True, eq=False)
class ScoreRows:
    """Per-unit out-of-fold predictions and derived scores, one entry per unit.

    Outcome, treatment and group are carried alongside so the estimators need
    nothing else.
    """

    unit_id: np.ndarray
    fold: np.ndarray
    y: np.ndarray
    t: np.ndarray
    group: np.ndarray
    g1_hat: np.ndarray
    g0_hat: np.ndarray
    mu_hat: np.ndarray
    h_tilde: np.ndarray
    theta_tilde: np.ndarray
    dr_label: np.ndarray
    cate: np.ndarray

    def __post_init__(self):
        n = len(self.unit_id)
        for f in fields(self):
            if len(getattr(self, f.name)) != n:
                raise ShapeError(f"score column {f.name!r} has wrong length")

    @classmethod
    def build(cls, unit_id, fold, y, t, group, g1_hat, g0_hat, mu_raw,
              eps: float = DEFAULT_EPS) -> "ScoreRows":
        """Clip ``mu_raw`` and derive H, theta and the DR label. ``cate`` starts as NaN."""
        y = np.asarray(y, dtype=np.float64)
        t = np.asarray(t, dtype=np.int8)
        g1 = np.asarray(g1_hat, dtype=np.float64)
        g0 = np.asarray(g0_hat, dtype=np.float64)
        mu = np.atleast_1d(clip_propensity(mu_raw, eps))
        return cls(
            unit_id=np.asarray(unit_id, dtype=object),
            fold=np.asarray(fold, dtype=np.int64),
            y=y, t=t, group=np.asarray(group, dtype=object),
            g1_hat=g1, g0_hat=g0, mu_hat=mu,
            h_tilde=horvitz_thompson(t, mu),
            theta_tilde=g1 - g0,
            dr_label=np.atleast_1d(dr_label(g1, g0, y, t, mu)),
            cate=np.full(len(y), np.nan),
        )

    def __len__(self):
        return len(self.unit_id)

    def take(self, idx) -> "ScoreRows":
        return ScoreRows(**{f.name: getattr(self, f.name)[idx] for f in fields(self)})

    def with_cate(self, cate) -> "ScoreRows":
        return replace(self, cate=np.asarray(cate, dtype=np.float64))

    @property
    def g_t_hat(self) -> np.ndarray:
        return np.where(self.t == 1, self.g1_hat, self.g0_hat)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(_SCORE_FIELDS)
            cols = [getattr(self, name) for name in _SCORE_FIELDS]
            for i in range(len(self)):
                w.writerow([_cell(c[i]) for c in cols])

    @classmethod
    def from_csv(cls, path) -> "ScoreRows":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        col = {name: [r[name] for r in rows] for name in _SCORE_FIELDS}
        floats = {name: np.array(col[name], dtype=np.float64)
                  for name in _SCORE_FIELDS if name not in ("unit_id", "fold", "t", "group")}
        return cls(unit_id=np.array(col["unit_id"], dtype=object),
                   fold=np.array(col["fold"], dtype=np.int64),
                   t=np.array(col["t"], dtype=np.int8),
                   group=np.array(col["group"], dtype=object), **floats)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


# ---------------------------------------------------------------------------
# estimates

def _mean(x) -> float:
    return math.fsum(x) / len(x)


def _std(x, center: float) -> float:
    """Population (ddof=0) standard deviation around ``center``."""
    d = np.asarray(x, dtype=np.float64) - center
    return math.sqrt(math.fsum(d * d) / len(d))


def z_value(confidence: float) -> float:
    if not 0 < confidence < 1:
        raise ParameterError(f"confidence must lie in (0, 1), got {confidence}")
    return float(norm.ppf(0.5 + confidence / 2))


@dataclass(frozen=True)
class Estimate:
    estimand: str
    point: float
    std_error: float
    ci_low: float
    ci_high: float
    n_effective: int
    confidence: float = 0.95
    group: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def label(self) -> str:
        return f"GATE({self.group})" if self.group is not None else self.estimand

    def covers(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high

    def overlaps(self, other: "Estimate") -> bool:
        return self.ci_low <= other.ci_high and other.ci_low <= self.ci_high


def estimate_from_scores(psi, estimand: str, confidence: float = 0.95,
                         n_effective: int | None = None, group=None) -> Estimate:
    """Point = mean(psi); standard error = std(psi) / sqrt(N)."""
    psi = np.asarray(psi, dtype=np.float64)
    if psi.size == 0:
        raise EstimationError(f"{estimand}: no rows")
    if not np.all(np.isfinite(psi)):
        raise NumericError(f"{estimand}: non-finite score")
    z = z_value(confidence)
    point = _mean(psi)
    se = _std(psi, point) / math.sqrt(psi.size)
    return Estimate(estimand=estimand, point=point, std_error=se,
                    ci_low=point - z * se, ci_high=point + z * se,
                    n_effective=int(psi.size if n_effective is None else n_effective),
                    confidence=confidence, group=group)


def ate_scores(rows: ScoreRows) -> np.ndarray:
    return rows.dr_label


def atet_scores(rows: ScoreRows) -> np.ndarray:
    t = rows.t.astype(np.float64)
    share = _mean(t)
    if share == 0:
        raise EstimationError("ATET needs at least one treated unit")
    resid = (rows.y - rows.g_t_hat) * rows.h_tilde
    return (t * rows.theta_tilde + rows.mu_hat * resid) / share


def gate_scores(rows: ScoreRows, group_mask) -> np.ndarray:
    mask = np.asarray(group_mask, dtype=bool)
    if mask.shape != (len(rows),):
        raise ShapeError("group mask must have one entry per row")
    share = _mean(mask.astype(np.float64))
    if share == 0:
        raise EstimationError("GATE group is empty")
    return mask * rows.dr_label / share


def estimate_ate(rows: ScoreRows, confidence: float = 0.95) -> Estimate:
    if len(rows) == 0:
        raise EstimationError("ATE: no rows")
    return estimate_from_scores(ate_scores(rows), "ATE", confidence)


def estimate_atet(rows: ScoreRows, confidence: float = 0.95) -> Estimate:
    if len(rows) == 0:
        raise EstimationError("ATET: no rows")
    return estimate_from_scores(atet_scores(rows), "ATET", confidence,
                                n_effective=int(rows.t.sum()))


def estimate_gate(rows: ScoreRows, group_mask, confidence: float = 0.95,
                  group: str | None = None) -> Estimate:
    if len(rows) == 0:
        raise EstimationError("GATE: no rows")
    mask = np.asarray(group_mask, dtype=bool)
    return estimate_from_scores(gate_scores(rows, mask), "GATE", confidence,
                                n_effective=int(mask.sum()), group=group)


# ---------------------------------------------------------------------------
# best linear predictor

@dataclass(frozen=True)
class BlpCoefficients:
    a1: float
    b1: float
    fold: int
    center: float
    se_a1: float = float("nan")
    se_b1: float = float("nan")
    n: int = 0
    degenerate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def ols_robust(design: np.ndarray, target: np.ndarray):
    """OLS coefficients with HC0 sandwich standard errors."""
    design = np.asarray(design, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    beta = solve_normal_equations(design, target)
    resid = target - design @ beta
    bread = np.linalg.inv(design.T @ design)
    meat = (design * (resid ** 2)[:, None]).T @ design
    cov = bread @ meat @ bread
    return beta, np.sqrt(np.maximum(np.diag(cov), 0.0)), resid


def fit_blp(rows_in_fold: ScoreRows, fold: int | None = None,
            centered: bool = True) -> BlpCoefficients:
    """Regress the DR label on ``(1, theta - mean(theta))`` within one fold.

    With ``centered=False`` the regressor is ``theta`` itself and ``center`` is 0.
    """
    n = len(rows_in_fold)
    if n < 3:
        raise EstimationError(f"BLP needs at least 3 rows, got {n}")
    theta = rows_in_fold.theta_tilde
    if np.all(theta == theta[0]):
        raise DegenerateBLPError("theta_tilde has zero variance within the fold")
    if fold is None:
        fold = int(rows_in_fold.fold[0])
    center = _mean(theta) if centered else 0.0
    design = np.column_stack([np.ones(n), theta - center])
    beta, se, _ = ols_robust(design, rows_in_fold.dr_label)
    return BlpCoefficients(a1=float(beta[0]), b1=float(beta[1]), fold=int(fold),
                           center=float(center), se_a1=float(se[0]), se_b1=float(se[1]), n=n)


def blp_fallback(rows_in_fold: ScoreRows, fold: int | None = None) -> BlpCoefficients:
    """Coefficients used when theta has no variance: a1 = mean label, b1 = 0."""
    if fold is None:
        fold = int(rows_in_fold.fold[0])
    dr = rows_in_fold.dr_label
    a1 = _mean(dr)
    return BlpCoefficients(a1=a1, b1=0.0, fold=int(fold), center=_mean(rows_in_fold.theta_tilde),
                           se_a1=_std(dr, a1) / math.sqrt(len(dr)), se_b1=float("nan"),
                           n=len(dr), degenerate=True)


def cate_predict(coeffs: BlpCoefficients, theta_tilde):
    out = coeffs.a1 + coeffs.b1 * (np.asarray(theta_tilde, dtype=np.float64) - coeffs.center)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# bias decomposition

def dr_bias_terms(true_g1, true_g0, true_mu, g1_hat, g0_hat, mu_hat):
    """Elementwise bias terms of the DR label under misspecified nuisances.

    ``bias1 = (mu / mu_hat - 1) * (g1 - g1_hat)``
    ``bias2 = (1 - (1 - mu) / (1 - mu_hat)) * (g0 - g0_hat)``
    """
    g1, g0, mu, g1h, g0h, muh = (np.asarray(a, dtype=np.float64) for a in
                                 (true_g1, true_g0, true_mu, g1_hat, g0_hat, mu_hat))
    if not (g1.shape == g0.shape == mu.shape == g1h.shape == g0h.shape == muh.shape):
        raise ShapeError("bias inputs must be aligned")
    if np.any((muh <= 0) | (muh >= 1)):
        raise NumericError("mu_hat must lie strictly inside (0, 1); clip first")
    bias1 = (mu / muh - 1.0) * (g1 - g1h)
    bias2 = (1.0 - (1.0 - mu) / (1.0 - muh)) * (g0 - g0h)
    return bias1, bias2
