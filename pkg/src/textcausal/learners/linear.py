"""Linear models: OLS, elastic net (coordinate descent), logistic regression."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ..errors import NumericError, ParameterError, ShapeError, SingularityError

_JITTER = 1e-10
_COND_LIMIT = 1e13


@dataclass(frozen=True, eq=False)
class LinearModel:
    """``intercept + features @ weights``, optionally through a logistic link."""

    intercept: float
    weights: np.ndarray
    regularization: dict = field(default_factory=lambda: {"kind": "none"})
    link: str = "identity"
    converged: bool = True
    n_iter: int = 0

    @property
    def n_features(self) -> int:
        return len(self.weights)

    def decision_function(self, features) -> np.ndarray:
        X = _as_matrix(features)
        if X.shape[1] != self.n_features:
            raise ShapeError(f"model expects {self.n_features} features, got {X.shape[1]}")
        return self.intercept + X @ self.weights

    def predict(self, features) -> np.ndarray:
        eta = self.decision_function(features)
        return expit(eta) if self.link == "logistic" else eta


def _as_matrix(features) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ShapeError(f"expected a 2-d feature matrix, got shape {X.shape}")
    return X


def _check_xy(features, targets):
    X = _as_matrix(features)
    y = np.asarray(targets, dtype=np.float64).ravel()
    if X.shape[0] != y.shape[0]:
        raise ShapeError(f"{X.shape[0]} feature rows but {y.shape[0]} targets")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NumericError("non-finite value in features or targets")
    return X, y


def solve_normal_equations(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``A'A beta = A'b``; adds ridge jitter if the Gram matrix is singular."""
    gram = A.T @ A
    rhs = A.T @ b
    try:
        if np.linalg.cond(gram) < _COND_LIMIT:
            beta = np.linalg.solve(gram, rhs)
            if np.all(np.isfinite(beta)):
                return beta
    except np.linalg.LinAlgError:
        pass
    scale = np.trace(gram) / max(gram.shape[0], 1)
    jittered = gram + _JITTER * max(scale, 1.0) * np.eye(gram.shape[0])
    try:
        beta = np.linalg.solve(jittered, rhs)
    except np.linalg.LinAlgError:
        raise SingularityError("normal equations singular even after ridge jitter") from None
    if not np.all(np.isfinite(beta)):
        raise SingularityError("normal equations singular even after ridge jitter")
    return beta


def fit_ols(features, targets) -> LinearModel:
    """Least squares with intercept via the normal equations."""
    X, y = _check_xy(features, targets)
    n, p = X.shape
    if n < p + 1:
        raise ParameterError(f"OLS needs at least {p + 1} rows for {p} features, got {n}")
    A = np.column_stack([np.ones(n), X])
    beta = solve_normal_equations(A, y)
    return LinearModel(intercept=float(beta[0]), weights=beta[1:])


def soft_threshold(z: float, gamma: float) -> float:
    if z > gamma:
        return z - gamma
    if z < -gamma:
        return z + gamma
    return 0.0


def fit_elastic_net(features, targets, l1: float = 0.0, l2: float = 0.0,
                    max_iter: int = 10_000, tol: float = 1e-10) -> LinearModel:
    """Coordinate descent for

        0.5 * ||y - b - X w||^2 + l1 * ||w||_1 + 0.5 * l2 * ||w||^2

    with an unpenalised intercept ``b``. Columns are centred, not scaled, so
    penalties act on the raw coefficients. Zero-variance columns get weight 0.
    Stops when the largest coefficient change in a sweep is below ``tol``;
    otherwise returns the last iterate with ``converged=False`` and a warning.
    """
    if l1 < 0 or l2 < 0:
        raise ParameterError("l1 and l2 must be non-negative")
    X, y = _check_xy(features, targets)
    n, p = X.shape
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    yc = y - y_mean
    gram = Xc.T @ Xc
    corr = Xc.T @ yc
    diag = np.diag(gram).copy()
    live = diag > 1e-12 * max(1.0, float(diag.max(initial=0.0)))

    w = np.zeros(p)
    # gram @ w, maintained incrementally
    gw = np.zeros(p)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        max_delta = 0.0
        for j in range(p):
            if not live[j]:
                continue
            rho = corr[j] - gw[j] + diag[j] * w[j]
            new = soft_threshold(rho, l1) / (diag[j] + l2)
            delta = new - w[j]
            if delta != 0.0:
                gw += gram[:, j] * delta
                w[j] = new
                max_delta = max(max_delta, abs(delta))
        if max_delta < tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"elastic net did not converge in {max_iter} sweeps", RuntimeWarning,
                      stacklevel=2)
    kind = "none" if l1 == 0 and l2 == 0 else ("l1" if l2 == 0 else "l1+l2")
    return LinearModel(
        intercept=float(y_mean - x_mean @ w),
        weights=w,
        regularization={"kind": kind, "l1": float(l1), "l2": float(l2)},
        converged=converged,
        n_iter=it,
    )


def fit_logistic(features, labels, l2: float = 1e-4, max_iter: int = 100,
                 tol: float = 1e-10) -> LinearModel:
    """Ridge-penalised logistic regression by Newton-Raphson.

    The small default ``l2`` keeps the fit finite on separable data; the
    intercept is not penalised.
    """
    X, t = _check_xy(features, labels)
    if not np.all((t == 0) | (t == 1)):
        raise ParameterError("logistic labels must be 0/1")
    n, p = X.shape
    A = np.column_stack([np.ones(n), X])
    penalty = np.full(p + 1, l2)
    penalty[0] = 0.0
    rate = np.clip(t.mean(), 1e-6, 1 - 1e-6)
    beta = np.zeros(p + 1)
    beta[0] = np.log(rate / (1 - rate))
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        prob = expit(A @ beta)
        grad = A.T @ (prob - t) + penalty * beta
        w = np.maximum(prob * (1 - prob), 1e-12)
        hess = (A * w[:, None]).T @ A + np.diag(penalty)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        beta = beta - step
        if np.max(np.abs(step)) < tol:
            converged = True
            break
    if not np.all(np.isfinite(beta)):
        raise NumericError("logistic regression diverged")
    return LinearModel(intercept=float(beta[0]), weights=beta[1:],
                       regularization={"kind": "l2", "l2": float(l2)},
                       link="logistic", converged=converged, n_iter=it)
