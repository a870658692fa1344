"""Histogram gradient-boosted regression trees.

Features are quantised once into at most ``max_bins`` bins per column; each
tree is grown depth-first on gradient/hessian histograms. Splits are stored
as real-valued thresholds (``x <= threshold`` goes left) so prediction works
on raw features.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.special import expit

from ..errors import NumericError, ParameterError, ShapeError

SQUARED_ERROR = "squared_error"
LOGISTIC = "logistic"


@dataclass(frozen=True)
class GbtParams:
    n_trees: int = 300
    max_depth: int = 4
    learning_rate: float = 0.1
    min_leaf: int = 20
    subsample: float = 1.0
    seed: int = 0
    reg_lambda: float = 1.0
    max_bins: int = 256

    def validate(self):
        if self.n_trees < 0:
            raise ParameterError("n_trees must be >= 0")
        if self.max_depth < 1:
            raise ParameterError("max_depth must be >= 1")
        if not self.learning_rate > 0:
            raise ParameterError("learning_rate must be > 0")
        if self.min_leaf < 1:
            raise ParameterError("min_leaf must be >= 1")
        if not 0 < self.subsample <= 1:
            raise ParameterError("subsample must lie in (0, 1]")
        if not 2 <= self.max_bins <= 256:
            raise ParameterError("max_bins must lie in [2, 256]")
        if self.reg_lambda < 0:
            raise ParameterError("reg_lambda must be >= 0")


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat node arrays. ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self):
        return len(self.feature)

    def to_nested(self, node: int = 0) -> dict:
        if self.feature[node] < 0:
            return {"leaf": float(self.value[node])}
        return {
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "left": self.to_nested(int(self.left[node])),
            "right": self.to_nested(int(self.right[node])),
        }

    @classmethod
    def from_nested(cls, root: dict) -> "Tree":
        feature, threshold, left, right, value = [], [], [], [], []

        def add(node):
            i = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            if "leaf" in node:
                value[i] = float(node["leaf"])
            else:
                feature[i] = int(node["feature"])
                threshold[i] = float(node["threshold"])
                left[i] = add(node["left"])
                right[i] = add(node["right"])
            return i

        add(root)
        return cls(np.array(feature, dtype=np.int32), np.array(threshold),
                   np.array(left, dtype=np.int32), np.array(right, dtype=np.int32),
                   np.array(value))


@dataclass(frozen=True, eq=False)
class GbtModel:
    trees: list
    learning_rate: float
    base_score: float
    objective: str
    n_features: int
    params: GbtParams = field(default_factory=GbtParams)
    train_loss: tuple = ()

    def raw_predict(self, features) -> np.ndarray:
        X = np.ascontiguousarray(features, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(f"model expects {self.n_features} features, got shape {X.shape}")
        out = np.full(X.shape[0], self.base_score)
        for tree in self.trees:
            out += self.learning_rate * _predict_tree_raw(
                X, tree.feature, tree.threshold, tree.left, tree.right, tree.value)
        return out

    def predict(self, features) -> np.ndarray:
        raw = self.raw_predict(features)
        return expit(raw) if self.objective == LOGISTIC else raw


# ---------------------------------------------------------------------------
# binning

def bin_thresholds(column: np.ndarray, max_bins: int) -> np.ndarray:
    """Candidate split thresholds for one feature (at most ``max_bins - 1``)."""
    uniq = np.unique(column)
    if len(uniq) <= max_bins:
        mid = (uniq[:-1] + uniq[1:]) / 2.0
        # midpoint can round up onto the upper value for adjacent floats
        clash = mid >= uniq[1:]
        mid[clash] = uniq[:-1][clash]
        return mid
    qs = np.linspace(0.0, 1.0, max_bins + 1)[1:-1]
    return np.unique(np.quantile(column, qs, method="inverted_cdf"))


def quantize(X: np.ndarray, thresholds: list) -> np.ndarray:
    codes = np.empty(X.shape, dtype=np.uint8)
    for j, thr in enumerate(thresholds):
        codes[:, j] = np.searchsorted(thr, X[:, j], side="left")
    return codes


# ---------------------------------------------------------------------------
# numba kernels

@numba.njit(cache=True)
def _predict_tree_raw(X, feature, threshold, left, right, value):
    n = X.shape[0]
    out = np.empty(n)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


@numba.njit(cache=True)
def _predict_tree_codes(codes, feature, split_bin, left, right, value):
    n = codes.shape[0]
    out = np.empty(n)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if codes[i, feature[node]] <= split_bin[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


@numba.njit(cache=True)
def _accumulate(codes, grad, hess, idx, s, e, hist):
    n_feat = codes.shape[1]
    for r in range(s, e):
        i = idx[r]
        gi = grad[i]
        hi = hess[i]
        for j in range(n_feat):
            b = codes[i, j]
            hist[j, b, 0] += gi
            hist[j, b, 1] += hi
            hist[j, b, 2] += 1.0


@numba.njit(cache=True)
def _grow_tree(codes, grad, hess, rows, n_bins, max_depth, min_leaf, reg_lambda, row_value):
    """Grow one tree on ``rows``; writes each row's leaf value into ``row_value``.

    Histograms hold (sum grad, sum hess, count) per feature and bin. Only the
    smaller child is scanned; the larger child's histogram is the parent's
    minus the smaller one.
    """
    n_feat = codes.shape[1]
    max_nodes = 2 ** (max_depth + 1) - 1
    feature = np.full(max_nodes, -1, dtype=np.int32)
    split_bin = np.zeros(max_nodes, dtype=np.int32)
    left = np.full(max_nodes, -1, dtype=np.int32)
    right = np.full(max_nodes, -1, dtype=np.int32)
    value = np.zeros(max_nodes)

    max_b = 0
    for j in range(n_feat):
        if n_bins[j] > max_b:
            max_b = n_bins[j]
    n_slots = 2 * max_depth + 4
    hists = np.zeros((n_slots, n_feat, max_b, 3))
    free = np.arange(n_slots - 1, -1, -1)
    n_free = n_slots

    idx = rows.copy()

    # stack entries: node, start, end, depth, slot (-1: no histogram), G, H
    st_i = np.empty((max_nodes, 5), dtype=np.int64)
    st_f = np.empty((max_nodes, 2))
    g_root = 0.0
    h_root = 0.0
    for r in range(len(idx)):
        g_root += grad[idx[r]]
        h_root += hess[idx[r]]
    top = 0
    n_nodes = 1
    root_slot = -1
    if max_depth > 0 and len(idx) >= 2 * min_leaf:
        n_free -= 1
        root_slot = free[n_free]
        _accumulate(codes, grad, hess, idx, 0, len(idx), hists[root_slot])
    st_i[0, 0] = 0
    st_i[0, 1] = 0
    st_i[0, 2] = len(idx)
    st_i[0, 3] = 0
    st_i[0, 4] = root_slot
    st_f[0, 0] = g_root
    st_f[0, 1] = h_root
    top = 1

    while top > 0:
        top -= 1
        node = st_i[top, 0]
        s = st_i[top, 1]
        e = st_i[top, 2]
        depth = st_i[top, 3]
        slot = st_i[top, 4]
        g_tot = st_f[top, 0]
        h_tot = st_f[top, 1]
        count = e - s
        value[node] = -g_tot / (h_tot + reg_lambda)

        best_f = -1
        best_b = -1
        best_gl = 0.0
        best_hl = 0.0
        if slot >= 0:
            hist = hists[slot]
            parent = g_tot * g_tot / (h_tot + reg_lambda)
            best_gain = 1e-12
            for j in range(n_feat):
                gl = 0.0
                hl = 0.0
                cl = 0.0
                for b in range(n_bins[j] - 1):
                    gl += hist[j, b, 0]
                    hl += hist[j, b, 1]
                    cl += hist[j, b, 2]
                    if cl < min_leaf:
                        continue
                    if count - cl < min_leaf:
                        break
                    gr = g_tot - gl
                    hr = h_tot - hl
                    gain = gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - parent
                    if gain > best_gain:
                        best_gain = gain
                        best_f = j
                        best_b = b
                        best_gl = gl
                        best_hl = hl

        if best_f < 0:
            if slot >= 0:
                free[n_free] = slot
                n_free += 1
            v = value[node]
            for r in range(s, e):
                row_value[idx[r]] = v
            continue

        # in-place two-pointer partition: left rows to the front
        lo = s
        hi = e - 1
        while lo <= hi:
            if codes[idx[lo], best_f] <= best_b:
                lo += 1
            else:
                tmp = idx[lo]
                idx[lo] = idx[hi]
                idx[hi] = tmp
                hi -= 1
        nl = lo - s
        nr = count - nl

        li = n_nodes
        ri = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        split_bin[node] = best_b
        left[node] = li
        right[node] = ri

        child_depth = depth + 1
        l_split = child_depth < max_depth and nl >= 2 * min_leaf
        r_split = child_depth < max_depth and nr >= 2 * min_leaf
        l_slot = -1
        r_slot = -1
        if l_split or r_split:
            n_free -= 1
            small = free[n_free]
            hists[small, :, :, :] = 0.0
            if nl <= nr:
                _accumulate(codes, grad, hess, idx, s, s + nl, hists[small])
                hists[slot] -= hists[small]
                l_slot = small
                r_slot = slot
            else:
                _accumulate(codes, grad, hess, idx, s + nl, e, hists[small])
                hists[slot] -= hists[small]
                r_slot = small
                l_slot = slot
            if not l_split:
                free[n_free] = l_slot
                n_free += 1
                l_slot = -1
            if not r_split:
                free[n_free] = r_slot
                n_free += 1
                r_slot = -1
        else:
            free[n_free] = slot
            n_free += 1

        # push right first so the left subtree is expanded first
        st_i[top, 0] = ri
        st_i[top, 1] = s + nl
        st_i[top, 2] = e
        st_i[top, 3] = child_depth
        st_i[top, 4] = r_slot
        st_f[top, 0] = g_tot - best_gl
        st_f[top, 1] = h_tot - best_hl
        top += 1
        st_i[top, 0] = li
        st_i[top, 1] = s
        st_i[top, 2] = s + nl
        st_i[top, 3] = child_depth
        st_i[top, 4] = l_slot
        st_f[top, 0] = best_gl
        st_f[top, 1] = best_hl
        top += 1

    return (feature[:n_nodes].copy(), split_bin[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy())


# ---------------------------------------------------------------------------

def _loss(objective, y, raw):
    if objective == SQUARED_ERROR:
        return float(0.5 * np.mean((y - raw) ** 2))
    # log-loss computed from the margin for stability
    return float(np.mean(np.logaddexp(0.0, raw) - y * raw))


def fit_gbt(features, targets, objective: str = SQUARED_ERROR,
            params: GbtParams | None = None, **overrides) -> GbtModel:
    """Fit a boosted ensemble to the negative gradient of ``objective``.

    ``objective`` is ``"squared_error"`` or ``"logistic"`` (targets in {0, 1}).
    Leaves take a Newton step ``-sum(g) / (sum(h) + reg_lambda)``, later
    shrunk by ``learning_rate``. ``train_loss`` holds the full-sample
    training objective before the first tree and after each tree.
    """
    params = params or GbtParams()
    if overrides:
        params = GbtParams(**{**params.__dict__, **overrides})
    params.validate()
    X = np.ascontiguousarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(targets, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ShapeError(f"features {X.shape} do not match {y.shape[0]} targets")
    if X.shape[0] == 0:
        raise ParameterError("cannot fit on zero rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NumericError("non-finite value in features or targets")

    if objective == SQUARED_ERROR:
        base = float(y.mean())
    elif objective == LOGISTIC:
        if not np.all((y == 0) | (y == 1)):
            raise ParameterError("logistic objective needs 0/1 targets")
        rate = float(np.clip(y.mean(), 1e-6, 1 - 1e-6))
        base = float(np.log(rate / (1 - rate)))
    else:
        raise ParameterError(f"unknown objective {objective!r}")

    n, p = X.shape
    thresholds = [bin_thresholds(X[:, j], params.max_bins) for j in range(p)]
    n_bins = np.array([len(t) + 1 for t in thresholds], dtype=np.int64)
    codes = quantize(X, thresholds)
    rng = np.random.default_rng(params.seed)
    n_sub = max(1, int(round(params.subsample * n)))
    all_rows = np.arange(n, dtype=np.int64)

    raw = np.full(n, base)
    row_value = np.zeros(n)
    losses = [_loss(objective, y, raw)]
    trees = []
    for _ in range(params.n_trees):
        if objective == SQUARED_ERROR:
            grad = raw - y
            hess = np.ones(n)
        else:
            prob = expit(raw)
            grad = prob - y
            hess = np.maximum(prob * (1.0 - prob), 1e-16)
        rows = all_rows if n_sub == n else np.sort(rng.choice(n, size=n_sub, replace=False))
        feat, sbin, lft, rgt, val = _grow_tree(codes, grad, hess, rows, n_bins,
                                               params.max_depth, params.min_leaf,
                                               float(params.reg_lambda), row_value)
        thr = np.array([thresholds[f][b] if f >= 0 else 0.0 for f, b in zip(feat, sbin)])
        trees.append(Tree(feat, thr, lft, rgt, val))
        if n_sub < n:
            row_value = _predict_tree_codes(codes, feat, sbin, lft, rgt, val)
        raw += params.learning_rate * row_value
        losses.append(_loss(objective, y, raw))

    return GbtModel(trees=trees, learning_rate=params.learning_rate, base_score=base,
                    objective=objective, n_features=p, params=params,
                    train_loss=tuple(losses))
