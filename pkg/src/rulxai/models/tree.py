"""CART regression trees grown by greedy variance reduction."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import ModelError, Predictor, check_xy

LEAF = -1


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 9
    min_samples_leaf: int = 10
    min_samples_split: int = 2
    # "all" (every feature at every split), "sqrt", "log2", an int count or a float fraction
    max_features: object = "all"

    def __post_init__(self):
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")


def n_candidate_features(policy, n_features: int) -> int:
    if policy in (None, "all", "auto"):
        return n_features
    if policy == "sqrt":
        return max(1, int(math.sqrt(n_features)))
    if policy == "log2":
        return max(1, int(math.log2(n_features)))
    if isinstance(policy, float):
        if not 0 < policy <= 1:
            raise ValueError(f"max_features fraction must be in (0, 1], got {policy}")
        return max(1, int(policy * n_features))
    if isinstance(policy, int) and policy >= 1:
        return min(policy, n_features)
    raise ValueError(f"unknown max_features policy {policy!r}")


def best_split(x, y, min_samples_leaf):
    """Best threshold on one feature column.

    Returns ``(gain, threshold)`` where gain is the drop in summed squared
    error, or ``(0.0, None)`` when no admissible split exists. Thresholds are
    midpoints between consecutive distinct sorted values; among equal gains
    the smallest threshold wins.
    """
    order = np.argsort(x, kind="stable")
    return _best_sorted_split(x[order], y[order] - y.mean(), min_samples_leaf)


def _best_sorted_split(xs, yc, min_samples_leaf):
    # xs ascending, yc the matching targets centred on the node mean
    n = len(yc)
    csum = np.cumsum(yc)
    total = csum[-1]
    nl = np.arange(1, n)
    # split after position i (0-based) puts i+1 rows left
    valid = xs[1:] > xs[:-1]
    valid &= (nl >= min_samples_leaf) & (n - nl >= min_samples_leaf)
    if not valid.any():
        return 0.0, None
    sl = csum[:-1]
    sr = total - sl
    gain = sl * sl / nl + sr * sr / (n - nl) - total * total / n
    gain = np.where(valid, gain, -np.inf)
    i = int(np.argmax(gain))  # first maximum = smallest threshold
    lo, hi = xs[i], xs[i + 1]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return float(gain[i]), float(thr)


class RegressionTree(Predictor):
    """Array-backed binary tree; left child takes ``x[f] <= threshold``."""

    family = "tree"

    def __init__(self, n_features, feature, threshold, left, right, value, n_samples, impurity):
        super().__init__(n_features)
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)
        self.n_samples = np.asarray(n_samples, dtype=np.int64)
        # mean squared deviation of the training targets at each node
        self.impurity = np.asarray(impurity, dtype=np.float64)

    @property
    def n_nodes(self):
        return len(self.value)

    @property
    def is_leaf(self):
        return self.feature == LEAF

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] != LEAF:
                depth[self.left[node]] = depth[node] + 1
                depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            idx = np.flatnonzero(active)
            cur = node[idx]
            go_left = X[idx, self.feature[cur]] <= self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            active[idx] = self.feature[node[idx]] != LEAF
        return node

    def _predict(self, X):
        return self.value[self.apply(X)]

    def feature_importance(self) -> np.ndarray:
        """Unnormalised impurity decrease per feature, weighted by node share."""
        imp = np.zeros(self.n_features)
        total = self.n_samples[0]
        for node in np.flatnonzero(~self.is_leaf):
            l, r = self.left[node], self.right[node]
            n, nl, nr = self.n_samples[node], self.n_samples[l], self.n_samples[r]
            decrease = self.impurity[node] - (nl * self.impurity[l] + nr * self.impurity[r]) / n
            imp[self.feature[node]] += (n / total) * max(decrease, 0.0)
        return imp

    def state(self):
        return {
            "n_features": self.n_features,
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_samples": self.n_samples.tolist(),
            "impurity": self.impurity.tolist(),
        }

    @classmethod
    def from_state(cls, s):
        return cls(
            s["n_features"], s["feature"], s["threshold"], s["left"], s["right"],
            s["value"], s["n_samples"], s["impurity"],
        )


def presort(X) -> np.ndarray:
    """Row indices sorted by each feature, shape ``(n_features, n_rows)``."""
    return np.argsort(np.asarray(X, dtype=np.float64), axis=0, kind="stable").T.copy()


def _split_node(X, y, sorted_idx, candidates, min_samples_leaf):
    """Best ``(gain, feature, threshold)`` over all candidate features at once.

    ``sorted_idx`` holds the node's rows ordered by each feature. Ties go to
    the smallest feature index, then the smallest threshold.
    """
    d, n = sorted_idx.shape
    xs = X[sorted_idx, np.arange(d)[:, None]]
    ys = y[sorted_idx]
    yc = ys - ys[0].mean()
    csum = np.cumsum(yc, axis=1)
    total = csum[:, -1:]
    nl = np.arange(1, n)
    valid = (xs[:, 1:] > xs[:, :-1]) & (nl >= min_samples_leaf) & (n - nl >= min_samples_leaf)
    if candidates is not None:
        valid &= candidates[:, None]
    if not valid.any():
        return 0.0, None, None
    sl = csum[:, :-1]
    sr = total - sl
    gain = sl * sl / nl + sr * sr / (n - nl) - total * total / n
    gain = np.where(valid, gain, -np.inf)
    flat = int(np.argmax(gain))  # row-major: first feature, then first position
    f, i = divmod(flat, n - 1)
    lo, hi = xs[f, i], xs[f, i + 1]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return float(gain[f, i]), f, float(thr)


def fit_tree(
    X, y, params: TreeParams = TreeParams(), feature_subset_seed=None, presorted=None
) -> RegressionTree:
    """Grow a regression tree depth-first.

    ``feature_subset_seed`` seeds the per-split feature sampling used when
    ``params.max_features`` is narrower than all features; it is ignored
    otherwise. ``presorted`` may pass ``presort(X)`` when many trees are grown
    on the same design. Among equally good splits the smallest feature index,
    then the smallest threshold, is chosen.
    """
    X, y = check_xy(X, y)
    n_rows, n_feat = X.shape
    k = n_candidate_features(params.max_features, n_feat)
    rng = np.random.default_rng(feature_subset_seed) if k < n_feat else None
    order = presort(X) if presorted is None else np.asarray(presorted)

    feature, threshold, left, right = [], [], [], []
    value, n_samples, impurity = [], [], []

    def new_node(idx):
        yy = y[idx]
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(yy.mean()))
        n_samples.append(len(idx))
        impurity.append(float(np.mean((yy - yy.mean()) ** 2)))
        return len(value) - 1

    root = new_node(order[0])
    goes_left = np.zeros(n_rows, dtype=bool)
    stack = [(root, order, 0)]
    while stack:
        node, sidx, depth = stack.pop()
        n = sidx.shape[1]
        if depth >= params.max_depth or n < params.min_samples_split:
            continue
        if n < 2 * params.min_samples_leaf or impurity[node] == 0.0:
            continue
        cands = None
        if rng is not None:
            cands = np.zeros(n_feat, dtype=bool)
            cands[rng.choice(n_feat, size=k, replace=False)] = True
        gain, f, thr = _split_node(X, y, sidx, cands, params.min_samples_leaf)
        # float noise on a (near) pure node must not trigger a split
        if f is None or gain <= 1e-12 * impurity[node] * n:
            continue
        rows = sidx[0]
        goes_left[rows] = X[rows, f] <= thr
        sel = goes_left[sidx]
        n_left = int(goes_left[rows].sum())
        l_sidx = sidx[sel].reshape(n_feat, n_left)
        r_sidx = sidx[~sel].reshape(n_feat, n - n_left)
        feature[node] = f
        threshold[node] = thr
        l_node = new_node(l_sidx[0])
        r_node = new_node(r_sidx[0])
        left[node], right[node] = l_node, r_node
        # push right first so the left subtree is numbered first
        stack.append((r_node, r_sidx, depth + 1))
        stack.append((l_node, l_sidx, depth + 1))

    return RegressionTree(n_feat, feature, threshold, left, right, value, n_samples, impurity)
