"""Tree ensembles: bagged random forest and squared-error gradient boosting."""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from ..parallel import ordered_map
from .base import ModelError, Predictor, check_xy
from .tree import RegressionTree, TreeParams, fit_tree, presort


@dataclass(frozen=True)
class ForestParams:
    n_estimators: int = 10
    max_depth: int = 9
    min_samples_leaf: int = 10
    min_samples_split: int = 2
    max_features: object = "all"
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        self.tree_params()

    def tree_params(self):
        return TreeParams(self.max_depth, self.min_samples_leaf, self.min_samples_split, self.max_features)


@dataclass(frozen=True)
class GbmParams:
    n_stages: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    min_samples_leaf: int = 10
    min_samples_split: int = 2
    max_features: object = "all"
    seed: int = 0

    def __post_init__(self):
        if self.n_stages < 0:
            raise ValueError("n_stages must be >= 0")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")
        self.tree_params()

    def tree_params(self):
        return TreeParams(self.max_depth, self.min_samples_leaf, self.min_samples_split, self.max_features)


def tree_seeds(seed: int, n: int):
    """Independent per-tree seeds derived from one master seed."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def bootstrap_indices(n_rows: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).integers(0, n_rows, size=n_rows)


class Forest(Predictor):
    family = "forest"

    def __init__(self, trees, params: ForestParams):
        super().__init__(trees[0].n_features)
        self.trees = list(trees)
        self.params = params

    def tree_predictions(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return np.vstack([t._predict(X) for t in self.trees])

    def _predict(self, X):
        return self.tree_predictions(X).mean(axis=0)

    def state(self):
        return {"params": asdict(self.params), "trees": [t.state() for t in self.trees]}

    @classmethod
    def from_state(cls, s):
        return cls([RegressionTree.from_state(t) for t in s["trees"]], ForestParams(**s["params"]))


def fit_forest(X, y, params: ForestParams = ForestParams(), threads=None) -> Forest:
    """Average of ``n_estimators`` trees on bootstrap resamples.

    Per-tree seeds are derived before any work is dispatched, so the result
    does not depend on ``threads``.
    """
    X, y = check_xy(X, y)
    tp = params.tree_params()
    seeds = tree_seeds(params.seed, params.n_estimators)

    def grow(s):
        if params.bootstrap:
            idx = bootstrap_indices(len(y), s)
            return fit_tree(X[idx], y[idx], tp, feature_subset_seed=s)
        return fit_tree(X, y, tp, feature_subset_seed=s)

    return Forest(ordered_map(grow, seeds, threads), params)


def feature_importance(forest: Forest, return_flag: bool = False):
    """Mean decrease in impurity, averaged over trees and normalised to sum 1.

    A forest made only of leaves yields an all-zero vector and a warning; with
    ``return_flag`` the pair ``(importances, degenerate)`` is returned.
    """
    trees = forest.trees if isinstance(forest, Forest) else [forest]
    raw = np.mean([t.feature_importance() for t in trees], axis=0)
    total = raw.sum()
    degenerate = not total > 0
    if degenerate:
        warnings.warn("forest has no splits; feature importances are all zero", RuntimeWarning)
        imp = np.zeros_like(raw)
    else:
        imp = raw / total
    return (imp, degenerate) if return_flag else imp


class GradientBoosting(Predictor):
    family = "gbm"

    def __init__(self, n_features, init, trees, params: GbmParams):
        super().__init__(n_features)
        self.init = float(init)
        self.trees = list(trees)
        self.params = params

    def staged_predict(self, X):
        """Yield predictions after 0, 1, ..., n_stages stages."""
        X = np.asarray(X, dtype=np.float64)
        f = np.full(X.shape[0], self.init)
        yield f.copy()
        for t in self.trees:
            f = f + self.params.learning_rate * t._predict(X)
            yield f.copy()

    def _predict(self, X):
        f = np.full(X.shape[0], self.init)
        for t in self.trees:
            f += self.params.learning_rate * t._predict(X)
        return f

    def state(self):
        return {
            "params": asdict(self.params),
            "n_features": self.n_features,
            "init": self.init,
            "trees": [t.state() for t in self.trees],
        }

    @classmethod
    def from_state(cls, s):
        trees = [RegressionTree.from_state(t) for t in s["trees"]]
        return cls(s["n_features"], s["init"], trees, GbmParams(**s["params"]))


def fit_gbm(X, y, params: GbmParams = GbmParams()) -> GradientBoosting:
    """Least-squares boosting: each stage fits a tree to the current residuals."""
    X, y = check_xy(X, y)
    tp = params.tree_params()
    seeds = tree_seeds(params.seed, params.n_stages)
    order = presort(X)
    f = np.full(len(y), y.mean())
    trees = []
    for s in seeds:
        t = fit_tree(X, y - f, tp, feature_subset_seed=s, presorted=order)
        f += params.learning_rate * t._predict(X)
        if not np.all(np.isfinite(f)):
            raise ModelError(f"gradient boosting diverged at stage {len(trees) + 1}")
        trees.append(t)
    return GradientBoosting(X.shape[1], y.mean(), trees, params)
