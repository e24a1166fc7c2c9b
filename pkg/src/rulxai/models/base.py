from __future__ import annotations

import numpy as np


class ModelError(ValueError):
    """Training or prediction failure inside a model family."""


class Predictor:
    """Common surface of every trained regressor.

    ``predict`` accepts a single feature vector (returns a float) or a
    ``(n, d)`` matrix (returns an array of length ``n``). Subclasses implement
    ``_predict`` on 2-D input only, plus ``state``/``from_state`` for
    persistence.
    """

    family = "base"

    def __init__(self, n_features: int):
        self.n_features = int(n_features)

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X2 = X.reshape(1, -1) if single else X
        if X2.ndim != 2 or X2.shape[1] != self.n_features:
            raise ModelError(
                f"{self.family} model expects {self.n_features} features, got shape {X.shape}"
            )
        out = self._predict(X2)
        return float(out[0]) if single else out

    __call__ = predict

    def _predict(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def state(self) -> dict:
        raise NotImplementedError

    @classmethod
    def from_state(cls, state: dict):
        raise NotImplementedError


def check_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.ndim != 2:
        raise ModelError(f"X must be 2-D, got shape {X.shape}")
    if X.shape[0] == 0:
        raise ModelError("empty training set")
    if X.shape[0] != len(y):
        raise ModelError(f"X has {X.shape[0]} rows but y has {len(y)}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ModelError("training data contains non-finite values")
    return X, y
