from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

METHODS = ("lime", "kernel_shap", "exact_shapley")


class ExplainError(ValueError):
    pass


@dataclass(frozen=True)
class Contribution:
    feature: str
    condition: str
    value: float


@dataclass
class Explanation:
    """A local explanation of one prediction.

    ``contributions`` are kept sorted by absolute value, largest first. For
    the Shapley methods ``base_value + sum(values) == predicted_value`` up to
    solver precision.
    """

    method: str
    predicted_value: float
    base_value: float
    contributions: list
    diagnostics: dict = field(default_factory=dict)
    instance: list = field(default_factory=list)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ExplainError(f"unknown explanation method {self.method!r}")
        self.contributions = sorted(self.contributions, key=lambda c: -abs(c.value))

    @property
    def values(self) -> dict:
        return {c.feature: c.value for c in self.contributions}

    def value_of(self, feature: str) -> float:
        return self.values[feature]

    def total(self) -> float:
        return float(sum(c.value for c in self.contributions))

    def local_accuracy_gap(self) -> float:
        return abs(self.base_value + self.total() - self.predicted_value)

    def to_dict(self):
        return {
            "method": self.method,
            "base_value": self.base_value,
            "predicted_value": self.predicted_value,
            "contributions": [
                {"feature": c.feature, "condition": c.condition, "value": c.value}
                for c in self.contributions
            ],
            "diagnostics": self.diagnostics,
            "instance": list(self.instance),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default) + "\n"

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["method"],
            d["predicted_value"],
            d["base_value"],
            [Contribution(c["feature"], c["condition"], c["value"]) for c in d["contributions"]],
            d.get("diagnostics", {}),
            d.get("instance", []),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def format_number(v: float) -> str:
    return f"{float(v):g}"


def batch_fn(model):
    """Turn a predictor or any callable into ``f(X_2d) -> 1-D float array``.

    Only the prediction interface is used; the model is otherwise opaque.
    """
    fn = getattr(model, "predict", model)
    if not callable(fn):
        raise ExplainError("model must be callable or expose predict()")

    def f(X):
        out = np.asarray(fn(np.asarray(X, dtype=np.float64)), dtype=np.float64).reshape(-1)
        if len(out) != len(X):
            raise ExplainError(f"model returned {len(out)} outputs for {len(X)} rows")
        return out

    return f


def background_matrix(background, n_features=None):
    X = getattr(background, "features", background)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[0] == 0:
        raise ExplainError("empty background")
    if n_features is not None and X.shape[1] != n_features:
        raise ExplainError(f"background has {X.shape[1]} features, instance has {n_features}")
    return X


def subsample_rows(X, size, seed):
    if size is None or len(X) <= size:
        return X
    idx = np.sort(np.random.default_rng(seed).choice(len(X), size=size, replace=False))
    return X[idx]


def feature_labels(names, n):
    if names is None:
        return [f"x{i}" for i in range(n)]
    names = list(names)
    if len(names) != n:
        raise ExplainError(f"{len(names)} feature names for {n} features")
    return names
