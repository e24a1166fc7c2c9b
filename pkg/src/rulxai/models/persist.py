"""Trained model bundles and their versioned JSON file format."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..data import FEATURE_NAMES, Scaler
from .base import ModelError, Predictor
from .ensemble import Forest, GradientBoosting
from .linear import ElasticNet, LinearSVR
from .mlp import MLP

FORMAT = "rulxai-model"
VERSION = 1

PREDICTOR_CLASSES = {
    "forest": Forest,
    "elastic_net": ElasticNet,
    "gbm": GradientBoosting,
    "svr": LinearSVR,
    "mlp": MLP,
}


class ModelFileError(ModelError):
    pass


@dataclass(eq=False)
class TrainedModel:
    """A fitted predictor plus the preprocessing it was trained behind.

    ``predict_raw`` takes rows in the original 24-feature units: the scaler
    (if any) is applied first, then ``feature_mask`` selects model inputs.
    """

    predictor: Predictor
    feature_mask: np.ndarray
    scaler: Scaler | None = None
    feature_names: tuple = FEATURE_NAMES

    def __post_init__(self):
        self.feature_mask = np.asarray(self.feature_mask, dtype=bool)
        if len(self.feature_mask) != len(self.feature_names):
            raise ModelError("feature mask length differs from feature names")
        if int(self.feature_mask.sum()) != self.predictor.n_features:
            raise ModelError(
                f"mask keeps {int(self.feature_mask.sum())} features but the "
                f"{self.family} model takes {self.predictor.n_features}"
            )

    @property
    def family(self):
        return self.predictor.family

    @property
    def kept_names(self):
        return tuple(n for n, k in zip(self.feature_names, self.feature_mask) if k)

    def transform(self, X_raw):
        X = np.asarray(X_raw, dtype=np.float64)
        if X.shape[-1] != len(self.feature_names):
            raise ModelError(f"expected {len(self.feature_names)} raw features, got {X.shape[-1]}")
        if self.scaler is not None:
            X = self.scaler.transform(X)
        return X[..., self.feature_mask]

    def predict_raw(self, X_raw):
        return self.predictor.predict(self.transform(X_raw))

    def to_dict(self):
        return {
            "format": FORMAT,
            "version": VERSION,
            "family": self.family,
            "feature_names": list(self.feature_names),
            "feature_mask": self.feature_mask.tolist(),
            "scaler": None if self.scaler is None else self.scaler.to_dict(),
            "model": self.predictor.state(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != FORMAT:
            raise ModelFileError(f"not a {FORMAT} file (format={d.get('format')!r})")
        if d.get("version") != VERSION:
            raise ModelFileError(
                f"unsupported model file version {d.get('version')!r}; this build reads version {VERSION}"
            )
        family = d.get("family")
        if family not in PREDICTOR_CLASSES:
            raise ModelFileError(f"unknown model family {family!r}")
        predictor = PREDICTOR_CLASSES[family].from_state(d["model"])
        scaler = None if d["scaler"] is None else Scaler.from_dict(d["scaler"])
        return cls(predictor, d["feature_mask"], scaler, tuple(d["feature_names"]))

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ModelFileError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_dict(d)
