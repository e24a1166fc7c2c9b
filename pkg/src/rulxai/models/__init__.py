"""The five regression families behind one ``Predictor`` interface."""
from .base import ModelError, Predictor
from .ensemble import (
    Forest,
    ForestParams,
    GbmParams,
    GradientBoosting,
    feature_importance,
    fit_forest,
    fit_gbm,
)
from .linear import (
    ElasticNet,
    ElasticNetParams,
    LinearSVR,
    SvrParams,
    fit_elastic_net,
    fit_svr,
)
from .mlp import MLP, MlpParams, fit_mlp
from .persist import ModelFileError, TrainedModel
from .tree import RegressionTree, TreeParams, fit_tree

# family tag -> (params class, fit function)
FAMILIES = {
    "forest": (ForestParams, fit_forest),
    "elastic_net": (ElasticNetParams, fit_elastic_net),
    "gbm": (GbmParams, fit_gbm),
    "svr": (SvrParams, fit_svr),
    "mlp": (MlpParams, fit_mlp),
}

ALIASES = {
    "rf": "forest",
    "random_forest": "forest",
    "elasticnet": "elastic_net",
    "elasticnetglm": "elastic_net",
    "gradient_boosting": "gbm",
    "svm": "svr",
    "nn": "mlp",
}


def canonical_family(name: str) -> str:
    key = name.strip().lower().replace("-", "_")
    key = ALIASES.get(key, key)
    if key not in FAMILIES:
        raise ValueError(f"unknown model family {name!r}; choose from {sorted(FAMILIES)}")
    return key


def make_params(family: str, **overrides):
    cls, _ = FAMILIES[canonical_family(family)]
    return cls(**overrides)


def fit_family(family: str, X, y, params=None):
    cls, fit = FAMILIES[canonical_family(family)]
    return fit(X, y, params if params is not None else cls())


def predict(model: Predictor, x):
    return model.predict(x)


__all__ = [
    "FAMILIES", "ElasticNet", "ElasticNetParams", "Forest", "ForestParams", "GbmParams",
    "GradientBoosting", "LinearSVR", "MLP", "MlpParams", "ModelError", "ModelFileError",
    "Predictor", "RegressionTree", "SvrParams", "TrainedModel", "TreeParams",
    "canonical_family", "feature_importance", "fit_elastic_net", "fit_family", "fit_forest",
    "fit_gbm", "fit_mlp", "fit_svr", "fit_tree", "make_params", "predict",
]
