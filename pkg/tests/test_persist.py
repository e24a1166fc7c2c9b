import json

import numpy as np
import pytest

from rulxai.data import FEATURE_NAMES, fit_scaler
from rulxai.models import (
    ElasticNetParams,
    ForestParams,
    GbmParams,
    MlpParams,
    ModelError,
    ModelFileError,
    SvrParams,
    TrainedModel,
    fit_family,
)

PARAMS = {
    "forest": ForestParams(n_estimators=3),
    "elastic_net": ElasticNetParams(),
    "gbm": GbmParams(n_stages=5),
    "svr": SvrParams(epochs=5),
    "mlp": MlpParams(hidden_width=5, max_iter=5),
}


@pytest.fixture(scope="module")
def raw(small_fleet):
    return small_fleet.features, small_fleet.rul


@pytest.mark.parametrize("family", sorted(PARAMS))
def test_round_trip_every_family(family, raw, tmp_path):
    X, y = raw
    mask = np.zeros(24, dtype=bool)
    mask[[5, 6, 9, 14]] = True
    scaler = fit_scaler(X)
    model = fit_family(family, scaler.transform(X)[:, mask], y, PARAMS[family])
    tm = TrainedModel(model, mask, scaler)
    path = tmp_path / "m.json"
    tm.save(path)
    back = TrainedModel.load(path)
    assert back.family == family
    assert back.kept_names == tuple(FEATURE_NAMES[j] for j in (5, 6, 9, 14))
    assert np.array_equal(back.predict_raw(X), tm.predict_raw(X))
    assert back.dumps() == tm.dumps()


def test_version_and_format_rejected(raw):
    X, y = raw
    tm = TrainedModel(fit_family("elastic_net", X, y), np.ones(24, bool))
    d = json.loads(tm.dumps())
    d["version"] = 99
    with pytest.raises(ModelFileError, match="version 1"):
        TrainedModel.from_dict(d)
    d["version"], d["format"] = 1, "other"
    with pytest.raises(ModelFileError):
        TrainedModel.from_dict(d)


def test_mask_arity_checked(raw):
    X, y = raw
    model = fit_family("elastic_net", X[:, :3], y)
    with pytest.raises(ModelError):
        TrainedModel(model, np.ones(24, bool))


def test_bad_json(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    with pytest.raises(ModelFileError):
        TrainedModel.load(p)
