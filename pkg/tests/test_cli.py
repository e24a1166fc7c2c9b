import hashlib
import json

import numpy as np
import pytest
import yaml

from rulxai.cli import main
from rulxai.data import load_cmapss, simulate_degradation, to_cmapss_text
from rulxai.models import TrainedModel, fit_family

CONFIG = {
    "synthetic": {"n_units": 10, "seed": 2},
    "seed": 5,
    "families": {
        "forest": {"params": {"n_estimators": 3}},
        "elastic_net": {},
        "gbm": {"params": {"n_stages": 10}},
        "svr": {"params": {"epochs": 5}, "grid": {"c": [0.1, 1.0]}},
        "mlp": {"params": {"max_iter": 5, "hidden_width": 8}},
    },
}


def digests(out):
    files = sorted(p for p in out.rglob("*") if p.is_file() and p.name not in ("timings.json", "config.json"))
    return {p.relative_to(out).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest() for p in files}


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "config.yaml"
    cfg.write_text(yaml.safe_dump(CONFIG))
    data = root / "fleet.txt"
    data.write_text(to_cmapss_text(simulate_degradation(10, seed=2)))
    out = root / "run"
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
    return root, cfg, data, out


def test_train_writes_artifacts(run_dir):
    _, _, _, out = run_dir
    for fam in ("forest", "elastic_net", "gbm", "svr", "mlp"):
        assert (out / "models" / f"{fam}.json").is_file()
    for name in ("scaler.json", "feature_mask.json", "report.json", "timings.json", "config.json", "grid_svr.csv"):
        assert (out / name).is_file()
    report = json.loads((out / "report.json").read_text())
    assert "timings" not in report and set(report["models"]) == {"forest", "elastic_net", "gbm", "svr", "mlp"}


def test_train_deterministic_across_threads(run_dir, monkeypatch):
    root, cfg, _, out = run_dir
    monkeypatch.setenv("RUL_EXPLAIN_THREADS", "4")
    other = root / "run_threads"
    assert main(["train", "--config", str(cfg), "--out", str(other)]) == 0
    assert digests(other) == digests(out)


def test_evaluate(run_dir, tmp_path, capsys):
    _, _, data, out = run_dir
    res = tmp_path / "eval.json"
    assert main(["evaluate", "--model-file", str(out / "models" / "gbm.json"), "--data", str(data),
                 "--out", str(res)]) == 0
    assert json.loads(res.read_text())["n"] == len(load_cmapss(data))


def test_explain_methods_agree_on_prediction(run_dir, tmp_path, capsys):
    _, _, data, out = run_dir
    preds = {}
    for method in ("lime", "shap"):
        stem = tmp_path / method
        code = main(["explain", "--run", str(out), "--model", "gbm", "--data", str(data), "--row", "3",
                     "--method", method, "--n-samples", "300", "-o", str(stem)])
        assert code == 0
        e = json.loads(stem.with_suffix(".json").read_text())
        preds[method] = e["predicted_value"]
        assert stem.with_suffix(".svg").read_text().startswith("<svg")
    assert preds["lime"] == preds["shap"]
    shap = json.loads((tmp_path / "shap.json").read_text())
    assert abs(shap["base_value"] + sum(c["value"] for c in shap["contributions"]) - shap["predicted_value"]) <= 1e-6


def test_exit_codes(run_dir, tmp_path):
    root, cfg, data, out = run_dir
    gbm = str(out / "models" / "gbm.json")
    assert main(["evaluate", "--model-file", gbm, "--data", str(tmp_path / "missing.txt")]) == 3
    assert main(["evaluate", "--model-file", str(tmp_path / "none.json"), "--data", str(data)]) == 4
    d = json.loads((out / "models" / "gbm.json").read_text())
    d["version"] = 2
    bad = tmp_path / "v2.json"
    bad.write_text(json.dumps(d))
    assert main(["evaluate", "--model-file", str(bad), "--data", str(data)]) == 4
    assert main(["explain", "--model-file", gbm, "--data", str(data), "--row", "99999", "-o",
                 str(tmp_path / "x")]) == 6
    broken = tmp_path / "bad.yaml"
    broken.write_text("families: {rf: {params: {trees: 3}}}\n")
    assert main(["train", "--config", str(broken), "--out", str(tmp_path / "r")]) == 2
    garbage = tmp_path / "garbage.txt"
    garbage.write_text("1 2 3\n")
    assert main(["evaluate", "--model-file", gbm, "--data", str(garbage)]) == 3
    with pytest.raises(SystemExit):
        main(["nonsense"])


def test_simulate_reingest(tmp_path, capsys):
    path = tmp_path / "sim.txt"
    assert main(["simulate", "--units", "4", "--seed", "1", "-o", str(path)]) == 0
    assert load_cmapss(path).equals(simulate_degradation(4, seed=1).with_rul(None))
    csv = tmp_path / "sim.csv"
    assert main(["simulate", "--units", "2", "--csv", "-o", str(csv)]) == 0
    assert csv.read_text().startswith("unit,cycle,op-setting-1")


def test_missing_dataset_names_path(tmp_path, capsys):
    missing = tmp_path / "nowhere.txt"
    assert main(["train", "--data", str(missing), "--out", str(tmp_path / "r")]) == 3
    assert str(missing) in capsys.readouterr().err


def test_simulate_bytes_stable_and_trainable(tmp_path, capsys):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    assert main(["simulate", "--units", "3", "--seed", "8", "-o", str(a)]) == 0
    assert main(["simulate", "--units", "3", "--seed", "8", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert main(["train", "--data", str(a), "--model", "elastic_net", "--out", str(tmp_path / "r")]) == 0


def test_exact_allowed_on_small_model(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"synthetic": {"n_units": 6}, "selection": {"kind": "top_k", "value": 6},
                                   "families": {"gbm": {"params": {"n_stages": 5}}}}))
    out = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
    data = tmp_path / "d.txt"
    data.write_text(to_cmapss_text(simulate_degradation(2, seed=1)))
    stem = tmp_path / "exact"
    assert main(["explain", "--run", str(out), "--model", "gbm", "--data", str(data), "--row", "0",
                 "--method", "exact", "--style", "text", "-o", str(stem)]) == 0
    assert json.loads(stem.with_suffix(".json").read_text())["method"] == "exact_shapley"
    assert stem.with_suffix(".txt").read_text().startswith("method: exact_shapley")


def test_exact_refused_on_full_model(run_dir, tmp_path, capsys):
    _, _, data, _ = run_dir
    ds = load_cmapss(data)
    tm = TrainedModel(fit_family("elastic_net", ds.features, np.arange(len(ds), dtype=float)),
                      np.ones(24, dtype=bool))
    path = tmp_path / "full.json"
    tm.save(path)
    code = main(["explain", "--model-file", str(path), "--data", str(data), "--row", "0",
                 "--method", "exact", "-o", str(tmp_path / "e")])
    assert code == 6
    assert "24 features" in capsys.readouterr().err


def test_rank_features_and_grid_search(run_dir, tmp_path, capsys):
    _, cfg, _, _ = run_dir
    assert main(["rank-features", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "feature_ranking.json").is_file()
    assert main(["grid-search", "--config", str(cfg), "--model", "svr", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "grid_svr.csv").is_file()
    assert main(["grid-search", "--config", str(cfg), "--model", "gbm"]) == 2
