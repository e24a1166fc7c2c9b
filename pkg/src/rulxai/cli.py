"""Command-line entry point: ``rulxai <subcommand>``.

Exit codes: 0 success, 2 usage/config error, 3 data error, 4 model file
error, 5 training/pipeline failure, 6 explanation failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import data as D
from .config import ConfigError, RunConfig, load_config
from .explain import ExplainError, exact_shapley, kernel_shap, lime_explain, render_explanation
from .explain.shap import MAX_EXACT_FEATURES
from .models import ForestParams, ModelError, ModelFileError, TrainedModel, canonical_family
from .pipeline import (
    FamilyConfig,
    GridSpec,
    StageError,
    grid_search,
    grid_table_csv,
    mae,
    mse,
    rank_and_select,
    run_experiment,
    stage_seed,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_MODEL, EXIT_TRAIN, EXIT_EXPLAIN = 0, 2, 3, 4, 5, 6
METHODS = {"lime": "lime", "shap": "kernel_shap", "exact": "exact_shapley"}

log = logging.getLogger("rulxai")


class CliError(Exception):
    def __init__(self, code, stage, message):
        self.code = code
        super().__init__(f"[{stage}] {message}")


# --------------------------------------------------------------------- helpers


def _config(args) -> RunConfig:
    try:
        cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    except ConfigError as exc:
        raise CliError(EXIT_USAGE, "config", str(exc)) from None
    if getattr(args, "data", None):
        cfg.data = args.data
    if getattr(args, "out", None):
        cfg.out = args.out
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    models = getattr(args, "model", None)
    if models:
        try:
            wanted = [canonical_family(m) for m in models]
        except ValueError as exc:
            raise CliError(EXIT_USAGE, "config", str(exc)) from None
        cfg.families = {m: cfg.families.get(m, FamilyConfig()) for m in wanted}
    return cfg


def _load_dataset(path, rul_cap=None) -> D.Dataset:
    p = Path(path)
    if not p.is_file():
        raise CliError(EXIT_DATA, "data", f"dataset not found: {path}")
    try:
        ds = D.load_cmapss(p)
        return D.label_rul(ds, rul_cap)
    except (D.DataError, ValueError, UnicodeDecodeError) as exc:
        raise CliError(EXIT_DATA, "data", f"{path}: {exc}") from None


def _dataset_for(cfg: RunConfig) -> D.Dataset:
    if cfg.data:
        return _load_dataset(cfg.data, cfg.rul_cap)
    s = cfg.synthetic
    ds = D.simulate_degradation(s.n_units, seed=s.seed, noise_scale=s.noise_scale)
    return D.label_rul(ds, cfg.rul_cap)


def _split(cfg: RunConfig, ds):
    seed = stage_seed(cfg.seed, "split")
    try:
        if cfg.split == "units":
            return D.split_units(ds, cfg.test_fraction, seed)
        return D.split_rows(ds, cfg.test_fraction, seed)
    except (D.DataError, ValueError) as exc:
        raise CliError(EXIT_DATA, "split", str(exc)) from None


def _write(path, text):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(EXIT_DATA, "output", f"cannot write {path}: {exc.strerror}") from None


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load_model(path) -> TrainedModel:
    if not Path(path).is_file():
        raise CliError(EXIT_MODEL, "model", f"model file not found: {path}")
    try:
        return TrainedModel.load(path)
    except (ModelFileError, KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_MODEL, "model", f"{path}: {exc}") from None


# ---------------------------------------------------------------- subcommands


def cmd_simulate(args):
    if args.units < 1:
        raise CliError(EXIT_USAGE, "simulate", "--units must be >= 1")
    ds = D.simulate_degradation(args.units, seed=args.seed, noise_scale=args.noise)
    text = D.to_csv_text(ds) if args.csv else D.to_cmapss_text(ds)
    _write(args.output, text)
    print(f"wrote {len(ds)} records for {args.units} units to {args.output}")
    return EXIT_OK


def cmd_train(args):
    cfg = _config(args)
    ds = _dataset_for(cfg)
    train, test = _split(cfg, ds)
    try:
        report, models = run_experiment(train, test, cfg.experiment_config())
    except StageError as exc:
        raise CliError(EXIT_TRAIN, exc.stage, str(exc).split("] ", 1)[-1]) from None
    out = Path(cfg.out)
    for fam, tm in models.items():
        _write(out / "models" / f"{fam}.json", tm.dumps())
    first = next(iter(models.values()))
    if first.scaler is not None:
        _write(out / "scaler.json", _dump(first.scaler.to_dict()))
    _write(out / "feature_mask.json", _dump({
        "feature_names": list(first.feature_names),
        "mask": first.feature_mask.tolist(),
        "ranking": report.feature_ranking,
    }))
    for fam, entry in report.models.items():
        if entry["grid"]:
            _write(out / f"grid_{fam}.csv", grid_table_csv(entry["grid"]["table"]))
    _write(out / "report.json", report.to_json(include_timings=False))
    _write(out / "timings.json", _dump(report.timings))
    _write(out / "config.json", _dump(cfg.to_dict()))
    print(report.table(), end="")
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"artifacts written to {out}")
    return EXIT_OK


def cmd_evaluate(args):
    tm = _load_model(args.model_file)
    ds = _load_dataset(args.data, args.rul_cap)
    try:
        pred = tm.predict_raw(ds.features)
    except ModelError as exc:
        raise CliError(EXIT_MODEL, "evaluate", str(exc)) from None
    result = {
        "family": tm.family,
        "data": str(args.data),
        "n": len(ds),
        "mse": mse(ds.rul, pred),
        "mae": mae(ds.rul, pred),
    }
    print(f"{tm.family}: MSE {result['mse']:.2f}  MAE {result['mae']:.2f}  (n={len(ds)})")
    if args.out:
        _write(args.out, _dump(result))
    return EXIT_OK


def _prepared_train(cfg):
    ds = _dataset_for(cfg)
    train, _ = _split(cfg, ds)
    if cfg.scale:
        train = train.with_features(D.fit_scaler(train).transform(train.features))
    return train


def cmd_rank_features(args):
    cfg = _config(args)
    train = _prepared_train(cfg)
    params = ForestParams(**{**cfg.shallow_forest, "seed": stage_seed(cfg.seed, "selection")})
    try:
        sel = rank_and_select(train, params, cfg.selection)
    except ValueError as exc:
        raise CliError(EXIT_TRAIN, "feature_selection", str(exc)) from None
    for name, imp in sel.ranking:
        flag = "keep" if name in sel.kept else "drop"
        print(f"{name:<14}{imp:10.4f}  {flag}")
    if args.out:
        _write(Path(args.out) / "feature_ranking.json", _dump(sel.to_dict()))
    return EXIT_OK


def cmd_grid_search(args):
    cfg = _config(args)
    if len(cfg.families) != 1:
        raise CliError(EXIT_USAGE, "grid_search", "select exactly one family with --model")
    fam, fc = next(iter(cfg.families.items()))
    if not fc.grid:
        raise CliError(EXIT_USAGE, "grid_search", f"no grid configured for {fam}")
    train = _prepared_train(cfg)
    spec = GridSpec(fam, fc.grid, cfg.cv_folds, stage_seed(cfg.seed, "grid"), dict(fc.params))
    try:
        result = grid_search(train, spec)
    except (StageError, ValueError) as exc:
        raise CliError(EXIT_TRAIN, "grid_search", str(exc)) from None
    for row in result.table:
        print(f"{json.dumps(row['params'], sort_keys=True):<40}{row['mean_cv_mse']:12.3f}")
    print(f"best: {json.dumps(result.best_params, sort_keys=True)}")
    if args.out:
        _write(Path(args.out) / f"grid_{fam}.json", _dump(result.to_dict()))
        _write(Path(args.out) / f"grid_{fam}.csv", result.table_csv())
    return EXIT_OK


def explain_row(tm: TrainedModel, ds: D.Dataset, row: int, method: str, settings, seed: int = 0):
    """Explain one dataset row over the model's kept features, in original units."""
    if not 0 <= row < len(ds):
        raise CliError(EXIT_EXPLAIN, "explain", f"row {row} out of range (0..{len(ds) - 1})")
    mask = tm.feature_mask
    kept = np.flatnonzero(mask)
    x_full = ds.features[row]

    def f(Xk):
        X = np.tile(x_full, (len(Xk), 1))
        X[:, kept] = Xk
        return tm.predict_raw(X)

    x = x_full[kept]
    bg = ds.features[:, kept]
    names = list(tm.kept_names)
    if method == "lime":
        return lime_explain(
            f, x, bg, n_samples=settings.n_samples,
            k_features=min(settings.k_features, len(kept)), seed=seed, feature_names=names,
        )
    if method == "shap":
        return kernel_shap(
            f, x, bg, n_coalitions=max(settings.n_coalitions, len(kept) + 2), seed=seed,
            background_size=settings.background_size, feature_names=names,
        )
    if len(kept) > MAX_EXACT_FEATURES:
        raise CliError(
            EXIT_EXPLAIN, "explain",
            f"exact Shapley refused: model uses {len(kept)} features, limit is {MAX_EXACT_FEATURES}",
        )
    return exact_shapley(f, x, bg, seed=seed, background_size=settings.background_size, feature_names=names)


def cmd_explain(args):
    cfg = _config(args)
    settings = cfg.explain
    for k in ("method", "style", "n_samples", "k_features", "background_size", "n_coalitions"):
        v = getattr(args, k)
        if v is not None:
            setattr(settings, k, v)
    model_file = args.model_file
    if model_file is None:
        if not (args.run and args.model and len(args.model) == 1):
            raise CliError(EXIT_USAGE, "explain", "give --model-file, or --run DIR with one --model FAMILY")
        model_file = Path(args.run) / "models" / f"{canonical_family(args.model[0])}.json"
    tm = _load_model(model_file)
    if not args.data:
        raise CliError(EXIT_USAGE, "explain", "--data is required")
    ds = _load_dataset(args.data, cfg.rul_cap)
    try:
        e = explain_row(tm, ds, args.row, settings.method, settings, seed=cfg.seed)
    except (ExplainError, ModelError) as exc:
        raise CliError(EXIT_EXPLAIN, "explain", str(exc)) from None
    e.diagnostics["row"] = args.row
    e.diagnostics["model_family"] = tm.family
    if ds.rul is not None:
        e.diagnostics["actual_rul"] = float(ds.rul[args.row])
    out = Path(args.output)
    _write(out.with_suffix(".json"), e.to_json())
    doc = render_explanation(e, settings.style)
    _write(out.with_suffix(".txt" if settings.style == "text" else ".svg"), doc)
    print(f"predicted value: {e.predicted_value:.4f}")
    print(f"base value: {e.base_value:.4f}")
    if ds.rul is not None:
        print(f"actual RUL: {ds.rul[args.row]:g}")
    return EXIT_OK


# ---------------------------------------------------------------------- parser


def build_parser():
    p = argparse.ArgumentParser(prog="rulxai", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--data", metavar="PATH")
        sp.add_argument("--out", metavar="DIR")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--model", metavar="FAMILY", action="append")

    sp = sub.add_parser("simulate", help="write synthetic C-MAPSS-format telemetry")
    sp.add_argument("--units", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--noise", type=float, default=1.0)
    sp.add_argument("--csv", action="store_true", help="CSV with header instead of the text format")
    sp.add_argument("--output", "-o", required=True, metavar="PATH")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("train", help="fit preprocessing and models, write artifacts and report")
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="score a saved model on a labeled dataset")
    sp.add_argument("--model-file", required=True, metavar="PATH")
    sp.add_argument("--data", required=True, metavar="PATH")
    sp.add_argument("--rul-cap", type=float)
    sp.add_argument("--out", metavar="PATH")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("grid-search", help="cross-validated grid search for one family")
    common(sp)
    sp.set_defaults(func=cmd_grid_search)

    sp = sub.add_parser("rank-features", help="shallow-forest feature ranking and selection")
    common(sp)
    sp.set_defaults(func=cmd_rank_features)

    sp = sub.add_parser("explain", help="explain one row with LIME, Kernel SHAP or exact Shapley")
    common(sp)
    sp.add_argument("--model-file", metavar="PATH")
    sp.add_argument("--run", metavar="DIR", help="train output directory (with --model)")
    sp.add_argument("--row", type=int, required=True)
    sp.add_argument("--method", choices=sorted(METHODS))
    sp.add_argument("--style", choices=["bar", "force", "text"])
    sp.add_argument("--n-samples", type=int)
    sp.add_argument("--k-features", type=int)
    sp.add_argument("--background-size", type=int)
    sp.add_argument("--n-coalitions", type=int)
    sp.add_argument("--output", "-o", required=True, metavar="PATH",
                    help="output path stem; .json and .svg/.txt are written")
    sp.set_defaults(func=cmd_explain)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
