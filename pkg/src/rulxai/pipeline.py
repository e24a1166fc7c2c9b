"""Feature selection, grid search, metrics and end-to-end experiment runs."""
from __future__ import annotations

import dataclasses
import itertools
import json
import logging
import time
import zlib
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, constant_features, fit_scaler
from .models import (
    FAMILIES,
    ForestParams,
    TrainedModel,
    canonical_family,
    feature_importance,
    fit_family,
    fit_forest,
)
from .parallel import ordered_map

log = logging.getLogger(__name__)

METHOD_LABELS = {
    "forest": "RF",
    "elastic_net": "ElasticNetGLM",
    "gbm": "Gradient Boosting",
    "svr": "SVMs",
    "mlp": "MLP",
}


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, message):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


# --------------------------------------------------------------------- metrics


def _pair(y_true, y_pred):
    a = np.asarray(y_true, dtype=np.float64).reshape(-1)
    b = np.asarray(y_pred, dtype=np.float64).reshape(-1)
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} targets vs {len(b)} predictions")
    if len(a) == 0:
        raise ValueError("metrics need at least one sample")
    return a, b


def mse(y_true, y_pred) -> float:
    a, b = _pair(y_true, y_pred)
    return float(np.mean((a - b) ** 2))


def mae(y_true, y_pred) -> float:
    a, b = _pair(y_true, y_pred)
    return float(np.mean(np.abs(a - b)))


def stage_seed(seed: int, stage: str) -> int:
    """Per-stage seed derived from the top-level seed and the stage name."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(stage.encode())])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


# ----------------------------------------------------------- feature selection


@dataclass(frozen=True)
class SelectionRule:
    kind: str = "threshold"  # "threshold" or "top_k"
    value: float = 0.005

    def __post_init__(self):
        if self.kind not in ("threshold", "top_k"):
            raise ValueError(f"unknown selection rule {self.kind!r}")
        if self.kind == "top_k" and (int(self.value) != self.value or self.value < 1):
            raise ValueError("top_k needs a positive integer")
        if self.kind == "threshold" and self.value < 0:
            raise ValueError("threshold must be >= 0")


@dataclass
class FeatureSelection:
    ranking: list  # (name, importance) sorted by importance, descending
    mask: np.ndarray
    rule: SelectionRule
    names: tuple
    constant: np.ndarray

    @property
    def kept(self):
        return [n for n, k in zip(self.names, self.mask) if k]

    def to_dict(self):
        return {
            "ranking": [[n, float(v)] for n, v in self.ranking],
            "mask": self.mask.tolist(),
            "rule": dataclasses.asdict(self.rule),
            "kept": self.kept,
        }


def apply_rule(importances, rule: SelectionRule, constant) -> np.ndarray:
    imp = np.asarray(importances, dtype=np.float64)
    eligible = ~np.asarray(constant, dtype=bool)
    if rule.kind == "top_k":
        order = sorted(np.flatnonzero(eligible), key=lambda j: (-imp[j], j))
        mask = np.zeros(len(imp), dtype=bool)
        mask[order[: int(rule.value)]] = True
        return mask
    return eligible & (imp > 0) & (imp >= rule.value)


def rank_and_select(
    train: Dataset,
    shallow_params: ForestParams = ForestParams(),
    rule: SelectionRule = SelectionRule(),
) -> FeatureSelection:
    """Rank features with a shallow forest and keep those passing ``rule``.

    Constant columns are always dropped.
    """
    X, y = train.features, train.targets()
    forest = fit_forest(X, y, shallow_params)
    imp = feature_importance(forest)
    const = constant_features(X)
    mask = apply_rule(imp, rule, const)
    if not mask.any():
        raise ValueError(f"selection rule {rule} drops every feature")
    names = train.feature_names
    order = sorted(range(len(imp)), key=lambda j: (-imp[j], j))
    return FeatureSelection([(names[j], float(imp[j])) for j in order], mask, rule, tuple(names), const)


# ----------------------------------------------------------------- grid search


@dataclass
class GridSpec:
    family: str
    grid: dict
    cv_folds: int = 3
    seed: int = 0
    fixed: dict = field(default_factory=dict)

    def combinations(self):
        keys = list(self.grid)
        for values in itertools.product(*(self.grid[k] for k in keys)):
            yield dict(zip(keys, values))


@dataclass
class GridResult:
    family: str
    table: list  # one dict per combination, in enumeration order
    best_params: dict
    best_score: float
    model: object

    def to_dict(self):
        return {
            "family": self.family,
            "best_params": self.best_params,
            "best_score": self.best_score,
            "table": self.table,
        }

    def table_csv(self) -> str:
        return grid_table_csv(self.table)


def grid_table_csv(table) -> str:
    keys = list(table[0]["params"]) if table else []
    lines = [",".join(keys + ["mean_cv_mse", "failed"])]
    for row in table:
        vals = [str(row["params"][k]) for k in keys]
        lines.append(",".join(vals + [repr(row["mean_cv_mse"]), str(row["failed"]).lower()]))
    return "\n".join(lines) + "\n"


def fold_assignment(n: int, folds: int, seed: int) -> np.ndarray:
    """Fold id per row from one seeded permutation."""
    fold = np.empty(n, dtype=np.int64)
    for k, part in enumerate(np.array_split(np.random.default_rng(seed).permutation(n), folds)):
        fold[part] = k
    return fold


def _params_for(family, combo, fixed, seed):
    cls, _ = FAMILIES[family]
    kw = dict(fixed)
    kw.update(combo)
    if "seed" in {f.name for f in dataclasses.fields(cls)} and "seed" not in kw:
        kw["seed"] = seed
    return cls(**kw)


def grid_search(train: Dataset, spec: GridSpec, threads=None) -> GridResult:
    """Exhaustive search scored by mean validation MSE over seeded folds.

    A combination that raises while training is scored ``inf`` and the search
    goes on. The winner (first minimum in enumeration order) is refit on all
    of ``train``.
    """
    family = canonical_family(spec.family)
    if spec.cv_folds < 2:
        raise ValueError("cv_folds must be >= 2")
    X, y = train.features, train.targets()
    if len(y) < spec.cv_folds:
        raise ValueError(f"{len(y)} rows cannot fill {spec.cv_folds} folds")
    fold = fold_assignment(len(y), spec.cv_folds, spec.seed)
    model_seed = stage_seed(spec.seed, f"grid:{family}")
    combos = list(spec.combinations())
    if not combos:
        raise ValueError("empty grid")

    def score(combo):
        try:
            params = _params_for(family, combo, spec.fixed, model_seed)
            errs = []
            for k in range(spec.cv_folds):
                tr, va = fold != k, fold == k
                model = fit_family(family, X[tr], y[tr], params)
                errs.append(mse(y[va], model.predict(X[va])))
            return {"params": combo, "fold_mse": errs, "mean_cv_mse": float(np.mean(errs)),
                    "failed": False, "error": None}
        except Exception as exc:  # a failing combination must not stop the search
            log.warning("grid combination %s failed: %s", combo, exc)
            return {"params": combo, "fold_mse": [], "mean_cv_mse": float("inf"),
                    "failed": True, "error": f"{type(exc).__name__}: {exc}"}

    table = ordered_map(score, combos, threads)
    scores = [row["mean_cv_mse"] for row in table]
    if all(row["failed"] for row in table):
        raise StageError("grid_search", f"every {family} combination failed")
    best = int(np.argmin(scores))
    params = _params_for(family, combos[best], spec.fixed, model_seed)
    model = fit_family(family, X, y, params)
    return GridResult(family, table, dict(combos[best]), scores[best], model)


# ------------------------------------------------------------------ experiment


@dataclass
class FamilyConfig:
    params: dict = field(default_factory=dict)  # fixed hyperparameters
    grid: dict | None = None  # candidate lists; enables grid search


def default_families():
    return {
        "forest": FamilyConfig(),
        "elastic_net": FamilyConfig(),
        "gbm": FamilyConfig(),
        "svr": FamilyConfig(grid={"c": [0.1, 1.0, 10.0]}),
        "mlp": FamilyConfig(),
    }


@dataclass
class ExperimentConfig:
    families: dict = field(default_factory=default_families)
    scale: bool = True
    selection: SelectionRule = SelectionRule()
    shallow_forest: dict = field(default_factory=dict)
    cv_folds: int = 3
    seed: int = 0
    threads: int | None = None


@dataclass
class ExperimentReport:
    models: dict
    feature_ranking: list
    selected_features: list
    seed: int
    seeds: dict
    provenance: dict
    warnings: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def to_dict(self, include_timings=True):
        d = {
            "models": self.models,
            "feature_ranking": self.feature_ranking,
            "selected_features": self.selected_features,
            "seed": self.seed,
            "seeds": self.seeds,
            "provenance": self.provenance,
            "warnings": self.warnings,
        }
        if include_timings:
            d["timings"] = self.timings
        return d

    def to_json(self, include_timings=True) -> str:
        return json.dumps(self.to_dict(include_timings), indent=2, sort_keys=True) + "\n"

    def table(self) -> str:
        lines = [f"{'Method':<20}{'MSE':>12}{'MAE':>10}"]
        for fam, entry in self.models.items():
            label = METHOD_LABELS.get(fam, fam)
            lines.append(f"{label:<20}{entry['mse']:>12.2f}{entry['mae']:>10.2f}")
        return "\n".join(lines) + "\n"


def _row_keys(ds: Dataset):
    return {
        (int(u), int(c), ds.features[i].tobytes())
        for i, (u, c) in enumerate(zip(ds.unit_ids, ds.cycles))
    }


def run_experiment(train: Dataset, test: Dataset, config: ExperimentConfig = ExperimentConfig()):
    """Fit preprocessing on ``train``, train every configured family, score on ``test``.

    Returns ``(report, models)`` where ``models`` maps family tag to
    :class:`TrainedModel`.
    """
    if not train.labeled or not test.labeled:
        raise StageError("data", "train and test sets must be labeled")
    if train.feature_names != test.feature_names:
        raise StageError("data", "train and test schemas differ")
    warnings = []
    overlap = len(_row_keys(train) & _row_keys(test))
    if overlap:
        msg = f"leakage: {overlap} of {len(test)} test rows also appear in the training set"
        log.warning(msg)
        warnings.append(msg)

    timings = {}
    seeds = {
        "selection": stage_seed(config.seed, "selection"),
        "grid": stage_seed(config.seed, "grid"),
    }

    t0 = time.perf_counter()
    try:
        scaler = fit_scaler(train) if config.scale else None
    except Exception as exc:
        raise StageError("scaling", str(exc)) from exc
    tr = train if scaler is None else train.with_features(scaler.transform(train.features))
    te = test if scaler is None else test.with_features(scaler.transform(test.features))
    timings["scaling"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    try:
        shallow = ForestParams(**{**config.shallow_forest, "seed": seeds["selection"]})
        selection = rank_and_select(tr, shallow, config.selection)
    except Exception as exc:
        raise StageError("feature_selection", str(exc)) from exc
    timings["feature_selection"] = time.perf_counter() - t0
    mask = selection.mask
    kept = selection.kept
    tr_m = Dataset(tr.unit_ids, tr.cycles, tr.features[:, mask], tr.rul, kept, tr.provenance)
    te_X, te_y = te.features[:, mask], te.targets()

    entries, trained = {}, {}
    for name, fc in config.families.items():
        family = canonical_family(name)
        if isinstance(fc, dict):
            fc = FamilyConfig(**fc)
        seeds[family] = stage_seed(config.seed, family)
        t0 = time.perf_counter()
        try:
            if fc.grid:
                spec = GridSpec(family, fc.grid, config.cv_folds, seeds["grid"], dict(fc.params))
                result = grid_search(tr_m, spec, config.threads)
                model, grid_table = result.model, result.to_dict()
            else:
                params = _params_for(family, {}, fc.params, seeds[family])
                if family == "forest":
                    model = fit_forest(tr_m.features, tr_m.rul, params, threads=config.threads)
                else:
                    model = fit_family(family, tr_m.features, tr_m.rul, params)
                grid_table = None
            pred = model.predict(te_X)
        except StageError:
            raise
        except Exception as exc:
            raise StageError(f"train:{family}", f"{type(exc).__name__}: {exc}") from exc
        timings[family] = time.perf_counter() - t0
        params_used = dataclasses.asdict(model.params) if getattr(model, "params", None) else {}
        entry = {
            "label": METHOD_LABELS[family],
            "mse": mse(te_y, pred),
            "mae": mae(te_y, pred),
            "params": params_used,
            "grid": grid_table,
        }
        if hasattr(model, "converged"):
            entry["converged"] = model.converged
        entries[family] = entry
        trained[family] = TrainedModel(model, mask, scaler, train.feature_names)

    report = ExperimentReport(
        models=entries,
        feature_ranking=[[n, v] for n, v in selection.ranking],
        selected_features=kept,
        seed=config.seed,
        seeds=seeds,
        provenance={
            "train": train.provenance,
            "test": test.provenance,
            "n_train": len(train),
            "n_test": len(test),
        },
        warnings=warnings,
        timings=timings,
    )
    return report, trained
