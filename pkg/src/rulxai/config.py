"""Run configuration: a YAML/JSON file plus command-line overrides."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import yaml

from .models import FAMILIES, canonical_family
from .pipeline import ExperimentConfig, FamilyConfig, SelectionRule, default_families


class ConfigError(ValueError):
    pass


@dataclass
class SyntheticSpec:
    n_units: int = 100
    seed: int = 0
    noise_scale: float = 1.0


@dataclass
class ExplainSettings:
    method: str = "shap"  # lime | shap | exact
    style: str = "force"  # bar | force | text
    n_samples: int = 5000  # LIME perturbations
    k_features: int = 8
    background_size: int = 100  # SHAP background rows
    n_coalitions: int = 2048


@dataclass
class RunConfig:
    """Everything a ``train`` run needs; every field has a default.

    ``data`` names a C-MAPSS text file; when it is empty the ``synthetic``
    spec generates data instead.
    """

    data: str | None = None
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    rul_cap: float | None = None
    test_fraction: float = 0.2
    split: str = "rows"  # rows | units
    seed: int = 0
    scale: bool = True
    selection: SelectionRule = SelectionRule()
    shallow_forest: dict = field(default_factory=dict)
    families: dict = field(default_factory=default_families)
    cv_folds: int = 3
    explain: ExplainSettings = field(default_factory=ExplainSettings)
    out: str = "runs/default"

    def experiment_config(self, threads=None) -> ExperimentConfig:
        return ExperimentConfig(
            families=self.families,
            scale=self.scale,
            selection=self.selection,
            shallow_forest=self.shallow_forest,
            cv_folds=self.cv_folds,
            seed=self.seed,
            threads=threads,
        )

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["families"] = {k: dataclasses.asdict(v) for k, v in self.families.items()}
        return d


def _build(cls, raw, where):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(raw).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _families(raw):
    if raw is None:
        return default_families()
    if not isinstance(raw, dict) or not raw:
        raise ConfigError("families: expected a non-empty mapping of family -> settings")
    out = {}
    for name, settings in raw.items():
        try:
            fam = canonical_family(name)
        except ValueError as exc:
            raise ConfigError(f"families: {exc}") from None
        fc = _build(FamilyConfig, settings or {}, f"families.{name}")
        cls, _ = FAMILIES[fam]
        allowed = {f.name for f in dataclasses.fields(cls)}
        bad = sorted((set(fc.params) | set(fc.grid or {})) - allowed)
        if bad:
            raise ConfigError(f"families.{name}: unknown hyperparameter(s) {', '.join(bad)}")
        for k, v in (fc.grid or {}).items():
            if not isinstance(v, list) or not v:
                raise ConfigError(f"families.{name}.grid.{k}: expected a non-empty list")
        out[fam] = fc
    return out


def config_from_dict(raw: dict | None) -> RunConfig:
    raw = dict(raw or {})
    names = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    nested = {
        "synthetic": _build(SyntheticSpec, raw.pop("synthetic", None), "synthetic"),
        "selection": _build(SelectionRule, raw.pop("selection", None), "selection"),
        "explain": _build(ExplainSettings, raw.pop("explain", None), "explain"),
        "families": _families(raw.pop("families", None)),
    }
    cfg = _build(RunConfig, raw, "config")
    for k, v in nested.items():
        setattr(cfg, k, v)
    if cfg.split not in ("rows", "units"):
        raise ConfigError(f"split must be 'rows' or 'units', got {cfg.split!r}")
    if not 0 < cfg.test_fraction < 1:
        raise ConfigError("test_fraction must lie in (0, 1)")
    if cfg.explain.method not in ("lime", "shap", "exact"):
        raise ConfigError(f"explain.method must be lime, shap or exact, got {cfg.explain.method!r}")
    if cfg.explain.style not in ("bar", "force", "text"):
        raise ConfigError(f"explain.style must be bar, force or text, got {cfg.explain.style!r}")
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML/JSON: {exc}") from None
    return config_from_dict(raw)
