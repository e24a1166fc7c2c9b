"""C-MAPSS style telemetry: parsing, RUL labels, splits, scaling, simulation.

A :class:`Dataset` stores its rows column-wise in numpy arrays (unit ids,
cycles, a ``(N, 24)`` feature matrix and optional RUL labels). Row objects
(:class:`CycleRecord`) are materialised on demand.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np

N_SETTINGS = 3
N_SENSORS = 21
N_FEATURES = N_SETTINGS + N_SENSORS
N_COLUMNS = 2 + N_FEATURES

FEATURE_NAMES = tuple(
    [f"op-setting-{i}" for i in range(1, N_SETTINGS + 1)]
    + [f"sensor-{i}" for i in range(1, N_SENSORS + 1)]
)

# Readings described for each sensor in the turbofan telemetry.
SENSOR_DESCRIPTIONS = {
    1: "Total temperature at fan inlet",
    2: "Total temperature at LPC outlet",
    3: "Total temperature at HPC outlet",
    4: "Total temperature at LPT outlet",
    5: "Pressure at fan inlet",
    6: "Total pressure in bypass-duct",
    7: "Total pressure at HPC outlet",
    8: "Physical fan speed",
    9: "Physical core speed",
    10: "Engine pressure ratio",
    11: "Engine pressure ratio",
    12: "Ratio of fuel flow to Ps30",
    13: "Corrected fan speed",
    14: "Corrected core speed",
    15: "Bypass Ratio",
    16: "Burner fuel-air ratio",
    17: "Bleed Enthalpy",
    18: "Demanded fan speed",
    19: "Demanded corrected fan speed",
    20: "HPT coolant bleed",
    21: "LPT coolant bleed",
}

# Row count of the FD001 training file; an 80/20 floor split gives 16505/4126,
# a ceil split gives 16504/4127 (the published counts).
FD001_TRAIN_ROWS = 20631


class DataError(ValueError):
    """Raised for malformed or unusable telemetry."""


class ParseError(DataError):
    def __init__(self, message, line_no=None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


def sensor_index(sensor: int) -> int:
    """Column index of ``sensor-<n>`` in the 24-wide feature matrix."""
    if not 1 <= sensor <= N_SENSORS:
        raise ValueError(f"sensor number out of range: {sensor}")
    return N_SETTINGS + sensor - 1


@dataclass(frozen=True)
class CycleRecord:
    unit_id: int
    cycle: int
    op_settings: tuple
    sensors: tuple
    rul: float | None = None

    def __post_init__(self):
        if len(self.op_settings) != N_SETTINGS or len(self.sensors) != N_SENSORS:
            raise DataError("a record needs 3 operational settings and 21 sensor readings")
        if self.unit_id < 1 or self.cycle < 1:
            raise DataError("unit id and cycle must be positive")

    @property
    def features(self) -> tuple:
        return tuple(self.op_settings) + tuple(self.sensors)


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-oriented, immutable collection of cycle records."""

    unit_ids: np.ndarray
    cycles: np.ndarray
    features: np.ndarray
    rul: np.ndarray | None = None
    feature_names: tuple = FEATURE_NAMES
    provenance: str = ""

    def __post_init__(self):
        units = _frozen(self.unit_ids, np.int64).reshape(-1)
        cycles = _frozen(self.cycles, np.int64).reshape(-1)
        feats = _frozen(self.features, np.float64)
        if feats.ndim != 2:
            feats = _frozen(feats.reshape(len(units), -1), np.float64)
        if not (len(units) == len(cycles) == feats.shape[0]):
            raise DataError("unit, cycle and feature arrays differ in length")
        if len(self.feature_names) != feats.shape[1]:
            raise DataError(
                f"{len(self.feature_names)} feature names for {feats.shape[1]} columns"
            )
        object.__setattr__(self, "unit_ids", units)
        object.__setattr__(self, "cycles", cycles)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if self.rul is not None:
            rul = _frozen(self.rul, np.float64).reshape(-1)
            if len(rul) != len(units):
                raise DataError("rul length differs from record count")
            object.__setattr__(self, "rul", rul)

    def __len__(self):
        return len(self.unit_ids)

    @property
    def labeled(self) -> bool:
        return self.rul is not None

    @property
    def records(self) -> list[CycleRecord]:
        out = []
        for i in range(len(self)):
            row = self.features[i]
            out.append(
                CycleRecord(
                    int(self.unit_ids[i]),
                    int(self.cycles[i]),
                    tuple(float(v) for v in row[:N_SETTINGS]),
                    tuple(float(v) for v in row[N_SETTINGS:]),
                    None if self.rul is None else float(self.rul[i]),
                )
            )
        return out

    def units(self) -> list[int]:
        """Unit ids in order of first appearance."""
        _, first = np.unique(self.unit_ids, return_index=True)
        return [int(self.unit_ids[i]) for i in sorted(first)]

    def unit_block(self, unit_id: int) -> Dataset:
        return self.take(np.flatnonzero(self.unit_ids == unit_id))

    def take(self, idx) -> Dataset:
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(
            self.unit_ids[idx],
            self.cycles[idx],
            self.features[idx],
            None if self.rul is None else self.rul[idx],
            self.feature_names,
            self.provenance,
        )

    def with_rul(self, rul) -> Dataset:
        return Dataset(
            self.unit_ids, self.cycles, self.features, rul, self.feature_names, self.provenance
        )

    def with_features(self, features) -> Dataset:
        return Dataset(
            self.unit_ids, self.cycles, features, self.rul, self.feature_names, self.provenance
        )

    def targets(self) -> np.ndarray:
        if self.rul is None:
            raise DataError("dataset is not labeled; call label_rul first")
        return self.rul

    def equals(self, other: Dataset) -> bool:
        """Field-identical comparison (provenance ignored)."""
        same = (
            self.feature_names == other.feature_names
            and np.array_equal(self.unit_ids, other.unit_ids)
            and np.array_equal(self.cycles, other.cycles)
            and np.array_equal(self.features, other.features)
        )
        if not same or (self.rul is None) != (other.rul is None):
            return False
        return self.rul is None or np.array_equal(self.rul, other.rul)

    @classmethod
    def from_records(cls, records: Iterable[CycleRecord], provenance: str = "") -> Dataset:
        records = list(records)
        if not records:
            raise DataError("no records")
        labeled = [r.rul is not None for r in records]
        if any(labeled) and not all(labeled):
            raise DataError("records mix labeled and unlabeled rows")
        return cls(
            [r.unit_id for r in records],
            [r.cycle for r in records],
            [r.features for r in records],
            [r.rul for r in records] if all(labeled) else None,
            provenance=provenance,
        )


# --------------------------------------------------------------------- parsing


def parse_cmapss(stream: TextIO | str, provenance: str = "") -> Dataset:
    """Parse whitespace-separated 26-column telemetry.

    ``stream`` may be a file-like object or a string holding the whole file.
    Blank lines and trailing whitespace are ignored; records keep file order.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    units, cycles, rows = [], [], []
    for line_no, line in enumerate(stream, start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != N_COLUMNS:
            raise ParseError(f"expected {N_COLUMNS} fields, found {len(parts)}", line_no)
        try:
            values = [float(p) for p in parts]
        except ValueError as exc:
            raise ParseError(f"non-numeric field ({exc})", line_no) from None
        if not all(math.isfinite(v) for v in values):
            raise ParseError("non-finite value", line_no)
        uid, cyc = values[0], values[1]
        if uid != int(uid) or cyc != int(cyc) or uid < 1 or cyc < 1:
            raise ParseError("unit id and cycle must be positive integers", line_no)
        units.append(int(uid))
        cycles.append(int(cyc))
        rows.append(values[2:])
    if not rows:
        raise DataError("empty dataset: no records in input")
    return Dataset(units, cycles, np.array(rows), provenance=provenance)


def load_cmapss(path) -> Dataset:
    with open(path, "r", encoding="ascii") as fh:
        return parse_cmapss(fh, provenance=str(path))


def _num(x: float) -> str:
    # repr is the shortest string that round-trips exactly
    return repr(float(x))


def to_cmapss_text(ds: Dataset) -> str:
    lines = []
    for i in range(len(ds)):
        fields = [str(int(ds.unit_ids[i])), str(int(ds.cycles[i]))]
        fields += [_num(v) for v in ds.features[i]]
        lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"


def write_cmapss(ds: Dataset, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(to_cmapss_text(ds))


def to_csv_text(ds: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["unit", "cycle", *ds.feature_names, "rul"])
    for i in range(len(ds)):
        rul = "" if ds.rul is None else _num(ds.rul[i])
        w.writerow([int(ds.unit_ids[i]), int(ds.cycles[i]), *map(_num, ds.features[i]), rul])
    return buf.getvalue()


# -------------------------------------------------------------------- labeling


def label_rul(ds: Dataset, cap: float | None = None) -> Dataset:
    """Attach ``rul = max_cycle(unit) - cycle``, optionally clamped at ``cap``."""
    if len(ds) == 0:
        raise DataError("cannot label an empty dataset")
    if cap is not None and not cap > 0:
        raise ValueError(f"rul cap must be positive, got {cap}")
    uniq, inv = np.unique(ds.unit_ids, return_inverse=True)
    max_cycle = np.zeros(len(uniq), dtype=np.int64)
    np.maximum.at(max_cycle, inv, ds.cycles)
    rul = (max_cycle[inv] - ds.cycles).astype(np.float64)
    if cap is not None:
        rul = np.minimum(rul, float(cap))
    return ds.with_rul(rul)


def check_consecutive_cycles(ds: Dataset) -> None:
    """Raise if some unit's cycles are not 1..n in order."""
    for u in ds.units():
        c = ds.cycles[ds.unit_ids == u]
        if not np.array_equal(c, np.arange(1, len(c) + 1)):
            raise DataError(f"unit {u}: cycles are not consecutive from 1")


# ------------------------------------------------------------------- splitting


def split_rows(ds: Dataset, test_fraction: float = 0.2, seed: int = 0):
    """Seeded row-level shuffle split; ``|test| = floor(test_fraction * N)``.

    Both halves keep the original row order. Note that on the 20631-row FD001
    file the floor rule gives 4126 test rows, one fewer than the published
    4127 (which corresponds to a ceiling).
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = len(ds)
    n_test = int(math.floor(test_fraction * n))
    perm = np.random.default_rng(seed).permutation(n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return ds.take(train_idx), ds.take(test_idx)


def split_units(ds: Dataset, test_fraction: float = 0.2, seed: int = 0):
    """Unit-wise split: whole engines go to one side, ``floor`` of the unit count to test."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    units = np.array(ds.units())
    n_test = int(math.floor(test_fraction * len(units)))
    if n_test == 0 or n_test == len(units):
        raise DataError(f"cannot split {len(units)} units with fraction {test_fraction}")
    perm = np.random.default_rng(seed).permutation(len(units))
    test_units = units[perm[:n_test]]
    in_test = np.isin(ds.unit_ids, test_units)
    return ds.take(np.flatnonzero(~in_test)), ds.take(np.flatnonzero(in_test))


# --------------------------------------------------------------------- scaling


@dataclass(frozen=True, eq=False)
class Scaler:
    """Per-feature z-score with population standard deviation."""

    mean: np.ndarray
    std: np.ndarray
    zero_variance_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        mean = _frozen(self.mean, np.float64)
        std = _frozen(self.std, np.float64)
        if mean.shape != std.shape:
            raise DataError("mean/std shapes differ")
        if np.any(std < 0):
            raise DataError("negative std")
        mask = self.zero_variance_mask
        mask = std == 0 if mask is None else np.asarray(mask, dtype=bool)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)
        object.__setattr__(self, "zero_variance_mask", _frozen(mask, bool))

    @property
    def n_features(self):
        return len(self.mean)

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.n_features:
            raise DataError(f"scaler expects {self.n_features} features, got {X.shape[-1]}")
        safe = np.where(self.zero_variance_mask, 1.0, self.std)
        Z = (X - self.mean) / safe
        return np.where(self.zero_variance_mask, 0.0, Z)

    def inverse_transform(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=np.float64)
        if Z.shape[-1] != self.n_features:
            raise DataError(f"scaler expects {self.n_features} features, got {Z.shape[-1]}")
        return np.where(self.zero_variance_mask, self.mean, Z * self.std + self.mean)

    def to_dict(self):
        return {
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "zero_variance_mask": self.zero_variance_mask.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["mean"], d["std"], d["zero_variance_mask"])


def fit_scaler(train: Dataset | np.ndarray) -> Scaler:
    X = train.features if isinstance(train, Dataset) else np.asarray(train, dtype=np.float64)
    if X.shape[0] < 2:
        raise DataError("fit_scaler needs at least 2 records")
    mean = X.mean(axis=0)
    std = X.std(axis=0)  # population convention (ddof=0)
    # a column whose values are all identical can still leave float dust in std
    const = np.all(X == X[0], axis=0)
    std = np.where(const, 0.0, std)
    return Scaler(mean, std, const)


def apply_scaler(s: Scaler, ds: Dataset) -> Dataset:
    return ds.with_features(s.transform(ds.features))


def constant_features(X, rtol: float = 1e-12) -> np.ndarray:
    """Columns whose spread is negligible relative to their magnitude."""
    X = np.asarray(X, dtype=np.float64)
    spread = X.max(axis=0) - X.min(axis=0)
    scale = np.maximum(np.abs(X).max(axis=0), 1.0)
    return spread <= rtol * scale


# ------------------------------------------------------------------ simulation

# Typical sea-level baseline readings of a healthy engine.
_SENSOR_BASE = np.array([
    518.67, 642.5, 1589.0, 1405.0, 14.62, 21.61, 554.0, 2388.0, 9050.0, 1.30,
    47.3, 522.0, 2388.0, 8140.0, 8.40, 0.03, 392.0, 2388.0, 100.0, 38.9, 23.35,
])
_SENSOR_NOISE = np.array([
    0.0, 0.45, 5.0, 7.0, 0.0, 0.0015, 0.7, 0.05, 15.0, 0.0,
    0.2, 0.6, 0.05, 15.0, 0.03, 0.0, 1.3, 0.0, 0.0, 0.15, 0.09,
])
# +1 rises toward failure, -1 falls
_SENSOR_DIRECTION = np.array([
    0, 1, 1, 1, 0, 0, -1, 1, 1, 0, 1, -1, 1, 1, 1, 0, 1, 0, 0, -1, -1,
])
DEFAULT_DRIFT_SENSORS = tuple(int(i) + 1 for i in np.flatnonzero(_SENSOR_DIRECTION))


def simulate_degradation(
    n_units: int,
    seed: int = 0,
    noise_scale: float = 1.0,
    drift_sensors: Iterable[int] = DEFAULT_DRIFT_SENSORS,
    noise_sensors: Iterable[int] = (),
    lifetime_range: tuple = (120, 360),
) -> Dataset:
    """Synthetic run-to-failure telemetry in the 26-column layout.

    Each unit gets an integer lifetime drawn uniformly from ``lifetime_range``.
    Drift sensors follow ``base + dir * amp * (exp(-rul / tau) + 0.05 * t / L)``,
    strictly monotone in the cycle, plus Gaussian noise scaled by
    ``noise_scale``. Sensors in ``noise_sensors`` carry noise only; all other
    sensors are constant. The result is labeled with ``label_rul``.
    """
    if int(n_units) < 1:
        raise ValueError("n_units must be >= 1")
    if noise_scale < 0:
        raise ValueError("noise_scale must be >= 0")
    lo, hi = lifetime_range
    if not 2 <= lo <= hi:
        raise ValueError(f"bad lifetime range {lifetime_range}")
    drift = sorted({int(s) for s in drift_sensors})
    noisy = sorted({int(s) for s in noise_sensors} - set(drift))
    for s in drift + noisy:
        sensor_index(s)

    rng = np.random.default_rng(seed)
    base_noise = np.where(_SENSOR_NOISE > 0, _SENSOR_NOISE, 0.01 * np.maximum(_SENSOR_BASE, 1.0))
    direction = np.where(_SENSOR_DIRECTION != 0, _SENSOR_DIRECTION, 1)
    units, cycles, blocks = [], [], []
    for u in range(1, int(n_units) + 1):
        life = int(rng.integers(lo, hi + 1))
        t = np.arange(1, life + 1, dtype=np.float64)
        rul = life - t
        # unit-level variation: manufacturing offsets and degradation rate
        offset = rng.normal(0.0, 0.3, N_SENSORS) * base_noise
        tau = rng.uniform(40.0, 80.0)
        settings = np.column_stack([
            rng.normal(0.0, 0.0022, life),
            rng.normal(0.0, 0.0003, life),
            np.full(life, 100.0),
        ])
        sensors = np.tile(_SENSOR_BASE, (life, 1))
        health = np.exp(-rul / tau) + 0.05 * t / life
        for s in drift:
            j = s - 1
            amp = 4.0 * base_noise[j]
            sensors[:, j] = (
                _SENSOR_BASE[j]
                + offset[j]
                + direction[j] * amp * health
                + noise_scale * rng.normal(0.0, base_noise[j], life)
            )
        for s in noisy:
            j = s - 1
            sensors[:, j] = _SENSOR_BASE[j] + noise_scale * rng.normal(0.0, base_noise[j], life)
        if noise_scale == 0:
            settings[:, :2] = 0.0
        units.append(np.full(life, u))
        cycles.append(t.astype(np.int64))
        blocks.append(np.hstack([settings, sensors]))
    ds = Dataset(
        np.concatenate(units),
        np.concatenate(cycles),
        np.vstack(blocks),
        provenance=f"synthetic:n_units={int(n_units)},seed={seed},noise={noise_scale}",
    )
    return label_rul(ds)
