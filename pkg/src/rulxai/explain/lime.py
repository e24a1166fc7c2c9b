"""Tabular LIME with quartile discretisation."""
from __future__ import annotations

import numpy as np

from .explanation import (
    Contribution,
    ExplainError,
    Explanation,
    background_matrix,
    batch_fn,
    feature_labels,
    format_number,
)

DEFAULT_SAMPLES = 5000
DEFAULT_K = 8
RIDGE = 1e-3


def quartile_edges(column) -> np.ndarray:
    """Distinct 25/50/75% quantiles (midpoint interpolation)."""
    return np.unique(np.percentile(column, [25, 50, 75], method="midpoint"))


def bin_of(value, edges) -> int:
    # bin b covers (edges[b-1], edges[b]]
    return int(np.searchsorted(edges, value, side="left"))


def bin_condition(name, b, edges, to_display=float) -> str:
    if len(edges) == 0:
        return f"{name} = any"
    if b == 0:
        return f"{name} <= {format_number(to_display(edges[0]))}"
    if b == len(edges):
        return f"{name} > {format_number(to_display(edges[-1]))}"
    return (
        f"{format_number(to_display(edges[b - 1]))} < {name} "
        f"<= {format_number(to_display(edges[b]))}"
    )


def weighted_ridge(Z, y, w, lam):
    """Ridge with unpenalised intercept; returns ``(intercept, coef)``."""
    sw = w / w.sum()
    zm = sw @ Z
    ym = sw @ y
    Zc = Z - zm
    yc = y - ym
    A = Zc.T @ (Zc * sw[:, None]) + lam * np.eye(Z.shape[1])
    coef = np.linalg.solve(A, Zc.T @ (yc * sw))
    return float(ym - zm @ coef), coef


def weighted_r2(y, pred, w):
    ym = np.average(y, weights=w)
    ss_tot = float(np.sum(w * (y - ym) ** 2))
    if ss_tot <= 1e-12 * max(1.0, float(np.sum(w * y * y))):
        return None
    return 1.0 - float(np.sum(w * (y - pred) ** 2)) / ss_tot


def lime_explain(
    model,
    instance,
    background,
    n_samples: int = DEFAULT_SAMPLES,
    k_features: int | None = None,
    seed: int = 0,
    feature_names=None,
    kernel_width: float | None = None,
    ridge: float = RIDGE,
    to_original=None,
) -> Explanation:
    """Fit a weighted linear surrogate around ``instance``.

    Every feature is discretised into quartile bins of the background. A
    sample keeps each feature (``z_j = 1``, instance value) with probability
    1/2; dropped features take a background value from a different, randomly
    chosen bin. Samples are weighted by ``exp(-d^2 / width^2)`` where ``d`` is
    the Euclidean distance of ``z`` to the all-ones vector and the width
    defaults to ``0.75 * sqrt(M)``. The ``k_features`` columns (default
    ``min(8, M)``) with the largest preliminary ridge weights are refit and
    reported with their instance-bin conditions.
    """
    f = batch_fn(model)
    x = np.asarray(instance, dtype=np.float64).reshape(-1)
    m = len(x)
    bg = background_matrix(background, m)
    if k_features is None:
        k_features = min(DEFAULT_K, m)
    if n_samples < 100:
        raise ExplainError(f"n_samples must be >= 100, got {n_samples}")
    if not 1 <= k_features <= m:
        raise ExplainError(f"k_features must lie in [1, {m}], got {k_features}")
    names = feature_labels(feature_names, m)
    width = float(0.75 * np.sqrt(m)) if kernel_width is None else float(kernel_width)

    edges, inst_bin, pools = [], [], []
    for j in range(m):
        e = quartile_edges(bg[:, j])
        bins = np.searchsorted(e, bg[:, j], side="left")
        b = bin_of(x[j], e)
        other = [bg[bins == k, j] for k in range(len(e) + 1) if k != b and np.any(bins == k)]
        edges.append(e)
        inst_bin.append(b)
        pools.append(other)
    active = np.array([len(p) > 0 for p in pools])
    if not active.any():
        raise ExplainError("background is degenerate: every feature is constant")

    rng = np.random.default_rng(seed)
    Z = rng.integers(0, 2, size=(n_samples, m)).astype(bool)
    Z[0] = True
    Z[:, ~active] = True  # nothing to swap in
    X = np.tile(x, (n_samples, 1))
    for j in np.flatnonzero(active):
        rows = np.flatnonzero(~Z[:, j])
        if len(rows) == 0:
            continue
        pool = pools[j]
        which = rng.integers(0, len(pool), size=len(rows))
        for k, vals in enumerate(pool):
            sel = rows[which == k]
            X[sel, j] = vals[rng.integers(0, len(vals), size=len(sel))]
    y = f(X)
    d2 = (~Z).sum(axis=1).astype(np.float64)
    w = np.exp(-d2 / width ** 2)

    cols = np.flatnonzero(active)
    Zf = Z.astype(np.float64)
    _, pre = weighted_ridge(Zf[:, cols], y, w, ridge)
    order = np.argsort(-np.abs(pre), kind="stable")
    chosen = np.sort(cols[order[: min(k_features, len(cols))]])
    intercept, coef = weighted_ridge(Zf[:, chosen], y, w, ridge)
    r2 = weighted_r2(y, intercept + Zf[:, chosen] @ coef, w)
    if r2 is None:
        coef = np.zeros_like(coef)

    fx = float(f(x[None, :])[0])
    base = float(f(bg).mean())
    if to_original is None:
        shown = x
        display = [float] * m
    else:
        shown = np.asarray(to_original(x), dtype=np.float64)
        display = [_column_map(to_original, x, j) for j in range(m)]
    contribs = [
        Contribution(names[j], bin_condition(names[j], inst_bin[j], edges[j], display[j]), float(c))
        for j, c in zip(chosen, coef)
    ]
    diag = {
        "weighted_r2": r2,
        "r2_undefined": r2 is None,
        "surrogate_intercept": intercept,
        "surrogate_prediction": intercept + float(coef.sum()),
        "kernel_width": width,
        "n_samples": int(n_samples),
        "selected_features": [names[j] for j in chosen],
    }
    return Explanation("lime", fx, base, contribs, diag, shown.tolist())


def _column_map(to_original, x, j):
    """Scalar map of feature ``j`` into display units, other features held at ``x``."""

    def conv(v):
        row = x.copy()
        row[j] = v
        return float(np.asarray(to_original(row), dtype=np.float64)[j])

    return conv
