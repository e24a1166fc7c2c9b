"""Shapley attributions with interventional (background replacement) coalition values.

``v(S)`` is the mean model output over background rows in which the features
of ``S`` are overwritten with the instance's values, so ``v(empty)`` is the
base value and ``v(all) = f(x)``.
"""
from __future__ import annotations

import itertools
from math import comb, factorial

import numpy as np

from .explanation import (
    Contribution,
    ExplainError,
    Explanation,
    background_matrix,
    batch_fn,
    feature_labels,
    format_number,
    subsample_rows,
)

MAX_EXACT_FEATURES = 12
_ROW_CHUNK = 200_000


def coalition_values(f, x, background, masks, features=None, chunk=_ROW_CHUNK):
    """Mean of ``f`` over the background for every coalition mask.

    ``masks`` is ``(K, M)`` boolean over ``features`` (default: all columns).
    Columns outside ``features`` keep the instance's value.
    """
    x = np.asarray(x, dtype=np.float64)
    masks = np.asarray(masks, dtype=bool)
    B, d = background.shape
    feats = np.arange(d) if features is None else np.asarray(features)
    base = background.copy()
    outside = np.setdiff1d(np.arange(d), feats)
    base[:, outside] = x[outside]
    per = max(1, chunk // B)
    out = np.empty(len(masks))
    for start in range(0, len(masks), per):
        block = masks[start:start + per]
        full = np.zeros((len(block), d), dtype=bool)
        full[:, feats] = block
        rows = np.where(full[:, None, :], x, base[None, :, :])
        preds = f(rows.reshape(-1, d)).reshape(len(block), B)
        out[start:start + per] = preds.mean(axis=1)
    return out


def shapley_kernel_weight(m: int, s: int) -> float:
    """Kernel SHAP weight of a coalition of size ``s`` out of ``m`` (finite for 0 < s < m)."""
    return (m - 1) / (comb(m, s) * s * (m - s))


def all_masks(m: int) -> np.ndarray:
    """All ``2**m`` masks; row ``k`` has bit ``j`` of ``k`` in column ``j``."""
    k = np.arange(2 ** m)
    return ((k[:, None] >> np.arange(m)) & 1).astype(bool)


def sample_coalitions(m: int, budget: int, rng):
    """Non-trivial coalitions and their regression weights.

    Size classes ``s`` and ``m - s`` are taken in pairs, smallest first. A
    pair is enumerated exactly (each member weighted by the Shapley kernel)
    while the budget allows; the remaining kernel mass is covered by sampled
    coalitions, each drawn with its complement.
    """
    budget = min(int(budget), 2 ** m - 2)
    sizes = list(range(1, m // 2 + 1))
    mass = {s: (m - 1) / (s * (m - s)) for s in range(1, m)}
    masks, weights = [], []
    left = budget
    sizes_done = 0

    def members(s):
        return [s] if s == m - s else [s, m - s]

    for pos, s in enumerate(sizes):
        pair = members(s)
        count = sum(comb(m, t) for t in pair)
        remaining = sum(mass[t] for s2 in sizes[pos:] for t in members(s2))
        share = sum(mass[t] for t in pair) / remaining
        if left * share + 1e-8 < count:
            break
        for t in pair:
            w = shapley_kernel_weight(m, t)
            for combo in itertools.combinations(range(m), t):
                z = np.zeros(m, dtype=bool)
                z[list(combo)] = True
                masks.append(z)
                weights.append(w)
        left -= count
        sizes_done = pos + 1

    rest = sizes[sizes_done:]
    if rest and left >= 2:
        size_list = [t for s in rest for t in members(s)]
        rest_mass = np.array([mass[t] for t in size_list])
        probs = rest_mass / rest_mass.sum()
        drawn = {}
        n_draw = left // 2
        for _ in range(n_draw):
            t = size_list[rng.choice(len(size_list), p=probs)]
            z = np.zeros(m, dtype=bool)
            z[rng.choice(m, size=t, replace=False)] = True
            for zz in (z, ~z):
                key = zz.tobytes()
                if key in drawn:
                    drawn[key][1] += 1
                else:
                    drawn[key] = [zz, 1]
        total = 2 * n_draw
        for zz, cnt in drawn.values():
            masks.append(zz)
            weights.append(rest_mass.sum() * cnt / total)
    return np.array(masks, dtype=bool).reshape(-1, m), np.array(weights)


def solve_constrained_wls(masks, weights, values, base, fx):
    """Weighted least squares for attributions with ``sum(phi) = fx - base``.

    The constraint is eliminated by substituting the last attribution.
    Returns ``(phi, weighted_residual_norm)``.
    """
    m = masks.shape[1]
    delta = fx - base
    if m == 1:
        return np.array([delta]), 0.0
    Z = masks.astype(np.float64)
    A = Z[:, :-1] - Z[:, -1:]
    b = (values - base) - Z[:, -1] * delta
    sw = np.sqrt(weights)
    sol, *_ = np.linalg.lstsq(A * sw[:, None], b * sw, rcond=None)
    phi = np.append(sol, delta - sol.sum())
    resid = float(np.linalg.norm((A @ sol - b) * sw))
    return phi, resid


def _build(method, f_x, base, phi, x, names, to_original, diagnostics):
    shown = x if to_original is None else np.asarray(to_original(x), dtype=np.float64)
    contribs = [
        Contribution(n, f"{n} = {format_number(v)}", float(p))
        for n, v, p in zip(names, shown, phi)
    ]
    return Explanation(method, float(f_x), float(base), contribs, diagnostics, shown.tolist())


def kernel_shap(
    model,
    instance,
    background,
    n_coalitions: int = 2048,
    seed: int = 0,
    background_size: int | None = 100,
    feature_names=None,
    to_original=None,
    max_exact_features: int = MAX_EXACT_FEATURES,
) -> Explanation:
    """Kernel SHAP attributions for one instance.

    With ``M <= max_exact_features`` every coalition is used with its exact
    kernel weight; otherwise ``n_coalitions`` coalitions are drawn (see
    :func:`sample_coalitions`). The empty and full coalitions enter through
    the efficiency constraint. ``to_original`` maps a feature-space vector to
    display units for the condition strings.
    """
    f = batch_fn(model)
    x = np.asarray(instance, dtype=np.float64).reshape(-1)
    m = len(x)
    bg = subsample_rows(background_matrix(background, m), background_size, seed)
    if m < 1:
        raise ExplainError("instance has no features")
    if n_coalitions < m + 2:
        raise ExplainError(f"n_coalitions must be >= {m + 2} for {m} features")
    names = feature_labels(feature_names, m)

    base = float(f(bg).mean())
    fx = float(f(x[None, :])[0])
    rng = np.random.default_rng(seed)
    if m <= max_exact_features:
        masks = all_masks(m)[1:-1]
        weights = np.array([shapley_kernel_weight(m, int(s)) for s in masks.sum(axis=1)])
        mode = "enumeration"
    else:
        masks, weights = sample_coalitions(m, n_coalitions, rng)
        mode = "sampled"
    if len(masks):
        values = coalition_values(f, x, bg, masks)
        phi, resid = solve_constrained_wls(masks, weights, values, base, fx)
    else:
        phi, resid = np.array([fx - base]), 0.0
    diag = {
        "coalitions": int(len(masks)),
        "mode": mode,
        "background_rows": int(len(bg)),
        "residual": resid,
        "local_accuracy_gap": abs(base + float(phi.sum()) - fx),
    }
    return _build("kernel_shap", fx, base, phi, x, names, to_original, diag)


def exact_shapley(
    model,
    instance,
    background,
    feature_subset=None,
    seed: int = 0,
    background_size: int | None = 100,
    feature_names=None,
    to_original=None,
) -> Explanation:
    """Shapley values by enumerating all ``2**M`` coalitions of ``feature_subset``.

    Features outside the subset stay at the instance's values, so the players
    share ``f(x) - v(empty)``. Only the subset's attributions are reported.
    """
    f = batch_fn(model)
    x = np.asarray(instance, dtype=np.float64).reshape(-1)
    d = len(x)
    subset = np.arange(d) if feature_subset is None else np.asarray(sorted(feature_subset), dtype=int)
    m = len(subset)
    if m > MAX_EXACT_FEATURES:
        raise ExplainError(
            f"exact Shapley enumeration is limited to {MAX_EXACT_FEATURES} features, got {m}"
        )
    if m < 1 or len(set(subset.tolist())) != m or subset.min() < 0 or subset.max() >= d:
        raise ExplainError(f"invalid feature subset {feature_subset!r}")
    bg = subsample_rows(background_matrix(background, d), background_size, seed)
    names = feature_labels(feature_names, d)

    masks = all_masks(m)
    v = coalition_values(f, x, bg, masks, features=subset)
    fx = float(f(x[None, :])[0])
    sizes = masks.sum(axis=1)
    coef = np.array([factorial(s) * factorial(m - s - 1) / factorial(m) if s < m else 0.0 for s in sizes])
    keys = np.arange(2 ** m)
    phi = np.zeros(m)
    for i in range(m):
        without = keys[~masks[:, i]]
        phi[i] = np.sum(coef[without] * (v[without | (1 << i)] - v[without]))
    base = float(v[0])
    diag = {
        "coalitions": int(len(masks)),
        "mode": "enumeration",
        "background_rows": int(len(bg)),
        "residual": 0.0,
        "local_accuracy_gap": abs(base + float(phi.sum()) - fx),
        "feature_subset": subset.tolist(),
    }
    shown = x if to_original is None else np.asarray(to_original(x), dtype=np.float64)
    contribs = [
        Contribution(names[j], f"{names[j]} = {format_number(shown[j])}", float(p))
        for j, p in zip(subset, phi)
    ]
    return Explanation("exact_shapley", fx, base, contribs, diag, shown.tolist())
