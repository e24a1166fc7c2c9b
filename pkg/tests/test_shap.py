import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rulxai.explain import ExplainError, exact_shapley, kernel_shap
from rulxai.explain.shap import all_masks, sample_coalitions, shapley_kernel_weight


def value(f, x, bg, S):
    rows = bg.copy()
    rows[:, list(S)] = x[list(S)]
    return f(rows).mean()


def permutation_shapley(f, x, bg):
    """Reference: average marginal contribution over every ordering."""
    m = len(x)
    phi = np.zeros(m)
    perms = list(itertools.permutations(range(m)))
    for order in perms:
        S = []
        prev = value(f, x, bg, S)
        for j in order:
            S.append(j)
            cur = value(f, x, bg, S)
            phi[j] += cur - prev
            prev = cur
    return phi / len(perms)


def poly(X):
    X = np.atleast_2d(X)
    return 3 * X[:, 0] * X[:, 1] - X[:, 2] ** 2 + np.maximum(X[:, 3], 0) + 0.5


@pytest.fixture(scope="module")
def setup():
    rng = np.random.default_rng(0)
    return rng.normal(size=(30, 4)), rng.normal(size=4)


def test_exact_matches_permutation_oracle(setup):
    bg, x = setup
    ref = permutation_shapley(poly, x, bg)
    e = exact_shapley(poly, x, bg, background_size=None)
    assert np.allclose([e.value_of(f"x{j}") for j in range(4)], ref, atol=1e-12)


def test_kernel_enumeration_matches_exact(setup):
    bg, x = setup
    k = kernel_shap(poly, x, bg, background_size=None)
    e = exact_shapley(poly, x, bg, background_size=None)
    for c in e.contributions:
        assert k.value_of(c.feature) == pytest.approx(c.value, abs=1e-9)
    assert k.diagnostics["mode"] == "enumeration"


def test_efficiency_dummy_symmetry():
    rng = np.random.default_rng(1)
    bg = rng.normal(size=(25, 4))
    x = np.array([1.0, 1.0, -0.5, 2.0])
    f = lambda X: np.atleast_2d(X)[:, 0] * 2 + np.atleast_2d(X)[:, 1] * 2 + np.atleast_2d(X)[:, 2] ** 3
    bg[:, 1] = bg[:, 0]  # features 0 and 1 play symmetric roles
    for e in (kernel_shap(f, x, bg, background_size=None), exact_shapley(f, x, bg, background_size=None)):
        assert e.local_accuracy_gap() <= 1e-9
        assert e.value_of("x3") == pytest.approx(0.0, abs=1e-12)
        assert e.value_of("x0") == pytest.approx(e.value_of("x1"), abs=1e-9)


def test_linear_closed_form():
    rng = np.random.default_rng(2)
    w = np.array([1.5, -2.0, 0.0, 4.0, 0.25])
    bg = rng.normal(size=(40, 5))
    x = rng.normal(size=5)
    f = lambda X: np.atleast_2d(X) @ w + 7
    e = kernel_shap(f, x, bg, background_size=None)
    assert np.allclose([e.value_of(f"x{j}") for j in range(5)], w * (x - bg.mean(axis=0)), atol=1e-10)


def test_single_feature():
    bg = np.array([[0.0], [2.0]])
    e = kernel_shap(lambda X: 3 * np.atleast_2d(X)[:, 0], np.array([5.0]), bg)
    assert e.value_of("x0") == pytest.approx(12.0)
    assert e.base_value == pytest.approx(3.0)


def test_sampled_mode_close_to_exact():
    rng = np.random.default_rng(3)
    m = 12
    bg = rng.normal(size=(50, m))
    x = rng.normal(size=m)
    w = rng.normal(size=m)
    f = lambda X: np.tanh(np.atleast_2d(X) @ w) * 10 + np.atleast_2d(X)[:, 0] * np.atleast_2d(X)[:, 1]
    exact = exact_shapley(f, x, bg, background_size=None)
    sampled = kernel_shap(f, x, bg, n_coalitions=2048, background_size=None, max_exact_features=0)
    assert sampled.diagnostics["mode"] == "sampled"
    err = max(abs(sampled.value_of(c.feature) - c.value) for c in exact.contributions)
    assert err <= 0.05 * max(abs(c.value) for c in exact.contributions)
    assert sampled.local_accuracy_gap() <= 1e-8


def test_sample_coalitions_valid():
    rng = np.random.default_rng(0)
    masks, weights = sample_coalitions(20, 500, rng)
    sizes = masks.sum(axis=1)
    assert len(masks) <= 500 and np.all(weights > 0)
    assert sizes.min() >= 1 and sizes.max() <= 19


def test_kernel_weight_and_masks():
    assert shapley_kernel_weight(4, 1) == pytest.approx(3 / (4 * 1 * 3))
    masks = all_masks(3)
    assert masks.shape == (8, 3)
    assert masks[5].tolist() == [True, False, True]


def test_exact_feature_subset_keeps_others_fixed(setup):
    bg, x = setup
    e = exact_shapley(poly, x, bg, feature_subset=[0, 2], background_size=None)
    assert [c.feature for c in sorted(e.contributions, key=lambda c: c.feature)] == ["x0", "x2"]
    assert e.local_accuracy_gap() <= 1e-9
    rows = bg.copy()
    rows[:, [1, 3]] = x[[1, 3]]
    assert e.base_value == pytest.approx(poly(rows).mean())


def test_errors():
    bg = np.zeros((5, 13))
    with pytest.raises(ExplainError):
        exact_shapley(lambda X: X.sum(axis=1), np.zeros(13), bg)
    with pytest.raises(ExplainError):
        kernel_shap(lambda X: X.sum(axis=1), np.zeros(13), bg, n_coalitions=10)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 6))
def test_local_accuracy_property(seed, m):
    rng = np.random.default_rng(seed)
    bg = rng.normal(size=(15, m))
    x = rng.normal(size=m)
    W = rng.normal(size=(m, 3))
    f = lambda X: np.sin(np.atleast_2d(X) @ W).sum(axis=1)
    e = kernel_shap(f, x, bg, seed=seed)
    assert e.local_accuracy_gap() <= 1e-8
    assert e.base_value + e.total() == pytest.approx(e.predicted_value, abs=1e-8)


def test_condition_strings_use_display_units():
    bg = np.zeros((4, 2))
    e = kernel_shap(lambda X: np.atleast_2d(X).sum(axis=1), np.array([1.0, 2.0]), bg,
                    feature_names=["sensor-14", "sensor-4"], to_original=lambda v: v * 4.0755)
    cond = {c.feature: c.condition for c in e.contributions}
    assert cond["sensor-14"] == "sensor-14 = 4.0755"
