"""Linear families: elastic net (coordinate descent) and linear epsilon-SVR."""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .base import ModelError, Predictor, check_xy


class LinearModel(Predictor):
    family = "linear"

    def __init__(self, coef, intercept, params=None, converged=True, n_iter=0):
        coef = np.asarray(coef, dtype=np.float64).reshape(-1)
        super().__init__(len(coef))
        self.coef = coef
        self.intercept = float(intercept)
        self.params = params
        self.converged = bool(converged)
        self.n_iter = int(n_iter)

    def _predict(self, X):
        return X @ self.coef + self.intercept

    def state(self):
        return {
            "params": None if self.params is None else asdict(self.params),
            "coef": self.coef.tolist(),
            "intercept": self.intercept,
            "converged": self.converged,
            "n_iter": self.n_iter,
        }


# ----------------------------------------------------------------- elastic net


@dataclass(frozen=True)
class ElasticNetParams:
    alpha: float = 0.01
    l1_ratio: float = 0.01
    fit_intercept: bool = True
    selection: str = "cyclic"
    tol: float = 1e-4
    max_iter: int = 10000

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not 0 <= self.l1_ratio <= 1:
            raise ValueError("l1_ratio must lie in [0, 1]")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.selection != "cyclic":
            raise ValueError("only cyclic coordinate selection is supported")


class ElasticNet(LinearModel):
    family = "elastic_net"

    @classmethod
    def from_state(cls, s):
        return cls(s["coef"], s["intercept"], ElasticNetParams(**s["params"]), s["converged"], s["n_iter"])


def soft_threshold(z, t):
    return np.sign(z) * max(abs(z) - t, 0.0)


def _centered(X, y, fit_intercept):
    if fit_intercept:
        xm, ym = X.mean(axis=0), y.mean()
        return X - xm, y - ym, xm, ym
    return X, y, np.zeros(X.shape[1]), 0.0


def elastic_net_objective(X, y, coef, intercept, alpha, l1_ratio):
    r = y - X @ coef - intercept
    pen = l1_ratio * np.abs(coef).sum() + 0.5 * (1 - l1_ratio) * coef @ coef
    return 0.5 * r @ r / len(y) + alpha * pen


def elastic_net_subgradient(X, y, model: LinearModel, alpha, l1_ratio):
    """Objective gradient at the non-zero coordinates (zero entries elsewhere)."""
    X, y = check_xy(X, y)
    w = model.coef
    r = y - X @ w - model.intercept
    g = -(X.T @ r) / len(y) + alpha * (1 - l1_ratio) * w + alpha * l1_ratio * np.sign(w)
    return np.where(w != 0, g, 0.0)


def fit_elastic_net(X, y, params: ElasticNetParams = ElasticNetParams(), history=None) -> ElasticNet:
    """Cyclic coordinate descent on

        (1/2N)||y - Xw - b||^2 + alpha * (l1_ratio ||w||_1 + (1 - l1_ratio)/2 ||w||^2)

    working on the Gram matrix of the centred design. Stops when the largest
    coefficient change in a sweep drops below ``tol``; hitting ``max_iter``
    returns a model with ``converged = False``. If ``history`` is a list, the
    objective after every sweep is appended to it.
    """
    X, y = check_xy(X, y)
    n, d = X.shape
    Xc, yc, xm, ym = _centered(X, y, params.fit_intercept)
    G = Xc.T @ Xc / n
    q = Xc.T @ yc / n
    yy = yc @ yc / n
    diag = np.diag(G).copy()
    l1 = params.alpha * params.l1_ratio
    l2 = params.alpha * (1.0 - params.l1_ratio)
    w = np.zeros(d)
    Gw = np.zeros(d)

    def objective():
        return 0.5 * (yy - 2.0 * q @ w + w @ Gw) + l1 * np.abs(w).sum() + 0.5 * l2 * w @ w

    converged = False
    sweep = 0
    for sweep in range(1, params.max_iter + 1):
        max_delta = 0.0
        for j in range(d):
            if diag[j] == 0.0:
                continue
            old = w[j]
            rho = q[j] - Gw[j] + diag[j] * old
            new = soft_threshold(rho, l1) / (diag[j] + l2)
            if new != old:
                Gw += G[:, j] * (new - old)
                w[j] = new
                max_delta = max(max_delta, abs(new - old))
        if history is not None:
            history.append(float(objective()))
        if max_delta < params.tol:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"elastic net did not converge in {params.max_iter} sweeps", RuntimeWarning
        )
    b = ym - xm @ w if params.fit_intercept else 0.0
    return ElasticNet(w, b, params, converged, sweep)


# ------------------------------------------------------------------ linear SVR


@dataclass(frozen=True)
class SvrParams:
    epsilon: float = 0.1
    c: float = 1.0
    epochs: int = 200
    step_size: float = 0.05
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if not self.c > 0:
            raise ValueError("c must be > 0")
        if self.epochs < 0 or self.batch_size < 1 or not self.step_size > 0:
            raise ValueError("epochs >= 0, batch_size >= 1 and step_size > 0 required")


class LinearSVR(LinearModel):
    family = "svr"

    @classmethod
    def from_state(cls, s):
        return cls(s["coef"], s["intercept"], SvrParams(**s["params"]), s["converged"], s["n_iter"])


def epsilon_insensitive(residuals, epsilon):
    return np.maximum(0.0, np.abs(residuals) - epsilon)


def svr_objective(X, y, coef, intercept, epsilon, c):
    r = y - X @ coef - intercept
    return c * epsilon_insensitive(r, epsilon).sum() + 0.5 * coef @ coef


def fit_svr(X, y, params: SvrParams = SvrParams(), history=None) -> LinearSVR:
    """Linear SVR by seeded mini-batch subgradient descent.

    Minimises ``c * sum(max(0, |y - Xw - b| - eps)) + ||w||^2 / 2``. Starts at
    ``w = 0, b = median(y)`` and uses step ``step_size / sqrt(1 + epoch)``.
    The iterate with the lowest full objective seen at an epoch boundary is
    returned. ``history`` (a list) collects the objective per epoch, starting
    with the initial point.
    """
    X, y = check_xy(X, y)
    n, d = X.shape
    rng = np.random.default_rng(params.seed)
    w = np.zeros(d)
    b = float(np.median(y))
    eps, c = params.epsilon, params.c

    obj = svr_objective(X, y, w, b, eps, c)
    best = (obj, w.copy(), b)
    if history is not None:
        history.append(float(obj))
    for epoch in range(params.epochs):
        eta = params.step_size / np.sqrt(1.0 + epoch)
        order = rng.permutation(n)
        for start in range(0, n, params.batch_size):
            idx = order[start:start + params.batch_size]
            r = y[idx] - X[idx] @ w - b
            s = np.where(np.abs(r) > eps, -np.sign(r), 0.0)
            # stochastic estimate of the gradient of objective / n
            gw = c * (s @ X[idx]) / len(idx) + w / n
            gb = c * s.mean()
            w -= eta * gw
            b -= eta * gb
        obj = svr_objective(X, y, w, b, eps, c)
        if not np.isfinite(obj):
            raise ModelError(f"SVR training diverged at epoch {epoch + 1}")
        if history is not None:
            history.append(float(obj))
        if obj < best[0]:
            best = (obj, w.copy(), b)
    return LinearSVR(best[1], best[2], params, True, params.epochs)
