"""Fully connected ReLU regressor trained with mini-batch backpropagation."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .base import ModelError, Predictor, check_xy


@dataclass(frozen=True)
class MlpParams:
    hidden_width: int = 50
    n_hidden_layers: int = 1
    max_iter: int = 1000
    learning_rate: str = "adaptive"  # or "constant"
    learning_rate_init: float = 0.01
    momentum: float = 0.5
    batch_size: int = 200
    tol: float = 1e-4
    min_learning_rate: float = 1e-6
    n_iter_no_change: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.hidden_width < 1 or self.n_hidden_layers < 1:
            raise ValueError("hidden_width and n_hidden_layers must be >= 1")
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")
        if self.learning_rate not in ("adaptive", "constant"):
            raise ValueError(f"unknown learning_rate policy {self.learning_rate!r}")
        if not self.learning_rate_init > 0 or self.batch_size < 1:
            raise ValueError("learning_rate_init > 0 and batch_size >= 1 required")
        if self.n_iter_no_change < 1:
            raise ValueError("n_iter_no_change must be >= 1")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")

    def layer_sizes(self, n_in):
        return [n_in] + [self.hidden_width] * self.n_hidden_layers + [1]


def init_weights(sizes, seed):
    """Symmetric uniform init with limit sqrt(6 / (fan_in + fan_out))."""
    rng = np.random.default_rng(seed)
    weights = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        W = rng.uniform(-lim, lim, size=(fan_in, fan_out))
        b = rng.uniform(-lim, lim, size=fan_out)
        weights.append((W, b))
    return weights


def forward(weights, X):
    """Return the activations of every layer; the last one is the output column."""
    acts = [X]
    h = X
    for k, (W, b) in enumerate(weights):
        z = h @ W + b
        h = z if k == len(weights) - 1 else np.maximum(z, 0.0)
        acts.append(h)
    return acts


def loss_and_grad(weights, X, y):
    """Mean squared error of the network and its gradient per ``(W, b)``."""
    acts = forward(weights, X)
    out = acts[-1][:, 0]
    n = len(y)
    diff = out - y
    loss = float(diff @ diff / n)
    delta = (2.0 / n) * diff[:, None]
    grads = [None] * len(weights)
    for k in range(len(weights) - 1, -1, -1):
        W, _ = weights[k]
        grads[k] = (acts[k].T @ delta, delta.sum(axis=0))
        if k > 0:
            delta = (delta @ W.T) * (acts[k] > 0)
    return loss, grads


class MLP(Predictor):
    """Network on standardised targets; predictions are mapped back to RUL units."""

    family = "mlp"

    def __init__(self, weights, y_mean, y_std, params: MlpParams, n_epochs=0, loss_curve=()):
        weights = [(np.asarray(W, dtype=np.float64), np.asarray(b, dtype=np.float64)) for W, b in weights]
        super().__init__(weights[0][0].shape[0])
        self.weights = weights
        self.y_mean = float(y_mean)
        self.y_std = float(y_std)
        self.params = params
        self.n_epochs = int(n_epochs)
        self.loss_curve = list(loss_curve)

    def _predict(self, X):
        return forward(self.weights, X)[-1][:, 0] * self.y_std + self.y_mean

    def state(self):
        return {
            "params": asdict(self.params),
            "weights": [[W.tolist(), b.tolist()] for W, b in self.weights],
            "y_mean": self.y_mean,
            "y_std": self.y_std,
            "n_epochs": self.n_epochs,
            "loss_curve": self.loss_curve,
        }

    @classmethod
    def from_state(cls, s):
        return cls(
            [(W, b) for W, b in s["weights"]], s["y_mean"], s["y_std"],
            MlpParams(**s["params"]), s["n_epochs"], s["loss_curve"],
        )


def _epoch(weights, velocity, X, t, order, bs, lr, momentum):
    """One pass of momentum SGD over ``order``; returns new weights and velocities."""
    for start in range(0, len(order), bs):
        idx = order[start:start + bs]
        _, grads = loss_and_grad(weights, X[idx], t[idx])
        new_w, new_v = [], []
        for (W, b), (vW, vb), (gW, gb) in zip(weights, velocity, grads):
            vW = momentum * vW - lr * gW
            vb = momentum * vb - lr * gb
            new_w.append((W + vW, b + vb))
            new_v.append((vW, vb))
        weights, velocity = new_w, new_v
    return weights, velocity


def fit_mlp(X, y, params: MlpParams = MlpParams()) -> MLP:
    """Mini-batch gradient descent with momentum on the squared error.

    Under the ``adaptive`` policy the step size is divided by 5 whenever the
    epoch's training loss fails to improve by ``tol`` for
    ``n_iter_no_change`` (default 2) consecutive epochs. Training stops after
    ``max_iter`` epochs or once the step size falls below
    ``min_learning_rate``.
    """
    X, y = check_xy(X, y)
    n = len(y)
    y_mean = float(y.mean())
    y_std = float(y.std()) or 1.0
    t = (y - y_mean) / y_std

    weights = init_weights(params.layer_sizes(X.shape[1]), params.seed)
    velocity = [(np.zeros_like(W), np.zeros_like(b)) for W, b in weights]
    rng = np.random.default_rng(params.seed + 1)
    lr = params.learning_rate_init
    best = np.inf
    stall = 0
    curve = []
    epoch = 0
    bs = min(params.batch_size, n)
    for epoch in range(1, params.max_iter + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            weights, velocity = _epoch(weights, velocity, X, t, rng.permutation(n), bs, lr, params.momentum)
            loss = float(np.mean((forward(weights, X)[-1][:, 0] - t) ** 2))
        if not np.isfinite(loss):
            raise ModelError(f"MLP training diverged at epoch {epoch} (loss={loss})")
        curve.append(loss)
        if loss < best - params.tol:
            best = loss
            stall = 0
        else:
            stall += 1
        if params.learning_rate == "adaptive" and stall >= params.n_iter_no_change:
            lr /= 5.0
            stall = 0
            if lr < params.min_learning_rate:
                break
    return MLP(weights, y_mean, y_std, params, epoch, curve)
