"""k-nearest-neighbour regression and a multilayer-perceptron regressor."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class KnnSpec:
    k: int = 5
    weighting: str = "uniform"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.weighting not in ("uniform", "inverse_distance"):
            raise ValueError(f"unknown weighting {self.weighting!r}")


@dataclass(frozen=True, eq=False)
class KnnModel:
    spec: KnnSpec
    X: np.ndarray
    y: np.ndarray

    def neighbours(self, X) -> tuple[np.ndarray, np.ndarray]:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.X.shape[1]:
            raise ValueError(f"expected {self.X.shape[1]} features, got {X.shape}")
        k = self.spec.k
        if k > len(self.y):
            raise ValueError(f"k={k} exceeds the {len(self.y)} training samples")
        d2 = (np.sum(X**2, axis=1)[:, None] + np.sum(self.X**2, axis=1)[None, :]
              - 2.0 * X @ self.X.T)
        np.maximum(d2, 0.0, out=d2)
        # stable sort: equal distances keep the lower training index first
        idx = np.argsort(d2, axis=1, kind="stable")[:, :k]
        return idx, np.sqrt(np.take_along_axis(d2, idx, axis=1))

    def predict(self, X) -> np.ndarray:
        idx, dist = self.neighbours(X)
        vals = self.y[idx]
        if self.spec.weighting == "uniform":
            return vals.mean(axis=1)
        with np.errstate(divide="ignore"):
            w = 1.0 / dist
        exact = np.isinf(w)
        rows = exact.any(axis=1)
        w[rows] = exact[rows].astype(np.float64)
        return np.sum(w * vals, axis=1) / np.sum(w, axis=1)


def fit_knn(spec: KnnSpec, features, target) -> KnnModel:
    X = np.array(features, dtype=np.float64)
    y = np.array(target, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ValueError("features and target disagree in length")
    if spec.k > len(y):
        raise ValueError(f"k={spec.k} exceeds the {len(y)} training samples")
    return KnnModel(spec, X, y)


# ------------------------------------------------------------------ MLP

_ACTIVATIONS = ("relu", "tanh", "logistic")


@dataclass(frozen=True)
class MlpSpec:
    hidden_layers: tuple[int, ...] = (100,)
    activation: str = "relu"
    step_size: float = 1e-3
    l2_penalty: float = 1e-4
    max_iterations: int = 200
    batch_size: int | None = None
    tol: float = 1e-4
    n_iter_no_change: int = 10
    beta_1: float = 0.9
    beta_2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not self.hidden_layers or any(h < 1 for h in self.hidden_layers):
            raise ValueError("need at least one hidden layer of positive width")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be >= 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def _act(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return 1.0 / (1.0 + np.exp(-z))


def _act_grad(name, a):
    """Derivative expressed through the activation output ``a``."""
    if name == "relu":
        return (a > 0).astype(np.float64)
    if name == "tanh":
        return 1.0 - a**2
    return a * (1.0 - a)


def forward(weights, biases, activation, X) -> list[np.ndarray]:
    acts = [X]
    for layer, (W, b) in enumerate(zip(weights, biases)):
        z = acts[-1] @ W + b
        acts.append(z if layer == len(weights) - 1 else _act(activation, z))
    return acts


def loss_and_gradients(weights, biases, activation, l2_penalty, X, y):
    """Half mean squared error plus ``l2_penalty / (2 n)`` times the squared weights."""
    n = X.shape[0]
    acts = forward(weights, biases, activation, X)
    out = acts[-1][:, 0]
    resid = out - y
    loss = 0.5 * float(resid @ resid) / n
    loss += 0.5 * l2_penalty * sum(float(np.sum(W * W)) for W in weights) / n
    gw = [None] * len(weights)
    gb = [None] * len(weights)
    delta = resid[:, None] / n
    for layer in range(len(weights) - 1, -1, -1):
        gw[layer] = acts[layer].T @ delta + l2_penalty * weights[layer] / n
        gb[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ weights[layer].T) * _act_grad(activation, acts[layer])
    return loss, gw, gb


@dataclass(frozen=True, eq=False)
class MlpModel:
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    activation: str
    loss_curve: tuple[float, ...] = ()
    converged: bool = False
    n_iter: int = 0
    diagnostics: dict = field(default_factory=dict)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.weights[0].shape[0]:
            raise ValueError(f"expected {self.weights[0].shape[0]} features, got {X.shape}")
        return forward(self.weights, self.biases, self.activation, X)[-1][:, 0]


def init_parameters(layer_sizes, activation, rng):
    weights, biases = [], []
    factor = 2.0 if activation == "logistic" else 6.0
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = np.sqrt(factor / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, fan_out))
    return weights, biases


def fit_mlp(spec: MlpSpec, features, target) -> MlpModel:
    """Adam over shuffled mini-batches; stops after ``n_iter_no_change`` flat epochs."""
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != len(y) or len(y) == 0:
        raise ValueError("features and target disagree in length")
    n = len(y)
    rng = np.random.default_rng(spec.seed)
    sizes = [X.shape[1], *spec.hidden_layers, 1]
    weights, biases = init_parameters(sizes, spec.activation, rng)
    params = weights + biases
    m = [np.zeros_like(q) for q in params]
    v = [np.zeros_like(q) for q in params]
    batch = min(spec.batch_size or 200, n)
    t = 0
    best = np.inf
    flat = 0
    curve: list[float] = []
    converged = False
    for epoch in range(spec.max_iterations):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            loss, gw, gb = loss_and_gradients(weights, biases, spec.activation,
                                              spec.l2_penalty, X[idx], y[idx])
            total += loss * len(idx)
            t += 1
            lr = spec.step_size * np.sqrt(1 - spec.beta_2**t) / (1 - spec.beta_1**t)
            for q, g, mq, vq in zip(params, gw + gb, m, v):
                mq *= spec.beta_1
                mq += (1 - spec.beta_1) * g
                vq *= spec.beta_2
                vq += (1 - spec.beta_2) * g * g
                q -= lr * mq / (np.sqrt(vq) + spec.adam_epsilon)
        epoch_loss = total / n
        if not np.isfinite(epoch_loss):
            raise FloatingPointError(f"non-finite MLP training loss at epoch {epoch}")
        curve.append(epoch_loss)
        if epoch_loss > best - spec.tol:
            flat += 1
        else:
            flat = 0
        best = min(best, epoch_loss)
        if flat > spec.n_iter_no_change:
            converged = True
            break
    return MlpModel(tuple(weights), tuple(biases), spec.activation, tuple(curve),
                    converged, len(curve))
