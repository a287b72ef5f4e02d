"""From-scratch multilayer perceptron trained with resilient backpropagation.

All units are sigmoid, the loss is half the sum of squared errors over the
full batch, and training uses rprop+ (sign-driven per-parameter step sizes
with weight backtracking). A thin sklearn-style estimator wraps the core so
the classifier composes with pipelines and grid search.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

MODEL_FORMAT_VERSION = 1


@dataclass
class TrainConfig:
    hidden: tuple = (4, 2)
    threshold: float = 0.01  # stop when max |dE/dtheta| drops below this
    max_epochs: int = 1000
    rep: int = 1  # random restarts; lowest final SSE wins
    eta_plus: float = 1.2
    eta_minus: float = 0.5
    delta_zero: float = 0.1
    delta_max: float = 50.0
    delta_min: float = 1e-6
    init_scale: float = 0.5
    seed: int = 0
    class_threshold: float = 0.5

    def __post_init__(self):
        if not (self.eta_minus < 1.0 < self.eta_plus and self.eta_minus > 0):
            raise ValueError("need eta_plus > 1 > eta_minus > 0")
        if not (self.delta_min < self.delta_zero < self.delta_max):
            raise ValueError("need delta_min < delta_zero < delta_max")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


@dataclass
class Network:
    layer_sizes: tuple
    weights: list  # weights[k] has shape (layer_sizes[k], layer_sizes[k+1])
    biases: list  # biases[k] has shape (layer_sizes[k+1],)
    rng_seed: int = 0

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]


@dataclass
class RpropState:
    delta: list  # per-parameter step sizes, clamped to [delta_min, delta_max]
    prev_sign: list
    prev_step: list


@dataclass
class TrainHistory:
    sse: list = field(default_factory=list)
    epochs_run: int = 0
    stop_reason: str = "max_epochs"


def init_network(layer_sizes, seed: int = 0, init_scale: float = 0.5) -> Network:
    """Seeded uniform [-init_scale, init_scale] initialization."""
    layer_sizes = tuple(int(s) for s in layer_sizes)
    if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
        raise ValueError(f"bad layer sizes {layer_sizes}")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        weights.append(rng.uniform(-init_scale, init_scale, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-init_scale, init_scale, size=fan_out))
    return Network(layer_sizes=layer_sizes, weights=weights, biases=biases,
                   rng_seed=seed)


def sigmoid(z):
    # exp overflow just saturates the sigmoid to exactly 0, which is fine
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def forward_batch(net: Network, X) -> tuple:
    """Run a batch through the network.

    Returns (outputs, activations) where activations[0] is the input and
    activations[k] the sigmoid outputs of layer k; outputs is activations[-1]
    squeezed to shape (n,).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != net.n_inputs:
        raise ValueError(f"expected {net.n_inputs} inputs, got {X.shape[1]}")
    activations = [X]
    a = X
    for W, b in zip(net.weights, net.biases):
        a = sigmoid(a @ W + b)
        activations.append(a)
    return a[:, 0], activations


def forward(net: Network, x) -> tuple:
    """Single-observation forward pass; returns (output, activations)."""
    out, activations = forward_batch(net, np.asarray(x, dtype=float)[None, :])
    return float(out[0]), activations


def sse(outputs, targets) -> float:
    """Half the sum of squared errors between predictions and 0/1 targets."""
    outputs = np.asarray(outputs, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if outputs.shape != targets.shape:
        raise ValueError("length mismatch")
    return 0.5 * float(np.sum((outputs - targets) ** 2))


def gradient(net: Network, X, y) -> tuple:
    """Exact full-batch gradient of the SSE loss; returns (grads_w, grads_b)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    out, activations = forward_batch(net, X)
    # delta at the output: dE/dz = (o - z) * o * (1 - o)
    delta = ((out - y) * out * (1.0 - out))[:, None]
    grads_w = [None] * len(net.weights)
    grads_b = [None] * len(net.biases)
    for k in range(len(net.weights) - 1, -1, -1):
        grads_w[k] = activations[k].T @ delta
        grads_b[k] = delta.sum(axis=0)
        if k > 0:
            a = activations[k]
            delta = (delta @ net.weights[k].T) * a * (1.0 - a)
    return grads_w, grads_b


def init_rprop_state(net: Network, cfg: TrainConfig) -> RpropState:
    params = net.weights + net.biases
    return RpropState(
        delta=[np.full_like(p, cfg.delta_zero) for p in params],
        prev_sign=[np.zeros_like(p) for p in params],
        prev_step=[np.zeros_like(p) for p in params],
    )


def rprop_plus_step(net: Network, state: RpropState, grads: tuple,
                    prev_loss: float, cur_loss: float,
                    cfg: TrainConfig) -> tuple:
    """One rprop+ update, in place.

    Per parameter: an unchanged gradient sign grows the step and moves against
    the gradient; a sign flip shrinks the step, reverts the previous move when
    the loss got worse, and skips this move; a zero sign product moves with
    the current step size unchanged.
    """
    grads_flat = list(grads[0]) + list(grads[1])
    params = net.weights + net.biases
    worse = cur_loss > prev_loss
    for p, g, delta, prev_sign, prev_step in zip(
            params, grads_flat, state.delta, state.prev_sign, state.prev_step):
        sign = np.sign(g)
        prod = sign * prev_sign
        grow = prod > 0
        flip = prod < 0
        same = prod == 0

        delta[grow] = np.minimum(delta[grow] * cfg.eta_plus, cfg.delta_max)
        delta[flip] = np.maximum(delta[flip] * cfg.eta_minus, cfg.delta_min)

        step = np.zeros_like(p)
        move = grow | same
        step[move] = -sign[move] * delta[move]
        if worse:
            step[flip] = -prev_step[flip]  # backtrack the harmful move
        p += step

        new_sign = sign.copy()
        new_sign[flip] = 0.0
        prev_sign[:] = new_sign
        prev_step[:] = step
    return net, state


def _max_abs_gradient(grads) -> float:
    return max(float(np.max(np.abs(g))) if g.size else 0.0
               for g in list(grads[0]) + list(grads[1]))


def _train_once(X, y, cfg: TrainConfig, seed: int) -> tuple:
    layer_sizes = (X.shape[1], *cfg.hidden, 1)
    net = init_network(layer_sizes, seed=seed, init_scale=cfg.init_scale)
    state = init_rprop_state(net, cfg)
    history = TrainHistory()
    prev_loss = float("inf")
    for _ in range(cfg.max_epochs):
        out, _ = forward_batch(net, X)
        loss = sse(out, y)
        grads = gradient(net, X, y)
        history.sse.append(loss)
        history.epochs_run += 1
        if _max_abs_gradient(grads) < cfg.threshold:
            history.stop_reason = "threshold"
            break
        rprop_plus_step(net, state, grads, prev_loss, loss, cfg)
        prev_loss = loss
    return net, history


def train(X, y, cfg: TrainConfig) -> tuple:
    """Full-batch rprop+ training with restarts; lowest final SSE wins.

    Restart r uses seed cfg.seed + r, so a run is reproducible end to end.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] < 2:
        raise ValueError("need at least 2 training examples")
    if len(np.unique(y)) < 2:
        raise ValueError("degenerate target: only one class present")
    best = None
    for r in range(max(1, cfg.rep)):
        net, history = _train_once(X, y, cfg, seed=cfg.seed + r)
        if best is None or history.sse[-1] < best[1].sse[-1]:
            best = (net, history)
    return best


def predict(net: Network, x, class_threshold: float = 0.5) -> tuple:
    """Return (probability, class); class 1 when probability >= threshold."""
    prob, _ = forward(net, x)
    return prob, int(prob >= class_threshold)


# ---------------------------------------------------------------------------
# sklearn-style estimator


def _check_X(X, n_features: Optional[int] = None):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.ndim != 2:
        raise ValueError("X must be 2-dimensional")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"X has {X.shape[1]} features, expected {n_features}")
    return X


class BiasClassifier(BaseEstimator, ClassifierMixin):
    """Binary classifier for biased-user prediction.

    Inputs are expected to be min-max normalized behavior features. With
    ``balance=True`` the majority class is undersampled (seeded) before
    training, which matters because biased users are a small minority.
    """

    def __init__(self, hidden=(4, 2), threshold=0.01, max_epochs=1000, rep=1,
                 eta_plus=1.2, eta_minus=0.5, delta_zero=0.1, delta_max=50.0,
                 delta_min=1e-6, init_scale=0.5, seed=0, class_threshold=0.5,
                 balance=True):
        self.hidden = hidden
        self.threshold = threshold
        self.max_epochs = max_epochs
        self.rep = rep
        self.eta_plus = eta_plus
        self.eta_minus = eta_minus
        self.delta_zero = delta_zero
        self.delta_max = delta_max
        self.delta_min = delta_min
        self.init_scale = init_scale
        self.seed = seed
        self.class_threshold = class_threshold
        self.balance = balance

    def _config(self) -> TrainConfig:
        return TrainConfig(
            hidden=tuple(self.hidden), threshold=self.threshold,
            max_epochs=self.max_epochs, rep=self.rep, eta_plus=self.eta_plus,
            eta_minus=self.eta_minus, delta_zero=self.delta_zero,
            delta_max=self.delta_max, delta_min=self.delta_min,
            init_scale=self.init_scale, seed=self.seed,
            class_threshold=self.class_threshold)

    def fit(self, X, y):
        X = _check_X(X)
        y = np.asarray(y, dtype=int).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y length mismatch")
        if self.balance:
            X, y = undersample_majority(X, y, seed=self.seed)
        self.network_, self.history_ = train(X, y, self._config())
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        X = _check_X(X, getattr(self, "n_features_in_", None))
        out, _ = forward_batch(self.network_, X)
        return np.column_stack([1.0 - out, out])

    def predict(self, X):
        proba = self.predict_proba(X)[:, 1]
        return (proba >= self.class_threshold).astype(int)


def undersample_majority(X, y, seed: int = 0):
    """Seeded undersampling of the majority class down to the minority size."""
    y = np.asarray(y)
    idx0 = np.flatnonzero(y == 0)
    idx1 = np.flatnonzero(y == 1)
    if len(idx0) == 0 or len(idx1) == 0:
        raise ValueError("degenerate target: only one class present")
    rng = np.random.default_rng(seed)
    if len(idx0) > len(idx1):
        idx0 = rng.choice(idx0, size=len(idx1), replace=False)
    elif len(idx1) > len(idx0):
        idx1 = rng.choice(idx1, size=len(idx0), replace=False)
    keep = np.sort(np.concatenate([idx0, idx1]))
    return X[keep], y[keep]


# ---------------------------------------------------------------------------
# model persistence


def save_model(path, net: Network, feature_names, norm_bounds,
               class_threshold: float = 0.5) -> None:
    """Persist a trained network plus the feature scaling needed to apply it.

    ``norm_bounds`` maps feature name -> (min, max) from the training
    population. Written atomically.
    """
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "layer_sizes": list(net.layer_sizes),
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
        "rng_seed": net.rng_seed,
        "feature_names": list(feature_names),
        "norm_bounds": {name: [float(lo), float(hi)]
                        for name, (lo, hi) in norm_bounds.items()},
        "class_threshold": class_threshold,
    }
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def load_model(path, expected_features=None) -> tuple:
    """Load a persisted model; returns (net, feature_names, norm_bounds, threshold)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format {doc.get('format_version')!r}")
    names = list(doc["feature_names"])
    if expected_features is not None and list(expected_features) != names:
        raise ValueError(
            f"model features {names} do not match expected {list(expected_features)}")
    net = Network(
        layer_sizes=tuple(doc["layer_sizes"]),
        weights=[np.asarray(w, dtype=float) for w in doc["weights"]],
        biases=[np.asarray(b, dtype=float) for b in doc["biases"]],
        rng_seed=int(doc.get("rng_seed", 0)),
    )
    bounds = {name: tuple(v) for name, v in doc["norm_bounds"].items()}
    return net, names, bounds, float(doc["class_threshold"])
