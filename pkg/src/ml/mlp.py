# MLP - feed-forward classifier for PHQ-4 categories
#
# input -> 3 ReLU hidden layers -> softmax over the 4 categories.
# He-initialised weights, zero biases, categorical cross-entropy, Adam.
# Used as the Stage-2 classifier on label scores and by every baseline.
#
# Usage:
#   config = MlpConfig(input_dim=5, seed=7)
#   model = train((X_train, y_train), config)
#   predict_category(model, x)

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import List, Sequence, Tuple

import numpy as np

from ..models.records import N_CATEGORIES, Phq4Category
from ..utils.errors import (
    ArityMismatch,
    EmptyData,
    InvalidConfig,
    LengthMismatch,
    NonFiniteInput,
)
from ..utils.helpers import make_rng

# Clamp for -log(p)
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class MlpConfig:
    """Network shape and optimiser settings."""
    input_dim: int
    hidden_dims: Tuple[int, int, int] = (64, 32, 16)
    output_dim: int = N_CATEGORIES
    learning_rate: float = 0.001
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))

    def validate(self) -> MlpConfig:
        if self.input_dim < 1:
            raise InvalidConfig(f"input_dim must be >= 1, got {self.input_dim}")
        if len(self.hidden_dims) != 3 or any(h < 1 for h in self.hidden_dims):
            raise InvalidConfig(f"Exactly three positive hidden sizes required, got {self.hidden_dims}")
        if self.output_dim != N_CATEGORIES:
            raise InvalidConfig(f"output_dim must be {N_CATEGORIES}, got {self.output_dim}")
        if not self.learning_rate > 0:
            raise InvalidConfig(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise InvalidConfig(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise InvalidConfig(f"batch_size must be >= 1, got {self.batch_size}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.epsilon > 0):
            raise InvalidConfig("Adam moments must be in [0, 1) and epsilon > 0")
        return self

    @property
    def layer_dims(self) -> Tuple[int, ...]:
        return (self.input_dim, *self.hidden_dims, self.output_dim)

    def with_changes(self, **changes) -> MlpConfig:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_dims"] = list(self.hidden_dims)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> MlpConfig:
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known).validate()


@dataclass
class MlpModel:
    """Per-layer weights (fan_in x fan_out) and biases, config and loss history."""
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    config: MlpConfig
    loss_history: List[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "shapes": [list(w.shape) for w in self.weights],
            "weights": [w.ravel(order="C").tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "loss_history": list(self.loss_history),
        }

    @classmethod
    def from_dict(cls, d: dict) -> MlpModel:
        config = MlpConfig.from_dict(d["config"])
        weights = [
            np.asarray(flat, dtype=float).reshape(shape)
            for flat, shape in zip(d["weights"], d["shapes"])
        ]
        biases = [np.asarray(b, dtype=float) for b in d["biases"]]
        model = cls(weights=weights, biases=biases, config=config,
                    loss_history=[float(v) for v in d.get("loss_history", [])])
        _check_shapes(model)
        return model


@dataclass
class MlpGradients:
    weights: List[np.ndarray]
    biases: List[np.ndarray]


def _check_shapes(model: MlpModel) -> None:
    dims = model.config.layer_dims
    if len(model.weights) != len(dims) - 1 or len(model.biases) != len(dims) - 1:
        raise ArityMismatch("Layer count does not match config")
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        if w.shape != (dims[i], dims[i + 1]) or b.shape != (dims[i + 1],):
            raise ArityMismatch(f"Layer {i} shape {w.shape}/{b.shape} does not chain")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise NonFiniteInput(f"Layer {i} has non-finite parameters")


def init_model(config: MlpConfig) -> MlpModel:
    """He-normal weights (variance 2/fan_in), zero biases."""
    config.validate()
    rng = make_rng(config.seed, "mlp", "init")
    dims = config.layer_dims
    weights = [
        rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        for fan_in, fan_out in zip(dims[:-1], dims[1:])
    ]
    biases = [np.zeros(fan_out) for fan_out in dims[1:]]
    return MlpModel(weights=weights, biases=biases, config=config)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction."""
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=-1, keepdims=True)


def _as_batch(model: MlpModel, X) -> Tuple[np.ndarray, bool]:
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.config.input_dim:
        raise ArityMismatch(f"Network expects {model.config.input_dim} inputs, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("Network input contains NaN or infinity")
    return X, single


def _forward_cache(model: MlpModel, X: np.ndarray):
    """Activations (input + hidden) and pre-activations of hidden layers, plus probabilities."""
    activations = [X]
    pre = []
    a = X
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        if i == last:
            return activations, pre, softmax(z)
        pre.append(z)
        a = np.maximum(z, 0.0)
        activations.append(a)
    raise ArityMismatch("Model has no layers")  # unreachable for validated configs


def forward(model: MlpModel, x) -> np.ndarray:
    """Category probabilities for one input (or a batch, row-wise)."""
    X, single = _as_batch(model, x)
    _, _, probs = _forward_cache(model, X)
    return probs[0] if single else probs


def loss(probs: Sequence[float], true_category: int) -> float:
    """Cross-entropy -log p_true with p clamped to >= 1e-12."""
    p = float(np.asarray(probs, dtype=float)[int(true_category)])
    return float(-np.log(max(p, PROB_FLOOR)))


def batch_loss(model: MlpModel, X, y) -> float:
    X, _ = _as_batch(model, X)
    y = np.asarray(y, dtype=np.int64)
    probs = _forward_cache(model, X)[2]
    p_true = probs[np.arange(len(y)), y]
    return float(np.mean(-np.log(np.maximum(p_true, PROB_FLOOR))))


def _backward(model: MlpModel, activations, pre, probs, y) -> MlpGradients:
    batch = probs.shape[0]
    delta = probs.copy()
    delta[np.arange(batch), y] -= 1.0
    delta /= batch
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.biases)
    for i in range(len(model.weights) - 1, -1, -1):
        grads_w[i] = activations[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (pre[i - 1] > 0)
    return MlpGradients(weights=grads_w, biases=grads_b)


def grad(model: MlpModel, X, y) -> MlpGradients:
    """Mean cross-entropy gradient over the batch for every parameter."""
    X, _ = _as_batch(model, X)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] == 0:
        raise EmptyData("grad needs a non-empty batch")
    if y.shape[0] != X.shape[0]:
        raise LengthMismatch(f"{X.shape[0]} inputs for {y.shape[0]} targets")
    activations, pre, probs = _forward_cache(model, X)
    return _backward(model, activations, pre, probs, y)


def train(train_set: Tuple[np.ndarray, Sequence[int]], config: MlpConfig) -> MlpModel:
    """
    Minibatch Adam for exactly config.epochs epochs.

    train_set is (X, y) with X already scaled and y category indices 0-3.
    Shuffling is seeded per run; loss_history holds the mean pre-update
    batch loss of each epoch.
    """
    config.validate()
    X, y = train_set
    model = init_model(config)
    X, _ = _as_batch(model, X)
    y = np.asarray(y, dtype=np.int64)
    n = X.shape[0]
    if n == 0:
        raise EmptyData("Cannot train on an empty training set")
    if y.shape[0] != n:
        raise LengthMismatch(f"{n} inputs for {y.shape[0]} targets")
    if y.min() < 0 or y.max() >= config.output_dim:
        raise InvalidConfig(f"Targets must be category indices 0..{config.output_dim - 1}")

    params = model.weights + model.biases
    m_state = [np.zeros_like(p) for p in params]
    v_state = [np.zeros_like(p) for p in params]
    b1, b2, eps, lr = config.beta1, config.beta2, config.epsilon, config.learning_rate

    rng = make_rng(config.seed, "mlp", "shuffle")
    step = 0
    for _ in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb, yb = X[idx], y[idx]
            activations, pre, probs = _forward_cache(model, xb)
            epoch_loss += float(np.sum(-np.log(np.maximum(probs[np.arange(len(yb)), yb], PROB_FLOOR))))
            grads = _backward(model, activations, pre, probs, yb)

            step += 1
            correction1 = 1.0 - b1 ** step
            correction2 = 1.0 - b2 ** step
            for p, g, m, v in zip(params, grads.weights + grads.biases, m_state, v_state):
                m *= b1
                m += (1.0 - b1) * g
                v *= b2
                v += (1.0 - b2) * g * g
                p -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
        model.loss_history.append(epoch_loss / n)
    return model


def predict_category(model: MlpModel, x) -> Phq4Category:
    """Argmax category; ties go to the lower (less severe) category."""
    return Phq4Category(int(np.argmax(forward(model, x))))


def predict_batch(model: MlpModel, X) -> np.ndarray:
    return np.argmax(forward(model, np.atleast_2d(np.asarray(X, dtype=float))), axis=1)
