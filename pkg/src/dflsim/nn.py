"""Dense feedforward classifier with explicit forward/backward passes.

All parameters live in one flat float64 vector (layer 0 weights row-major,
layer 0 biases, layer 1 weights, ...) so training, attacks, and aggregation
share a single currency. Hidden layers use ReLU; the output layer feeds a
softmax cross-entropy loss. No framework, no global state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class ModelSpec:
    """Layer widths from input to output; at least (input, output)."""

    layer_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise InputError("model needs at least an input and an output layer")
        if any(s < 1 for s in sizes):
            raise InputError(f"layer sizes must be positive, got {sizes}")

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        return list(zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    @property
    def num_params(self) -> int:
        return sum(fi * fo + fo for fi, fo in self.layer_shapes)

    @property
    def classes(self) -> int:
        return self.layer_sizes[-1]


@dataclass(frozen=True)
class TrainConfig:
    """Local SGD settings; the seed drives the epoch shuffles."""

    learning_rate: float
    batch_size: int = 64
    local_epochs: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise InputError("learning rate must be non-negative")
        if self.batch_size < 1 or self.local_epochs < 1:
            raise InputError("batch size and epoch count must be positive")


@dataclass
class Metrics:
    """Evaluation results on a labelled set."""

    loss: float
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    macro_f1: float
    weighted_f1: float

    def f1_average(self, mode: str = "macro") -> float:
        if mode == "macro":
            return self.macro_f1
        if mode == "weighted":
            return self.weighted_f1
        raise InputError(f"unknown F1 averaging mode '{mode}'")


def unflatten(params: np.ndarray, spec: ModelSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a flat parameter vector into per-layer (weights, bias) views."""
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (spec.num_params,):
        raise InputError(f"expected {spec.num_params} parameters, got shape {params.shape}")
    layers = []
    offset = 0
    for fan_in, fan_out in spec.layer_shapes:
        W = params[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        b = params[offset : offset + fan_out]
        offset += fan_out
        layers.append((W, b))
    return layers


def flatten(layers: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    """Concatenate per-layer (weights, bias) arrays back into one flat vector."""
    parts = []
    for W, b in layers:
        parts.append(np.asarray(W, dtype=np.float64).ravel())
        parts.append(np.asarray(b, dtype=np.float64).ravel())
    return np.concatenate(parts)


def init_params(spec: ModelSpec, seed: int) -> np.ndarray:
    """Glorot-uniform weights, zero biases; bit-identical for a fixed seed."""
    rng = np.random.Generator(np.random.PCG64(seed))
    layers = []
    for fan_in, fan_out in spec.layer_shapes:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        W = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        b = np.zeros(fan_out)
        layers.append((W, b))
    return flatten(layers)


def forward(params: np.ndarray, spec: ModelSpec, features: np.ndarray):
    """Run the network on a batch; returns (logits, cache) for backprop."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != spec.layer_sizes[0]:
        raise InputError(
            f"batch feature length {X.shape} does not match input size {spec.layer_sizes[0]}"
        )
    layers = unflatten(params, spec)
    activations = [X]
    preacts = []
    h = X
    for idx, (W, b) in enumerate(layers):
        z = h @ W + b
        preacts.append(z)
        if idx < len(layers) - 1:
            h = np.maximum(z, 0.0)
            activations.append(h)
    logits = preacts[-1]
    return logits, (activations, preacts)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over the batch plus the softmax probabilities."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(exp.sum(axis=1, keepdims=True))
    n = logits.shape[0]
    loss = -float(np.mean(log_probs[np.arange(n), labels]))
    return loss, probs


def backward(params: np.ndarray, spec: ModelSpec, features, labels, cache) -> np.ndarray:
    """Gradient of the mean cross-entropy, same layout as the parameter vector."""
    activations, preacts = cache
    labels = np.asarray(labels)
    layers = unflatten(params, spec)
    n = activations[0].shape[0]
    _, probs = softmax_cross_entropy(preacts[-1], labels)
    delta = probs.copy()
    delta[np.arange(n), labels] -= 1.0
    delta /= n

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(layers)
    for idx in range(len(layers) - 1, -1, -1):
        W, _ = layers[idx]
        h_in = activations[idx]
        grads[idx] = (h_in.T @ delta, delta.sum(axis=0))
        if idx > 0:
            delta = (delta @ W.T) * (preacts[idx - 1] > 0.0)
    return flatten(grads)


def local_train(
    params: np.ndarray,
    spec: ModelSpec,
    features: np.ndarray,
    labels: np.ndarray,
    cfg: TrainConfig,
) -> np.ndarray:
    """Mini-batch SGD over the shard for ``cfg.local_epochs`` epochs.

    Epoch shuffles come from a PCG64 stream seeded with ``cfg.seed``; callers
    mix client id and round index into that seed.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if len(X) == 0:
        raise InputError("training shard is empty")
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    w = np.array(params, dtype=np.float64, copy=True)
    for _ in range(cfg.local_epochs):
        order = rng.permutation(len(X))
        for start in range(0, len(X), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            logits, cache = forward(w, spec, X[batch])
            grad = backward(w, spec, X[batch], y[batch], cache)
            w -= cfg.learning_rate * grad
    return w


def evaluate(params: np.ndarray, spec: ModelSpec, features, labels) -> Metrics:
    """Loss, accuracy, and per-class precision/recall/F1 on a test set.

    Classes absent from both predictions and labels contribute F1 = 0 to the
    macro average.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if len(X) == 0:
        raise InputError("evaluation set is empty")
    logits, _ = forward(params, spec, X)
    loss, _ = softmax_cross_entropy(logits, y)
    preds = np.argmax(logits, axis=1)
    classes = spec.classes

    precision = np.zeros(classes)
    recall = np.zeros(classes)
    f1 = np.zeros(classes)
    support = np.zeros(classes)
    for c in range(classes):
        tp = float(np.sum((preds == c) & (y == c)))
        fp = float(np.sum((preds == c) & (y != c)))
        fn = float(np.sum((preds != c) & (y == c)))
        support[c] = tp + fn
        precision[c] = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall[c] = tp / (tp + fn) if tp + fn > 0 else 0.0
        denom = precision[c] + recall[c]
        f1[c] = 2.0 * precision[c] * recall[c] / denom if denom > 0 else 0.0

    accuracy = float(np.mean(preds == y))
    macro_f1 = float(np.mean(f1))
    weighted_f1 = float(np.sum(f1 * support) / len(y))
    return Metrics(loss, accuracy, precision, recall, f1, macro_f1, weighted_f1)
