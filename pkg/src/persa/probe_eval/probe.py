"""Pooled features and a softmax-regression probe trained by full-batch gradient descent."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ProbeHyper:
    lr: float = 0.1
    epochs: int = 500
    l2: float = 1e-4
    seed: int = 0


@dataclass
class ProbeModel:
    W: np.ndarray  # (C, D)
    b: np.ndarray  # (C,)
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    loss_history: list[float] = field(default_factory=list)
    hyper: ProbeHyper = field(default_factory=ProbeHyper)

    @property
    def n_classes(self) -> int:
        return self.W.shape[0]

    def standardize(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.feature_mean) / self.feature_scale

    def logits(self, X) -> np.ndarray:
        return self.standardize(X) @ self.W.T + self.b

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.logits(X), axis=1)


def pool_features(x) -> np.ndarray:
    """Per-band time mean followed by per-band (population) time std: length 2M."""
    v = np.asarray(x, dtype=np.float64)
    return np.concatenate([v.mean(axis=0), v.std(axis=0)])


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grad(W, b, X, Y, l2):
    """Mean cross-entropy plus ``l2/2 * ||W||^2``, and its gradient.

    Args:
        W: (C, D) weights.  b: (C,) biases.
        X: (n, D) standardized features.  Y: (n, C) one-hot targets.

    Returns:
        (loss, dW, db)
    """
    n = X.shape[0]
    z = X @ W.T + b
    z = z - z.max(axis=1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -np.sum(Y * log_p) / n + 0.5 * l2 * np.sum(W * W)
    diff = (np.exp(log_p) - Y) / n
    return loss, diff.T @ X + l2 * W, diff.sum(axis=0)


def train_probe(features, labels, hyper: ProbeHyper | None = None,
                n_classes: int | None = None) -> ProbeModel:
    """Fit the probe on ``features`` standardized with their own statistics.

    Parameters start at zero, so the fit is fully deterministic; ``hyper.seed``
    is only recorded.  A step that would raise the loss is halved until it
    does not, which keeps the loss history non-increasing.
    """
    hyper = hyper or ProbeHyper()
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] == 0:
        raise ValueError("features must be (n, D) with one label per row")
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("need at least 2 classes to train a classifier")
    C = int(n_classes if n_classes is not None else y.max() + 1)

    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale < 1e-12] = 1.0
    Xs = (X - mean) / scale
    Y = np.eye(C)[y]

    W = np.zeros((C, X.shape[1]))
    b = np.zeros(C)
    loss, dW, db = loss_and_grad(W, b, Xs, Y, hyper.l2)
    history = [float(loss)]
    for _ in range(hyper.epochs):
        step = hyper.lr
        while True:
            W_new, b_new = W - step * dW, b - step * db
            new_loss, new_dW, new_db = loss_and_grad(W_new, b_new, Xs, Y, hyper.l2)
            if new_loss <= loss or step < 1e-12:
                break
            step *= 0.5
        if new_loss > loss:
            break
        W, b, loss, dW, db = W_new, b_new, new_loss, new_dW, new_db
        history.append(float(loss))
    return ProbeModel(W, b, mean, scale, history, hyper)


def evaluate(model: ProbeModel, features, labels) -> float:
    y = np.asarray(labels)
    if y.size == 0:
        raise ValueError("empty test set")
    return float(np.mean(model.predict(features) == y))
