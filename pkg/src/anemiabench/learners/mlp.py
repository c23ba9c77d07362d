"""Feed-forward neural network: ReLU hidden layers, sigmoid output."""

from __future__ import annotations

import numpy as np

from .base import ClassifierModel, as_labels, as_matrix, validate_hp
from ..errors import DivergedTrainingError


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


class MlpModel(ClassifierModel):
    """Mini-batch SGD training of a fully-connected binary classifier.

    Hidden layers use ReLU; the single output unit is a sigmoid trained
    with binary cross-entropy. Weights initialize uniformly scaled by
    1/sqrt(fan_in) from the given seed; batch order reshuffles every
    epoch deterministically. A non-finite training loss aborts the fit.
    """

    learner_id = "dnn"
    hp_names = ("hidden_sizes", "lr", "epochs", "batch_size")

    def __init__(
        self,
        hidden_sizes=(32,),
        lr: float = 1e-2,
        epochs: int = 200,
        batch_size: int = 32,
    ):
        hidden = tuple(int(h) for h in hidden_sizes)
        if not hidden:
            raise ValueError("hidden_sizes must be non-empty")
        self.hidden_sizes = hidden
        self.lr = float(lr)
        self.epochs = int(epochs)
        self.batch_size = int(batch_size)
        self.weights = None
        self.biases = None
        self.loss_curve_ = []

    @classmethod
    def from_hp(cls, hp: dict) -> "MlpModel":
        hp = validate_hp(cls.learner_id, hp, cls.hp_names)
        return cls(
            hidden_sizes=hp.get("hidden_sizes", (32,)),
            lr=hp.get("lr", 1e-2),
            epochs=hp.get("epochs", 200),
            batch_size=hp.get("batch_size", 32),
        )

    def init_params(self, n_inputs: int, seed: int, zero: bool = False):
        sizes = [n_inputs, *self.hidden_sizes, 1]
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            if zero:
                w = np.zeros((fan_in, fan_out))
            else:
                bound = 1.0 / np.sqrt(fan_in)
                w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    def _forward(self, X: np.ndarray):
        """Return per-layer activations; the last entry is the output proba."""
        acts = [X]
        h = X
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            h = _sigmoid(z) if layer == len(self.weights) - 1 else np.maximum(z, 0.0)
            acts.append(h)
        return acts

    def loss_and_gradients(self, X: np.ndarray, y: np.ndarray):
        """Mean BCE loss and its gradients w.r.t. every weight and bias."""
        n = X.shape[0]
        acts = self._forward(X)
        p = np.clip(acts[-1][:, 0], 1e-12, 1 - 1e-12)
        loss = float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        # Sigmoid + BCE: output-layer delta is (p - y) / n.
        delta = ((acts[-1][:, 0] - y) / n)[:, None]
        for layer in range(len(self.weights) - 1, -1, -1):
            grads_w[layer] = acts[layer].T @ delta
            grads_b[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer].T) * (acts[layer] > 0)
        return loss, grads_w, grads_b

    def fit(self, X, y, seed: int = 0):
        X = as_matrix(X)
        y01 = as_labels(y).astype(np.float64)
        n = X.shape[0]
        self.init_params(X.shape[1], seed)
        rng = np.random.default_rng(seed + 1)
        self.loss_curve_ = []
        for _ in range(self.epochs):
            order = rng.permutation(n)
            epoch_loss = 0.0
            for start in range(0, n, self.batch_size):
                batch = order[start : start + self.batch_size]
                loss, grads_w, grads_b = self.loss_and_gradients(X[batch], y01[batch])
                epoch_loss += loss * len(batch)
                for layer in range(len(self.weights)):
                    self.weights[layer] -= self.lr * grads_w[layer]
                    self.biases[layer] -= self.lr * grads_b[layer]
            epoch_loss /= n
            if not np.isfinite(epoch_loss):
                raise DivergedTrainingError(
                    f"training loss became non-finite ({epoch_loss})"
                )
            self.loss_curve_.append(epoch_loss)
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = as_matrix(X)
        return self._forward(X)[-1][:, 0]

    def hyperparams_dict(self) -> dict:
        return {
            "hidden_sizes": list(self.hidden_sizes),
            "lr": self.lr,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
        }

    def params_dict(self) -> dict:
        return {
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }
