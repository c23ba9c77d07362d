"""Shared classifier contract and hyperparameter validation."""

from __future__ import annotations

import json
from abc import ABC, abstractmethod

import numpy as np

from ..errors import ConfigError

SERIAL_FORMAT_VERSION = 1


def validate_hp(learner_id: str, hp: dict, allowed: tuple[str, ...]) -> dict:
    """Reject unknown hyperparameter keys; return a plain dict copy."""
    unknown = sorted(set(hp) - set(allowed))
    if unknown:
        raise ConfigError(
            f"{learner_id}: unknown hyperparameters {unknown}; "
            f"allowed: {sorted(allowed)}"
        )
    return dict(hp)


class ClassifierModel(ABC):
    """Binary classifier: fit once, then predict class-1 probabilities.

    ``predict`` is 1 exactly when ``predict_proba`` is at least 0.5, for
    every learner. Fitted models are immutable and safe to share across
    threads.
    """

    learner_id: str = ""

    @abstractmethod
    def fit(self, X, y, seed: int = 0) -> "ClassifierModel":
        ...

    @abstractmethod
    def predict_proba(self, X) -> np.ndarray:
        ...

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int8)

    @abstractmethod
    def params_dict(self) -> dict:
        """Fitted parameters as JSON-serializable structures."""

    def hyperparams_dict(self) -> dict:
        return {}

    def to_json(self) -> str:
        return json.dumps(
            {
                "format_version": SERIAL_FORMAT_VERSION,
                "learner": self.learner_id,
                "hyperparameters": self.hyperparams_dict(),
                "parameters": self.params_dict(),
            },
            sort_keys=True,
        )


def as_matrix(X) -> np.ndarray:
    arr = np.ascontiguousarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected 2-D matrix, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("matrix contains non-finite values")
    return arr


def as_labels(y) -> np.ndarray:
    arr = np.asarray(y).astype(np.int8).ravel()
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    return arr
