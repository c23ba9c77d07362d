"""K-nearest neighbors with Euclidean distance and deterministic ties."""

from __future__ import annotations

import numpy as np

from .base import ClassifierModel, as_labels, as_matrix, validate_hp


class KnnModel(ClassifierModel):
    """Majority vote over the k Euclidean-nearest stored training rows.

    Equidistant neighbors resolve by lowest row index. An exactly tied
    vote (even k) is broken by the single nearest neighbor's label, which
    is folded into the probability as half a vote so the proba >= 0.5
    prediction rule and the tie rule agree.
    """

    learner_id = "knn"
    hp_names = ("k",)

    def __init__(self, k: int = 5):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = int(k)
        self.X_train = None
        self.y_train = None

    @classmethod
    def from_hp(cls, hp: dict) -> "KnnModel":
        hp = validate_hp(cls.learner_id, hp, cls.hp_names)
        return cls(k=hp.get("k", 5))

    def fit(self, X, y, seed: int = 0):
        X = as_matrix(X)
        y = as_labels(y)
        if self.k > len(y):
            raise ValueError(f"k={self.k} exceeds training size {len(y)}")
        self.X_train = X.copy()
        self.y_train = y.copy()
        return self

    def _neighbors(self, X: np.ndarray) -> np.ndarray:
        d2 = (
            np.sum(X**2, axis=1)[:, None]
            + np.sum(self.X_train**2, axis=1)[None, :]
            - 2.0 * (X @ self.X_train.T)
        )
        # Stable sort: equidistant neighbors keep ascending row index.
        return np.argsort(d2, axis=1, kind="stable")[:, : self.k]

    def predict_proba(self, X) -> np.ndarray:
        X = as_matrix(X)
        nn = self._neighbors(X)
        votes = self.y_train[nn].sum(axis=1).astype(np.float64)
        proba = votes / self.k
        tied = votes * 2 == self.k
        if tied.any():
            nearest_label = self.y_train[nn[tied, 0]]
            proba[tied] = (votes[tied] + np.where(nearest_label == 1, 0.5, -0.5)) / self.k
        return proba

    def hyperparams_dict(self) -> dict:
        return {"k": self.k}

    def params_dict(self) -> dict:
        return {
            "X_train": self.X_train.tolist(),
            "y_train": self.y_train.tolist(),
        }
