"""Linear discriminant analysis via the closed-form two-class solution."""

from __future__ import annotations

import math

import numpy as np

from .base import ClassifierModel, as_labels, as_matrix, validate_hp
from ..errors import SingularScatterError


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


class LdaModel(ClassifierModel):
    """Fisher discriminant with a shared-covariance Gaussian classifier.

    For two classes the generalized eigenproblem S_B w = lambda S_W w has
    the closed-form solution w proportional to S_W^{-1} (mu_1 - mu_0).
    Classification uses the Gaussian discriminant with pooled covariance,
    whose log-odds are linear: w^T x + b with
    b = -0.5 (mu_1 + mu_0)^T w + log(pi_1 / pi_0). The shrinkage term
    ``eps`` is added to the within-class scatter before inversion.
    """

    learner_id = "lda"
    hp_names = ("eps",)

    def __init__(self, eps: float = 1e-4):
        if eps < 0:
            raise ValueError("eps must be >= 0")
        self.eps = float(eps)
        self.direction = None
        self.bias = None
        self.class_means_ = None
        self.scatter_within_ = None

    @classmethod
    def from_hp(cls, hp: dict) -> "LdaModel":
        hp = validate_hp(cls.learner_id, hp, cls.hp_names)
        return cls(eps=hp.get("eps", 1e-4))

    def fit(self, X, y, seed: int = 0):
        X = as_matrix(X)
        y = as_labels(y)
        n, d = X.shape
        n1 = int(y.sum())
        n0 = n - n1
        if n0 == 0 or n1 == 0:
            raise ValueError("both classes must be present")
        mu0 = X[y == 0].mean(axis=0)
        mu1 = X[y == 1].mean(axis=0)
        centered0 = X[y == 0] - mu0
        centered1 = X[y == 1] - mu1
        scatter = centered0.T @ centered0 + centered1.T @ centered1
        scatter_shrunk = scatter + self.eps * np.eye(d)
        # MLE pooled covariance (divide by n): keeps the fitted decision
        # function exactly invariant under duplicating every training row.
        cov = scatter_shrunk / n
        try:
            self.direction = np.linalg.solve(cov, mu1 - mu0)
        except np.linalg.LinAlgError as exc:
            raise SingularScatterError(
                "within-class scatter is singular; use eps > 0"
            ) from exc
        if not np.isfinite(self.direction).all():
            raise SingularScatterError(
                "within-class scatter is singular; use eps > 0"
            )
        cond = np.linalg.cond(cov)
        if self.eps == 0 and cond > 1e12:
            raise SingularScatterError(
                f"within-class scatter nearly singular (cond {cond:.2e}); "
                "use eps > 0"
            )
        self.bias = float(
            -0.5 * (mu1 + mu0) @ self.direction + math.log(n1 / n0)
        )
        self.class_means_ = (mu0.copy(), mu1.copy())
        self.scatter_within_ = scatter_shrunk
        return self

    def decision_function(self, X) -> np.ndarray:
        X = as_matrix(X)
        return X @ self.direction + self.bias

    def predict_proba(self, X) -> np.ndarray:
        return _sigmoid(self.decision_function(X))

    def hyperparams_dict(self) -> dict:
        return {"eps": self.eps}

    def params_dict(self) -> dict:
        return {
            "direction": self.direction.tolist(),
            "bias": self.bias,
            "mean_class0": self.class_means_[0].tolist(),
            "mean_class1": self.class_means_[1].tolist(),
        }
