"""Logistic regression fit by Newton/IRLS with optional L2 penalty."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import ClassifierModel, as_labels, as_matrix, validate_hp
from ..errors import DivergenceError, RankDeficiencyError


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


@dataclass
class IrlsResult:
    beta: np.ndarray        # intercept first
    hessian: np.ndarray     # observed information at the optimum (incl. penalty)
    n_iter: int
    converged: bool
    grad_norm: float


def irls_fit(
    X: np.ndarray,
    y: np.ndarray,
    l2: float = 0.0,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> IrlsResult:
    """Newton minimization of the penalized negative log-likelihood.

    Objective: NLL(beta) + (l2/2) * ||w||^2 with the intercept (first
    coefficient) unpenalized. Stops when the gradient norm drops to
    ``tol``. Newton steps are halved while they fail to decrease the
    objective, which keeps separation-prone fits from overshooting.
    """
    n, d = X.shape
    Z = np.hstack([np.ones((n, 1)), X])
    beta = np.zeros(d + 1)
    penalty_mask = np.ones(d + 1)
    penalty_mask[0] = 0.0

    def objective(b):
        eta = Z @ b
        # log(1 + exp(eta)) - y*eta, computed stably
        nll = float(np.sum(np.logaddexp(0.0, eta) - y * eta))
        return nll + 0.5 * l2 * float(np.sum(penalty_mask * b * b))

    obj = objective(beta)
    grad_norm = np.inf
    hessian = None
    for it in range(1, max_iter + 1):
        p = _sigmoid(Z @ beta)
        grad = Z.T @ (p - y) + l2 * penalty_mask * beta
        grad_norm = float(np.linalg.norm(grad))
        w = p * (1.0 - p)
        hessian = (Z * w[:, None]).T @ Z + l2 * np.diag(penalty_mask)
        if grad_norm <= tol:
            return IrlsResult(beta, hessian, it - 1, True, grad_norm)
        try:
            step = np.linalg.solve(hessian, grad)
        except np.linalg.LinAlgError as exc:
            raise RankDeficiencyError(
                f"singular information matrix at iteration {it}"
            ) from exc
        # Backtracking on the Newton step.
        scale = 1.0
        for _ in range(50):
            candidate = beta - scale * step
            cand_obj = objective(candidate)
            if np.isfinite(cand_obj) and cand_obj <= obj + 1e-12:
                break
            scale *= 0.5
        beta = beta - scale * step
        obj = objective(beta)
        if not np.isfinite(obj) or np.abs(beta).max() > 1e10:
            raise DivergenceError(
                "logistic fit diverged (perfect separation?); use l2 > 0"
            )
    p = _sigmoid(Z @ beta)
    grad = Z.T @ (p - y) + l2 * penalty_mask * beta
    grad_norm = float(np.linalg.norm(grad))
    w = p * (1.0 - p)
    hessian = (Z * w[:, None]).T @ Z + l2 * np.diag(penalty_mask)
    return IrlsResult(beta, hessian, max_iter, grad_norm <= tol, grad_norm)


class LogisticModel(ClassifierModel):
    """L2-regularized logistic regression (intercept unpenalized)."""

    learner_id = "lr"
    hp_names = ("l2",)

    def __init__(self, l2: float = 1.0):
        if l2 < 0:
            raise ValueError("l2 must be >= 0")
        self.l2 = float(l2)
        self.weights = None
        self.bias = None
        self.n_iter_ = 0
        self.converged_ = False

    @classmethod
    def from_hp(cls, hp: dict) -> "LogisticModel":
        hp = validate_hp(cls.learner_id, hp, cls.hp_names)
        return cls(l2=hp.get("l2", 1.0))

    def fit(self, X, y, seed: int = 0):
        X = as_matrix(X)
        y01 = as_labels(y).astype(np.float64)
        if y01.min() == y01.max():
            raise ValueError("both classes must be present")
        result = irls_fit(X, y01, l2=self.l2)
        if self.l2 == 0.0:
            # Without a penalty the MLE escapes to infinity under perfect
            # separation; a (near-)zero training residual is the signature.
            p = _sigmoid(np.hstack([np.ones((len(y01), 1)), X]) @ result.beta)
            if not result.converged or np.abs(p - y01).max() < 1e-4:
                raise DivergenceError(
                    "unregularized fit shows perfect separation; use l2 > 0"
                )
        self.bias = float(result.beta[0])
        self.weights = result.beta[1:].copy()
        self.n_iter_ = result.n_iter
        self.converged_ = result.converged
        return self

    def decision_function(self, X) -> np.ndarray:
        X = as_matrix(X)
        return X @ self.weights + self.bias

    def predict_proba(self, X) -> np.ndarray:
        return _sigmoid(self.decision_function(X))

    def hyperparams_dict(self) -> dict:
        return {"l2": self.l2}

    def params_dict(self) -> dict:
        return {"bias": self.bias, "weights": self.weights.tolist()}
