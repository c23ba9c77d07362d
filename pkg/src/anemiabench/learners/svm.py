"""Soft-margin SVM trained by SMO, with sigmoid-calibrated probabilities."""

from __future__ import annotations

import math
import warnings

import numpy as np

from .base import ClassifierModel, as_labels, as_matrix, validate_hp
from .logistic import irls_fit
from ._smo import smo_solve

SUPPORT_EPS = 1e-10


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


def kernel_matrix(A: np.ndarray, B: np.ndarray, kernel: str, gamma: float) -> np.ndarray:
    if kernel == "linear":
        return A @ B.T
    if kernel == "rbf":
        d2 = (
            np.sum(A**2, axis=1)[:, None]
            + np.sum(B**2, axis=1)[None, :]
            - 2.0 * (A @ B.T)
        )
        return np.exp(-gamma * np.maximum(d2, 0.0))
    raise ValueError(f"unknown kernel {kernel!r}")


def platt_calibrate(decisions: np.ndarray, y: np.ndarray):
    """Fit sigma(A*d + B) to labels by Newton steps on the Bernoulli NLL.

    Targets are smoothed per Platt (t+ = (N+ + 1)/(N+ + 2),
    t- = 1/(N- + 2)) so separable decision values cannot push the slope
    to infinity. Returns (A, B).
    """
    from .logistic import irls_fit

    n_pos = int(np.sum(y == 1))
    n_neg = len(y) - n_pos
    t = np.where(y == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    if np.ptp(decisions) < 1e-12:
        mean_t = float(np.mean(t))
        return 0.0, math.log(mean_t / (1.0 - mean_t))
    result = irls_fit(decisions[:, None], t.astype(np.float64), l2=0.0)
    return float(result.beta[1]), float(result.beta[0])


class SvmModel(ClassifierModel):
    """Maximum-margin classifier in dual form.

    The decision value is sum_i alpha_i y_i K(x_i, x) + b with the box
    constraint 0 <= alpha_i <= C enforced by SMO to a KKT tolerance of
    1e-3. Probabilities come from a logistic calibration fit on the
    training decision values. If the solver hits its pass cap, the
    best-so-far model is kept and ``converged_`` is False.
    """

    learner_id = "svm"
    hp_names = ("C", "kernel", "gamma")

    def __init__(self, C: float = 1.0, kernel: str = "linear", gamma: float | None = None):
        if C <= 0:
            raise ValueError("C must be > 0")
        if kernel not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel {kernel!r}")
        self.C = float(C)
        self.kernel = kernel
        self.gamma = gamma
        self.gamma_ = None
        self.support_vectors_ = None
        self.dual_coef_ = None  # alpha_i * y_i over support vectors
        self.bias_ = 0.0
        self.converged_ = False
        self.calib_a_ = -1.0
        self.calib_b_ = 0.0
        self.alpha_ = None

    @classmethod
    def from_hp(cls, hp: dict) -> "SvmModel":
        hp = validate_hp(cls.learner_id, hp, cls.hp_names)
        return cls(
            C=hp.get("C", 1.0),
            kernel=hp.get("kernel", "linear"),
            gamma=hp.get("gamma"),
        )

    def fit(self, X, y, seed: int = 0, max_passes: int = 400):
        X = as_matrix(X)
        y01 = as_labels(y)
        if y01.min() == y01.max():
            raise ValueError("both classes must be present")
        y_pm = (2.0 * y01 - 1.0).astype(np.float64)
        self.gamma_ = (
            float(self.gamma) if self.gamma is not None else 1.0 / X.shape[1]
        )
        K = kernel_matrix(X, X, self.kernel, self.gamma_)
        alpha, b, converged, _ = smo_solve(
            np.ascontiguousarray(K), y_pm, self.C, 1e-3, 1e-8, max_passes
        )
        self.converged_ = bool(converged)
        if not self.converged_:
            warnings.warn(
                "SMO hit its pass cap before reaching KKT tolerance; "
                "keeping the best iterate",
                RuntimeWarning,
                stacklevel=2,
            )
        self.alpha_ = alpha
        support = alpha > SUPPORT_EPS
        self.support_vectors_ = X[support].copy()
        self.dual_coef_ = (alpha * y_pm)[support].copy()
        self.bias_ = float(b)
        decisions = self._decision_from_parts(X)
        self.calib_a_, self.calib_b_ = platt_calibrate(decisions, y01)
        return self

    def _decision_from_parts(self, X: np.ndarray) -> np.ndarray:
        if len(self.dual_coef_) == 0:
            return np.full(X.shape[0], self.bias_)
        Kx = kernel_matrix(X, self.support_vectors_, self.kernel, self.gamma_)
        return Kx @ self.dual_coef_ + self.bias_

    def decision_function(self, X) -> np.ndarray:
        return self._decision_from_parts(as_matrix(X))

    def predict_proba(self, X) -> np.ndarray:
        d = self.decision_function(X)
        return _sigmoid(self.calib_a_ * d + self.calib_b_)

    def hyperparams_dict(self) -> dict:
        return {"C": self.C, "kernel": self.kernel, "gamma": self.gamma}

    def params_dict(self) -> dict:
        return {
            "support_vectors": self.support_vectors_.tolist(),
            "dual_coef": self.dual_coef_.tolist(),
            "bias": self.bias_,
            "gamma": self.gamma_,
            "calibration": [self.calib_a_, self.calib_b_],
        }
