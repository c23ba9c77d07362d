"""Gradient-boosted trees on log-odds with second-order split gains."""

from __future__ import annotations

import math

import numpy as np

from .base import ClassifierModel, as_labels, as_matrix, validate_hp
from ._grow import grow_boost_tree, tree_apply


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


def logistic_loss(y: np.ndarray, log_odds: np.ndarray) -> float:
    """Mean negative log-likelihood at the given log-odds."""
    p = np.clip(_sigmoid(log_odds), 1e-15, 1 - 1e-15)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


class GbtModel(ClassifierModel):
    """Additive regression trees fit to the logistic loss.

    Each round fits a tree to the loss's gradient g_i = p_i - y_i and
    Hessian h_i = p_i (1 - p_i) at the current log-odds. Leaf weight is
    -sum(g)/(sum(h) + reg_lambda); splits pay a penalty ``gamma`` and are
    only kept when the resulting gain stays positive. The prediction is
    sigmoid(base_score + sum of learning_rate * tree(x)).
    """

    learner_id = "xgb"
    hp_names = (
        "n_rounds",
        "learning_rate",
        "max_depth",
        "reg_lambda",
        "gamma",
        "min_samples_leaf",
        "base_score",
    )

    def __init__(
        self,
        n_rounds: int = 100,
        learning_rate: float = 0.1,
        max_depth: int = 3,
        reg_lambda: float = 1.0,
        gamma: float = 0.0,
        min_samples_leaf: int = 1,
        base_score: float | None = None,
    ):
        if n_rounds < 1:
            raise ValueError("n_rounds must be >= 1")
        self.n_rounds = int(n_rounds)
        self.learning_rate = float(learning_rate)
        self.max_depth = int(max_depth)
        self.reg_lambda = float(reg_lambda)
        self.gamma = float(gamma)
        self.min_samples_leaf = int(min_samples_leaf)
        self.base_score = base_score
        self.base_score_ = None
        self.trees_: list[tuple[np.ndarray, ...]] = []
        self.train_loss_curve_: list[float] = []

    @classmethod
    def from_hp(cls, hp: dict) -> "GbtModel":
        hp = validate_hp(cls.learner_id, hp, cls.hp_names)
        return cls(
            n_rounds=hp.get("n_rounds", 100),
            learning_rate=hp.get("learning_rate", 0.1),
            max_depth=hp.get("max_depth", 3),
            reg_lambda=hp.get("reg_lambda", 1.0),
            gamma=hp.get("gamma", 0.0),
            min_samples_leaf=hp.get("min_samples_leaf", 1),
            base_score=hp.get("base_score"),
        )

    def fit(self, X, y, seed: int = 0):
        X = as_matrix(X)
        y01 = as_labels(y).astype(np.float64)
        n = X.shape[0]

        if self.base_score is None:
            prevalence = min(max(float(y01.mean()), 1e-12), 1 - 1e-12)
            self.base_score_ = math.log(prevalence / (1 - prevalence))
        else:
            self.base_score_ = float(self.base_score)

        # Column orders are shared by every round.
        sorted_idx = np.argsort(X, axis=0).astype(np.int64)
        sorted_idx = np.ascontiguousarray(sorted_idx)

        log_odds = np.full(n, self.base_score_, dtype=np.float64)
        self.trees_ = []
        self.train_loss_curve_ = [logistic_loss(y01, log_odds)]
        cap = 2 * n + 2
        for _ in range(self.n_rounds):
            p = _sigmoid(log_odds)
            g = p - y01
            h = p * (1.0 - p)
            feat = np.full(cap, -1, dtype=np.int64)
            thr = np.zeros(cap, dtype=np.float64)
            left = np.zeros(cap, dtype=np.int64)
            right = np.zeros(cap, dtype=np.int64)
            value = np.zeros(cap, dtype=np.float64)
            n_nodes = grow_boost_tree(
                X,
                sorted_idx,
                g,
                h,
                self.max_depth,
                self.min_samples_leaf,
                self.reg_lambda,
                self.gamma,
                feat,
                thr,
                left,
                right,
                value,
            )
            tree = (
                feat[:n_nodes].copy(),
                thr[:n_nodes].copy(),
                left[:n_nodes].copy(),
                right[:n_nodes].copy(),
                value[:n_nodes].copy(),
            )
            self.trees_.append(tree)
            leaves = tree_apply(X, *tree[:4])
            log_odds = log_odds + self.learning_rate * tree[4][leaves]
            self.train_loss_curve_.append(logistic_loss(y01, log_odds))
        return self

    def decision_function(self, X) -> np.ndarray:
        X = as_matrix(X)
        log_odds = np.full(X.shape[0], self.base_score_, dtype=np.float64)
        for feat, thr, left, right, value in self.trees_:
            leaves = tree_apply(X, feat, thr, left, right)
            log_odds += self.learning_rate * value[leaves]
        return log_odds

    def predict_proba(self, X) -> np.ndarray:
        return _sigmoid(self.decision_function(X))

    def hyperparams_dict(self) -> dict:
        return {
            "n_rounds": self.n_rounds,
            "learning_rate": self.learning_rate,
            "max_depth": self.max_depth,
            "reg_lambda": self.reg_lambda,
            "gamma": self.gamma,
            "min_samples_leaf": self.min_samples_leaf,
            "base_score": self.base_score,
        }

    def params_dict(self) -> dict:
        return {
            "base_score": self.base_score_,
            "trees": [
                {
                    "feature": feat.tolist(),
                    "threshold": thr.tolist(),
                    "left": left.tolist(),
                    "right": right.tolist(),
                    "value": value.tolist(),
                }
                for feat, thr, left, right, value in self.trees_
            ],
        }
