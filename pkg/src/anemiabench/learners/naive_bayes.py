"""Categorical naive Bayes with Laplace smoothing."""

from __future__ import annotations

import numpy as np

from .base import ClassifierModel, as_labels, as_matrix, validate_hp


class NbModel(ClassifierModel):
    """Per-feature conditional tables under class-conditional independence.

    Operates on integer-coded categorical columns. ``column_levels``
    (per-column level counts) may be given at construction; otherwise
    levels are inferred from the training data. Values are rounded and
    clipped to the valid level range, so fractional SMOTE-interpolated
    cells degrade gracefully to their nearest level. The posterior is
    computed in log space and normalized over the two classes.
    """

    learner_id = "nb"
    hp_names = ("alpha",)

    def __init__(self, alpha: float = 1.0, column_levels=None):
        if alpha < 0:
            raise ValueError("alpha must be >= 0")
        self.alpha = float(alpha)
        self.column_levels = column_levels
        self.log_prior = None
        self.log_cond = None  # per column: (2, n_levels) log P(x=v | class)
        self.levels_ = None

    @classmethod
    def from_hp(cls, hp: dict) -> "NbModel":
        hp = validate_hp(cls.learner_id, hp, cls.hp_names)
        return cls(alpha=hp.get("alpha", 1.0))

    def _to_codes(self, X: np.ndarray) -> np.ndarray:
        codes = np.rint(X).astype(np.int64)
        for j, n_lvl in enumerate(self.levels_):
            codes[:, j] = np.clip(codes[:, j], 0, n_lvl - 1)
        return codes

    def fit(self, X, y, seed: int = 0):
        X = as_matrix(X)
        y = as_labels(y)
        n, d = X.shape
        if self.column_levels is not None:
            self.levels_ = [int(v) for v in self.column_levels]
            if len(self.levels_) != d:
                raise ValueError("column_levels length mismatch")
        else:
            self.levels_ = [
                max(2, int(np.rint(X[:, j]).max()) + 1) for j in range(d)
            ]
        codes = self._to_codes(X)

        counts = np.array([np.sum(y == 0), np.sum(y == 1)], dtype=np.float64)
        # Priors stay unsmoothed; smoothing applies to the conditionals.
        self.log_prior = np.log(np.clip(counts / n, 1e-300, None))
        self.log_cond = []
        for j in range(d):
            n_lvl = self.levels_[j]
            table = np.full((2, n_lvl), self.alpha, dtype=np.float64)
            for cls in (0, 1):
                col = codes[y == cls, j]
                table[cls] += np.bincount(col, minlength=n_lvl)
                table[cls] /= max(counts[cls] + self.alpha * n_lvl, 1e-300)
            self.log_cond.append(np.log(np.clip(table, 1e-300, None)))
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = as_matrix(X)
        codes = self._to_codes(X)
        log_post = np.tile(self.log_prior, (X.shape[0], 1))
        for j, table in enumerate(self.log_cond):
            log_post += table[:, codes[:, j]].T
        shift = log_post.max(axis=1, keepdims=True)
        unnorm = np.exp(log_post - shift)
        return unnorm[:, 1] / unnorm.sum(axis=1)

    def conditional(self, column: int, cls: int, level: int) -> float:
        """Smoothed P(x_column = level | class)."""
        return float(np.exp(self.log_cond[column][cls, level]))

    def hyperparams_dict(self) -> dict:
        return {"alpha": self.alpha}

    def params_dict(self) -> dict:
        return {
            "levels": list(self.levels_),
            "log_prior": self.log_prior.tolist(),
            "log_conditionals": [t.tolist() for t in self.log_cond],
        }
