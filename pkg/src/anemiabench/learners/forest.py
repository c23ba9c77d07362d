"""Random forest: bootstrapped Gini trees with per-split feature subsets."""

from __future__ import annotations

import math

import numpy as np

from .base import ClassifierModel, as_labels, as_matrix, validate_hp
from .tree import TreeModel
from ..seeding import subseed


class ForestModel(ClassifierModel):
    """Ensemble of CART trees on bootstrap samples.

    Each tree draws n rows with replacement (seeded per tree) and
    considers ``m_features`` random columns per split (default sqrt(d)).
    ``predict_proba`` is the mean of tree leaf probabilities;
    ``vote`` exposes the majority vote over tree predictions.
    """

    learner_id = "rf"
    hp_names = ("n_trees", "max_depth", "m_features", "min_samples_leaf", "bootstrap")

    def __init__(
        self,
        n_trees: int = 100,
        max_depth=None,
        m_features=None,
        min_samples_leaf: int = 1,
        bootstrap: bool = True,
    ):
        if n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        self.n_trees = int(n_trees)
        self.max_depth = max_depth
        self.m_features = m_features
        self.min_samples_leaf = int(min_samples_leaf)
        self.bootstrap = bool(bootstrap)
        self.trees: list[TreeModel] = []
        self.tree_seeds: list[int] = []
        self.importances_ = None

    @classmethod
    def from_hp(cls, hp: dict) -> "ForestModel":
        hp = validate_hp(cls.learner_id, hp, cls.hp_names)
        return cls(
            n_trees=hp.get("n_trees", 100),
            max_depth=hp.get("max_depth"),
            m_features=hp.get("m_features"),
            min_samples_leaf=hp.get("min_samples_leaf", 1),
            bootstrap=hp.get("bootstrap", True),
        )

    def fit(self, X, y, seed: int = 0):
        X = as_matrix(X)
        y = as_labels(y)
        n, d = X.shape
        m = self.m_features if self.m_features else max(1, round(math.sqrt(d)))
        self.trees = []
        self.tree_seeds = []
        importances = np.zeros(d, dtype=np.float64)
        for t in range(self.n_trees):
            tree_seed = subseed(seed, "tree", t)
            self.tree_seeds.append(tree_seed)
            if self.bootstrap:
                rng = np.random.default_rng(tree_seed)
                sample = rng.integers(0, n, size=n)
                Xb, yb = X[sample], y[sample]
            else:
                Xb, yb = X, y
            tree = TreeModel(
                max_depth=self.max_depth, min_samples_leaf=self.min_samples_leaf
            )
            tree.fit(Xb, yb, m_feats=m, rng_seed=tree_seed)
            importances += tree.importances_
            self.trees.append(tree)
        self.importances_ = importances / self.n_trees
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = as_matrix(X)
        acc = np.zeros(X.shape[0], dtype=np.float64)
        for tree in self.trees:
            acc += tree.predict_proba(X)
        return acc / self.n_trees

    def vote(self, X) -> np.ndarray:
        """Majority vote over per-tree class predictions (ties favor the
        class with the larger mean probability)."""
        X = as_matrix(X)
        votes = np.zeros(X.shape[0], dtype=np.int64)
        for tree in self.trees:
            votes += tree.predict(X)
        out = np.where(votes * 2 > self.n_trees, 1, 0).astype(np.int8)
        tied = votes * 2 == self.n_trees
        if tied.any():
            out[tied] = (self.predict_proba(X[tied]) >= 0.5).astype(np.int8)
        return out

    def hyperparams_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "m_features": self.m_features,
            "min_samples_leaf": self.min_samples_leaf,
            "bootstrap": self.bootstrap,
        }

    def params_dict(self) -> dict:
        return {
            "tree_seeds": list(self.tree_seeds),
            "trees": [t.params_dict() for t in self.trees],
        }
