"""CART decision tree with Gini impurity and exact split search."""

from __future__ import annotations

import numpy as np

from .base import ClassifierModel, as_labels, as_matrix, validate_hp
from ._grow import grow_gini_tree, tree_apply

UNBOUNDED_DEPTH = 1 << 30


class TreeModel(ClassifierModel):
    """Greedy binary CART tree.

    Splits maximize Gini impurity decrease; a split is only accepted when
    the decrease is strictly positive. Leaf probability is the class-1
    frequency of the training rows reaching the leaf.
    """

    learner_id = "dt"
    hp_names = ("max_depth", "min_samples_leaf")

    def __init__(self, max_depth=None, min_samples_leaf: int = 1):
        self.max_depth = max_depth
        self.min_samples_leaf = int(min_samples_leaf)
        self.feat = None
        self.thr = None
        self.left = None
        self.right = None
        self.leaf_p = None
        self.node_count = None
        self.n_nodes = 0
        self.importances_ = None

    @classmethod
    def from_hp(cls, hp: dict) -> "TreeModel":
        hp = validate_hp(cls.learner_id, hp, cls.hp_names)
        return cls(
            max_depth=hp.get("max_depth"),
            min_samples_leaf=hp.get("min_samples_leaf", 1),
        )

    def fit(self, X, y, seed: int = 0, m_feats: int = 0, rng_seed: int = 0):
        X = as_matrix(X)
        y01 = as_labels(y).astype(np.float64)
        n = len(y01)
        if n < 2 * self.min_samples_leaf:
            raise ValueError(
                f"need at least {2 * self.min_samples_leaf} rows, got {n}"
            )
        cap = 2 * n + 1
        self.feat = np.full(cap, -1, dtype=np.int64)
        self.thr = np.zeros(cap, dtype=np.float64)
        self.left = np.zeros(cap, dtype=np.int64)
        self.right = np.zeros(cap, dtype=np.int64)
        self.leaf_p = np.zeros(cap, dtype=np.float64)
        self.node_count = np.zeros(cap, dtype=np.int64)
        importances = np.zeros(X.shape[1], dtype=np.float64)
        depth = UNBOUNDED_DEPTH if self.max_depth is None else int(self.max_depth)
        self.n_nodes = grow_gini_tree(
            X,
            y01,
            depth,
            self.min_samples_leaf,
            m_feats,
            rng_seed,
            self.feat,
            self.thr,
            self.left,
            self.right,
            self.leaf_p,
            self.node_count,
            importances,
        )
        total = importances.sum()
        self.importances_ = importances / total if total > 0 else importances
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = as_matrix(X)
        leaves = tree_apply(X, self.feat, self.thr, self.left, self.right)
        return self.leaf_p[leaves]

    def hyperparams_dict(self) -> dict:
        return {"max_depth": self.max_depth, "min_samples_leaf": self.min_samples_leaf}

    def params_dict(self) -> dict:
        k = self.n_nodes
        return {
            "feature": self.feat[:k].tolist(),
            "threshold": self.thr[:k].tolist(),
            "left": self.left[:k].tolist(),
            "right": self.right[:k].tolist(),
            "leaf_p": self.leaf_p[:k].tolist(),
            "node_count": self.node_count[:k].tolist(),
        }
