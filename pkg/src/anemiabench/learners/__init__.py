"""Nine classifiers behind one fit/predict-probability contract.

Each learner declares the hyperparameter names it accepts and a default
grid for exhaustive search. ``fit_learner`` validates hyperparameters,
builds the model, and fits it with an explicit seed so every fit is
reproducible.
"""

from __future__ import annotations

import json

from ..errors import ConfigError
from .base import ClassifierModel, validate_hp
from .forest import ForestModel
from .gbt import GbtModel
from .knn import KnnModel
from .lda import LdaModel
from .logistic import LogisticModel, irls_fit
from .mlp import MlpModel
from .naive_bayes import NbModel
from .svm import SvmModel
from .tree import TreeModel

MODEL_CLASSES: dict[str, type[ClassifierModel]] = {
    "lr": LogisticModel,
    "knn": KnnModel,
    "dt": TreeModel,
    "rf": ForestModel,
    "xgb": GbtModel,
    "svm": SvmModel,
    "nb": NbModel,
    "lda": LdaModel,
    "dnn": MlpModel,
}

LEARNER_IDS = tuple(MODEL_CLASSES)

# Grids are ordered dicts: candidate enumeration (and therefore grid-search
# tie-breaking) follows declared key and value order.
DEFAULT_GRIDS: dict[str, dict[str, list]] = {
    "lr": {"l2": [0.01, 0.1, 1.0, 10.0]},
    "knn": {"k": [5, 11, 21]},
    "dt": {"max_depth": [3, 5, 8, None]},
    "rf": {"n_trees": [100, 300]},
    "xgb": {
        "n_rounds": [100, 300],
        "learning_rate": [0.05, 0.1, 0.3],
        "max_depth": [3, 5],
    },
    "svm": {"C": [0.1, 1.0, 10.0], "kernel": ["linear", "rbf"]},
    "nb": {"alpha": [0.5, 1.0]},
    "lda": {"eps": [1e-4, 1e-2]},
    "dnn": {"hidden_sizes": [[32], [64, 32]], "lr": [1e-2, 1e-3]},
}


def default_grid(learner_id: str) -> dict[str, list]:
    if learner_id not in DEFAULT_GRIDS:
        raise ConfigError(f"unknown learner id {learner_id!r}")
    return {k: list(v) for k, v in DEFAULT_GRIDS[learner_id].items()}


def build_model(learner_id: str, hp: dict) -> ClassifierModel:
    if learner_id not in MODEL_CLASSES:
        raise ConfigError(f"unknown learner id {learner_id!r}")
    return MODEL_CLASSES[learner_id].from_hp(hp)


def fit_learner(learner_id: str, X, y, hp: dict, seed: int = 0) -> ClassifierModel:
    model = build_model(learner_id, hp)
    return model.fit(X, y, seed=seed)


def load_model_json(doc: str | dict) -> dict:
    """Parse the versioned JSON model document (audit format)."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    if doc.get("format_version") != 1:
        raise ConfigError(f"unsupported model format {doc.get('format_version')}")
    if doc.get("learner") not in MODEL_CLASSES:
        raise ConfigError(f"unknown learner {doc.get('learner')!r}")
    return doc


__all__ = [
    "ClassifierModel",
    "DEFAULT_GRIDS",
    "ForestModel",
    "GbtModel",
    "KnnModel",
    "LdaModel",
    "LEARNER_IDS",
    "LogisticModel",
    "MlpModel",
    "MODEL_CLASSES",
    "NbModel",
    "SvmModel",
    "TreeModel",
    "build_model",
    "default_grid",
    "fit_learner",
    "irls_fit",
    "load_model_json",
    "validate_hp",
]
