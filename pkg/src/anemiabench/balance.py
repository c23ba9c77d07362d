"""SMOTE oversampling of the minority class.

Operates on the encoded training matrix only; the cross-validation
engine calls it per training fold, so validation rows are unreachable by
construction. Synthetic rows are tagged so downstream integrity checks
can assert none of them is ever scored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InfeasibleNeighborsError


@dataclass(frozen=True)
class SmoteConfig:
    k_neighbors: int = 5
    target_ratio: float = 1.0  # minority/majority after resampling
    seed: int = 0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ConfigError(f"k_neighbors must be >= 1, got {self.k_neighbors}")
        if not 0 < self.target_ratio <= 1:
            raise ConfigError(
                f"target_ratio must be in (0, 1], got {self.target_ratio}"
            )


@dataclass(frozen=True)
class ResampledSet:
    """Original rows (verbatim, in order) plus appended synthetic rows."""

    values: np.ndarray
    labels: np.ndarray
    synthetic_flags: np.ndarray
    parent_pairs: np.ndarray  # (n_synthetic, 2) indices into the original matrix

    def __post_init__(self):
        self.values.setflags(write=False)
        self.labels.setflags(write=False)
        self.synthetic_flags.setflags(write=False)
        self.parent_pairs.setflags(write=False)


def smote_resample(X_train, y_train, cfg: SmoteConfig) -> ResampledSet:
    """Interpolate synthetic minority rows between nearest minority pairs.

    Each synthetic row is x_i + lam * (x_nn - x_i) with lam uniform on
    [0, 1) and x_nn one of the k Euclidean-nearest minority neighbors of
    the minority row x_i. Enough rows are added to bring the class ratio
    to ``target_ratio`` (within one sample). Fully determined by the seed.
    """
    X = np.asarray(X_train, dtype=np.float64)
    y = np.asarray(y_train).astype(np.int8)
    n = len(y)
    n_pos = int(np.sum(y == 1))
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise InfeasibleNeighborsError("both classes must be present")
    minority_label = 1 if n_pos <= n_neg else 0
    minority_idx = np.flatnonzero(y == minority_label)
    n_min = len(minority_idx)
    n_maj = n - n_min

    if n_min < cfg.k_neighbors + 1:
        raise InfeasibleNeighborsError(
            f"minority class has {n_min} rows; k={cfg.k_neighbors} needs at "
            f"least {cfg.k_neighbors + 1}. Reduce k to at most {n_min - 1}."
        )

    n_synth = max(0, int(round(cfg.target_ratio * n_maj)) - n_min)
    if n_synth == 0:
        return ResampledSet(
            values=X.copy(),
            labels=y.copy(),
            synthetic_flags=np.zeros(n, dtype=bool),
            parent_pairs=np.empty((0, 2), dtype=np.int64),
        )

    minority = X[minority_idx]
    # Pairwise distances within the minority class only; majority rows are
    # never read as interpolation parents.
    sq = np.sum(minority**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (minority @ minority.T)
    np.fill_diagonal(d2, np.inf)
    # Stable argsort so equidistant neighbors resolve by row index.
    neighbor_order = np.argsort(d2, axis=1, kind="stable")[:, : cfg.k_neighbors]

    rng = np.random.default_rng(cfg.seed)
    base_local = rng.integers(0, n_min, size=n_synth)
    neighbor_pick = rng.integers(0, cfg.k_neighbors, size=n_synth)
    lam = rng.random(n_synth)

    base_rows = minority[base_local]
    nn_local = neighbor_order[base_local, neighbor_pick]
    nn_rows = minority[nn_local]
    synth = base_rows + lam[:, None] * (nn_rows - base_rows)

    values = np.vstack([X, synth])
    labels = np.concatenate([y, np.full(n_synth, minority_label, dtype=np.int8)])
    flags = np.concatenate([np.zeros(n, dtype=bool), np.ones(n_synth, dtype=bool)])
    parents = np.column_stack(
        [minority_idx[base_local], minority_idx[nn_local]]
    ).astype(np.int64)
    return ResampledSet(
        values=values, labels=labels, synthetic_flags=flags, parent_pairs=parents
    )
