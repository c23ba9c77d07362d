"""Score features by four statistical methods and form a consensus set.

Chi-square and mutual information work on the categorical table;
point-biserial correlation and Boruta work on the encoded matrix. Each
method nominates features (top-k by score, or Boruta-confirmed), and the
final set keeps features nominated by at least ``min_methods`` methods
plus any forced includes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ConfigError
from .ingest import Dataset, EncodedMatrix
from .learners import ForestModel
from .seeding import subseed

METHODS = ("chi_square", "mutual_info", "point_biserial", "boruta")


@dataclass(frozen=True)
class MethodScore:
    feature: str
    method: str
    raw_score: float
    normalized: float
    selected: bool
    flagged: bool = False  # degenerate input, scored 0


@dataclass(frozen=True)
class FeatureScoreTable:
    scores: tuple[MethodScore, ...]
    consensus_count: dict[str, int]
    final_set: tuple[str, ...]


def chi_square_feature(codes: np.ndarray, y: np.ndarray) -> tuple[float, float, bool]:
    """Pearson chi-square of one categorical column against binary labels.

    Returns (statistic, p_value, flagged). A degenerate table (constant
    feature or single-class labels) scores 0 with the flag set.
    """
    levels = np.unique(codes)
    classes = np.unique(y)
    if len(levels) < 2 or len(classes) < 2:
        return 0.0, 1.0, True
    table = np.zeros((len(levels), 2), dtype=np.float64)
    for i, lvl in enumerate(levels):
        mask = codes == lvl
        table[i, 0] = np.sum(y[mask] == 0)
        table[i, 1] = np.sum(y[mask] == 1)
    n = table.sum()
    row = table.sum(axis=1, keepdims=True)
    col = table.sum(axis=0, keepdims=True)
    expected = row @ col / n
    stat = float(np.sum((table - expected) ** 2 / expected))
    dof = (table.shape[0] - 1) * (table.shape[1] - 1)
    p = float(stats.chi2.sf(stat, dof))
    return stat, p, False


def chi_square_scores(ds: Dataset) -> dict[str, tuple[float, float, bool]]:
    y = np.asarray(ds.labels)
    return {
        spec.name: chi_square_feature(ds.codes[spec.name], y)
        for spec in ds.schema.features
    }


def mutual_information_feature(codes: np.ndarray, y: np.ndarray) -> float:
    """Plug-in mutual information (nats) of one categorical column."""
    n = len(y)
    mi = 0.0
    for lvl in np.unique(codes):
        mask = codes == lvl
        px = mask.sum() / n
        for cls in (0, 1):
            pxy = np.sum(mask & (y == cls)) / n
            if pxy == 0:
                continue
            py = np.sum(y == cls) / n
            mi += pxy * math.log(pxy / (px * py))
    return max(mi, 0.0)


def mutual_information(ds: Dataset) -> dict[str, float]:
    y = np.asarray(ds.labels)
    return {
        spec.name: mutual_information_feature(ds.codes[spec.name], y)
        for spec in ds.schema.features
    }


def point_biserial(column: np.ndarray, y: np.ndarray) -> tuple[float, bool]:
    """Pearson correlation of an encoded column with the 0/1 label.

    A constant column has no defined correlation: scored 0, flagged.
    """
    x = np.asarray(column, dtype=np.float64)
    yf = np.asarray(y, dtype=np.float64)
    sx = x.std()
    sy = yf.std()
    if sx == 0 or sy == 0:
        return 0.0, True
    r = float(np.mean((x - x.mean()) * (yf - yf.mean())) / (sx * sy))
    return r, False


def point_biserial_scores(
    matrix: EncodedMatrix, y: np.ndarray
) -> dict[str, tuple[float, bool]]:
    """Per-feature score: max |r| across the feature's encoded columns."""
    out: dict[str, tuple[float, bool]] = {}
    for feature in matrix.feature_names():
        best = 0.0
        all_flagged = True
        for j in matrix.columns_for(feature):
            r, flagged = point_biserial(matrix.values[:, j], y)
            if not flagged:
                all_flagged = False
                best = max(best, abs(r))
        out[feature] = (best, all_flagged)
    return out


@dataclass(frozen=True)
class BorutaConfig:
    max_iterations: int = 100
    n_trees: int = 100
    significance: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 20:
            raise ConfigError("max_iterations must be >= 20")
        if not 0 < self.significance < 1:
            raise ConfigError("significance must be in (0, 1)")
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")


@dataclass(frozen=True)
class BorutaResult:
    verdicts: dict[str, str]      # confirmed / tentative / rejected
    hits: dict[str, int]
    iterations_run: int


def boruta(matrix: EncodedMatrix, y: np.ndarray, cfg: BorutaConfig) -> BorutaResult:
    """All-relevant selection against shuffled shadow features.

    Every iteration appends an independently shuffled shadow copy of each
    encoded column, fits a random forest, and records a hit for each
    feature whose importance exceeds the best shadow importance. A
    feature's importance is the max over its encoded columns, so grouped
    indicator features are compared to shadows on equal single-column
    terms. Hits follow Binomial(iters, 1/2) under the null; a two-sided
    binomial test at ``cfg.significance`` with Bonferroni correction
    across features decides confirmed/rejected, and whatever is undecided
    after ``max_iterations`` stays tentative. Decided features keep their
    verdict; iteration stops early once nothing is undecided.
    """
    X = matrix.values
    y = np.asarray(y).astype(np.int8)
    n, d = X.shape
    if d < 2:
        raise ConfigError("Boruta needs at least 2 encoded columns")
    if n < 30:
        raise ConfigError("Boruta needs at least 30 rows")

    features = matrix.feature_names()
    col_of = {f: matrix.columns_for(f) for f in features}
    threshold = cfg.significance / len(features)

    hits = {f: 0 for f in features}
    tested = {f: 0 for f in features}
    verdicts = {f: "tentative" for f in features}
    iterations = 0

    for it in range(cfg.max_iterations):
        undecided = [f for f in features if verdicts[f] == "tentative"]
        if not undecided:
            break
        iterations = it + 1
        rng = np.random.default_rng(subseed(cfg.seed, "shadow", it))
        shadow = np.column_stack(
            [X[rng.permutation(n), j] for j in range(d)]
        )
        design = np.hstack([X, shadow])
        forest = ForestModel(
            n_trees=cfg.n_trees, max_depth=7, min_samples_leaf=5
        )
        forest.fit(design, y, seed=subseed(cfg.seed, "forest", it))
        imp = forest.importances_
        shadow_max = imp[d:].max()
        for f in undecided:
            feature_imp = max(imp[j] for j in col_of[f])
            tested[f] += 1
            if feature_imp > shadow_max:
                hits[f] += 1
        for f in undecided:
            k, t = hits[f], tested[f]
            if stats.binom.sf(k - 1, t, 0.5) < threshold:
                verdicts[f] = "confirmed"
            elif stats.binom.cdf(k, t, 0.5) < threshold:
                verdicts[f] = "rejected"

    return BorutaResult(verdicts=verdicts, hits=hits, iterations_run=iterations)


def consensus(
    features: list[str],
    chi2_scores: dict[str, tuple[float, float, bool]],
    mi_scores: dict[str, float],
    pb_scores: dict[str, tuple[float, bool]],
    boruta_result: BorutaResult,
    top_k: int = 15,
    min_methods: int = 3,
    forced_includes: tuple[str, ...] = (),
) -> FeatureScoreTable:
    """Combine the four methods into one score table and a final set.

    The three filter methods each select their top ``top_k`` features by
    raw score (ties keep declared feature order); Boruta selects its
    confirmed set. Normalized scores are max-scaled within each method.
    The final set keeps features selected by at least ``min_methods``
    methods, plus forced includes, in declared feature order.
    """
    unknown = sorted(set(forced_includes) - set(features))
    if unknown:
        raise ConfigError(f"forced includes not in schema: {unknown}")

    def top_set(raw: dict[str, float]) -> set[str]:
        order = sorted(
            features, key=lambda f: (-raw[f], features.index(f))
        )
        return set(order[:top_k])

    raw_chi = {f: chi2_scores[f][0] for f in features}
    raw_mi = {f: mi_scores[f] for f in features}
    raw_pb = {f: pb_scores[f][0] for f in features}
    boruta_rate = {
        f: (
            boruta_result.hits[f] / boruta_result.iterations_run
            if boruta_result.iterations_run
            else 0.0
        )
        for f in features
    }

    selected_by = {
        "chi_square": top_set(raw_chi),
        "mutual_info": top_set(raw_mi),
        "point_biserial": top_set(raw_pb),
        "boruta": {f for f in features if boruta_result.verdicts[f] == "confirmed"},
    }

    def max_scale(raw: dict[str, float]) -> dict[str, float]:
        peak = max(raw.values()) if raw else 0.0
        if peak <= 0:
            return {f: 0.0 for f in raw}
        return {f: raw[f] / peak for f in raw}

    norm = {
        "chi_square": max_scale(raw_chi),
        "mutual_info": max_scale(raw_mi),
        "point_biserial": max_scale(raw_pb),
        "boruta": {
            f: 1.0 if boruta_result.verdicts[f] == "confirmed" else 0.0
            for f in features
        },
    }
    raws = {
        "chi_square": raw_chi,
        "mutual_info": raw_mi,
        "point_biserial": raw_pb,
        "boruta": boruta_rate,
    }
    flags = {
        "chi_square": {f: chi2_scores[f][2] for f in features},
        "mutual_info": {f: False for f in features},
        "point_biserial": {f: pb_scores[f][1] for f in features},
        "boruta": {f: False for f in features},
    }

    scores = tuple(
        MethodScore(
            feature=f,
            method=m,
            raw_score=raws[m][f],
            normalized=norm[m][f],
            selected=f in selected_by[m],
            flagged=flags[m][f],
        )
        for f in features
        for m in METHODS
    )
    counts = {
        f: sum(1 for m in METHODS if f in selected_by[m]) for f in features
    }
    final = tuple(
        f for f in features if counts[f] >= min_methods or f in forced_includes
    )
    return FeatureScoreTable(scores=scores, consensus_count=counts, final_set=final)


def score_features(
    ds: Dataset,
    matrix: EncodedMatrix,
    boruta_cfg: BorutaConfig,
    top_k: int = 15,
    min_methods: int = 3,
    forced_includes: tuple[str, ...] = (),
) -> FeatureScoreTable:
    """Run all four methods on the same data and build the consensus."""
    y = np.asarray(ds.labels)
    return consensus(
        features=ds.schema.feature_names,
        chi2_scores=chi_square_scores(ds),
        mi_scores=mutual_information(ds),
        pb_scores=point_biserial_scores(matrix, y),
        boruta_result=boruta(matrix, y, boruta_cfg),
        top_k=top_k,
        min_methods=min_methods,
        forced_includes=forced_includes,
    )
