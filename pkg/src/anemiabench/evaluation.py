"""Metric suite, ROC/PR curves, repeated stratified CV, and grid search.

The eight report metrics are accuracy, precision, recall, F1, average
precision, ROC AUC, Cohen's kappa, and the training-split F1 used as a
generalization-gap check. AUC uses midranks (ties get half credit) and
average precision uses the step sum over the descending-score ranking.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .balance import SmoteConfig, smote_resample
from .errors import SearchFailureError, StratificationError, UndefinedMetricError
from .seeding import subseed


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def n(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def confusion(labels, predictions) -> ConfusionMatrix:
    """Tally true/false positives and negatives."""
    y = np.asarray(labels).astype(int)
    p = np.asarray(predictions).astype(int)
    if y.shape != p.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {p.shape}")
    return ConfusionMatrix(
        tp=int(np.sum((y == 1) & (p == 1))),
        tn=int(np.sum((y == 0) & (p == 0))),
        fp=int(np.sum((y == 0) & (p == 1))),
        fn=int(np.sum((y == 1) & (p == 0))),
    )


@dataclass(frozen=True)
class BasicMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    degenerate: tuple[str, ...] = ()


def basic_metrics(cm: ConfusionMatrix) -> BasicMetrics:
    """Accuracy, precision, recall, and F1 from a confusion matrix.

    Zero-denominator precision or recall is reported as 0 and the field
    name is recorded in ``degenerate``.
    """
    if cm.n == 0:
        raise UndefinedMetricError("empty confusion matrix")
    flags = []
    accuracy = (cm.tp + cm.tn) / cm.n
    if cm.tp + cm.fp == 0:
        precision, flag_p = 0.0, True
    else:
        precision, flag_p = cm.tp / (cm.tp + cm.fp), False
    if cm.tp + cm.fn == 0:
        recall, flag_r = 0.0, True
    else:
        recall, flag_r = cm.tp / (cm.tp + cm.fn), False
    if flag_p:
        flags.append("precision")
    if flag_r:
        flags.append("recall")
    if precision + recall == 0:
        f1 = 0.0
        flags.append("f1")
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return BasicMetrics(accuracy, precision, recall, f1, tuple(flags))


def f1_score(labels, predictions) -> float:
    return basic_metrics(confusion(labels, predictions)).f1


def _ranked_order(scores: np.ndarray) -> np.ndarray:
    """Descending-score order; ties keep ascending row index."""
    return np.argsort(-scores, kind="stable")


def average_precision(scores, labels) -> float:
    """Step-sum average precision: sum of P(k) * [R(k) - R(k-1)]."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(int)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise UndefinedMetricError("average precision needs at least one positive")
    order = _ranked_order(s)
    hits = 0
    precision_sum = 0.0
    for k, idx in enumerate(order, start=1):
        if y[idx] == 1:
            hits += 1
            precision_sum += hits / k
    return precision_sum / n_pos


def roc_auc(scores, labels) -> float:
    """Probability that a positive outranks a negative, ties half-credit.

    Computed from midranks: AUC = (R_pos - n_pos(n_pos+1)/2) / (n_pos*n_neg)
    where R_pos is the rank sum of positives.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(int)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both classes")
    ranks = _midranks(s)
    rank_sum = float(ranks[y == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with tied values sharing their average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=float)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def roc_curve(scores, labels) -> list[tuple[float, float, float]]:
    """(threshold, FPR, TPR) points from a descending-threshold sweep.

    Starts at (inf, 0, 0); the final point (at the minimum score) is
    (1, 1) since every row is then predicted positive.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(int)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC curve needs both classes")
    order = _ranked_order(s)
    points = [(math.inf, 0.0, 0.0)]
    tp = fp = 0
    for i, idx in enumerate(order):
        if y[idx] == 1:
            tp += 1
        else:
            fp += 1
        last_of_tie = i + 1 == len(order) or s[order[i + 1]] != s[idx]
        if last_of_tie:
            points.append((float(s[idx]), fp / n_neg, tp / n_pos))
    return points


def pr_curve(scores, labels) -> list[tuple[float, float, float]]:
    """(threshold, recall, precision) points, descending threshold."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(int)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise UndefinedMetricError("PR curve needs at least one positive")
    order = _ranked_order(s)
    points = [(math.inf, 0.0, 1.0)]
    tp = 0
    for i, idx in enumerate(order):
        if y[idx] == 1:
            tp += 1
        last_of_tie = i + 1 == len(order) or s[order[i + 1]] != s[idx]
        if last_of_tie:
            points.append((float(s[idx]), tp / n_pos, tp / (i + 1)))
    return points


def cohens_kappa(cm: ConfusionMatrix) -> float:
    """Chance-corrected agreement (p0 - pe) / (1 - pe)."""
    n = cm.n
    if n == 0:
        raise UndefinedMetricError("empty confusion matrix")
    p0 = (cm.tp + cm.tn) / n
    actual_pos = cm.tp + cm.fn
    actual_neg = cm.tn + cm.fp
    pred_pos = cm.tp + cm.fp
    pred_neg = cm.tn + cm.fn
    pe = (actual_pos * pred_pos + actual_neg * pred_neg) / (n * n)
    if pe == 1.0:
        raise UndefinedMetricError("kappa undefined: chance agreement is 1")
    return (p0 - pe) / (1.0 - pe)


METRIC_ROW_NAMES = (
    "Accuracy",
    "Precision",
    "Recall",
    "F1 Score",
    "Average Precision",
    "AUC",
    "Cohen's Kappa",
    "Train Set F1 Score",
)


@dataclass(frozen=True)
class MetricReport:
    """The eight report metrics plus curve points for one model."""

    accuracy: float
    precision: float
    recall: float
    f1: float
    average_precision: float
    auc: float
    cohens_kappa: float
    train_f1: float
    roc_points: tuple[tuple[float, float, float], ...] = ()
    pr_points: tuple[tuple[float, float, float], ...] = ()
    degenerate: tuple[str, ...] = ()

    def row_values(self) -> dict[str, float]:
        return {
            "Accuracy": self.accuracy,
            "Precision": self.precision,
            "Recall": self.recall,
            "F1 Score": self.f1,
            "Average Precision": self.average_precision,
            "AUC": self.auc,
            "Cohen's Kappa": self.cohens_kappa,
            "Train Set F1 Score": self.train_f1,
        }

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "average_precision": self.average_precision,
            "auc": self.auc,
            "cohens_kappa": self.cohens_kappa,
            "train_f1": self.train_f1,
            "roc_points": [list(p) for p in self.roc_points],
            "pr_points": [list(p) for p in self.pr_points],
            "degenerate": list(self.degenerate),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MetricReport":
        return cls(
            accuracy=doc["accuracy"],
            precision=doc["precision"],
            recall=doc["recall"],
            f1=doc["f1"],
            average_precision=doc["average_precision"],
            auc=doc["auc"],
            cohens_kappa=doc["cohens_kappa"],
            train_f1=doc["train_f1"],
            roc_points=tuple(tuple(p) for p in doc["roc_points"]),
            pr_points=tuple(tuple(p) for p in doc["pr_points"]),
            degenerate=tuple(doc["degenerate"]),
        )


def evaluate(model, X_test, y_test, X_train, y_train) -> MetricReport:
    """Score a fitted model on the test split.

    Undefined metrics (single-class test set, no positive predictions)
    are reported as 0 with the metric name listed in ``degenerate``
    rather than raised.
    """
    y_test = np.asarray(y_test).astype(int)
    scores = model.predict_proba(X_test)
    preds = model.predict(X_test)
    cm = confusion(y_test, preds)
    basics = basic_metrics(cm)
    flags = list(basics.degenerate)

    def guarded(fn, *args, name):
        try:
            return fn(*args)
        except UndefinedMetricError:
            flags.append(name)
            return 0.0

    ap = guarded(average_precision, scores, y_test, name="average_precision")
    auc = guarded(roc_auc, scores, y_test, name="auc")
    kappa = guarded(cohens_kappa, cm, name="cohens_kappa")
    try:
        roc_pts = tuple(roc_curve(scores, y_test))
    except UndefinedMetricError:
        roc_pts = ()
    try:
        pr_pts = tuple(pr_curve(scores, y_test))
    except UndefinedMetricError:
        pr_pts = ()
    train_f1 = f1_score(y_train, model.predict(X_train))
    return MetricReport(
        accuracy=basics.accuracy,
        precision=basics.precision,
        recall=basics.recall,
        f1=basics.f1,
        average_precision=ap,
        auc=auc,
        cohens_kappa=kappa,
        train_f1=train_f1,
        roc_points=roc_pts,
        pr_points=pr_pts,
        degenerate=tuple(flags),
    )


@dataclass(frozen=True)
class CvPlan:
    """Fold assignment per (repeat, row) for repeated stratified CV."""

    n_folds: int
    n_repeats: int
    seed: int
    assignment: np.ndarray  # shape (n_repeats, n_rows), fold ids

    def __post_init__(self):
        self.assignment.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return self.assignment.shape[1]

    def folds(self):
        """Yield (repeat, fold, train_indices, validation_indices)."""
        for rep in range(self.n_repeats):
            row = self.assignment[rep]
            for fold in range(self.n_folds):
                val = np.flatnonzero(row == fold)
                train = np.flatnonzero(row != fold)
                yield rep, fold, train, val


def make_cv_plan(labels, n_folds: int = 5, n_repeats: int = 3, seed: int = 0) -> CvPlan:
    """Stratified shuffled fold assignment, repeated ``n_repeats`` times.

    Within each repeat every class is spread across folds as evenly as
    possible, so per-fold class proportions stay within one sample of the
    global proportions.
    """
    y = np.asarray(labels).astype(int)
    classes, counts = np.unique(y, return_counts=True)
    if counts.min() < n_folds:
        raise StratificationError(
            f"smallest class ({counts.min()}) is below the fold count {n_folds}"
        )
    rng = np.random.default_rng(seed)
    assignment = np.empty((n_repeats, len(y)), dtype=np.int32)
    for rep in range(n_repeats):
        for cls in classes:
            members = np.flatnonzero(y == cls)
            shuffled = members[rng.permutation(len(members))]
            fold_ids = np.arange(len(members)) % n_folds
            # Rotate the fold that receives the remainder so no fold is
            # systematically larger across classes and repeats.
            offset = int(rng.integers(n_folds))
            assignment[rep, shuffled] = (fold_ids + offset) % n_folds
    return CvPlan(n_folds=n_folds, n_repeats=n_repeats, seed=seed, assignment=assignment)


@dataclass(frozen=True)
class FoldAudit:
    """Leakage bookkeeping for one (candidate, repeat, fold) evaluation."""

    candidate: int
    repeat: int
    fold: int
    n_train_real: int
    n_synthetic: int
    n_validation: int
    synthetic_in_validation: int


@dataclass(frozen=True)
class GridSearchResult:
    candidates: tuple[dict, ...]
    mean_f1: tuple[float, ...]
    std_f1: tuple[float, ...]
    best_index: int
    best_hp: dict
    model: object
    audits: tuple[FoldAudit, ...]

    def cv_table(self) -> list[dict]:
        return [
            {"candidate": i, "hp": dict(hp), "mean_f1": m, "std_f1": s}
            for i, (hp, m, s) in enumerate(
                zip(self.candidates, self.mean_f1, self.std_f1)
            )
        ]


def expand_grid(grid: dict[str, list]) -> list[dict]:
    """Exhaustive candidate list in declared key/value order."""
    if not grid:
        return [{}]
    keys = list(grid.keys())
    return [
        dict(zip(keys, combo))
        for combo in itertools.product(*(grid[k] for k in keys))
    ]


_WORKER_DATA: dict = {}


def _init_fold_worker(X_train, y_train):
    _WORKER_DATA["X"] = X_train
    _WORKER_DATA["y"] = y_train


def _run_fold_task(payload):
    """One (candidate, repeat, fold) evaluation; module-level so process
    pools can pickle it. Training data comes from the worker initializer."""
    from .learners import fit_learner

    (learner_id, cand_idx, hp, rep, fold, tr, val, smote_cfg, seed) = payload
    X_train = _WORKER_DATA["X"]
    y_train = _WORKER_DATA["y"]
    n = len(y_train)
    fold_seed = subseed(seed, "fold", rep, fold)
    try:
        resampled = smote_resample(
            X_train[tr],
            y_train[tr],
            SmoteConfig(smote_cfg.k_neighbors, smote_cfg.target_ratio, fold_seed),
        )
        fit_seed = subseed(seed, "fit", cand_idx, rep, fold)
        model = fit_learner(
            learner_id, resampled.values, resampled.labels, hp, fit_seed
        )
        preds = model.predict(X_train[val])
        score = f1_score(y_train[val], preds)
    except Exception as exc:  # candidate marked invalid, search continues
        return (cand_idx, rep, fold), None, str(exc)
    # Synthetic rows are exactly the appended tail of the resampled
    # matrix; validation rows come from the original matrix only.
    row_ids = np.arange(n, dtype=np.int64)
    fit_ids = np.concatenate(
        [row_ids[tr], np.arange(len(resampled.labels) - len(tr)) + n]
    )
    synth_ids = set(fit_ids[resampled.synthetic_flags].tolist())
    val_ids = set(row_ids[val].tolist())
    audit = FoldAudit(
        candidate=cand_idx,
        repeat=rep,
        fold=fold,
        n_train_real=len(tr),
        n_synthetic=int(resampled.synthetic_flags.sum()),
        n_validation=len(val),
        synthetic_in_validation=len(synth_ids & val_ids),
    )
    return (cand_idx, rep, fold), score, audit


def grid_search(
    learner_id: str,
    grid: dict[str, list],
    plan: CvPlan,
    X_train: np.ndarray,
    y_train: np.ndarray,
    smote: SmoteConfig,
    seed: int = 0,
    jobs: int = 1,
) -> GridSearchResult:
    """Exhaustive grid search scored by mean validation F1.

    For every candidate and every (repeat, fold), the fold's training
    portion is SMOTE-resampled (the validation portion is never touched),
    the learner is fitted, and F1 is taken on the untouched validation
    rows. The winner (ties to the earliest candidate in declared grid
    order) is refit on the SMOTE-resampled full training split.

    Row identities are tracked so callers can audit that no synthetic row
    is ever scored: original rows carry ids 0..n-1, synthetic rows get
    ids >= n. With ``jobs`` > 1, fold tasks run in a process pool and are
    reduced in (candidate, repeat, fold) order, so parallelism cannot
    change the result.
    """
    candidates = expand_grid(grid)
    if not candidates:
        raise SearchFailureError("empty hyperparameter grid")

    X_train = np.asarray(X_train, dtype=np.float64)
    y_train = np.asarray(y_train).astype(np.int8)
    n = len(y_train)

    tasks = []
    for cand_idx, hp in enumerate(candidates):
        for rep, fold, tr, val in plan.folds():
            tasks.append(
                (learner_id, cand_idx, hp, rep, fold, tr, val, smote, seed)
            )

    if jobs <= 1:
        _init_fold_worker(X_train, y_train)
        outcomes = [_run_fold_task(t) for t in tasks]
    else:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(
            max_workers=jobs,
            initializer=_init_fold_worker,
            initargs=(X_train, y_train),
        ) as pool:
            outcomes = list(pool.map(_run_fold_task, tasks))
    outcomes.sort(key=lambda item: item[0])

    per_candidate: dict[int, list[float]] = {i: [] for i in range(len(candidates))}
    failures: dict[int, str] = {}
    audits = []
    for (cand_idx, _, _), score, audit in outcomes:
        if score is None:
            failures[cand_idx] = audit  # audit slot carries the message
            continue
        per_candidate[cand_idx].append(score)
        audits.append(audit)

    means = []
    stds = []
    for i in range(len(candidates)):
        scores = per_candidate[i]
        if i in failures or not scores:
            means.append(float("nan"))
            stds.append(float("nan"))
        else:
            means.append(float(np.mean(scores)))
            stds.append(float(np.std(scores)))

    valid = [i for i in range(len(candidates)) if not math.isnan(means[i])]
    if not valid:
        raise SearchFailureError(f"{learner_id}: every candidate failed")
    best_index = max(valid, key=lambda i: (means[i], -i))

    from .learners import fit_learner

    refit_resampled = smote_resample(
        X_train,
        y_train,
        SmoteConfig(smote.k_neighbors, smote.target_ratio, subseed(seed, "refit")),
    )
    model = fit_learner(
        learner_id,
        refit_resampled.values,
        refit_resampled.labels,
        candidates[best_index],
        subseed(seed, "refit-fit"),
    )
    return GridSearchResult(
        candidates=tuple(candidates),
        mean_f1=tuple(means),
        std_f1=tuple(stds),
        best_index=best_index,
        best_hp=dict(candidates[best_index]),
        model=model,
        audits=tuple(audits),
    )
