import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anemiabench.balance import SmoteConfig
from anemiabench.errors import (
    SearchFailureError,
    StratificationError,
    UndefinedMetricError,
)
from anemiabench.evaluation import (
    ConfusionMatrix,
    MetricReport,
    average_precision,
    basic_metrics,
    cohens_kappa,
    confusion,
    evaluate,
    expand_grid,
    grid_search,
    make_cv_plan,
    pr_curve,
    roc_auc,
    roc_curve,
)
from anemiabench.learners import LogisticModel


def auc_by_pair_counting(scores, labels):
    """O(n^2) oracle: concordant pairs plus half credit for ties."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(pos) * len(neg))


def ap_by_positive_scan(scores, labels):
    """Oracle: mean precision at each positive in the descending ranking."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    order = np.argsort(-scores, kind="stable")
    hits = 0
    precisions = []
    for k, idx in enumerate(order, start=1):
        if labels[idx] == 1:
            hits += 1
            precisions.append(hits / k)
    return sum(precisions) / labels.sum()


class TestConfusion:
    def test_direct_tally(self):
        y = [1, 1, 1, 1, 1, 0, 0, 0, 0, 0]
        yhat = [1, 1, 1, 0, 0, 0, 0, 0, 0, 1]
        cm = confusion(y, yhat)
        assert (cm.tp, cm.fn, cm.tn, cm.fp) == (3, 2, 4, 1)

    def test_perfect(self):
        y = [1, 0, 1, 0]
        cm = confusion(y, y)
        assert cm.fp == 0 and cm.fn == 0

    def test_inverted(self):
        y = np.array([1, 0, 1, 0])
        cm = confusion(y, 1 - y)
        assert cm.tp == 0 and cm.tn == 0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            confusion([1, 0], [1])


class TestBasicMetrics:
    def test_hand_values(self):
        m = basic_metrics(ConfusionMatrix(tp=3, tn=4, fp=1, fn=2))
        assert m.accuracy == pytest.approx(0.7, abs=1e-12)
        assert m.precision == pytest.approx(0.75, abs=1e-12)
        assert m.recall == pytest.approx(0.6, abs=1e-12)
        assert m.f1 == pytest.approx(2 * 0.75 * 0.6 / 1.35, abs=1e-12)

    def test_perfect(self):
        m = basic_metrics(ConfusionMatrix(tp=5, tn=5, fp=0, fn=0))
        assert (m.accuracy, m.precision, m.recall, m.f1) == (1, 1, 1, 1)

    def test_zero_denominators_flagged(self):
        m = basic_metrics(ConfusionMatrix(tp=0, tn=4, fp=0, fn=2))
        assert m.precision == 0.0
        assert "precision" in m.degenerate

    @given(
        tp=st.integers(0, 50),
        tn=st.integers(0, 50),
        fp=st.integers(0, 50),
        fn=st.integers(0, 50),
    )
    @settings(max_examples=100)
    def test_identities_on_fuzzed_matrices(self, tp, tn, fp, fn):
        if tp + tn + fp + fn == 0:
            return
        cm = ConfusionMatrix(tp=tp, tn=tn, fp=fp, fn=fn)
        m = basic_metrics(cm)
        assert m.accuracy == pytest.approx((tp + tn) / cm.n, abs=1e-12)
        if m.precision + m.recall > 0:
            assert m.f1 == pytest.approx(
                2 * m.precision * m.recall / (m.precision + m.recall), abs=1e-12
            )
        try:
            kappa = cohens_kappa(cm)
            assert -1 - 1e-12 <= kappa <= 1 + 1e-12
        except UndefinedMetricError:
            pass


class TestAveragePrecision:
    def test_hand_value(self):
        ap = average_precision([0.9, 0.8, 0.7], [1, 0, 1])
        assert ap == pytest.approx(1.0 * 0.5 + (2 / 3) * 0.5, abs=1e-12)

    def test_perfect_ranking(self):
        ap = average_precision([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
        assert ap == pytest.approx(1.0, abs=1e-12)

    def test_single_positive_ranked_last(self):
        m = 7
        scores = np.linspace(1.0, 0.1, m)
        labels = np.zeros(m, dtype=int)
        labels[-1] = 1
        assert average_precision(scores, labels) == pytest.approx(1 / m, abs=1e-12)

    def test_no_positives_rejected(self):
        with pytest.raises(UndefinedMetricError):
            average_precision([0.5, 0.4], [0, 0])


class TestRocAuc:
    def test_hand_value(self):
        auc = roc_auc([0.9, 0.8, 0.85, 0.7], [1, 1, 0, 0])
        assert auc == pytest.approx(0.75, abs=1e-12)

    def test_all_ties(self):
        assert roc_auc([0.3] * 6, [1, 0, 1, 0, 1, 0]) == pytest.approx(0.5, abs=1e-12)

    def test_perfect_separation(self):
        assert roc_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == pytest.approx(1.0)

    def test_single_class_rejected(self):
        with pytest.raises(UndefinedMetricError):
            roc_auc([0.5, 0.6], [1, 1])

    def test_midranks_equal_pair_counting_on_random_instances(self):
        rng = np.random.default_rng(7)
        for trial in range(100):
            n = int(rng.integers(5, 201))
            # heavy tie mass: quantized scores
            scores = np.round(rng.random(n), 2)
            labels = (rng.random(n) < 0.4).astype(int)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            fast = roc_auc(scores, labels)
            slow = auc_by_pair_counting(scores, labels)
            assert fast == pytest.approx(slow, abs=1e-12), f"trial {trial}"

    def test_ap_equals_positive_scan_on_random_instances(self):
        rng = np.random.default_rng(8)
        for trial in range(100):
            n = int(rng.integers(5, 201))
            scores = np.round(rng.random(n), 2)
            labels = (rng.random(n) < 0.4).astype(int)
            if labels.sum() == 0:
                labels[0] = 1
            fast = average_precision(scores, labels)
            slow = ap_by_positive_scan(scores, labels)
            assert fast == pytest.approx(slow, abs=1e-12), f"trial {trial}"

    @given(st.data())
    @settings(max_examples=50, deadline=None)
    def test_score_monotone_invariance(self, data):
        n = data.draw(st.integers(min_value=4, max_value=40))
        # quantized so the transform cannot merge distinct scores through
        # float rounding (any strictly increasing map must preserve ties)
        scores = np.round(
            np.array(
                data.draw(
                    st.lists(
                        st.floats(min_value=0.0, max_value=1.0),
                        min_size=n,
                        max_size=n,
                    )
                )
            ),
            4,
        )
        labels = np.array(
            data.draw(
                st.lists(st.integers(min_value=0, max_value=1), min_size=n, max_size=n)
            )
        )
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        transformed = np.exp(3.0 * scores) + 1.0  # strictly increasing
        assert roc_auc(scores, labels) == pytest.approx(
            roc_auc(transformed, labels), abs=1e-9
        )
        assert average_precision(scores, labels) == pytest.approx(
            average_precision(transformed, labels), abs=1e-9
        )


class TestCurves:
    def test_roc_endpoints(self):
        pts = roc_curve([0.9, 0.8, 0.4, 0.3], [1, 0, 1, 0])
        assert pts[0] == (math.inf, 0.0, 0.0)
        assert pts[-1][1:] == (1.0, 1.0)

    def test_pr_starts_at_zero_recall(self):
        pts = pr_curve([0.9, 0.8, 0.4], [1, 0, 1])
        assert pts[0][1] == 0.0 and pts[0][2] == 1.0


class TestKappa:
    def test_hand_value(self):
        assert cohens_kappa(ConfusionMatrix(tp=3, tn=4, fp=1, fn=2)) == pytest.approx(
            0.4, abs=1e-12
        )

    def test_perfect_agreement(self):
        assert cohens_kappa(ConfusionMatrix(tp=6, tn=4, fp=0, fn=0)) == pytest.approx(
            1.0
        )

    def test_degenerate_rejected(self):
        with pytest.raises(UndefinedMetricError):
            cohens_kappa(ConfusionMatrix(tp=5, tn=0, fp=0, fn=0))

    def test_independent_predictions_near_zero(self):
        rng = np.random.default_rng(9)
        n = 10_000
        y = (rng.random(n) < 0.4).astype(int)
        yhat = (rng.random(n) < 0.4).astype(int)  # independent, matched marginals
        kappa = cohens_kappa(confusion(y, yhat))
        assert abs(kappa) < 0.03


class TestCvPlan:
    def test_exact_divisibility(self):
        y = np.array([1] * 40 + [0] * 60)
        plan = make_cv_plan(y, n_folds=5, n_repeats=3, seed=0)
        for rep in range(3):
            for fold in range(5):
                members = plan.assignment[rep] == fold
                assert members.sum() == 20
                assert y[members].sum() == 8

    def test_coverage_three_validations_per_row(self):
        y = np.array([1] * 37 + [0] * 63)
        plan = make_cv_plan(y, seed=1)
        seen = np.zeros(100, dtype=int)
        fold_count = 0
        for rep, fold, train, val in plan.folds():
            seen[val] += 1
            fold_count += 1
            assert len(np.intersect1d(train, val)) == 0
        assert fold_count == 15
        assert np.all(seen == 3)

    def test_fold_class_proportions_within_one_sample(self):
        y = np.array([1] * 41 + [0] * 59)
        plan = make_cv_plan(y, seed=2)
        for rep in range(plan.n_repeats):
            for fold in range(plan.n_folds):
                members = plan.assignment[rep] == fold
                n_pos = y[members].sum()
                # 41 positives over 5 folds: 8 or 9 per fold
                assert n_pos in (8, 9)

    def test_deterministic(self):
        y = np.array([1] * 30 + [0] * 30)
        a = make_cv_plan(y, seed=11)
        b = make_cv_plan(y, seed=11)
        assert np.array_equal(a.assignment, b.assignment)

    def test_small_class_rejected(self):
        y = np.array([1] * 3 + [0] * 50)
        with pytest.raises(StratificationError):
            make_cv_plan(y, n_folds=5)


def _planted_data(seed=5, n=400):
    rng = np.random.default_rng(seed)
    X = rng.normal(0, 1, (n, 4))
    eta = 1.8 * X[:, 0] - 1.2 * X[:, 1]
    y = (rng.random(n) < 1 / (1 + np.exp(-eta))).astype(int)
    return X, y


class TestGridSearch:
    def test_single_candidate(self):
        X, y = _planted_data()
        plan = make_cv_plan(y, seed=0)
        result = grid_search(
            "lr", {"l2": [0.5]}, plan, X, y, SmoteConfig(seed=0), seed=1
        )
        assert result.best_hp == {"l2": 0.5}

    def test_planted_winner_beats_overshrunk(self):
        X, y = _planted_data()
        plan = make_cv_plan(y, seed=0)
        result = grid_search(
            "lr", {"l2": [0.1, 1000.0]}, plan, X, y, SmoteConfig(seed=0), seed=1
        )
        assert result.best_hp["l2"] == 0.1
        assert result.mean_f1[0] > result.mean_f1[1]

    def test_no_synthetic_rows_in_any_validation_fold(self):
        X, y = _planted_data()
        plan = make_cv_plan(y, seed=0)
        result = grid_search(
            "lr", {"l2": [0.1, 1.0]}, plan, X, y, SmoteConfig(seed=0), seed=1
        )
        assert len(result.audits) == 2 * 15
        assert all(a.synthetic_in_validation == 0 for a in result.audits)
        assert any(a.n_synthetic > 0 for a in result.audits)

    def test_deterministic(self):
        X, y = _planted_data()
        plan = make_cv_plan(y, seed=0)
        kwargs = dict(plan=plan, X_train=X, y_train=y, smote=SmoteConfig(seed=0), seed=9)
        a = grid_search("lr", {"l2": [0.1, 1.0]}, **kwargs)
        b = grid_search("lr", {"l2": [0.1, 1.0]}, **kwargs)
        assert a.best_hp == b.best_hp
        assert a.mean_f1 == b.mean_f1

    def test_parallel_matches_serial(self):
        X, y = _planted_data(n=200)
        plan = make_cv_plan(y, seed=0)
        kwargs = dict(plan=plan, X_train=X, y_train=y, smote=SmoteConfig(seed=0), seed=9)
        serial = grid_search("lr", {"l2": [0.1, 1.0]}, **kwargs, jobs=1)
        parallel = grid_search("lr", {"l2": [0.1, 1.0]}, **kwargs, jobs=2)
        assert serial.mean_f1 == parallel.mean_f1
        assert serial.best_hp == parallel.best_hp

    def test_empty_grid_rejected(self):
        X, y = _planted_data(n=120)
        plan = make_cv_plan(y, seed=0)
        with pytest.raises(SearchFailureError):
            grid_search("lr", {"l2": []}, plan, X, y, SmoteConfig(seed=0))

    def test_expand_grid_order(self):
        grid = {"a": [1, 2], "b": ["x", "y"]}
        assert expand_grid(grid) == [
            {"a": 1, "b": "x"},
            {"a": 1, "b": "y"},
            {"a": 2, "b": "x"},
            {"a": 2, "b": "y"},
        ]


class TestEvaluate:
    def test_perfect_model(self):
        X, y = _planted_data(n=150)

        class Oracle:
            def predict_proba(self, Xq):
                # scores equal to labels by construction below
                return self._scores

            def predict(self, Xq):
                return (self.predict_proba(Xq) >= 0.5).astype(int)

        model = Oracle()
        model._scores = y.astype(float)
        report = evaluate(model, X, y, X, y)
        assert report.accuracy == 1.0
        assert report.f1 == 1.0
        assert report.average_precision == 1.0
        assert report.auc == 1.0
        assert report.cohens_kappa == 1.0

    def test_constant_scorer_flags(self):
        X, y = _planted_data(n=150)

        class Flat:
            def predict_proba(self, Xq):
                return np.full(Xq.shape[0], 0.5)

            def predict(self, Xq):
                return np.ones(Xq.shape[0], dtype=int)

        report = evaluate(Flat(), X, y, X, y)
        assert report.auc == pytest.approx(0.5)
        assert abs(report.cohens_kappa) < 1e-9

    def test_report_round_trips_json_bit_identically(self):
        X, y = _planted_data(n=200)
        model = LogisticModel(l2=0.5).fit(X, y)
        report = evaluate(model, X, y, X, y)
        doc = json.dumps(report.to_dict())
        restored = MetricReport.from_dict(json.loads(doc))
        assert restored == report
