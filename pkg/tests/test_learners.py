import math

import numpy as np
import pytest

from anemiabench.errors import DivergenceError, SingularScatterError
from anemiabench.learners import (
    ForestModel,
    GbtModel,
    KnnModel,
    LdaModel,
    LogisticModel,
    MlpModel,
    NbModel,
    SvmModel,
    TreeModel,
)
from anemiabench.learners.gbt import logistic_loss
from anemiabench.learners.svm import kernel_matrix


def sigmoid(z):
    return 1 / (1 + np.exp(-z))


def make_logistic_data(rng, n, w, b=0.0):
    X = rng.normal(0, 1, (n, len(w)))
    p = sigmoid(X @ np.asarray(w) + b)
    y = (rng.random(n) < p).astype(int)
    return X, y


XOR_X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
XOR_Y = np.array([0, 1, 1, 0])


class TestLogistic:
    def test_recovers_planted_coefficients(self):
        rng = np.random.default_rng(12)
        X, y = make_logistic_data(rng, 5000, [2.0, -1.0])
        model = LogisticModel(l2=1e-6).fit(X, y)
        assert model.weights[0] == pytest.approx(2.0, rel=0.05)
        assert model.weights[1] == pytest.approx(-1.0, rel=0.05)

    def test_constant_zero_feature_balanced_labels(self):
        X = np.zeros((40, 1))
        y = np.array([0, 1] * 20)
        model = LogisticModel(l2=1.0).fit(X, y)
        assert model.weights[0] == pytest.approx(0.0, abs=1e-9)
        assert model.bias == pytest.approx(0.0, abs=1e-9)
        assert model.predict_proba(X)[0] == pytest.approx(0.5, abs=1e-12)

    def test_sigmoid_at_boundary(self):
        assert sigmoid(0.0) == 0.5

    def test_perfect_separation_unregularized_diverges(self):
        X = np.array([[-2.0], [-1.0], [1.0], [2.0]] * 10)
        y = np.array([0, 0, 1, 1] * 10)
        with pytest.raises(DivergenceError):
            LogisticModel(l2=0.0).fit(X, y)

    def test_converges_to_tight_gradient(self):
        rng = np.random.default_rng(3)
        X, y = make_logistic_data(rng, 500, [1.0, 0.5])
        model = LogisticModel(l2=0.1).fit(X, y)
        assert model.converged_


class TestKnn:
    def test_exact_match_k1(self):
        rng = np.random.default_rng(0)
        X = rng.normal(0, 1, (20, 3))
        y = (rng.random(20) < 0.5).astype(int)
        model = KnnModel(k=1).fit(X, y)
        assert np.array_equal(model.predict(X), y)

    def test_majority_of_three(self):
        X = np.array([[0.0], [0.1], [0.2], [5.0]])
        y = np.array([1, 1, 0, 0])
        model = KnnModel(k=3).fit(X, y)
        assert model.predict(np.array([[0.05]]))[0] == 1

    def test_xor_layout_k1(self):
        model = KnnModel(k=1).fit(XOR_X, XOR_Y)
        assert np.array_equal(model.predict(XOR_X), XOR_Y)

    def test_tie_broken_by_nearest_neighbor(self):
        X = np.array([[0.0], [1.0], [10.0], [11.0]])
        y = np.array([1, 1, 0, 0])
        model = KnnModel(k=4).fit(X, y)
        # query at 0.5: votes tied 2-2, nearest is label 1
        assert model.predict(np.array([[0.4]]))[0] == 1
        # query at 10.4: nearest is label 0
        assert model.predict(np.array([[10.4]]))[0] == 0

    def test_tie_proba_consistent_with_predict(self):
        X = np.array([[0.0], [1.0], [10.0], [11.0]])
        y = np.array([1, 1, 0, 0])
        model = KnnModel(k=4).fit(X, y)
        proba = model.predict_proba(np.array([[0.4], [10.4]]))
        pred = model.predict(np.array([[0.4], [10.4]]))
        assert np.array_equal(pred, (proba >= 0.5).astype(int))

    def test_k_exceeding_n_rejected(self):
        with pytest.raises(ValueError):
            KnnModel(k=5).fit(np.zeros((3, 1)), [0, 1, 0])


def gini(y):
    if len(y) == 0:
        return 0.0
    p = np.mean(y)
    return 2 * p * (1 - p)


def brute_best_gini_gain(X, y, min_leaf=1):
    """Exhaustive reference for the best achievable impurity decrease."""
    n, d = X.shape
    parent = gini(y)
    best = 0.0
    for j in range(d):
        vals = np.unique(X[:, j])
        for a, b in zip(vals, vals[1:]):
            t = (a + b) / 2
            mask = X[:, j] <= t
            nl, nr = mask.sum(), (~mask).sum()
            if nl < min_leaf or nr < min_leaf:
                continue
            gain = parent - (nl * gini(y[mask]) + nr * gini(y[~mask])) / n
            best = max(best, gain)
    return best


def split_gain(X, y, feat, thr):
    mask = X[:, feat] <= thr
    n = len(y)
    return gini(y) - (mask.sum() * gini(y[mask]) + (~mask).sum() * gini(y[~mask])) / n


class TestTree:
    def test_pure_node_no_split(self):
        X = np.array([[0.0], [1.0], [2.0]])
        y = np.array([1, 1, 1])
        model = TreeModel().fit(X, y)
        assert model.n_nodes == 1
        assert model.feat[0] == -1

    def test_one_dimensional_threshold(self):
        X = np.array([[0.0], [0.0], [1.0], [1.0]])
        y = np.array([0, 0, 1, 1])
        model = TreeModel().fit(X, y)
        assert model.feat[0] == 0
        assert model.thr[0] == pytest.approx(0.5)
        assert np.array_equal(model.predict(X), y)

    def test_split_gain_matches_brute_force_oracle(self):
        rng = np.random.default_rng(21)
        for trial in range(25):
            n = int(rng.integers(10, 60))
            d = int(rng.integers(1, 5))
            X = rng.integers(0, 6, (n, d)).astype(float)
            y = (rng.random(n) < 0.5).astype(int)
            model = TreeModel(max_depth=1).fit(X, y)
            brute = brute_best_gini_gain(X, y)
            if model.feat[0] == -1:
                assert brute <= 1e-12, f"trial {trial}: kernel missed a split"
            else:
                got = split_gain(X, y, model.feat[0], model.thr[0])
                assert got == pytest.approx(brute, abs=1e-9), f"trial {trial}"

    def test_accepted_splits_have_positive_gain(self):
        rng = np.random.default_rng(4)
        X = rng.integers(0, 4, (200, 5)).astype(float)
        y = (rng.random(200) < 0.5).astype(int)
        model = TreeModel(max_depth=4).fit(X, y)
        idx_y = {}
        # walk the tree, checking gain at every internal node
        def walk(node, rows):
            if model.feat[node] == -1:
                return
            f, t = model.feat[node], model.thr[node]
            gain = split_gain(X[rows], y[rows], f, t)
            assert gain > 0
            mask = X[rows, f] <= t
            walk(model.left[node], rows[mask])
            walk(model.right[node], rows[~mask])

        walk(0, np.arange(200))

    def test_min_samples_leaf_respected(self):
        rng = np.random.default_rng(5)
        X = rng.normal(0, 1, (100, 3))
        y = (rng.random(100) < 0.5).astype(int)
        model = TreeModel(min_samples_leaf=10).fit(X, y)
        leaves = model.node_count[
            [i for i in range(model.n_nodes) if model.feat[i] == -1]
        ]
        assert leaves.min() >= 10


class TestForest:
    def test_single_tree_without_bootstrap_equals_tree(self):
        rng = np.random.default_rng(6)
        X = rng.integers(0, 5, (150, 4)).astype(float)
        y = (rng.random(150) < 0.5).astype(int)
        forest = ForestModel(n_trees=1, bootstrap=False, m_features=4).fit(X, y, seed=0)
        tree = TreeModel().fit(X, y)
        assert np.allclose(forest.predict_proba(X), tree.predict_proba(X))

    def test_vote_majority(self):
        rng = np.random.default_rng(7)
        X = rng.normal(0, 1, (60, 3))
        y = (X[:, 0] > 0).astype(int)
        forest = ForestModel(n_trees=3).fit(X, y, seed=1)
        votes = np.stack([t.predict(X) for t in forest.trees])
        expected = (votes.sum(axis=0) * 2 > 3).astype(int)
        assert np.array_equal(forest.vote(X), expected)

    def test_forest_beats_stump_on_xor_plus_noise(self):
        rng = np.random.default_rng(8)
        n = 600
        X = np.column_stack(
            [rng.integers(0, 2, n), rng.integers(0, 2, n), rng.integers(0, 4, n)]
        ).astype(float)
        y_clean = (X[:, 0].astype(int) ^ X[:, 1].astype(int)).astype(int)
        flip = rng.random(n) < 0.05
        y = np.where(flip, 1 - y_clean, y_clean)
        train, test = np.arange(0, 400), np.arange(400, n)
        stump = TreeModel(max_depth=1).fit(X[train], y[train])
        forest = ForestModel(n_trees=200).fit(X[train], y[train], seed=3)
        acc_stump = np.mean(stump.predict(X[test]) == y[test])
        acc_forest = np.mean(forest.predict(X[test]) == y[test])
        assert acc_forest > acc_stump

    def test_deterministic_per_seed(self):
        rng = np.random.default_rng(9)
        X = rng.normal(0, 1, (80, 4))
        y = (rng.random(80) < 0.5).astype(int)
        a = ForestModel(n_trees=20).fit(X, y, seed=5).predict_proba(X)
        b = ForestModel(n_trees=20).fit(X, y, seed=5).predict_proba(X)
        assert np.array_equal(a, b)


def brute_best_boost_gain(X, g, h, lam, gamma, min_leaf=1):
    n, d = X.shape
    G, H = g.sum(), h.sum()
    parent = G * G / (H + lam)
    best = 0.0
    for j in range(d):
        vals = np.unique(X[:, j])
        for a, b in zip(vals, vals[1:]):
            t = (a + b) / 2
            mask = X[:, j] <= t
            if mask.sum() < min_leaf or (~mask).sum() < min_leaf:
                continue
            GL, HL = g[mask].sum(), h[mask].sum()
            GR, HR = G - GL, H - HL
            gain = 0.5 * (GL**2 / (HL + lam) + GR**2 / (HR + lam) - parent) - gamma
            best = max(best, gain)
    return best


class TestGbt:
    def test_depth_zero_leaf_weight_closed_form(self):
        # base score forced to 0: p=0.5 for all four rows
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([1, 0, 0, 0])
        lam = 1.0
        model = GbtModel(
            n_rounds=1, learning_rate=1.0, max_depth=0, reg_lambda=lam, base_score=0.0
        ).fit(X, y)
        g = 0.5 - y  # p - y at p = 0.5
        h = np.full(4, 0.25)
        expected = -g.sum() / (h.sum() + lam)
        leaf_value = model.trees_[0][4][0]
        assert leaf_value == pytest.approx(expected, abs=1e-12)
        # the update moves the prediction toward the base rate (0.25)
        assert expected < 0

    def test_split_gain_matches_brute_force_oracle(self):
        rng = np.random.default_rng(31)
        for trial in range(20):
            n = int(rng.integers(12, 50))
            d = int(rng.integers(1, 4))
            X = rng.integers(0, 5, (n, d)).astype(float)
            g = rng.normal(0, 1, n)
            h = rng.random(n) * 0.25 + 1e-3
            lam, gamma = 1.0, 0.0
            model = GbtModel(n_rounds=1, max_depth=1, reg_lambda=lam, gamma=gamma)
            # grow one tree directly on the supplied gradients
            from anemiabench.learners._grow import grow_boost_tree

            cap = 2 * n + 2
            feat = np.full(cap, -1, dtype=np.int64)
            thr = np.zeros(cap)
            left = np.zeros(cap, dtype=np.int64)
            right = np.zeros(cap, dtype=np.int64)
            value = np.zeros(cap)
            sorted_idx = np.ascontiguousarray(np.argsort(X, axis=0).astype(np.int64))
            grow_boost_tree(
                X, sorted_idx, g, h, 1, 1, lam, gamma, feat, thr, left, right, value
            )
            brute = brute_best_boost_gain(X, g, h, lam, gamma)
            if feat[0] == -1:
                assert brute <= 1e-9, f"trial {trial}"
            else:
                mask = X[:, feat[0]] <= thr[0]
                GL, HL = g[mask].sum(), h[mask].sum()
                GR, HR = g[~mask].sum(), h[~mask].sum()
                G, H = g.sum(), h.sum()
                got = 0.5 * (
                    GL**2 / (HL + lam) + GR**2 / (HR + lam) - G**2 / (H + lam)
                )
                assert got == pytest.approx(brute, abs=1e-9), f"trial {trial}"
                # leaf weights match the closed form on each side
                assert value[left[0]] == pytest.approx(-GL / (HL + lam), abs=1e-9)
                assert value[right[0]] == pytest.approx(-GR / (HR + lam), abs=1e-9)

    def test_training_loss_non_increasing(self):
        rng = np.random.default_rng(10)
        X = rng.integers(0, 4, (300, 6)).astype(float)
        w = rng.normal(0, 0.8, 6)
        y = (rng.random(300) < sigmoid((X - X.mean(0)) @ w)).astype(int)
        model = GbtModel(n_rounds=100, learning_rate=0.1, max_depth=3).fit(X, y)
        curve = np.array(model.train_loss_curve_)
        assert np.all(np.diff(curve) <= 1e-12)

    def test_huge_lambda_freezes_prediction_at_base(self):
        rng = np.random.default_rng(11)
        X = rng.normal(0, 1, (100, 3))
        y = (rng.random(100) < 0.3).astype(int)
        model = GbtModel(n_rounds=20, reg_lambda=1e12).fit(X, y)
        base_p = sigmoid(model.base_score_)
        assert np.allclose(model.predict_proba(X), base_p, atol=1e-6)


class TestSvm:
    def test_separable_linear_zero_training_errors(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [3.0, 0.0], [3.0, 1.0]])
        y = np.array([0, 0, 1, 1])
        model = SvmModel(C=100.0, kernel="linear").fit(X, y)
        decisions = model.decision_function(X)
        assert np.all(np.sign(decisions) == np.where(y == 1, 1, -1))
        # hard-margin decision values sit at the +-1 margin for SVs
        assert decisions.max() >= 0.9
        assert decisions.min() <= -0.9

    def test_box_constraint(self):
        rng = np.random.default_rng(13)
        X = rng.normal(0, 1, (120, 4))
        y = (rng.random(120) < 0.5).astype(int)
        C = 1.5
        model = SvmModel(C=C, kernel="rbf").fit(X, y)
        assert np.all(model.alpha_ >= -1e-9)
        assert np.all(model.alpha_ <= C + 1e-9)

    def test_rbf_self_kernel_is_one(self):
        X = np.array([[1.0, 2.0], [0.5, -1.0]])
        K = kernel_matrix(X, X, "rbf", gamma=0.3)
        assert np.allclose(np.diag(K), 1.0)

    def test_probabilities_increase_with_decision_value(self):
        rng = np.random.default_rng(14)
        X, y = make_logistic_data(rng, 200, [1.5, -1.0])
        model = SvmModel(C=1.0, kernel="linear").fit(X, y)
        d = model.decision_function(X)
        p = model.predict_proba(X)
        order = np.argsort(d)
        assert np.all(np.diff(p[order]) >= -1e-12)


class TestNaiveBayes:
    def test_unseen_level_gets_smoothing_floor(self):
        X = np.array([[0.0], [0.0], [1.0], [1.0]])
        y = np.array([0, 0, 1, 1])
        model = NbModel(alpha=1.0, column_levels=[3]).fit(X, y)
        # level 2 never seen: P = alpha / (count_class + alpha * levels)
        assert model.conditional(0, 0, 2) == pytest.approx(1.0 / (2 + 3), abs=1e-12)

    def test_degenerate_dependence_alpha_to_zero(self):
        X = np.array([[0.0], [1.0]] * 30)
        y = np.array([0, 1] * 30)
        model = NbModel(alpha=1e-9).fit(X, y)
        proba = model.predict_proba(np.array([[1.0]]))
        assert proba[0] == pytest.approx(1.0, abs=1e-6)

    def test_posteriors_normalized(self):
        rng = np.random.default_rng(15)
        X = rng.integers(0, 3, (80, 4)).astype(float)
        y = (rng.random(80) < 0.5).astype(int)
        model = NbModel(alpha=1.0).fit(X, y)
        # normalization is structural; conditional tables must sum to 1
        for table in model.log_cond:
            assert np.exp(table).sum(axis=1) == pytest.approx(1.0, abs=1e-12)

    def test_fractional_cells_round_to_levels(self):
        X = np.array([[0.0], [1.0]] * 20)
        y = np.array([0, 1] * 20)
        model = NbModel(alpha=0.5).fit(X, y)
        exact = model.predict_proba(np.array([[1.0]]))
        smote_like = model.predict_proba(np.array([[0.9]]))
        assert exact[0] == pytest.approx(smote_like[0], abs=1e-12)


class TestLda:
    def test_recovers_separating_axis(self):
        rng = np.random.default_rng(16)
        n = 2000
        X0 = rng.normal(0, 1, (n, 3))
        X1 = rng.normal(0, 1, (n, 3))
        X1[:, 1] += 3.0  # separation along axis 1
        X = np.vstack([X0, X1])
        y = np.array([0] * n + [1] * n)
        model = LdaModel(eps=0.0).fit(X, y)
        w = model.direction / np.linalg.norm(model.direction)
        angle = math.degrees(math.acos(min(1.0, abs(w[1]))))
        assert angle < 1.0

    def test_identical_means_fall_back_to_prior(self):
        rng = np.random.default_rng(17)
        X = rng.normal(0, 1, (300, 2))
        y = np.array([0] * 100 + [1] * 200)
        # same distribution for both classes: w ~ 0, proba ~ prior
        model = LdaModel(eps=0.0).fit(X, y)
        proba = model.predict_proba(rng.normal(0, 1, (50, 2)))
        assert np.allclose(proba, 2 / 3, atol=0.08)

    def test_scaling_inputs_preserves_labels(self):
        rng = np.random.default_rng(18)
        X = rng.normal(0, 1, (400, 3))
        y = ((X[:, 0] + 0.5 * X[:, 2] + rng.normal(0, 0.8, 400)) > 0).astype(int)
        a = LdaModel(eps=0.0).fit(X, y).predict(X)
        b = LdaModel(eps=0.0).fit(10.0 * X, y).predict(10.0 * X)
        assert np.array_equal(a, b)

    def test_singular_scatter_without_shrinkage_rejected(self):
        X = np.zeros((40, 2))
        X[:, 0] = np.arange(40)
        X[:, 1] = 2 * np.arange(40)  # perfectly collinear
        y = np.array([0, 1] * 20)
        with pytest.raises(SingularScatterError):
            LdaModel(eps=0.0).fit(X, y)


class TestMlp:
    def test_gradient_check_2_3_1(self):
        rng = np.random.default_rng(19)
        X = rng.normal(0, 1, (10, 2))
        y = (rng.random(10) < 0.5).astype(np.float64)
        model = MlpModel(hidden_sizes=(3,))
        model.init_params(2, seed=42)
        _, grads_w, grads_b = model.loss_and_gradients(X, y)

        h = 1e-5
        max_diff = 0.0
        for layer in range(len(model.weights)):
            for arr, grads in ((model.weights, grads_w), (model.biases, grads_b)):
                flat = arr[layer].ravel()
                gflat = grads[layer].ravel()
                for i in range(flat.size):
                    orig = flat[i]
                    flat[i] = orig + h
                    lp, _, _ = model.loss_and_gradients(X, y)
                    flat[i] = orig - h
                    lm, _, _ = model.loss_and_gradients(X, y)
                    flat[i] = orig
                    numeric = (lp - lm) / (2 * h)
                    max_diff = max(max_diff, abs(numeric - gflat[i]))
        assert max_diff <= 1e-6

    def test_zero_init_zero_input_outputs_sigmoid_of_bias(self):
        model = MlpModel(hidden_sizes=(4,))
        model.init_params(3, seed=0, zero=True)
        out = model._forward(np.zeros((1, 3)))[-1][0, 0]
        assert out == pytest.approx(0.5, abs=1e-12)

    def test_xor_reachability(self):
        model = MlpModel(hidden_sizes=(8,), lr=0.5, epochs=2000, batch_size=4)
        model.fit(XOR_X, XOR_Y, seed=1)
        assert np.array_equal(model.predict(XOR_X), XOR_Y)

    def test_deterministic_per_seed(self):
        rng = np.random.default_rng(20)
        X, y = make_logistic_data(rng, 60, [1.0, -1.0])
        a = MlpModel(hidden_sizes=(8,), epochs=30).fit(X, y, seed=3).predict_proba(X)
        b = MlpModel(hidden_sizes=(8,), epochs=30).fit(X, y, seed=3).predict_proba(X)
        assert np.array_equal(a, b)
