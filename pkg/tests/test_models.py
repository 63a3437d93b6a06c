# -*- coding: utf-8 -*-
import math

import numpy as np
import pytest

from errors import ConfigError, DegenerateLabels, DimensionMismatch, ModelFormatError
from models import (
    LEARNERS, ConstantModel, ForestModel, GaussianNB, LearnerSpec, LinearModel, TrainingSet, TreeModel,
    dump_model, feature_ranking, load_model, load_model_lines, logistic_gradient, logistic_objective,
    mean_decrease_impurity, odds_ratios, predict_proba, rank_scores, squared_hinge_gradient,
    squared_hinge_objective, train_cart, train_linear_svm, train_logistic, train_model,
    train_naive_bayes, train_random_forest,
)


def _separable(seed=0, n=60):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(2.0, 0.5, size=(n // 2, 2)), rng.normal(-2.0, 0.5, size=(n // 2, 2))])
    y = np.array([1] * (n // 2) + [0] * (n // 2))
    return TrainingSet(X, y)


def _xor():
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]] * 3, dtype=float)
    y = np.array([0, 1, 1, 0] * 3)
    return TrainingSet(X, y)


def _planted(seed=1, n=200):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, size=n)
    signal = y + rng.normal(0, 0.3, size=n)
    noise = rng.normal(0, 1, size=(n, 2))
    return TrainingSet(np.column_stack([noise[:, 0], signal, noise[:, 1]]), y)


def _central_diff(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


# ------------------------------
# Linear models
# ------------------------------

@pytest.mark.parametrize("objective,gradient", [
    (logistic_objective, logistic_gradient),
    (squared_hinge_objective, squared_hinge_gradient),
])
def test_gradients_match_finite_differences(objective, gradient):
    rng = np.random.default_rng(3)
    data = _planted(n=40)
    for _ in range(20):
        theta = rng.normal(0, 0.5, size=data.n_features + 1)

        def f(th):
            return objective(th[:-1], th[-1], data.X, data.y, 0.7, "l2")

        gw, gb = gradient(theta[:-1], theta[-1], data.X, data.y, 0.7, "l2")
        analytic = np.append(gw, gb)
        numeric = _central_diff(f, theta)
        scale = np.maximum(1.0, np.abs(numeric))
        assert (np.abs(analytic - numeric) / scale).max() < 1e-4


@pytest.mark.parametrize("family", ["logistic-l1", "logistic-l2", "svm-l1", "svm-l2"])
def test_linear_models_separate_toy_data(family):
    data = _separable()
    model = train_model(LearnerSpec(family), data)
    pred = (model.predict_proba(data.X) >= 0.5).astype(int)
    assert (pred == data.y).all()


def test_logistic_optimum_has_zero_gradient():
    data = _planted(n=80)
    model = train_logistic(data, "l2", c=1.0)
    gw, gb = logistic_gradient(model.weights, model.bias, data.X, data.y, 1.0, "l2")
    assert np.abs(np.append(gw, gb)).max() < 1e-3


def test_prior_only_fit_recovers_log_odds():
    X = np.zeros((40, 3))
    y = np.array([1] * 10 + [0] * 30)
    model = train_logistic(TrainingSet(X, y), "l2", c=1.0)
    np.testing.assert_allclose(model.weights, 0.0, atol=1e-12)
    assert model.bias == pytest.approx(math.log(10 / 30), abs=1e-5)


@pytest.mark.parametrize("penalty", ["l1", "l2"])
def test_svm_objective_never_increases(penalty):
    model = train_linear_svm(_planted(n=120), penalty, c=1.0)
    trace = np.asarray(model.trace)
    assert len(trace) > 1
    assert (np.diff(trace) <= 1e-9 * np.abs(trace[:-1]).max()).all()


def test_l1_zeroes_noise_features_at_small_c():
    model = train_logistic(_planted(n=200), "l1", c=0.05)
    w = model.weights
    assert abs(w[1]) > 0
    assert abs(w[0]) < 1e-8 and abs(w[2]) < 1e-8


@pytest.mark.parametrize("train", [train_logistic, train_linear_svm])
def test_l1_zeroes_one_of_duplicated_informative_columns(train):
    rng = np.random.default_rng(7)
    y = rng.integers(0, 2, size=400)
    f = y + rng.normal(0, 0.4, size=400)
    X = np.column_stack([f, f, rng.normal(0, 1, size=400)])
    model = train(TrainingSet(X, y), "l1", c=0.05)
    w = model.weights
    assert abs(w[0]) > 0
    assert w[1] == 0.0


def test_l1_duplicated_columns_carry_the_single_column_weight():
    base = _planted(n=200)
    single = train_logistic(TrainingSet(base.X[:, [1]], base.y), "l1", c=0.05)
    twins = train_logistic(TrainingSet(base.X[:, [1, 1]], base.y), "l1", c=0.05)
    assert twins.weights[1] == 0.0
    assert twins.weights[0] == pytest.approx(single.weights[0], rel=1e-4)
    assert twins.bias == pytest.approx(single.bias, rel=1e-4, abs=1e-6)


def test_l2_keeps_duplicated_columns_equal():
    base = _planted(n=120)
    X = np.column_stack([base.X[:, 1], base.X[:, 1]])
    model = train_logistic(TrainingSet(X, base.y), "l2")
    assert model.weights[0] == pytest.approx(model.weights[1], rel=1e-9)


def test_linear_requires_both_labels():
    data = TrainingSet(np.ones((5, 2)), np.ones(5, dtype=int))
    with pytest.raises(DegenerateLabels):
        train_logistic(data)


def test_zero_model_predicts_half_and_is_monotone():
    zero = LinearModel("logistic", "l2", 1.0, np.zeros(2), 0.0)
    assert predict_proba(zero, [3.0, -1.0]) == 0.5
    m = LinearModel("svm", "l2", 1.0, np.array([1.0, 0.0]), 0.0)
    p = m.predict_proba(np.array([[-2.0, 0], [0.0, 0], [2.0, 0]]))
    assert (np.diff(p) > 0).all()


# ------------------------------
# Trees and forests
# ------------------------------

def test_pure_data_gives_single_leaf():
    data = TrainingSet(np.random.default_rng(0).normal(size=(10, 3)), np.ones(10, dtype=int))
    tree = train_cart(data)
    assert tree.node_count == 1
    assert predict_proba(tree, [0.0, 0.0, 0.0]) == 1.0


def test_cart_learns_xor():
    data = _xor()
    tree = train_cart(data)
    assert tree.depth() == 2
    assert ((tree.predict_proba(data.X) >= 0.5).astype(int) == data.y).all()


def test_cart_respects_min_leaf():
    data = _planted(n=100)
    tree = train_cart(data, min_leaf=7)
    leaf_sizes = tree.counts[tree.leaves()].sum(axis=1)
    assert (leaf_sizes >= 7).all()


def test_cart_max_depth():
    assert train_cart(_planted(n=100), max_depth=2).depth() <= 2


def test_single_tree_forest_equals_cart():
    rng = np.random.default_rng(21)
    for _ in range(50):
        n = int(rng.integers(8, 40))
        d = int(rng.integers(1, 5))
        X = rng.integers(0, 4, size=(n, d)).astype(float)
        y = rng.integers(0, 2, size=n)
        if y.min() == y.max():
            y[0] = 1 - y[0]
        data = TrainingSet(X, y)
        tree = train_cart(data)
        forest = train_random_forest(data, n_trees=1, mtry="all", bootstrap=False, seed=5)
        assert forest.trees[0] == tree
        points = rng.integers(0, 4, size=(20, d)).astype(float)
        expected = (tree.predict_proba(points) >= 0.5).astype(float)
        np.testing.assert_array_equal(forest.predict_proba(points), expected)


def test_forest_is_deterministic_and_accurate():
    data = _separable(seed=2, n=80)
    a = train_random_forest(data, n_trees=25, seed=9)
    b = train_random_forest(data, n_trees=25, seed=9)
    assert a == b
    np.testing.assert_array_equal(a.predict_proba(data.X), b.predict_proba(data.X))
    assert a.oob_score >= 0.95


def test_forest_votes_unanimous():
    data = _separable(seed=4)
    forest = train_random_forest(data, n_trees=10, seed=1)
    assert predict_proba(forest, [5.0, 5.0]) == 1.0
    assert predict_proba(forest, [-5.0, -5.0]) == 0.0


# ------------------------------
# Naive Bayes
# ------------------------------

def test_naive_bayes_symmetric_boundary():
    X = np.array([[-1.2], [-1.0], [-0.8], [0.8], [1.0], [1.2]])
    y = np.array([0, 0, 0, 1, 1, 1])
    nb = train_naive_bayes(TrainingSet(X, y))
    assert predict_proba(nb, [0.0]) == pytest.approx(0.5)
    assert predict_proba(nb, [0.1]) > 0.5 > predict_proba(nb, [-0.1])


def test_naive_bayes_identical_classes_give_half():
    X = np.array([[0.0], [1.0], [0.0], [1.0]])
    y = np.array([0, 0, 1, 1])
    nb = train_naive_bayes(TrainingSet(X, y))
    np.testing.assert_allclose(nb.predict_proba(np.array([[-3.0], [0.5], [7.0]])), 0.5)


def test_naive_bayes_variance_floor():
    X = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0]])
    y = np.array([0, 0, 1, 1])
    nb = train_naive_bayes(TrainingSet(X, y), var_floor=1e-4)
    assert (nb.variances[:, 0] == 1e-4).all()
    assert np.isfinite(nb.predict_proba(X)).all()


# ------------------------------
# Shared behaviour
# ------------------------------

@pytest.mark.parametrize("family", LEARNERS)
def test_every_learner_outputs_probabilities(family):
    data = _planted(n=120)
    model = train_model(LearnerSpec(family, n_trees=10), data)
    p = model.predict_proba(np.random.default_rng(0).normal(0, 3, size=(50, 3)))
    assert ((p >= 0) & (p <= 1)).all()


@pytest.mark.parametrize("family", LEARNERS)
def test_training_is_deterministic(family):
    data = _planted(n=90)
    spec = LearnerSpec(family, n_trees=8, seed=3)
    assert train_model(spec, data) == train_model(spec, data)


def test_dimension_mismatch():
    model = train_model(LearnerSpec("logistic-l2"), _planted(n=40))
    with pytest.raises(DimensionMismatch):
        predict_proba(model, [1.0, 2.0])


def test_learner_spec_validation():
    with pytest.raises(ConfigError):
        LearnerSpec("boosting")
    with pytest.raises(ConfigError):
        LearnerSpec("svm-l2", c=0.0)


def test_learner_spec_from_settings():
    spec = LearnerSpec.from_settings({"models.c": 2.5, "models.mtry": "3", "run.seed": 11}, "forest")
    assert (spec.c, spec.mtry, spec.seed) == (2.5, 3, 11)


def test_constant_model():
    m = ConstantModel(4, 0.0)
    np.testing.assert_array_equal(m.predict_proba(np.ones((3, 4))), 0.0)


# ------------------------------
# Importance
# ------------------------------

def test_odds_ratio_one_nonzero_weight_ranks_first():
    m = LinearModel("logistic", "l1", 1.0, np.array([0.0, 0.0, -2.0, 0.0]), 0.1)
    ranking = odds_ratios(m)
    assert ranking.order[0] == 2
    assert ranking.scores[2] == pytest.approx(math.exp(2.0))
    assert ranking.order[1:] == (0, 1, 3)


def test_all_zero_weights_rank_by_index():
    m = LinearModel("logistic", "l2", 1.0, np.zeros(5), 0.0)
    assert odds_ratios(m).order == (0, 1, 2, 3, 4)


def test_duplicate_column_l1_refit_keeps_the_first_twin():
    base = _planted(n=200)
    X = np.column_stack([base.X[:, 0], base.X[:, 1], base.X[:, 1]])
    data = TrainingSet(X, base.y)
    model = train_logistic(data, "l1")
    ranking = feature_ranking(model, data)
    assert ranking.order[0] == 1
    assert ranking.scores[2] == 1.0
    assert feature_ranking(model, data) == ranking


def test_rank_scores_tie_break():
    assert rank_scores([1.0, 3.0, 3.0, 0.5]).order == (1, 2, 0, 3)
    assert rank_scores([1.0, 3.0]).rank_of(0) == 2


def test_mdi_single_splitting_feature():
    X = np.column_stack([np.zeros(10), np.r_[np.zeros(5), np.ones(5)]])
    y = np.r_[np.zeros(5, dtype=int), np.ones(5, dtype=int)]
    ranking = mean_decrease_impurity(train_cart(TrainingSet(X, y)))
    assert ranking.scores == (0.0, 1.0)


def test_mdi_sums_to_one_and_finds_signal():
    data = _planted(n=300)
    forest = train_random_forest(data, n_trees=30, seed=2)
    ranking = mean_decrease_impurity(forest)
    assert abs(sum(ranking.scores) - 1.0) <= 1e-9
    assert ranking.order[0] == 1
    assert ranking.scores[1] > max(ranking.scores[0], ranking.scores[2])


def test_mdi_without_splits_is_uniform():
    data = TrainingSet(np.ones((6, 3)), np.array([0, 1, 0, 1, 0, 1]))
    ranking = mean_decrease_impurity(train_cart(data))
    assert ranking.scores == (1 / 3, 1 / 3, 1 / 3)


def test_feature_ranking_for_naive_bayes_uses_linear_proxy():
    data = _planted(n=150)
    ranking = feature_ranking(train_naive_bayes(data), data)
    assert ranking.order[0] == 1


# ------------------------------
# Serialization
# ------------------------------

@pytest.mark.parametrize("family", LEARNERS)
def test_model_text_round_trip(family):
    data = _planted(n=60)
    model = train_model(LearnerSpec(family, n_trees=4), data)
    lines = dump_model(model, "CE")
    back, schema, used = load_model_lines(lines + ["trailing"])
    assert schema == "CE"
    assert used == len(lines)
    assert back == model
    points = np.random.default_rng(1).normal(size=(10, 3))
    np.testing.assert_array_equal(back.predict_proba(points), model.predict_proba(points))


def test_constant_round_trip():
    m = ConstantModel(6, 1.0)
    back = load_model(dump_model(m))
    assert isinstance(back, ConstantModel) and (back.n_features, back.value) == (6, 1.0)


@pytest.mark.parametrize("lines", [
    [],
    ["mcua-model 2"],
    ["mcua-model 1", "kind linear", "schema -", "family logistic", "penalty l1", "c 0x1p+0",
     "n_features 3", "weights 0x0p+0", "bias 0x0p+0", "end"],
    ["mcua-model 1", "kind bagging", "schema -", "end"],
    ["mcua-model 1", "kind constant", "schema -", "n_features three", "value 0x0p+0", "end"],
    ["mcua-model 1", "kind constant", "schema -", "n_features 3", "value half", "end"],
    ["mcua-model 1", "kind tree", "schema -", "n_features 1", "nodes 1",
     "node 0 -1 0x0p+0 x -1 0x1p+0 0x0p+0", "end"],
    ["mcua-model 1", "kind naive-bayes", "schema -", "n_features 2", "var_floor 0x1p-30",
     "priors 0x1p-1 0x1p-1", "means 0x0p+0 0x0p+0 0x0p+0", "variances 0x1p+0 0x1p+0 0x1p+0 0x1p+0", "end"],
])
def test_bad_model_text(lines):
    with pytest.raises(ModelFormatError):
        load_model(lines)


def test_kinds_are_distinct():
    assert {LinearModel.kind, TreeModel.kind, ForestModel.kind, GaussianNB.kind, ConstantModel.kind} == {
        "linear", "tree", "forest", "naive-bayes", "constant"}
