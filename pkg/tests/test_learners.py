"""Tests for the from-scratch estimators and the cooperative deadline."""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from learners import (  # noqa: E402
    Bagging,
    Deadline,
    DecisionTree,
    ExecutionTimeout,
    KNearestNeighbours,
    LinearRegression,
    Logistic,
    NaiveBayes,
    ZeroR,
)

NEVER = Deadline.never()


def separable(n=60, seed=0):
    rng = np.random.default_rng(seed)
    x = np.concatenate([rng.uniform(0.0, 0.4, n // 2), rng.uniform(0.6, 1.0, n // 2)])
    y = (x > 0.5).astype(int)
    return x[:, None], y


# --- deadline --------------------------------------------------------------

def test_never_deadline_does_not_expire():
    assert not NEVER.expired()
    NEVER.check()


def test_expired_deadline_raises():
    deadline = Deadline(-1.0)
    assert deadline.expired()
    with pytest.raises(ExecutionTimeout):
        deadline.check()


# --- classifiers -----------------------------------------------------------

def test_zero_r_predicts_the_majority_and_breaks_ties_low():
    X = np.zeros((4, 1))
    assert list(ZeroR().fit(X, [0], np.array([1, 1, 0, 2]), 3, NEVER).predict(X)) == [1] * 4
    assert ZeroR().fit(X, [0], np.array([0, 1, 0, 1]), 2, NEVER).predict(X)[0] == 0


@pytest.mark.parametrize('make', [
    lambda: DecisionTree(),
    lambda: NaiveBayes(),
    lambda: Logistic(),
    lambda: KNearestNeighbours(k=1),
    lambda: Bagging('decision_tree', 5, seed=0),
])
def test_classifiers_separate_well_separated_classes(make):
    X, y = separable()
    predictions = make().fit(X, [0], y, 2, NEVER).predict(X)
    assert (predictions == y).mean() >= 0.95


def test_tree_splits_on_a_nominal_feature():
    X = np.array([[0.0], [1.0], [2.0], [0.0], [1.0], [2.0]])
    y = np.array([0, 1, 1, 0, 1, 1])
    tree = DecisionTree().fit(X, [3], y, 2, NEVER)
    assert list(tree.predict(X)) == list(y)


def test_missing_cells_are_tolerated_at_prediction():
    X, y = separable()
    queries = np.array([[np.nan], [0.1], [0.9]])
    for model in (DecisionTree(), NaiveBayes(), KNearestNeighbours(k=3)):
        out = model.fit(X, [0], y, 2, NEVER).predict(queries)
        assert len(out) == 3
        assert list(out[1:]) == [0, 1]


def test_tree_honours_the_deadline():
    X, y = separable()
    with pytest.raises(ExecutionTimeout):
        DecisionTree().fit(X, [0], y, 2, Deadline(-1.0))


# --- regression ------------------------------------------------------------

def test_linear_regression_recovers_coefficients():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(100, 2))
    y = 2.0 * X[:, 0] - 3.0 * X[:, 1] + 1.0
    model = LinearRegression().fit(X, [0, 0], y, 0, NEVER)
    assert np.allclose(model.predict(X), y, atol=1e-4)


def test_knn_averages_neighbours_for_numeric_targets():
    X = np.array([[0.0], [1.0], [10.0]])
    y = np.array([1.0, 3.0, 100.0])
    model = KNearestNeighbours(k=2).fit(X, [0], y, 0, NEVER)
    assert model.predict(np.array([[0.5]]))[0] == pytest.approx(2.0)
