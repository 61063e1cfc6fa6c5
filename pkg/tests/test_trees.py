import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from horizonbench.trees import fit_gradient_boost, fit_random_forest, fit_regression_tree


def test_constant_targets_single_leaf():
    X = np.random.default_rng(0).normal(size=(50, 3))
    tree = fit_regression_tree(X, np.full(50, 4.0))
    assert tree.n_splits == 0
    np.testing.assert_array_equal(tree.predict(X[:5]), 4.0)


def test_step_function_one_split():
    x = np.arange(10.0)
    y = np.where(x < 5, 0.0, 10.0)
    tree = fit_regression_tree(x[:, None], y, min_leaf=1)
    assert tree.n_splits == 1
    assert 4.0 < tree.threshold[0] < 5.0
    np.testing.assert_array_equal(tree.predict(x[:, None]), y)


def test_max_splits_zero_is_mean():
    rng = np.random.default_rng(1)
    X, y = rng.normal(size=(30, 2)), rng.normal(size=30)
    tree = fit_regression_tree(X, y, max_splits=0)
    np.testing.assert_allclose(tree.predict(X), y.mean())


def brute_force_best_split(X, y, min_leaf):
    best = (0.0, None, None)
    for f in range(X.shape[1]):
        values = np.unique(X[:, f])
        for lo, hi in zip(values[:-1], values[1:]):
            thr = (lo + hi) / 2
            left, right = y[X[:, f] <= thr], y[X[:, f] > thr]
            if left.size < min_leaf or right.size < min_leaf:
                continue
            gain = ((y - y.mean()) ** 2).sum() - ((left - left.mean()) ** 2).sum() - ((right - right.mean()) ** 2).sum()
            if gain > best[0] + 1e-12:
                best = (gain, f, thr)
    return best


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_root_split_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    X = np.round(rng.normal(size=(40, 3)), 2)
    y = rng.normal(size=40) + 2 * (X[:, 1] > 0)
    tree = fit_regression_tree(X, y, max_splits=1, min_leaf=3)
    gain, f, thr = brute_force_best_split(X, y, 3)
    assert tree.feature[0] == f
    assert tree.threshold[0] == pytest.approx(thr)


def test_leaves_respect_min_leaf():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(300, 4))
    tree = fit_regression_tree(X, rng.normal(size=300), min_leaf=7)
    counts = np.bincount(tree.apply(X))
    assert counts[counts > 0].min() >= 7


def test_forest_without_bootstrap_equals_single_tree():
    rng = np.random.default_rng(3)
    X, y = rng.normal(size=(120, 4)), rng.normal(size=120)
    forest = fit_random_forest(X, y, seed=0, n_trees=5, bootstrap=False, max_features=None)
    tree = fit_regression_tree(X, y)
    np.testing.assert_allclose(forest.predict(X), tree.predict(X), atol=1e-12)


def test_forest_deterministic_oob():
    rng = np.random.default_rng(4)
    X, y = rng.normal(size=(200, 5)), rng.normal(size=200)
    a = fit_random_forest(X, y, seed=9, n_trees=10)
    b = fit_random_forest(X, y, seed=9, n_trees=10)
    assert a.oob_error == b.oob_error
    np.testing.assert_array_equal(a.predict(X), b.predict(X))


@pytest.mark.parametrize("p, max_features", [(1, "third"), (3, None)])
def test_forest_learns_identity(p, max_features):
    # with one candidate feature per split out of three, two thirds of the splits land on
    # noise columns and the bound is out of reach (an independent forest agrees), so the
    # multi-column case considers every feature
    rng = np.random.default_rng(5)
    X = rng.uniform(0, 1, size=(500, p))
    forest = fit_random_forest(X, X[:, 0], seed=0, n_trees=30, max_features=max_features)
    Xt = rng.uniform(0, 1, size=(200, p))
    err = np.sqrt(np.mean((forest.predict(Xt) - Xt[:, 0]) ** 2))
    assert err < 0.1 * Xt[:, 0].std()
    single = fit_regression_tree(X, X[:, 0])
    assert err <= np.sqrt(np.mean((single.predict(Xt) - Xt[:, 0]) ** 2)) * 1.5


def test_boost_zero_cycles_is_mean():
    rng = np.random.default_rng(6)
    X, y = rng.normal(size=(40, 2)), rng.normal(size=40)
    model = fit_gradient_boost(X, y, n_cycles=0)
    np.testing.assert_allclose(model.predict(X), y.mean())


def test_boost_first_cycle_improves_step_data():
    # 4-point step: the first stage removes the whole step when lr = 1
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    model = fit_gradient_boost(X, y, learning_rate=1.0, n_cycles=1)
    hist = model.train_rmse_history
    assert hist[1] < hist[0]
    np.testing.assert_allclose(model.predict(X), y, atol=1e-12)


def test_boost_rmse_non_increasing():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(400, 5))
    y = np.sin(X[:, 0]) + 0.3 * X[:, 1] ** 2 + 0.1 * rng.normal(size=400)
    hist = np.array(fit_gradient_boost(X, y).train_rmse_history)
    assert hist.size == 101
    assert np.all(np.diff(hist) <= 1e-12)
    assert all(t.n_splits <= 10 for t in fit_gradient_boost(X, y, n_cycles=3).stages)
