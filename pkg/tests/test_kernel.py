import numpy as np
import pytest
from scipy.optimize import minimize

from horizonbench.kernel import KnnForecaster, fit_svr, knn_forecast, rbf_kernel


def test_knn_repeated_window():
    W = np.vstack([np.ones((6, 5)), np.zeros((4, 5))])
    y = np.r_[np.full(6, 3.0), np.full(4, -1.0)]
    assert knn_forecast(KnnForecaster(W, y), np.ones(5)) == pytest.approx(3.0)


def test_knn_k1_exact():
    rng = np.random.default_rng(0)
    W, y = rng.normal(size=(20, 5)), rng.normal(size=20)
    assert knn_forecast(KnnForecaster(W, y, k=1), W[7]) == y[7]


def test_knn_hand_ranked():
    W = np.array([[0.0], [1.0], [2.0]])
    model = KnnForecaster(W, np.array([10.0, 20.0, 30.0]), k=2)
    assert knn_forecast(model, [0.0]) == pytest.approx(15.0)


def test_knn_ties_prefer_earliest():
    # four windows equidistant from the query; the first two stored win with k=2
    W = np.array([[1.0], [-1.0], [1.0], [-1.0]])
    model = KnnForecaster(W, np.array([1.0, 2.0, 3.0, 4.0]), k=2)
    assert knn_forecast(model, [0.0]) == pytest.approx(1.5)


def test_knn_matches_bruteforce():
    rng = np.random.default_rng(1)
    W = np.round(rng.random((700, 5)) * 4) / 4
    y = rng.random(700)
    Q = np.round(rng.random((90, 5)) * 4) / 4
    d = ((Q[:, None, :] - W[None]) ** 2).sum(-1)
    ref = y[np.argsort(d, axis=1, kind="stable")[:, :5]].mean(1)
    np.testing.assert_allclose(KnnForecaster(W, y).predict(Q), ref, atol=1e-15)


def test_rbf_kernel_properties():
    X = np.random.default_rng(2).normal(size=(10, 3))
    K = rbf_kernel(X, X, 0.5)
    np.testing.assert_allclose(np.diag(K), 1.0)
    np.testing.assert_allclose(K, K.T)
    assert np.linalg.eigvalsh(K).min() > -1e-10


def test_svr_constant_targets():
    X = np.linspace(0, 1, 30)[:, None]
    model = fit_svr(X, np.full(30, 2.5))
    assert model.n_support == 0
    np.testing.assert_allclose(model.predict(X), 2.5, atol=1e-12)


def test_svr_single_point():
    model = fit_svr(np.array([[0.3, 0.1]]), np.array([1.7]))
    assert abs(model.predict([[0.3, 0.1]])[0] - 1.7) <= 0.01 + 1e-9


def test_svr_sine_fit():
    x = np.linspace(0, 2 * np.pi, 200)
    model = fit_svr(x[:, None], np.sin(x), C=10, epsilon_tube=0.01, gamma=1.0)
    assert model.converged
    assert np.sqrt(np.mean((model.predict(x[:, None]) - np.sin(x)) ** 2)) < 0.05


def dual_oracle(X, y, C, eps, gamma):
    """Generic constrained solve of the same dual on a small problem."""
    K = rbf_kernel(X, X, gamma)
    n = y.size

    def obj(z):
        beta = z[:n] - z[n:]
        return 0.5 * beta @ K @ beta + eps * z.sum() - y @ beta

    def grad(z):
        g = K @ (z[:n] - z[n:])
        return np.r_[g + eps - y, -g + eps + y]

    res = minimize(obj, np.zeros(2 * n), jac=grad, method="SLSQP", bounds=[(0, C)] * (2 * n),
                   constraints=[{"type": "eq", "fun": lambda z: z[:n].sum() - z[n:].sum(),
                                 "jac": lambda z: np.r_[np.ones(n), -np.ones(n)]}],
                   options={"maxiter": 500, "ftol": 1e-12})
    return obj(res.x)


def test_svr_dual_objective_matches_oracle():
    x = np.linspace(0, 2 * np.pi, 20)
    y = np.sin(x)
    model = fit_svr(x[:, None], y, C=10, epsilon_tube=0.01, gamma=1.0, tol=1e-6)
    K = rbf_kernel(x[:, None], x[:, None], 1.0)
    beta = np.zeros(20)
    # rebuild the full coefficient vector from the support set
    for sv, coef in zip(model.support_inputs[:, 0], model.dual_coefficients):
        beta[np.argmin(np.abs(x - sv))] = coef
    ours = 0.5 * beta @ K @ beta + 0.01 * np.abs(beta).sum() - y @ beta
    assert ours == pytest.approx(dual_oracle(x[:, None], y, 10, 0.01, 1.0), abs=1e-4)
    assert abs(beta.sum()) < 1e-8
    assert np.all(np.abs(beta) <= 10 + 1e-9)
