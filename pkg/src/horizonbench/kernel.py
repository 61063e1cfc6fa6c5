"""Nearest-neighbour window forecasting and RBF support vector regression (SMO)."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyData, NonConvergenceWarning

KNN_K = 5
KNN_SEQUENCE_LENGTH = 5
SVR_C = 10.0
SVR_EPSILON = 0.01
SVR_LAG = 5
SVR_TOL = 1e-3


@dataclass(frozen=True)
class KnnForecaster:
    windows: np.ndarray
    successors: np.ndarray
    k: int = KNN_K

    def __post_init__(self):
        if self.windows.shape[0] == 0:
            raise EmptyData("no stored windows")
        if self.k > self.windows.shape[0]:
            raise ValueError("k exceeds the number of stored windows")

    @property
    def sequence_length(self) -> int:
        return self.windows.shape[1]

    def predict(self, queries) -> np.ndarray:
        Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        if Q.shape[1] != self.sequence_length:
            raise DimensionMismatch(f"queries must have length {self.sequence_length}")
        out = np.empty(Q.shape[0])
        sq_store = np.einsum("ij,ij->i", self.windows, self.windows)
        for lo in range(0, Q.shape[0], 512):
            block = Q[lo:lo + 512]
            sq_block = np.einsum("ij,ij->i", block, block)
            approx = sq_store[None, :] - 2.0 * block @ self.windows.T + sq_block[:, None]
            # the expanded form is fast but rounds; screen with a margin, then rank the
            # candidates by exact distance with the earliest stored window winning ties
            kth = np.partition(approx, self.k - 1, axis=1)[:, self.k - 1]
            margin = 1e-9 * (sq_block[:, None] + sq_store.max() + 1.0)
            rows, cols = np.nonzero(approx <= kth[:, None] + margin)
            exact = np.square(block[rows] - self.windows[cols]).sum(axis=1)
            order = np.lexsort((cols, exact, rows))
            rows, cols = rows[order], cols[order]
            starts = np.searchsorted(rows, np.arange(block.shape[0]))
            rank = np.arange(rows.size) - starts[rows]
            keep = rank < self.k
            sums = np.bincount(rows[keep], weights=self.successors[cols[keep]], minlength=block.shape[0])
            out[lo:lo + 512] = sums / self.k
        return out


def knn_forecast(model: KnnForecaster, query) -> float:
    query = np.asarray(query, dtype=np.float64)
    if query.ndim != 1:
        raise DimensionMismatch("query must be a single window")
    return float(model.predict(query[None, :])[0])


def rbf_kernel(A, B, gamma: float) -> np.ndarray:
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    d2 = np.einsum("ij,ij->i", A, A)[:, None] - 2.0 * A @ B.T + np.einsum("ij,ij->i", B, B)[None, :]
    return np.exp(-gamma * np.maximum(d2, 0.0))


@dataclass(frozen=True)
class SvrModel:
    support_inputs: np.ndarray
    dual_coefficients: np.ndarray  # alpha_i - alpha_i^*
    bias: float
    gamma: float
    C: float
    epsilon_tube: float
    iterations: int = 0
    converged: bool = True

    @property
    def n_support(self) -> int:
        return self.dual_coefficients.size

    def predict(self, inputs) -> np.ndarray:
        X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        if self.n_support == 0:
            return np.full(X.shape[0], self.bias)
        return rbf_kernel(X, self.support_inputs, self.gamma) @ self.dual_coefficients + self.bias


def fit_svr(inputs, targets, C: float = SVR_C, epsilon_tube: float = SVR_EPSILON, gamma: float | None = None,
            tol: float = SVR_TOL, max_iter: int | None = None, on_iteration=None) -> SvrModel:
    """Epsilon-insensitive SVR solved by SMO with second-order working-set selection.

    The dual is posed over 2n variables (alpha, alpha*) stacked with signs
    +1/-1. ``on_iteration(alpha)`` is an optional probe for invariant tests.
    """
    X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    t = np.asarray(targets, dtype=np.float64)
    n = t.size
    if n < 1 or X.shape[0] != n:
        raise EmptyData("SVR needs matching, non-empty inputs and targets")
    if C <= 0:
        raise ValueError("C must be positive")
    gamma = 1.0 / X.shape[1] if gamma is None else gamma
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if max_iter is None:
        max_iter = max(100_000, 10 * n)

    K = rbf_kernel(X, X, gamma)
    kdiag = np.diag(K).copy()
    y = np.concatenate([np.ones(n), -np.ones(n)])
    alpha = np.zeros(2 * n)
    grad = np.concatenate([epsilon_tube - t, epsilon_tube + t])
    tau = 1e-12

    iterations = 0
    converged = False
    while iterations < max_iter:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        score = -y * grad
        i_cands = np.flatnonzero(up)
        if i_cands.size == 0:
            converged = True
            break
        i = int(i_cands[np.argmax(score[i_cands])])
        g_max = score[i]
        j_cands = np.flatnonzero(low)
        if j_cands.size == 0 or g_max - score[j_cands].min() < tol:
            converged = True
            break
        ii = i % n
        jk = j_cands % n
        b = g_max - score[j_cands]
        a = kdiag[ii] + kdiag[jk] - 2.0 * K[ii, jk]
        a = np.where(a > 0, a, tau)
        obj = np.where(b > 0, -(b * b) / a, np.inf)
        j = int(j_cands[np.argmin(obj)])
        jj = j % n

        # two-variable subproblem, as in LIBSVM's Solver::Solve
        q_ij = K[ii, jj]
        quad = max(kdiag[ii] + kdiag[jj] - 2.0 * q_ij, tau)
        old_i, old_j = alpha[i], alpha[j]
        if y[i] != y[j]:
            delta = (-grad[i] - grad[j]) / quad
            diff = old_i - old_j
            ai, aj = old_i + delta, old_j + delta
            if diff > 0 and aj < 0:
                aj, ai = 0.0, diff
            elif diff <= 0 and ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0 and ai > C:
                ai, aj = C, C - diff
            elif diff <= 0 and aj > C:
                aj, ai = C, C + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            total = old_i + old_j
            ai, aj = old_i - delta, old_j + delta
            if total > C and ai > C:
                ai, aj = C, total - C
            elif total <= C and aj < 0:
                aj, ai = 0.0, total
            if total > C and aj > C:
                aj, ai = C, total - C
            elif total <= C and ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        d_i, d_j = ai - old_i, aj - old_j
        # Q[:, k] = y * y_k * K[:, k mod n]
        col_i = np.tile(K[:, ii], 2)
        col_j = np.tile(K[:, jj], 2)
        grad += y * (y[i] * d_i * col_i + y[j] * d_j * col_j)
        iterations += 1
        if on_iteration is not None:
            on_iteration(alpha)

    if not converged:
        warnings.warn("SVR SMO hit its iteration cap before reaching the KKT tolerance",
                      NonConvergenceWarning, stacklevel=2)

    # bias from free variables, falling back to the midpoint of the feasible interval
    yg = y * grad
    free = (alpha > 0) & (alpha < C)
    if np.any(free):
        rho = float(yg[free].mean())
    else:
        at_upper = alpha >= C
        ub_mask = (at_upper & (y < 0)) | (~at_upper & (y > 0))
        lb_mask = (at_upper & (y > 0)) | (~at_upper & (y < 0))
        ub = yg[ub_mask].min() if np.any(ub_mask) else np.inf
        lb = yg[lb_mask].max() if np.any(lb_mask) else -np.inf
        rho = float((ub + lb) / 2.0)
    coef = alpha[:n] - alpha[n:]
    support = np.flatnonzero(np.abs(coef) > 0)
    return SvrModel(X[support].copy(), coef[support].copy(), -rho, gamma, C, epsilon_tube, iterations, converged)
