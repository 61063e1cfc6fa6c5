"""Single-hidden-layer tanh network trained by Levenberg-Marquardt."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyData

HIDDEN = 10
MAX_EPOCHS = 100
LAMBDA_INIT = 1e-3
LAMBDA_MAX = 1e10


@dataclass(frozen=True)
class MlpModel:
    W1: np.ndarray  # (hidden, lag)
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    damping: float = LAMBDA_INIT
    sse_history: tuple = field(default=(), repr=False)

    @property
    def n_params(self) -> int:
        return self.W1.size + self.b1.size + self.w2.size + 1

    def pack(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.w2, [self.b2]])

    def predict(self, inputs) -> np.ndarray:
        X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        return np.tanh(X @ self.W1.T + self.b1) @ self.w2 + self.b2


def _unpack(theta, hidden, lag):
    k = hidden * lag
    return theta[:k].reshape(hidden, lag), theta[k:k + hidden], theta[k + hidden:k + 2 * hidden], theta[-1]


def mlp_forward(theta, X, hidden=HIDDEN):
    W1, b1, w2, b2 = _unpack(theta, hidden, X.shape[1])
    return np.tanh(X @ W1.T + b1) @ w2 + b2


def mlp_jacobian(theta, X, hidden=HIDDEN):
    """d(output_i)/d(theta_j), shape (n, n_params), in pack() order."""
    W1, b1, w2, _ = _unpack(theta, hidden, X.shape[1])
    a = np.tanh(X @ W1.T + b1)
    dz = (1.0 - a * a) * w2  # (n, hidden)
    dW1 = (dz[:, :, None] * X[:, None, :]).reshape(X.shape[0], -1)
    return np.hstack([dW1, dz, a, np.ones((X.shape[0], 1))])


def lm_step(theta, X, y, lam, hidden=HIDDEN):
    """Solve (J^T J + lam I) delta = J^T r; falls back to a scaled gradient step if singular."""
    r = y - mlp_forward(theta, X, hidden)
    J = mlp_jacobian(theta, X, hidden)
    g = J.T @ r
    A = J.T @ J + lam * np.eye(theta.size)
    try:
        L = np.linalg.cholesky(A)
        return np.linalg.solve(L.T, np.linalg.solve(L, g))
    except np.linalg.LinAlgError:
        return g / max(lam, 1.0)


def init_mlp(lag, seed, hidden=HIDDEN) -> np.ndarray:
    rng = np.random.default_rng(seed)
    lim1 = np.sqrt(6.0 / (lag + hidden))
    lim2 = np.sqrt(6.0 / (hidden + 1))
    return np.concatenate([rng.uniform(-lim1, lim1, hidden * lag), np.zeros(hidden),
                           rng.uniform(-lim2, lim2, hidden), [0.0]])


def fit_mlp(inputs, targets, seed: int = 0, hidden: int = HIDDEN, max_epochs: int = MAX_EPOCHS,
            lam: float = LAMBDA_INIT) -> MlpModel:
    """Levenberg-Marquardt: accepted steps shrink lambda by 10, rejected ones grow it by 10."""
    X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    y = np.asarray(targets, dtype=np.float64)
    if y.size == 0:
        raise EmptyData("cannot fit an MLP without rows")
    theta = init_mlp(X.shape[1], seed, hidden)

    def sse_of(t):
        r = y - mlp_forward(t, X, hidden)
        return float(r @ r)

    sse = sse_of(theta)
    history = [sse]
    for _ in range(max_epochs):
        accepted = False
        while lam <= LAMBDA_MAX:
            trial = theta + lm_step(theta, X, y, lam, hidden)
            trial_sse = sse_of(trial)
            if np.isfinite(trial_sse) and trial_sse < sse:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            break
        change = sse - trial_sse
        theta, sse = trial, trial_sse
        lam /= 10.0
        history.append(sse)
        if change < 1e-10:
            break
    W1, b1, w2, b2 = _unpack(theta, hidden, X.shape[1])
    return MlpModel(W1.copy(), b1.copy(), w2.copy(), float(b2), lam, tuple(history))
