"""Parametric forecasters: linear AR regression, ARIMA(p,1,q), Kalman and alpha-beta filters."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from .dataset import make_supervised
from .errors import DimensionMismatch, NonConvergenceWarning, TooShort
from .numerics import ols_fit

KALMAN_Q = 0.001
KALMAN_R = 0.01
ALPHA = 0.85
BETA = 0.005


# --------------------------------------------------------------------------
# Linear autoregression


@dataclass(frozen=True)
class LinearArModel:
    lag: int
    intercept: float
    coefficients: np.ndarray  # coefficients[k] weighs window column k (oldest first)

    def predict(self, windows) -> np.ndarray:
        windows = np.atleast_2d(np.asarray(windows, dtype=np.float64))
        if windows.shape[1] != self.lag:
            raise DimensionMismatch(f"expected windows of length {self.lag}")
        return self.intercept + windows @ self.coefficients


def fit_linear_ar(train, lag: int = 2, horizon: int = 1) -> LinearArModel:
    train = np.asarray(train, dtype=np.float64)
    if train.size <= 2 * lag:
        raise TooShort(f"linear AR with lag {lag} needs more than {2 * lag} samples")
    sup = make_supervised(train, lag, horizon)
    design = np.column_stack([np.ones(len(sup)), sup.inputs])
    beta = ols_fit(design, sup.targets)
    return LinearArModel(lag, float(beta[0]), beta[1:].copy())


# --------------------------------------------------------------------------
# ARIMA by conditional sum of squares


def _reflect_roots(coefs, sign):
    """Make ``1 + sign*sum(coef_k z^k)`` have all roots outside the unit circle."""
    coefs = np.asarray(coefs, dtype=np.float64)
    if coefs.size == 0 or not np.any(coefs):
        return coefs, False
    poly = np.concatenate([[1.0], sign * coefs])  # ascending powers
    roots = np.roots(poly[::-1])
    inside = np.abs(roots) < 1.0
    if not np.any(inside):
        return coefs, False
    roots = np.where(inside, 1.0 / np.conj(roots), roots)
    monic = np.real(np.poly(roots))[::-1]  # ascending powers of prod(z - r)
    ascending = monic / monic[0]
    # a reflected polynomial may lose degree only through round-off
    out = np.zeros_like(coefs)
    k = min(coefs.size, ascending.size - 1)
    out[:k] = sign * ascending[1:k + 1]
    return out, True


@dataclass(frozen=True)
class ArimaModel:
    p: int
    d: int
    q: int
    ar_coefficients: np.ndarray
    ma_coefficients: np.ndarray
    intercept: float
    residual_history: np.ndarray = field(repr=False)
    css: float = 0.0
    converged: bool = True

    def _residuals(self, w):
        """CSS residuals of differenced rows ``w`` (2-D); pre-sample residuals are 0."""
        p = self.p
        u = w[:, p:] - self.intercept
        for i, phi in enumerate(self.ar_coefficients, start=1):
            u = u - phi * w[:, p - i: w.shape[1] - i]
        a = np.concatenate([[1.0], self.ma_coefficients])
        return lfilter([1.0], a, u, axis=1)

    def forecast(self, windows, steps: int = 1) -> np.ndarray:
        """Forecast ``steps`` ahead from the end of each window row (level units)."""
        windows = np.atleast_2d(np.asarray(windows, dtype=np.float64))
        w = np.diff(windows, axis=1)
        if w.shape[1] <= max(self.p, self.q):
            raise TooShort("window too short for the ARIMA orders")
        e = self._residuals(w)
        w_hist = [w[:, -i] for i in range(1, self.p + 1)]  # w_hist[0] is the latest
        e_hist = [e[:, -j] for j in range(1, self.q + 1)]
        level = windows[:, -1].copy()
        for _ in range(steps):
            nxt = np.full(level.shape, self.intercept)
            for phi, wv in zip(self.ar_coefficients, w_hist):
                nxt = nxt + phi * wv
            for theta, ev in zip(self.ma_coefficients, e_hist):
                nxt = nxt + theta * ev
            level = level + nxt
            w_hist = [nxt] + w_hist[:-1] if self.p else w_hist
            e_hist = [np.zeros_like(nxt)] + e_hist[:-1] if self.q else e_hist
        return level


def _css_objective(theta, w, p, q):
    c = theta[0]
    phi = theta[1:1 + p]
    ma = theta[1 + p:]
    n = w.size - p
    u = w[p:] - c
    for i in range(1, p + 1):
        u = u - phi[i - 1] * w[p - i: w.size - i]
    a = np.concatenate([[1.0], ma])
    e = lfilter([1.0], a, u)
    # derivatives of e w.r.t. each parameter, filtered through the MA polynomial
    grads = np.empty(theta.size)
    grads[0] = np.dot(e, lfilter([1.0], a, -np.ones(n)))
    for i in range(1, p + 1):
        grads[i] = np.dot(e, lfilter([1.0], a, -w[p - i: w.size - i]))
    for j in range(1, q + 1):
        shifted = np.concatenate([np.zeros(j), e[:-j]])
        grads[p + j] = np.dot(e, lfilter([1.0], a, -shifted))
    return float(np.dot(e, e)) / n, 2.0 * grads / n, e


def _hannan_rissanen(w, p, q):
    """Two-stage regression start: long AR residuals stand in for the shocks."""
    n = w.size
    if p == 0 and q == 0:
        return np.array([w.mean()])
    long_lag = min(max(10, p + q + 2), n // 4)
    ehat = np.zeros(n)
    if q > 0 and long_lag >= 1:
        sup = make_supervised(w, long_lag, 1)
        design = np.column_stack([np.ones(len(sup)), sup.inputs])
        beta = ols_fit(design, sup.targets)
        ehat[long_lag:] = sup.targets - design @ beta
    start = max(p, q) + (long_lag if q > 0 else 0)
    rows = np.arange(start, n)
    cols = [np.ones(rows.size)]
    cols += [w[rows - i] for i in range(1, p + 1)]
    cols += [ehat[rows - j] for j in range(1, q + 1)]
    return ols_fit(np.column_stack(cols), w[rows])


def fit_arima(train, order=(2, 1, 2), max_iter: int = 500, tol: float = 1e-8) -> ArimaModel:
    """Fit ARIMA(p,1,q) with drift by minimizing the conditional sum of squares."""
    p, d, q = order
    if d != 1:
        raise ValueError("only first differencing (d=1) is supported")
    train = np.asarray(train, dtype=np.float64)
    if train.size < 50:
        raise TooShort("ARIMA needs at least 50 training samples")
    w = np.diff(train)
    theta = _hannan_rissanen(w, p, q)
    theta[1:1 + p], _ = _reflect_roots(theta[1:1 + p], -1.0)
    theta[1 + p:], _ = _reflect_roots(theta[1 + p:], 1.0)

    converged = True
    for _attempt in range(2):
        res = minimize(lambda t: _css_objective(t, w, p, q)[:2], theta, jac=True, method="L-BFGS-B",
                       options={"maxiter": max_iter, "ftol": tol, "gtol": 1e-10})
        if np.all(np.isfinite(res.x)) and res.fun <= _css_objective(theta, w, p, q)[0]:
            theta = res.x
        converged = bool(res.success)
        ar, flipped_ar = _reflect_roots(theta[1:1 + p], -1.0)
        ma, flipped_ma = _reflect_roots(theta[1 + p:], 1.0)
        theta = np.concatenate([theta[:1], ar, ma])
        if not (flipped_ar or flipped_ma):
            break
    if not converged:
        warnings.warn("ARIMA CSS optimizer hit its iteration budget", NonConvergenceWarning, stacklevel=2)
    css, _, resid = _css_objective(theta, w, p, q)
    return ArimaModel(p, d, q, theta[1:1 + p].copy(), theta[1 + p:].copy(), float(theta[0]),
                      np.concatenate([np.zeros(p), resid]), css * (w.size - p), converged)


# --------------------------------------------------------------------------
# Scalar filters


@dataclass(frozen=True)
class KalmanState:
    estimate: float
    variance: float
    q: float = KALMAN_Q
    r: float = KALMAN_R


def kalman_step(state: KalmanState, observation: float) -> KalmanState:
    """Random-walk predict/update; the updated estimate is the next forecast."""
    prior_var = state.variance + state.q
    gain = prior_var / (prior_var + state.r)
    estimate = state.estimate + gain * (observation - state.estimate)
    return replace(state, estimate=estimate, variance=(1.0 - gain) * prior_var)


def kalman_fixed_point(q: float = KALMAN_Q, r: float = KALMAN_R) -> float:
    """Positive root of P^2 + qP - qr = 0, the steady state of the variance."""
    return (-q + np.sqrt(q * q + 4.0 * q * r)) / 2.0


@dataclass(frozen=True)
class AlphaBetaState:
    position: float
    velocity: float
    alpha: float = ALPHA
    beta: float = BETA
    dt: float = 1.0

    def __post_init__(self):
        if not (0 < self.alpha <= 1) or self.beta < 0:
            raise ValueError("alpha must lie in (0, 1] and beta be non-negative")

    @property
    def forecast(self) -> float:
        return self.position + self.velocity * self.dt


def alpha_beta_step(state: AlphaBetaState, observation: float) -> AlphaBetaState:
    prior = state.position + state.velocity * state.dt
    resid = observation - prior
    return replace(state, position=prior + state.alpha * resid,
                   velocity=state.velocity + (state.beta / state.dt) * resid)


def kalman_forecast_windows(windows, q=KALMAN_Q, r=KALMAN_R) -> np.ndarray:
    """Run the scalar Kalman filter across each window row; return final estimates.

    Every row is seeded with its first observation and variance ``r``.
    """
    windows = np.atleast_2d(np.asarray(windows, dtype=np.float64))
    x = windows[:, 0].copy()
    var = r
    for col in range(1, windows.shape[1]):
        prior = var + q
        gain = prior / (prior + r)
        x += gain * (windows[:, col] - x)
        var = (1.0 - gain) * prior
    return x


def alpha_beta_forecast_windows(windows, steps=1, alpha=ALPHA, beta=BETA) -> np.ndarray:
    """Alpha-beta filter across each row, extrapolated ``steps`` ahead at constant velocity."""
    windows = np.atleast_2d(np.asarray(windows, dtype=np.float64))
    x = windows[:, 0].copy()
    v = np.zeros_like(x)
    for col in range(1, windows.shape[1]):
        prior = x + v
        resid = windows[:, col] - prior
        x = prior + alpha * resid
        v = v + beta * resid
    return x + steps * v
