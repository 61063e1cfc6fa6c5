"""Shared numeric kernels: least squares, Adam, finite-difference gradients."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, NonFinite

RANK_TOL = 1e-10


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFinite("input contains non-finite entries")


def ols_fit(design, targets) -> np.ndarray:
    """Least-squares coefficients of ``targets ~ design``.

    Uses the SVD-based solver, so rank-deficient designs resolve to the
    minimum-norm solution instead of failing.
    """
    design = np.asarray(design, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if design.ndim != 2:
        raise DimensionMismatch(f"design must be 2-D, got shape {design.shape}")
    if targets.ndim != 1 or targets.shape[0] != design.shape[0]:
        raise DimensionMismatch(
            f"targets of shape {targets.shape} do not match design rows {design.shape[0]}"
        )
    _check_finite(design, targets)
    coef, *_ = np.linalg.lstsq(design, targets, rcond=RANK_TOL)
    return coef


@dataclass(frozen=True)
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_index: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros(cls, size: int, **hyper) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), **hyper)


def adam_update(params, grads, state: AdamState):
    """One bias-corrected Adam step. Returns ``(new_params, new_state)``."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if not (params.shape == grads.shape == state.first_moment.shape == state.second_moment.shape):
        raise DimensionMismatch("params, grads and moments must share one shape")
    t = state.step_index + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return new_params, replace(state, first_moment=m, second_moment=v, step_index=t)


def numeric_gradient(f: Callable[[np.ndarray], float], x, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``x``."""
    x = np.array(x, dtype=np.float64)
    flat = x.reshape(-1)
    grad = np.empty_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = f(x)
        flat[i] = orig - eps
        down = f(x)
        flat[i] = orig
        if not (np.isfinite(up) and np.isfinite(down)):
            raise NonFinite(f"probe {i} evaluated non-finite")
        grad[i] = (up - down) / (2.0 * eps)
    return grad.reshape(x.shape)


def relative_error(analytic, numeric, floor: float = 1e-4) -> np.ndarray:
    """Componentwise |a - n| / max(|a|, |n|, floor), used by gradient checks."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
