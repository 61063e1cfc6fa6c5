"""RMSE, MAE and R^2: the only scoring path used by the sweep."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyData, NonFinite, ZeroVariance


def _pair(truth, predicted):
    y = np.asarray(truth, dtype=np.float64).reshape(-1)
    yhat = np.asarray(predicted, dtype=np.float64).reshape(-1)
    if y.shape != yhat.shape:
        raise DimensionMismatch(f"lengths differ: {y.size} vs {yhat.size}")
    if y.size == 0:
        raise EmptyData("metrics need at least one sample")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(yhat))):
        raise NonFinite("metric inputs must be finite")
    return y, yhat


def rmse(truth, predicted) -> float:
    y, yhat = _pair(truth, predicted)
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def mae(truth, predicted) -> float:
    y, yhat = _pair(truth, predicted)
    return float(np.mean(np.abs(y - yhat)))


def r_squared(truth, predicted) -> float:
    """``1 - SS_res / SS_tot``; negative when worse than predicting the mean."""
    y, yhat = _pair(truth, predicted)
    if y.size < 2:
        raise EmptyData("R^2 needs at least two samples")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise ZeroVariance("truth is constant; R^2 is undefined")
    return 1.0 - float(np.sum((y - yhat) ** 2)) / ss_tot


@dataclass(frozen=True)
class MetricTriple:
    rmse: float
    mae: float
    r_squared: float | None  # None when the truth has zero variance
    n: int = field(default=0, compare=False)  # bookkeeping only; not part of the CSV


def evaluate(truth, predicted) -> MetricTriple:
    y, yhat = _pair(truth, predicted)
    try:
        r2 = r_squared(y, yhat)
    except (ZeroVariance, EmptyData):
        r2 = None
    return MetricTriple(rmse(y, yhat), mae(y, yhat), r2, int(y.size))
