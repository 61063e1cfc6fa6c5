"""Uniform forecasting contract over every model family, plus the model registry.

Each model is fitted on one training segment (in its own unit system) for
a given horizon and then maps lagged windows to forecasts ``horizon``
steps past the window end.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import anfis, kernel, parametric, trees
from .dataset import make_supervised
from .neural import fit_mlp, paper_spec, reduced_spec, train_sequence_model

RAW = "raw"
NORMALIZED = "normalized"
FILTER_WINDOW = 24  # two hours of history for the filters and ARIMA residual warm-up
LINEAR_LAG = 2
TREE_LAG = 10
MLP_LAG = 10
ANFIS_LAG = 2
MIN_FIT_ROWS = 20


class ForecastModel:
    model_id: str = ""
    family: str = ""
    units: str = NORMALIZED
    lag: int = 1

    def __init__(self, profile: str = "paper", seed: int = 0):
        self.profile = profile
        self.seed = seed
        self.horizon = 1

    def fit(self, series, horizon: int = 1, validation=None) -> "ForecastModel":
        self.horizon = horizon
        sup = make_supervised(series, self.lag, horizon)
        val = None
        if validation is not None and len(validation) > self.lag + horizon:
            val = make_supervised(validation, self.lag, horizon)
        self._fit_supervised(sup, val)
        return self

    def _fit_supervised(self, sup, val):
        raise NotImplementedError

    def predict(self, windows) -> np.ndarray:
        raise NotImplementedError

    def hyperparameters(self) -> dict:
        return {"lag": self.lag, "units": self.units}


class PersistenceModel(ForecastModel):
    """Predicts the last observed value; a baseline, not one of the benchmarked models."""

    model_id, family, units, lag = "persistence", "baseline", RAW, 1

    def fit(self, series, horizon=1, validation=None):
        self.horizon = horizon
        return self

    def predict(self, windows):
        return np.atleast_2d(windows)[:, -1].astype(np.float64)


class LinearModel(ForecastModel):
    model_id, family, units, lag = "linear", "parametric", RAW, LINEAR_LAG

    def fit(self, series, horizon=1, validation=None):
        self.horizon = horizon
        self.model = parametric.fit_linear_ar(series, self.lag, horizon)
        return self

    def predict(self, windows):
        return self.model.predict(windows)


class ArimaForecaster(ForecastModel):
    model_id, family, units, lag = "arima", "parametric", RAW, FILTER_WINDOW

    def fit(self, series, horizon=1, validation=None):
        self.horizon = horizon
        self.model = parametric.fit_arima(series)
        return self

    def predict(self, windows):
        return self.model.forecast(windows, self.horizon)

    def hyperparameters(self):
        return {**super().hyperparameters(), "order": [2, 1, 2]}


class KalmanForecaster(ForecastModel):
    model_id, family, units, lag = "kalman", "parametric", RAW, FILTER_WINDOW

    def fit(self, series, horizon=1, validation=None):
        self.horizon = horizon
        return self

    def predict(self, windows):
        # random-walk state: every horizon shares the filtered level
        return parametric.kalman_forecast_windows(windows)

    def hyperparameters(self):
        return {**super().hyperparameters(), "Q": parametric.KALMAN_Q, "R": parametric.KALMAN_R}


class AlphaBetaForecaster(ForecastModel):
    model_id, family, units, lag = "alpha_beta", "parametric", RAW, FILTER_WINDOW

    def fit(self, series, horizon=1, validation=None):
        self.horizon = horizon
        return self

    def predict(self, windows):
        return parametric.alpha_beta_forecast_windows(windows, self.horizon)

    def hyperparameters(self):
        return {**super().hyperparameters(), "alpha": parametric.ALPHA, "beta": parametric.BETA}


class TreeForecaster(ForecastModel):
    model_id, family, lag = "decision_tree", "ml", TREE_LAG

    def _fit_supervised(self, sup, val):
        self.model = trees.fit_regression_tree(sup.inputs, sup.targets, min_leaf=trees.MIN_LEAF)

    def predict(self, windows):
        return self.model.predict(windows)

    def hyperparameters(self):
        return {**super().hyperparameters(), "split_criterion": "mse", "min_leaf": trees.MIN_LEAF}


class ForestForecaster(ForecastModel):
    model_id, family, lag = "random_forest", "ml", trees.FOREST_WINDOW

    def _fit_supervised(self, sup, val):
        self.model = trees.fit_random_forest(sup.inputs, sup.targets, seed=self.seed)

    def predict(self, windows):
        return self.model.predict(windows)

    def hyperparameters(self):
        return {**super().hyperparameters(), "n_trees": trees.FOREST_TREES, "oob": True,
                "max_features": "ceil(p/3)", "min_leaf": trees.MIN_LEAF}


class BoostForecaster(ForecastModel):
    model_id, family, lag = "lsboost", "ml", TREE_LAG

    def _fit_supervised(self, sup, val):
        self.model = trees.fit_gradient_boost(sup.inputs, sup.targets)

    def predict(self, windows):
        return self.model.predict(windows)

    def hyperparameters(self):
        return {**super().hyperparameters(), "method": "LSBoost", "cycles": trees.BOOST_CYCLES,
                "max_splits": trees.BOOST_MAX_SPLITS, "learning_rate": trees.BOOST_LEARNING_RATE}


class KnnModel(ForecastModel):
    model_id, family, lag = "knn", "ml", kernel.KNN_SEQUENCE_LENGTH

    def _fit_supervised(self, sup, val):
        self.model = kernel.KnnForecaster(sup.inputs.copy(), sup.targets.copy(), kernel.KNN_K)

    def predict(self, windows):
        return self.model.predict(windows)

    def hyperparameters(self):
        return {**super().hyperparameters(), "k": kernel.KNN_K}


class SvrForecaster(ForecastModel):
    model_id, family, lag = "svr", "ml", kernel.SVR_LAG
    max_train_rows = 2000  # full Gram matrix must fit in memory

    def _fit_supervised(self, sup, val):
        X, y = sup.inputs[-self.max_train_rows:], sup.targets[-self.max_train_rows:]
        self.model = kernel.fit_svr(X, y, C=kernel.SVR_C, epsilon_tube=kernel.SVR_EPSILON, gamma=1.0 / self.lag)

    def predict(self, windows):
        return self.model.predict(windows)

    def hyperparameters(self):
        return {**super().hyperparameters(), "kernel": "rbf", "C": kernel.SVR_C,
                "epsilon": kernel.SVR_EPSILON, "gamma": 1.0 / self.lag, "max_train_rows": self.max_train_rows}


class MlpForecaster(ForecastModel):
    model_id, family, lag = "mlp", "ml", MLP_LAG

    def _fit_supervised(self, sup, val):
        self.model = fit_mlp(sup.inputs, sup.targets, seed=self.seed)

    def predict(self, windows):
        return self.model.predict(windows)

    def hyperparameters(self):
        return {**super().hyperparameters(), "hidden": 10, "training": "levenberg-marquardt"}


class SequenceForecaster(ForecastModel):
    family = "dl"
    architecture = ""

    def __init__(self, profile="paper", seed=0):
        super().__init__(profile, seed)
        factory = paper_spec if profile == "paper" else reduced_spec
        self.spec = factory(self.architecture, seed)
        self.lag = self.spec.window

    def _fit_supervised(self, sup, val):
        self.model = train_sequence_model(self.spec, sup, val)

    def predict(self, windows):
        return self.model.predict(windows)

    def hyperparameters(self):
        d = self.spec.to_dict()
        d.pop("seed")
        return {**super().hyperparameters(), **d}


def _sequence_class(arch):
    return type(f"{arch.title()}Forecaster", (SequenceForecaster,), {"model_id": arch, "architecture": arch})


class AnfisForecaster(ForecastModel):
    family, lag = "dl", ANFIS_LAG
    variant = anfis.Variant.GRID_PARTITION

    def _fit_supervised(self, sup, val):
        X, y = sup.inputs, sup.targets
        if self.variant is anfis.Variant.GRID_PARTITION:
            init = anfis.grid_partition_init(list(zip(X.min(axis=0), X.max(axis=0))))
        elif self.variant is anfis.Variant.SUBTRACTIVE:
            # subtractive potentials are O(n^2); cluster on an evenly strided subset
            stride = max(1, y.size // 2000)
            init = anfis.subtractive_init(X[::stride], y[::stride])
        else:
            init = anfis.fcm_init(X, y, seed=self.seed)
        self.model = anfis.fit_anfis(init, X, y, epochs=anfis.EPOCHS)

    def predict(self, windows):
        return self.model.predict(windows)

    def hyperparameters(self):
        return {**super().hyperparameters(), "variant": self.variant.value, "epochs": anfis.EPOCHS}


def _anfis_class(model_id, variant):
    return type(f"Anfis{variant.name.title()}", (AnfisForecaster,), {"model_id": model_id, "variant": variant})


REGISTRY: dict[str, Callable[..., ForecastModel]] = {
    cls.model_id: cls
    for cls in [
        LinearModel, ArimaForecaster, KalmanForecaster, AlphaBetaForecaster,
        TreeForecaster, ForestForecaster, BoostForecaster, KnnModel, SvrForecaster, MlpForecaster,
        *(_sequence_class(a) for a in ("cnn", "encoder", "lstm", "bilstm", "fclstm", "gru")),
        _anfis_class("anfis_gp", anfis.Variant.GRID_PARTITION),
        _anfis_class("anfis_sc", anfis.Variant.SUBTRACTIVE),
        _anfis_class("anfis_fcm", anfis.Variant.FCM),
    ]
}
EXTRA_MODELS = {"persistence": PersistenceModel}
MODEL_IDS = tuple(REGISTRY)
DEEP_MODELS = tuple(k for k, v in REGISTRY.items() if v.family == "dl")
# every model sees windows cut from the same origins, so all are scored on identical targets
EVAL_CONTEXT = FILTER_WINDOW


@dataclass(frozen=True)
class ModelInfo:
    model_id: str
    family: str
    units: str
    lag: int


def build_model(model_id: str, profile: str = "paper", seed: int = 0) -> ForecastModel:
    factory = REGISTRY.get(model_id) or EXTRA_MODELS.get(model_id)
    if factory is None:
        raise KeyError(f"unknown model id {model_id!r}")
    return factory(profile=profile, seed=seed)
