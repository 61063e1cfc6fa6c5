"""Minibatch Adam training with validation-based model selection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dataset import SupervisedSet
from ..errors import Diverged, DimensionMismatch, EmptyData
from ..numerics import AdamState, adam_update
from .networks import Network, SequenceModelSpec, Shuffle, build_network


@dataclass(frozen=True)
class FittedSequenceModel:
    spec: SequenceModelSpec
    theta: np.ndarray
    best_epoch: int = 0
    train_loss: tuple = field(default=(), repr=False)
    validation_rmse: tuple = field(default=(), repr=False)

    @property
    def network(self) -> Network:
        return build_network(self.spec)

    def predict(self, windows) -> np.ndarray:
        return self.network.predict(self.theta, windows)


def encoder_forecast(model: FittedSequenceModel, window) -> float:
    """One-step prediction of the LSTM-encoder model from a single window."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 1 or window.size != model.spec.window:
        raise DimensionMismatch(f"encoder expects a window of length {model.spec.window}")
    return float(model.predict(window[None, :])[0])


def _streams(seed):
    init_seq, shuffle_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(init_seq), np.random.default_rng(shuffle_seq)


def initial_parameters(spec: SequenceModelSpec) -> np.ndarray:
    return build_network(spec).init(_streams(spec.seed)[0])


def train_sequence_model(spec: SequenceModelSpec, train: SupervisedSet,
                         validation: SupervisedSet | None = None) -> FittedSequenceModel:
    if len(train) == 0:
        raise EmptyData("training set is empty")
    net = build_network(spec)
    init_rng, shuffle_rng = _streams(spec.seed)
    theta = net.init(init_rng)
    if spec.epochs == 0:
        return FittedSequenceModel(spec, theta)

    X, y = train.inputs, train.targets
    n = y.size
    state = AdamState.zeros(net.n_params, learning_rate=spec.learning_rate)
    best_theta, best_val, best_epoch = theta, np.inf, 0
    losses, vals = [], []
    for epoch in range(1, spec.epochs + 1):
        order = shuffle_rng.permutation(n) if spec.shuffle is Shuffle.EVERY_EPOCH else np.arange(n)
        total = 0.0
        for lo in range(0, n, spec.batch_size):
            idx = order[lo:lo + spec.batch_size]
            loss, grad = net.loss_and_grad(theta, X[idx], y[idx])
            if not (np.isfinite(loss) and np.all(np.isfinite(grad))):
                raise Diverged(epoch)
            theta, state = adam_update(theta, grad, state)
            total += loss * idx.size
        losses.append(total / n)
        if validation is not None and len(validation):
            score = float(np.sqrt(net.loss(theta, validation.inputs, validation.targets)))
        else:
            score = -epoch  # no validation data: keep the latest epoch
        if not np.isfinite(score):
            raise Diverged(epoch, "validation loss became non-finite")
        vals.append(score)
        if score < best_val:
            best_theta, best_val, best_epoch = theta.copy(), score, epoch
    return FittedSequenceModel(spec, best_theta, best_epoch, tuple(losses), tuple(vals))
