"""Forecasting networks over a flat parameter vector, with exact gradients."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from ..errors import DimensionMismatch
from .cells import (
    gru_sequence_backward,
    gru_sequence_forward,
    lstm_sequence_backward,
    lstm_sequence_forward,
)


class Architecture(str, Enum):
    LSTM = "lstm"
    BILSTM = "bilstm"
    FCLSTM = "fclstm"
    GRU = "gru"
    ENCODER = "encoder"
    CNN = "cnn"


class Shuffle(str, Enum):
    EVERY_EPOCH = "every_epoch"
    NEVER = "never"


@dataclass(frozen=True)
class ConvSpec:
    window: int = 5
    channels1: int = 16
    channels2: int = 32
    kernel: int = 3
    dense_width: int = 64


@dataclass(frozen=True)
class SequenceModelSpec:
    architecture: Architecture
    hidden: int
    window: int
    epochs: int
    batch_size: int = 32
    shuffle: Shuffle = Shuffle.EVERY_EPOCH
    seed: int = 0
    learning_rate: float = 1e-3
    dense_width: int = 64
    conv: ConvSpec = field(default_factory=ConvSpec)

    def __post_init__(self):
        object.__setattr__(self, "architecture", Architecture(self.architecture))
        object.__setattr__(self, "shuffle", Shuffle(self.shuffle))
        if self.window < 1 or self.epochs < 0 or self.batch_size < 1 or self.hidden < 1:
            raise ValueError(f"invalid sequence model spec: {self}")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("hidden", "window", "epochs", "batch_size", "seed",
                                           "learning_rate", "dense_width")}
        d["architecture"] = self.architecture.value
        d["shuffle"] = self.shuffle.value
        d["conv"] = dict(vars(self.conv))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SequenceModelSpec":
        d = dict(d)
        d["conv"] = ConvSpec(**d.get("conv", {}))
        return cls(**d)


# hidden units, input window, epochs, shuffle policy for the full-size profile
PAPER_SETTINGS = {
    Architecture.LSTM: (100, 10, 100, Shuffle.EVERY_EPOCH),
    Architecture.BILSTM: (128, 10, 200, Shuffle.EVERY_EPOCH),
    Architecture.FCLSTM: (100, 10, 100, Shuffle.NEVER),
    Architecture.GRU: (128, 10, 200, Shuffle.EVERY_EPOCH),
    Architecture.ENCODER: (100, 10, 100, Shuffle.EVERY_EPOCH),
    Architecture.CNN: (1, 5, 100, Shuffle.EVERY_EPOCH),
}


def paper_spec(architecture, seed: int = 0) -> SequenceModelSpec:
    arch = Architecture(architecture)
    hidden, window, epochs, shuffle = PAPER_SETTINGS[arch]
    return SequenceModelSpec(arch, hidden, window, epochs, shuffle=shuffle, seed=seed)


def reduced_spec(architecture, seed: int = 0) -> SequenceModelSpec:
    """Desk-scale profile: a quarter of the full profile's epochs and hidden units."""
    spec = paper_spec(architecture, seed)
    return replace(spec, hidden=max(1, spec.hidden // 4), epochs=max(1, spec.epochs // 4))


def glorot(rng, fan_out, fan_in):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


class Network:
    """Parameter layout plus forward/backward passes for one architecture."""

    window: int

    def __init__(self):
        self._layout = {}
        self.n_params = 0

    def _add(self, name, *shape):
        size = int(np.prod(shape))
        self._layout[name] = (slice(self.n_params, self.n_params + size), shape)
        self.n_params += size

    def views(self, theta) -> dict:
        return {k: theta[s].reshape(shape) for k, (s, shape) in self._layout.items()}

    def names(self):
        return list(self._layout)

    def init(self, rng) -> np.ndarray:
        raise NotImplementedError

    def forward(self, theta, X):
        raise NotImplementedError

    def backward(self, theta, cache, dy) -> np.ndarray:
        raise NotImplementedError

    def _check(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.window:
            raise DimensionMismatch(f"expected windows of length {self.window}, got {X.shape[1]}")
        return X

    def predict(self, theta, X) -> np.ndarray:
        return self.forward(theta, X)[0]

    def loss_and_grad(self, theta, X, y):
        """Mean squared error over the batch and its gradient."""
        yhat, cache = self.forward(theta, X)
        resid = yhat - y
        loss = float(np.mean(resid * resid))
        return loss, self.backward(theta, cache, 2.0 * resid / resid.size)

    def loss(self, theta, X, y) -> float:
        resid = self.predict(theta, X) - y
        return float(np.mean(resid * resid))


def _init_lstm_block(rng, p, prefix, input_size, hidden):
    W = p[f"{prefix}W"]
    U = p[f"{prefix}U"]
    for k in range(4):
        W[k * hidden:(k + 1) * hidden] = glorot(rng, hidden, input_size)
        U[k * hidden:(k + 1) * hidden] = glorot(rng, hidden, hidden)
    p[f"{prefix}b"][:] = 0.0
    p[f"{prefix}b"][hidden:2 * hidden] = 1.0  # forget-gate bias


class LstmNetwork(Network):
    """LSTM over the window, then a linear head or (when ``dense_width``) a ReLU dense + linear head.

    Used for the plain LSTM, the encoder, and the FC-LSTM variants.
    """

    def __init__(self, hidden, window, dense_width=None):
        super().__init__()
        self.hidden, self.window, self.dense_width = hidden, window, dense_width
        self._add("W", 4 * hidden, 1)
        self._add("U", 4 * hidden, hidden)
        self._add("b", 4 * hidden)
        if dense_width:
            self._add("W1", dense_width, hidden)
            self._add("b1", dense_width)
            self._add("w2", dense_width)
            self._add("b2", 1)
        else:
            self._add("w_out", hidden)
            self._add("b_out", 1)

    def init(self, rng):
        theta = np.zeros(self.n_params)
        p = self.views(theta)
        _init_lstm_block(rng, p, "", 1, self.hidden)
        if self.dense_width:
            p["W1"][:] = glorot(rng, self.dense_width, self.hidden)
            p["w2"][:] = glorot(rng, 1, self.dense_width)[0]
        else:
            p["w_out"][:] = glorot(rng, 1, self.hidden)[0]
        return theta

    def forward(self, theta, X):
        X = self._check(X)
        p = self.views(theta)
        h, seq_cache = lstm_sequence_forward(p["W"], p["U"], p["b"], X[:, :, None])
        if self.dense_width:
            z1 = h @ p["W1"].T + p["b1"]
            a1 = np.maximum(z1, 0.0)
            return a1 @ p["w2"] + p["b2"][0], (h, seq_cache, z1, a1)
        return h @ p["w_out"] + p["b_out"][0], (h, seq_cache)

    def backward(self, theta, cache, dy):
        p = self.views(theta)
        grad = np.zeros(self.n_params)
        g = self.views(grad)
        h, seq_cache = cache[0], cache[1]
        if self.dense_width:
            z1, a1 = cache[2], cache[3]
            g["w2"][:] = a1.T @ dy
            g["b2"][0] = dy.sum()
            dz1 = np.outer(dy, p["w2"]) * (z1 > 0)
            g["W1"][:] = dz1.T @ h
            g["b1"][:] = dz1.sum(axis=0)
            dh = dz1 @ p["W1"]
        else:
            g["w_out"][:] = h.T @ dy
            g["b_out"][0] = dy.sum()
            dh = np.outer(dy, p["w_out"])
        g["W"][:], g["U"][:], g["b"][:] = lstm_sequence_backward(p["W"], p["U"], seq_cache, dh)
        return grad


class BiLstmNetwork(Network):
    """Forward and time-reversed LSTMs over the input window; final states concatenated."""

    def __init__(self, hidden, window):
        super().__init__()
        self.hidden, self.window = hidden, window
        for d in ("f", "b"):
            self._add(f"{d}W", 4 * hidden, 1)
            self._add(f"{d}U", 4 * hidden, hidden)
            self._add(f"{d}b", 4 * hidden)
        self._add("w_out", 2 * hidden)
        self._add("b_out", 1)

    def init(self, rng):
        theta = np.zeros(self.n_params)
        p = self.views(theta)
        _init_lstm_block(rng, p, "f", 1, self.hidden)
        _init_lstm_block(rng, p, "b", 1, self.hidden)
        p["w_out"][:] = glorot(rng, 1, 2 * self.hidden)[0]
        return theta

    def forward(self, theta, X):
        X = self._check(X)
        p = self.views(theta)
        seq = X[:, :, None]
        hf, cf = lstm_sequence_forward(p["fW"], p["fU"], p["fb"], seq)
        hb, cb = lstm_sequence_forward(p["bW"], p["bU"], p["bb"], seq[:, ::-1])
        h = np.concatenate([hf, hb], axis=1)
        return h @ p["w_out"] + p["b_out"][0], (h, cf, cb)

    def backward(self, theta, cache, dy):
        p = self.views(theta)
        grad = np.zeros(self.n_params)
        g = self.views(grad)
        h, cf, cb = cache
        H = self.hidden
        g["w_out"][:] = h.T @ dy
        g["b_out"][0] = dy.sum()
        dh = np.outer(dy, p["w_out"])
        g["fW"][:], g["fU"][:], g["fb"][:] = lstm_sequence_backward(p["fW"], p["fU"], cf, dh[:, :H])
        g["bW"][:], g["bU"][:], g["bb"][:] = lstm_sequence_backward(p["bW"], p["bU"], cb, dh[:, H:])
        return grad


class GruNetwork(Network):
    def __init__(self, hidden, window):
        super().__init__()
        self.hidden, self.window = hidden, window
        self._add("W", 3 * hidden, 1)
        self._add("U", 3 * hidden, hidden)
        self._add("b", 3 * hidden)
        self._add("w_out", hidden)
        self._add("b_out", 1)

    def init(self, rng):
        theta = np.zeros(self.n_params)
        p = self.views(theta)
        H = self.hidden
        for k in range(3):
            p["W"][k * H:(k + 1) * H] = glorot(rng, H, 1)
            p["U"][k * H:(k + 1) * H] = glorot(rng, H, H)
        p["w_out"][:] = glorot(rng, 1, H)[0]
        return theta

    def forward(self, theta, X):
        X = self._check(X)
        p = self.views(theta)
        h, seq_cache = gru_sequence_forward(p["W"], p["U"], p["b"], X[:, :, None])
        return h @ p["w_out"] + p["b_out"][0], (h, seq_cache)

    def backward(self, theta, cache, dy):
        p = self.views(theta)
        grad = np.zeros(self.n_params)
        g = self.views(grad)
        h, seq_cache = cache
        g["w_out"][:] = h.T @ dy
        g["b_out"][0] = dy.sum()
        g["W"][:], g["U"][:], g["b"][:] = gru_sequence_backward(p["W"], p["U"], seq_cache, np.outer(dy, p["w_out"]))
        return grad


class ConvNetwork(Network):
    """Two same-padded 1-D convolutions (ReLU), a ReLU dense layer, and a linear output."""

    def __init__(self, spec: ConvSpec = ConvSpec()):
        super().__init__()
        self.spec = spec
        self.window = spec.window
        c1, c2, k, d, L = spec.channels1, spec.channels2, spec.kernel, spec.dense_width, spec.window
        if k % 2 == 0:
            raise ValueError("kernel length must be odd for same padding")
        self._add("conv1_w", c1, k)
        self._add("conv1_b", c1)
        self._add("conv2_w", c2, c1, k)
        self._add("conv2_b", c2)
        self._add("dense_w", d, L * c2)
        self._add("dense_b", d)
        self._add("out_w", d)
        self._add("out_b", 1)

    def init(self, rng):
        s = self.spec
        theta = np.zeros(self.n_params)
        p = self.views(theta)
        p["conv1_w"][:] = glorot(rng, s.channels1, s.kernel)
        p["conv2_w"][:] = glorot(rng, s.channels2, s.channels1 * s.kernel).reshape(s.channels2, s.channels1, s.kernel)
        p["dense_w"][:] = glorot(rng, s.dense_width, s.window * s.channels2)
        p["out_w"][:] = glorot(rng, 1, s.dense_width)[0]
        return theta

    def _patches(self, a):
        """(B, L, C) -> (B, L, k, C) zero-padded neighbourhoods."""
        k = self.spec.kernel
        pad = k // 2
        ap = np.pad(a, ((0, 0), (pad, pad), (0, 0)))
        L = a.shape[1]
        return np.stack([ap[:, j:j + L] for j in range(k)], axis=2)

    def _unpatch(self, dpatch):
        k = self.spec.kernel
        pad = k // 2
        B, L, _, C = dpatch.shape
        out = np.zeros((B, L + 2 * pad, C))
        for j in range(k):
            out[:, j:j + L] += dpatch[:, :, j]
        return out[:, pad:pad + L]

    def first_layer(self, theta, X):
        """Post-ReLU activations of the first convolution, shape (B, L, C1)."""
        X = self._check(X)
        p = self.views(theta)
        P1 = self._patches(X[:, :, None])[..., 0]  # (B, L, k)
        return np.maximum(P1 @ p["conv1_w"].T + p["conv1_b"], 0.0)

    def forward(self, theta, X):
        X = self._check(X)
        p = self.views(theta)
        B = X.shape[0]
        P1 = self._patches(X[:, :, None])[..., 0]
        z1 = P1 @ p["conv1_w"].T + p["conv1_b"]
        a1 = np.maximum(z1, 0.0)
        P2 = self._patches(a1)  # (B, L, k, C1)
        z2 = np.einsum("bljc,ocj->blo", P2, p["conv2_w"]) + p["conv2_b"]
        a2 = np.maximum(z2, 0.0)
        flat = a2.reshape(B, -1)
        z3 = flat @ p["dense_w"].T + p["dense_b"]
        a3 = np.maximum(z3, 0.0)
        yhat = a3 @ p["out_w"] + p["out_b"][0]
        return yhat, (P1, z1, P2, z2, flat, z3, a3)

    def backward(self, theta, cache, dy):
        p = self.views(theta)
        grad = np.zeros(self.n_params)
        g = self.views(grad)
        P1, z1, P2, z2, flat, z3, a3 = cache
        g["out_w"][:] = a3.T @ dy
        g["out_b"][0] = dy.sum()
        dz3 = np.outer(dy, p["out_w"]) * (z3 > 0)
        g["dense_w"][:] = dz3.T @ flat
        g["dense_b"][:] = dz3.sum(axis=0)
        dz2 = (dz3 @ p["dense_w"]).reshape(z2.shape) * (z2 > 0)
        g["conv2_w"][:] = np.einsum("blo,bljc->ocj", dz2, P2)
        g["conv2_b"][:] = dz2.sum(axis=(0, 1))
        dP2 = np.einsum("blo,ocj->bljc", dz2, p["conv2_w"])
        dz1 = self._unpatch(dP2) * (z1 > 0)
        g["conv1_w"][:] = np.einsum("blc,blj->cj", dz1, P1)
        g["conv1_b"][:] = dz1.sum(axis=(0, 1))
        return grad


def build_network(spec: SequenceModelSpec) -> Network:
    arch = spec.architecture
    if arch in (Architecture.LSTM, Architecture.ENCODER):
        return LstmNetwork(spec.hidden, spec.window)
    if arch is Architecture.FCLSTM:
        return LstmNetwork(spec.hidden, spec.window, dense_width=spec.dense_width)
    if arch is Architecture.BILSTM:
        return BiLstmNetwork(spec.hidden, spec.window)
    if arch is Architecture.GRU:
        return GruNetwork(spec.hidden, spec.window)
    if spec.window != spec.conv.window:
        raise DimensionMismatch("CNN window must match its ConvSpec")
    return ConvNetwork(spec.conv)
