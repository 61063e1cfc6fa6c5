"""LSTM and GRU cells with hand-written backpropagation through time.

Gate blocks are stacked row-wise: LSTM uses (input, forget, output,
candidate), GRU uses (update, reset, candidate).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch


def sigmoid(x):
    # split form avoids overflow in exp for large |x|
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass(frozen=True)
class LstmCellParams:
    W: np.ndarray  # (4H, D)
    U: np.ndarray  # (4H, H)
    b: np.ndarray  # (4H,)

    def __post_init__(self):
        h4 = self.W.shape[0]
        if h4 % 4 or self.U.shape != (h4, h4 // 4) or self.b.shape != (h4,):
            raise DimensionMismatch("LSTM gate blocks disagree in size")

    @property
    def hidden(self) -> int:
        return self.W.shape[0] // 4

    def gate(self, name):
        k = "ifog".index(name[0]) if name != "candidate" else 3
        H = self.hidden
        return self.W[k * H:(k + 1) * H], self.U[k * H:(k + 1) * H], self.b[k * H:(k + 1) * H]

    @classmethod
    def zeros(cls, input_size, hidden):
        return cls(np.zeros((4 * hidden, input_size)), np.zeros((4 * hidden, hidden)), np.zeros(4 * hidden))


@dataclass(frozen=True)
class GruCellParams:
    W: np.ndarray  # (3H, D)
    U: np.ndarray  # (3H, H)
    b: np.ndarray  # (3H,)

    def __post_init__(self):
        h3 = self.W.shape[0]
        if h3 % 3 or self.U.shape != (h3, h3 // 3) or self.b.shape != (h3,):
            raise DimensionMismatch("GRU gate blocks disagree in size")

    @property
    def hidden(self) -> int:
        return self.W.shape[0] // 3

    @classmethod
    def zeros(cls, input_size, hidden):
        return cls(np.zeros((3 * hidden, input_size)), np.zeros((3 * hidden, hidden)), np.zeros(3 * hidden))


def lstm_cell_forward(params: LstmCellParams, x_t, h_prev, c_prev):
    """Single LSTM step for one sample or a batch; returns ``(h_t, c_t)``."""
    x_t, h_prev, c_prev = (np.atleast_1d(np.asarray(v, dtype=np.float64)) for v in (x_t, h_prev, c_prev))
    H = params.hidden
    if x_t.shape[-1] != params.W.shape[1] or h_prev.shape[-1] != H or c_prev.shape[-1] != H:
        raise DimensionMismatch("LSTM cell inputs do not match parameter sizes")
    a = x_t @ params.W.T + h_prev @ params.U.T + params.b
    i, f, o = (sigmoid(a[..., k * H:(k + 1) * H]) for k in range(3))
    g = np.tanh(a[..., 3 * H:])
    c = f * c_prev + i * g
    return o * np.tanh(c), c


def gru_cell_forward(params: GruCellParams, x_t, h_prev):
    x_t, h_prev = (np.atleast_1d(np.asarray(v, dtype=np.float64)) for v in (x_t, h_prev))
    H = params.hidden
    if x_t.shape[-1] != params.W.shape[1] or h_prev.shape[-1] != H:
        raise DimensionMismatch("GRU cell inputs do not match parameter sizes")
    ax = x_t @ params.W.T + params.b
    z = sigmoid(ax[..., :H] + h_prev @ params.U[:H].T)
    r = sigmoid(ax[..., H:2 * H] + h_prev @ params.U[H:2 * H].T)
    n = np.tanh(ax[..., 2 * H:] + (r * h_prev) @ params.U[2 * H:].T)
    return (1.0 - z) * h_prev + z * n


# --------------------------------------------------------------------------
# Sequence-level passes over a batch X of shape (B, T, D); only the final
# hidden state feeds the output heads, so backward takes dL/dh_T.


def lstm_sequence_forward(W, U, b, X):
    B, T, _ = X.shape
    H = U.shape[1]
    xw = X @ W.T + b  # (B, T, 4H)
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    cache = []
    for t in range(T):
        a = xw[:, t] + h @ U.T
        sg = sigmoid(a[:, :3 * H])
        i, f, o = sg[:, :H], sg[:, H:2 * H], sg[:, 2 * H:]
        g = np.tanh(a[:, 3 * H:])
        c_prev, h_prev = c, h
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        cache.append((h_prev, c_prev, i, f, o, g, tc))
    return h, (X, cache)


def lstm_sequence_backward(W, U, cache, dh):
    X, steps = cache
    H = U.shape[1]
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros(W.shape[0])
    dc = np.zeros_like(dh)
    da = np.empty((dh.shape[0], 4 * H))
    for t in range(len(steps) - 1, -1, -1):
        h_prev, c_prev, i, f, o, g, tc = steps[t]
        dc = dc + dh * o * (1.0 - tc * tc)
        da[:, :H] = dc * g * i * (1.0 - i)
        da[:, H:2 * H] = dc * c_prev * f * (1.0 - f)
        da[:, 2 * H:3 * H] = dh * tc * o * (1.0 - o)
        da[:, 3 * H:] = dc * i * (1.0 - g * g)
        dW += da.T @ X[:, t]
        dU += da.T @ h_prev
        db += da.sum(axis=0)
        dh = da @ U
        dc = dc * f
    return dW, dU, db


def gru_sequence_forward(W, U, b, X):
    B, T, _ = X.shape
    H = U.shape[1]
    xw = X @ W.T + b
    Uzr = U[:2 * H]
    Un = U[2 * H:]
    h = np.zeros((B, H))
    cache = []
    for t in range(T):
        zr = sigmoid(xw[:, t, :2 * H] + h @ Uzr.T)
        z, r = zr[:, :H], zr[:, H:]
        rh = r * h
        n = np.tanh(xw[:, t, 2 * H:] + rh @ Un.T)
        h_prev = h
        h = (1.0 - z) * h_prev + z * n
        cache.append((h_prev, z, r, rh, n))
    return h, (X, cache)


def gru_sequence_backward(W, U, cache, dh):
    X, steps = cache
    H = U.shape[1]
    Uzr = U[:2 * H]
    Un = U[2 * H:]
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros(W.shape[0])
    da = np.empty((dh.shape[0], 3 * H))
    for t in range(len(steps) - 1, -1, -1):
        h_prev, z, r, rh, n = steps[t]
        dan = dh * z * (1.0 - n * n)
        drh = dan @ Un
        da[:, :H] = dh * (n - h_prev) * z * (1.0 - z)
        da[:, H:2 * H] = drh * h_prev * r * (1.0 - r)
        da[:, 2 * H:] = dan
        dW += da.T @ X[:, t]
        dU[:2 * H] += da[:, :2 * H].T @ h_prev
        dU[2 * H:] += dan.T @ rh
        db += da.sum(axis=0)
        dh = dh * (1.0 - z) + drh * r + da[:, :2 * H] @ Uzr
    return dW, dU, db
