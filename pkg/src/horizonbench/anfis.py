"""First-order Takagi-Sugeno ANFIS with grid, subtractive and fuzzy c-means initialisation.

Training is hybrid: consequents by global least squares on the
strength-weighted design, premises by normalised gradient descent.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import AllRulesSilent, DegenerateRange, Diverged, DimensionMismatch, EmptyData
from .numerics import ols_fit

MFS_PER_INPUT = 3
CLUSTER_RADII = (0.5, 0.25, 0.3)
ACCEPT_RATIO = 0.5
REJECT_RATIO = 0.15
SQUASH = 1.25
FCM_CLUSTERS = 3
FCM_EXPONENT = 2.0
STEP_SIZE = 0.01
STEP_DECAY = 0.9
EPOCHS = 50
_SILENT = 1e-300
_HALF_WIDTH_PER_SIGMA = np.sqrt(2.0 * np.log(2.0))  # Gaussian half-maximum point in sigmas


class Variant(str, Enum):
    GRID_PARTITION = "grid_partition"
    SUBTRACTIVE = "subtractive"
    FCM = "fcm"


@dataclass(frozen=True)
class GbellMf:
    a: float
    b: float
    c: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("bell width and shape must be positive")


def gbell(x, a, b, c):
    """Generalised bell 1 / (1 + |(x - c)/a|^(2b)), broadcasting over arrays."""
    with np.errstate(over="ignore"):  # far tails overflow to inf, giving membership 0
        return 1.0 / (1.0 + np.abs((x - c) / a) ** (2.0 * b))


def gbell_mf(x: float, mf: GbellMf) -> float:
    return float(gbell(x, mf.a, mf.b, mf.c))


@dataclass(frozen=True)
class AnfisModel:
    """Premise bells per input (``a[d]``, ``b[d]``, ``c[d]`` arrays) and one affine consequent per rule.

    ``antecedents[r, d]`` indexes the bell of input ``d`` used by rule ``r``;
    ``consequents[r]`` holds one weight per input followed by the constant.
    """

    a: tuple
    b: tuple
    c: tuple
    antecedents: np.ndarray
    consequents: np.ndarray
    variant: Variant = Variant.GRID_PARTITION
    rmse_history: tuple = field(default=(), repr=False)

    @property
    def n_inputs(self) -> int:
        return len(self.a)

    @property
    def n_rules(self) -> int:
        return self.antecedents.shape[0]

    def premise_vector(self) -> np.ndarray:
        return np.concatenate([np.concatenate([self.a[d], self.b[d], self.c[d]]) for d in range(self.n_inputs)])

    def with_premises(self, vec) -> "AnfisModel":
        a, b, c = [], [], []
        pos = 0
        for d in range(self.n_inputs):
            m = self.a[d].size
            a.append(np.array(vec[pos:pos + m]))
            b.append(np.array(vec[pos + m:pos + 2 * m]))
            c.append(np.array(vec[pos + 2 * m:pos + 3 * m]))
            pos += 3 * m
        return replace(self, a=tuple(a), b=tuple(b), c=tuple(c))

    def predict(self, inputs) -> np.ndarray:
        X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        wn, _ = normalized_strengths(self, X)
        return _output(wn, X, self.consequents)


def _memberships(model, X):
    if X.shape[1] != model.n_inputs:
        raise DimensionMismatch(f"model expects {model.n_inputs} inputs, got {X.shape[1]}")
    return [gbell(X[:, d, None], model.a[d], model.b[d], model.c[d]) for d in range(model.n_inputs)]


def normalized_strengths(model: AnfisModel, X):
    """Normalised firing strengths (n, rules) and the raw memberships per input."""
    mu = _memberships(model, X)
    w = np.ones((X.shape[0], model.n_rules))
    for d in range(model.n_inputs):
        w = w * mu[d][:, model.antecedents[:, d]]
    total = w.sum(axis=1)
    if np.any(total < _SILENT):
        raise AllRulesSilent(f"{int(np.sum(total < _SILENT))} samples fire no rule")
    return w / total[:, None], (mu, w, total)


def _augment(X):
    return np.hstack([X, np.ones((X.shape[0], 1))])


def _output(wn, X, consequents):
    return np.sum(wn * (_augment(X) @ consequents.T), axis=1)


def anfis_predict(model: AnfisModel, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch("x must be a single sample")
    return float(model.predict(x[None, :])[0])


# --------------------------------------------------------------------------
# Initialisation


def grid_partition_init(ranges, mfs_per_input: int = MFS_PER_INPUT) -> AnfisModel:
    """Evenly spaced bells (width = half the spacing, b = 2) and every antecedent combination."""
    a, b, c = [], [], []
    for lo, hi in ranges:
        if not hi > lo:
            raise DegenerateRange("each input range needs max > min")
        centers = np.linspace(lo, hi, mfs_per_input)
        spacing = (hi - lo) / max(mfs_per_input - 1, 1)
        a.append(np.full(mfs_per_input, spacing / 2.0))
        b.append(np.full(mfs_per_input, 2.0))
        c.append(centers)
    d = len(ranges)
    grids = np.meshgrid(*[np.arange(mfs_per_input)] * d, indexing="ij")
    antecedents = np.stack([g.ravel() for g in grids], axis=1)
    return AnfisModel(tuple(a), tuple(b), tuple(c), antecedents, np.zeros((antecedents.shape[0], d + 1)),
                      Variant.GRID_PARTITION)


def subtractive_clustering(data, radii=CLUSTER_RADII, accept_ratio=ACCEPT_RATIO,
                           reject_ratio=REJECT_RATIO, squash=SQUASH) -> np.ndarray:
    """Density-based cluster centres (in data units) on range-normalised data."""
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    n, dim = data.shape
    if n == 0:
        raise EmptyData("no data to cluster")
    radii = np.asarray(radii, dtype=np.float64)
    if radii.ndim and radii.size != dim:
        raise DimensionMismatch(f"{radii.size} radii given for {dim}-dimensional data")
    radii = np.broadcast_to(radii, (dim,))
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    lo = data.min(axis=0)
    span = data.max(axis=0) - lo
    span = np.where(span > 0, span, 1.0)
    Z = (data - lo) / span / radii  # distances are now in radius units

    potential = np.empty(n)
    for start in range(0, n, 256):
        block = Z[start:start + 256]
        d2 = ((block[:, None, :] - Z[None, :, :]) ** 2).sum(axis=2)
        potential[start:start + 256] = np.exp(-4.0 * d2).sum(axis=1)

    centers = []
    first = None
    while True:
        k = int(np.argmax(potential))
        pk = potential[k]
        if first is None:
            first = pk
        elif pk > accept_ratio * first:
            pass
        elif pk < reject_ratio * first:
            break
        else:
            d_min = np.sqrt(min(((Z[k] - Z[c]) ** 2).sum() for c in centers))
            if d_min + pk / first < 1.0:
                potential[k] = 0.0
                if potential.max() <= 0:
                    break
                continue
        centers.append(k)
        d2 = ((Z - Z[k]) ** 2).sum(axis=1)
        potential = potential - pk * np.exp(-4.0 * d2 / squash**2)
        potential[k] = 0.0
        if len(centers) >= n or potential.max() <= 0:
            break
    return data[centers].copy()


def fuzzy_c_means(data, clusters: int = FCM_CLUSTERS, m: float = FCM_EXPONENT, seed: int = 0,
                  max_iter: int = 200, tol: float = 1e-5):
    """Alternating FCM updates. Returns (centers, memberships (n, clusters), objective history)."""
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    n = data.shape[0]
    if n == 0:
        raise EmptyData("no data to cluster")
    if n < clusters:
        raise ValueError("need at least as many rows as clusters")
    rng = np.random.default_rng(seed)
    U = rng.random((n, clusters))
    U /= U.sum(axis=1, keepdims=True)
    expo = 2.0 / (m - 1.0)
    history = []
    for _ in range(max_iter):
        Um = U**m
        centers = (Um.T @ data) / Um.sum(axis=0)[:, None]
        d2 = ((data[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        history.append(float(np.sum(Um * d2)))
        d = np.sqrt(np.maximum(d2, 1e-300))  # guards points sitting on a centre
        inv = d ** (-expo)
        U_new = inv / inv.sum(axis=1, keepdims=True)
        change = np.abs(U_new - U).max()
        U = U_new
        if change < tol:
            break
    Um = U**m
    centers = (Um.T @ data) / Um.sum(axis=0)[:, None]
    return centers, U, tuple(history)


def _cluster_model(centers, widths, variant):
    k, dim = centers.shape
    a = tuple(np.maximum(widths[:, d], 1e-6) for d in range(dim))
    b = tuple(np.full(k, 2.0) for _ in range(dim))
    c = tuple(centers[:, d].copy() for d in range(dim))
    antecedents = np.tile(np.arange(k)[:, None], (1, dim))
    return AnfisModel(a, b, c, antecedents, np.zeros((k, dim + 1)), variant)


def subtractive_init(inputs, targets, radii=CLUSTER_RADII) -> AnfisModel:
    """One rule per subtractive cluster of the joint input-output space; a = radius * range / 2."""
    X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    joint = np.column_stack([X, targets])
    centers = subtractive_clustering(joint, radii)[:, :X.shape[1]]
    span = X.max(axis=0) - X.min(axis=0)
    span = np.where(span > 0, span, 1.0)
    r = np.broadcast_to(np.asarray(radii, dtype=np.float64), (joint.shape[1],))[:X.shape[1]]
    widths = np.tile(r * span / 2.0, (centers.shape[0], 1))
    return _cluster_model(centers, widths, Variant.SUBTRACTIVE)


def fcm_init(inputs, targets, clusters=FCM_CLUSTERS, seed=0) -> AnfisModel:
    """One rule per FCM cluster of the joint space; bell half-width from the fuzzy spread."""
    X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    joint = np.column_stack([X, targets])
    centers, U, _ = fuzzy_c_means(joint, clusters, seed=seed)
    Um = U**FCM_EXPONENT
    diff2 = (X[:, None, :] - centers[None, :, :X.shape[1]]) ** 2
    sigma = np.sqrt((Um[:, :, None] * diff2).sum(axis=0) / Um.sum(axis=0)[:, None])
    return _cluster_model(centers[:, :X.shape[1]], _HALF_WIDTH_PER_SIGMA * sigma, Variant.FCM)


# --------------------------------------------------------------------------
# Learning


def solve_consequents(model: AnfisModel, X, y) -> AnfisModel:
    wn, _ = normalized_strengths(model, X)
    Xa = _augment(X)
    design = (wn[:, :, None] * Xa[:, None, :]).reshape(X.shape[0], -1)
    coef = ols_fit(design, y)
    return replace(model, consequents=coef.reshape(model.n_rules, X.shape[1] + 1))


def premise_loss(model: AnfisModel, X, y) -> float:
    r = model.predict(X) - y
    return float(np.mean(r * r))


def premise_gradient(model: AnfisModel, X, y) -> np.ndarray:
    """d(MSE)/d(premise_vector) with consequents held fixed."""
    wn, (mu, w, total) = normalized_strengths(model, X)
    f = _augment(X) @ model.consequents.T  # (n, rules)
    out = np.sum(wn * f, axis=1)
    n = X.shape[0]
    dout = 2.0 * (out - y) / n
    dw = dout[:, None] * (f - out[:, None]) / total[:, None]  # dL/dw_r
    grads = []
    for d in range(model.n_inputs):
        others = np.ones_like(w)
        for e in range(model.n_inputs):
            if e != d:
                others = others * mu[e][:, model.antecedents[:, e]]
        m_d = model.a[d].size
        dmu = np.zeros((n, m_d))
        for k in range(m_d):
            rules = model.antecedents[:, d] == k
            dmu[:, k] = np.sum(dw[:, rules] * others[:, rules], axis=1)
        a, b, c = model.a[d], model.b[d], model.c[d]
        x = X[:, d, None]
        u = np.abs((x - c) / a)
        s = u ** (2.0 * b)
        m2 = mu[d] ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            d_a = 2.0 * b * s * m2 / a
            d_c = np.where(x != c, 2.0 * b * s * m2 / (x - c), 0.0)
            d_b = np.where(u > 0, -2.0 * np.log(np.where(u > 0, u, 1.0)) * s * m2, 0.0)
        grads.append(np.concatenate([(dmu * d_a).sum(axis=0), (dmu * d_b).sum(axis=0), (dmu * d_c).sum(axis=0)]))
    return np.concatenate(grads)


def _rmse(model, X, y):
    return float(np.sqrt(premise_loss(model, X, y)))


def fit_anfis(model: AnfisModel, inputs, targets, epochs: int = EPOCHS, step: float = STEP_SIZE,
              learn_premises: bool = True) -> AnfisModel:
    """Hybrid learning; returns the epoch with the lowest training RMSE."""
    X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    y = np.asarray(targets, dtype=np.float64)
    if y.size == 0:
        raise EmptyData("training set is empty")
    history = []
    best, best_rmse = None, np.inf
    prev = np.inf
    for epoch in range(epochs):
        model = solve_consequents(model, X, y)
        err = _rmse(model, X, y)
        if not np.isfinite(err):
            raise Diverged(epoch)
        history.append(err)
        if err < best_rmse:
            best, best_rmse = model, err
        if err > prev:
            step *= STEP_DECAY
        prev = err
        if not learn_premises:
            continue
        g = premise_gradient(model, X, y)
        norm = np.linalg.norm(g)
        if norm == 0 or not np.isfinite(norm):
            continue
        vec = model.premise_vector() - step * g / norm
        trial = model.with_premises(vec)
        # widths and shapes stay positive
        trial = replace(trial, a=tuple(np.maximum(v, 1e-6) for v in trial.a),
                        b=tuple(np.maximum(v, 1e-3) for v in trial.b))
        model = trial
    model = solve_consequents(model, X, y)
    err = _rmse(model, X, y)
    history.append(err)
    if err <= best_rmse or best is None:
        best = model
    return replace(best, rmse_history=tuple(history))
