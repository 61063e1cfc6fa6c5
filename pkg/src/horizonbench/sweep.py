"""The multi-horizon experiment: fit every model per quantity and window, score, fit slopes."""

from __future__ import annotations

import hashlib
import logging
import math
import time
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from multiprocessing import get_context

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .dataset import NormalizationParams, Quantity, SplitSpec, Strategy, TrafficSeries, minmax_normalize, split_series
from .errors import InsufficientPositive
from .metrics import MetricTriple, evaluate
from .models import EVAL_CONTEXT, MODEL_IDS, RAW, build_model
from .numerics import ols_fit

log = logging.getLogger(__name__)

WINDOWS = tuple(range(1, 21))
UNIT_SYSTEMS = ("normalized", "raw")
SPLITS = ("test", "train")
SLOPE_METRICS = ("rmse", "mae", "r2", "r2_loss")


def task_seed(master_seed: int, model_id: str, quantity: str, window: int) -> int:
    """Stable per-task seed, independent of execution order."""
    key = zlib.crc32(f"{model_id}|{Quantity(quantity).value}|{window}".encode())
    return int(np.random.SeedSequence([master_seed, key]).generate_state(1)[0])


@dataclass(frozen=True)
class Cell:
    model: str
    quantity: str
    window: int
    strategy: str
    status: str
    metrics: dict = field(default_factory=dict)  # (unit_system, split) -> MetricTriple
    seconds: float = field(default=0.0, compare=False)
    warnings: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.status.startswith("failed")

    def metric(self, name, split="test", unit_system="normalized"):
        triple = self.metrics.get((unit_system, split))
        if triple is None:
            return None
        return {"rmse": triple.rmse, "mae": triple.mae, "r2": triple.r_squared}[name]


@dataclass(frozen=True)
class SweepResult:
    cells: dict  # (model, quantity, window) -> Cell
    strategy: str = Strategy.DIRECT.value
    profile: str = "paper"
    master_seed: int = 0
    manifest: dict = field(default_factory=dict, compare=False)

    @property
    def models(self):
        return sorted({k[0] for k in self.cells})

    @property
    def quantities(self):
        return sorted({k[1] for k in self.cells})

    @property
    def windows(self):
        return sorted({k[2] for k in self.cells})

    @property
    def failed(self):
        return [c for c in self.cells.values() if not c.ok]

    def series(self, model, quantity, metric, split="test", unit_system="normalized"):
        ws, vs = [], []
        for w in self.windows:
            cell = self.cells.get((model, quantity, w))
            v = cell.metric(metric, split, unit_system) if cell is not None else None
            if v is not None:
                ws.append(w)
                vs.append(v)
        return np.array(ws, dtype=np.float64), np.array(vs, dtype=np.float64)


# --------------------------------------------------------------------------
# Data preparation and per-task work


@dataclass(frozen=True)
class PreparedQuantity:
    quantity: str
    raw: tuple  # train, validation, test arrays
    norm: NormalizationParams

    def segments(self, units):
        if units == RAW:
            return self.raw
        return tuple(self.norm.normalize(s) for s in self.raw)


def prepare(series: TrafficSeries, split: SplitSpec = SplitSpec()) -> PreparedQuantity:
    train, val, test = split_series(series, split)
    _, norm = minmax_normalize(train)  # fitted on training data only
    return PreparedQuantity(series.quantity.value, (train.values, val.values, test.values), norm)


def _origins(n, horizon):
    return np.arange(EVAL_CONTEXT - 1, n - horizon)


def _windows(segment, origins, lag):
    idx = origins[:, None] + np.arange(-lag + 1, 1)[None, :]
    return segment[idx]


def _score(data: PreparedQuantity, units, split_index, origins, horizon, pred):
    raw_seg = data.raw[split_index]
    truth_raw = raw_seg[origins + horizon]
    pred_raw = pred if units == RAW else data.norm.denormalize(pred)
    pred_norm = data.norm.normalize(pred) if units == RAW else pred
    return {
        "raw": evaluate(truth_raw, pred_raw),
        "normalized": evaluate(data.norm.normalize(truth_raw), pred_norm),
    }


def _status(metrics):
    if any(t.r_squared is None for t in metrics.values()):
        return "r2_undefined"
    return "ok"


def _collect(metrics_by_split):
    out = {}
    for split, by_unit in metrics_by_split.items():
        for unit, triple in by_unit.items():
            out[(unit, split)] = triple
    return out


def _failure(model_id, quantity, window, strategy, exc, seconds):
    return Cell(model_id, quantity, window, strategy, f"failed:{type(exc).__name__}", {}, seconds,
                (f"{type(exc).__name__}: {exc}",))


def _run_direct(model_id, data: PreparedQuantity, window, profile, master_seed):
    start = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught, threadpool_limits(1):
        warnings.simplefilter("always")
        try:
            model = build_model(model_id, profile, task_seed(master_seed, model_id, data.quantity, window))
            train, val, test = data.segments(model.units)
            model.fit(train, window, validation=val)
            scores = {}
            for split, idx in (("train", 0), ("test", 2)):
                seg = data.segments(model.units)[idx]
                origins = _origins(seg.size, window)
                pred = model.predict(_windows(seg, origins, model.lag))
                scores[split] = _score(data, model.units, idx, origins, window, pred)
        except Exception as exc:  # recorded per cell; the grid keeps going
            return [_failure(model_id, data.quantity, window, Strategy.DIRECT.value, exc,
                             time.perf_counter() - start)]
    metrics = _collect(scores)
    return [Cell(model_id, data.quantity, window, Strategy.DIRECT.value, _status(metrics), metrics,
                 time.perf_counter() - start, tuple(sorted({str(w.message) for w in caught})))]


def rollout(model, segment, origins, steps):
    """Iterate a one-step model ``steps`` times; returns (steps, len(origins)) predictions."""
    buf = _windows(segment, origins, model.lag)
    preds = np.empty((steps, origins.size))
    for k in range(steps):
        p = model.predict(buf[:, -model.lag:])
        preds[k] = p
        buf = np.concatenate([buf[:, 1:], p[:, None]], axis=1)
    return preds


def _run_recursive(model_id, data: PreparedQuantity, windows, profile, master_seed):
    start = time.perf_counter()
    strategy = Strategy.RECURSIVE.value
    with warnings.catch_warnings(record=True) as caught, threadpool_limits(1):
        warnings.simplefilter("always")
        try:
            model = build_model(model_id, profile, task_seed(master_seed, model_id, data.quantity, 1))
            train, val, test = data.segments(model.units)
            model.fit(train, 1, validation=val)
            steps = max(windows)
            per_split = {}
            for split, idx in (("train", 0), ("test", 2)):
                seg = data.segments(model.units)[idx]
                origins = _origins(seg.size, 1)
                per_split[split] = (idx, origins, rollout(model, seg, origins, steps))
            cells = []
            elapsed = time.perf_counter() - start
            for w in windows:
                scores = {}
                for split, (idx, origins, preds) in per_split.items():
                    keep = origins + w < data.raw[idx].size
                    scores[split] = _score(data, model.units, idx, origins[keep], w, preds[w - 1][keep])
                metrics = _collect(scores)
                cells.append(Cell(model_id, data.quantity, w, strategy, _status(metrics), metrics, elapsed,
                                  tuple(sorted({str(x.message) for x in caught}))))
            return cells
        except Exception as exc:
            elapsed = time.perf_counter() - start
            return [_failure(model_id, data.quantity, w, strategy, exc, elapsed) for w in windows]


def _execute(job):
    kind, args = job
    return (_run_direct if kind == "direct" else _run_recursive)(*args)


def fingerprint(series: TrafficSeries) -> dict:
    return {"length": len(series), "sha256": hashlib.sha256(np.ascontiguousarray(series.values).tobytes()).hexdigest()}


def run_sweep(data, models=MODEL_IDS, windows=WINDOWS, strategy=Strategy.DIRECT, profile: str = "paper",
              master_seed: int = 0, workers: int = 1, split: SplitSpec = SplitSpec()) -> SweepResult:
    """Run every (model, quantity, window) cell; failures are recorded, never raised.

    ``data`` maps quantity -> TrafficSeries (raw units).
    """
    strategy = Strategy(strategy)
    windows = tuple(sorted(windows))
    if not windows or windows[0] < 1:
        raise ValueError("windows must be positive integers")
    if profile not in ("paper", "reduced"):
        raise ValueError("profile must be 'paper' or 'reduced'")
    series_by_q = {Quantity(q).value: s for q, s in data.items()}
    prepared = {q: prepare(s, split) for q, s in series_by_q.items()}

    jobs = []
    for q in sorted(prepared):
        for m in models:
            if strategy is Strategy.DIRECT:
                jobs += [("direct", (m, prepared[q], w, profile, master_seed)) for w in windows]
            else:
                jobs.append(("recursive", (m, prepared[q], windows, profile, master_seed)))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers, mp_context=get_context("spawn")) as pool:
            outputs = list(pool.map(_execute, jobs))
    else:
        outputs = [_execute(j) for j in jobs]

    cells = {}
    for out in outputs:
        for cell in out:
            cells[(cell.model, cell.quantity, cell.window)] = cell
    manifest = {
        "version": __version__,
        "master_seed": master_seed,
        "strategy": strategy.value,
        "profile": profile,
        "windows": list(windows),
        "eval_context": EVAL_CONTEXT,
        "split": {"train": split.train_fraction, "validation": split.validation_fraction, "test": split.test_fraction},
        "models": {m: build_model(m, profile).hyperparameters() for m in models},
        "data": {q: fingerprint(s) for q, s in sorted(series_by_q.items())},
        "normalization": {q: {"min": p.norm.min, "max": p.norm.max} for q, p in sorted(prepared.items())},
    }
    return SweepResult(cells, strategy.value, profile, master_seed, manifest)


# --------------------------------------------------------------------------
# Log-linear robustness fits


@dataclass(frozen=True)
class SlopeFit:
    m: float
    c: float
    fit_r_squared: float | None
    excluded_points: int
    n_points: int

    def line(self, window):
        return np.exp(self.m * np.asarray(window, dtype=np.float64) + self.c)


def fit_log_slope(windows, values) -> SlopeFit:
    """Least-squares line through ln(value) versus window; nonpositive values are dropped."""
    w = np.asarray(windows, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if w.shape != v.shape:
        raise ValueError("windows and values must have equal lengths")
    keep = np.isfinite(v) & (v > 0)
    excluded = int(v.size - keep.sum())
    if keep.sum() < 3:
        raise InsufficientPositive(f"only {int(keep.sum())} positive values; need 3")
    x, z = w[keep], np.log(v[keep])
    c, m = ols_fit(np.column_stack([np.ones(x.size), x]), z)
    resid = z - (c + m * x)
    ss_tot = float(np.sum((z - z.mean()) ** 2))
    ss_res = float(resid @ resid)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else None
    return SlopeFit(float(m), float(c), r2, excluded, int(keep.sum()))


@dataclass(frozen=True)
class SlopeRecord:
    model: str
    quantity: str
    metric: str
    target_split: str
    fit: SlopeFit | None
    excluded: int


def slope_table(result: SweepResult, target_split: str = "test", unit_system: str = "normalized"):
    """Fits for rmse, mae, r2 (with exclusions) and ln(1 - R^2) restricted to R^2 < 1."""
    records = []
    for model in result.models:
        for q in result.quantities:
            for metric in SLOPE_METRICS:
                base = "r2" if metric == "r2_loss" else metric
                ws, vs = result.series(model, q, base, target_split, unit_system)
                if metric == "r2_loss":
                    below = vs < 1.0
                    ws, vs = ws[below], 1.0 - vs[below]
                try:
                    fit = fit_log_slope(ws, vs)
                    excluded = fit.excluded_points
                except InsufficientPositive:
                    fit = None
                    excluded = int(np.sum(~(vs > 0)))
                records.append(SlopeRecord(model, q, metric, target_split, fit, excluded))
    return records


# --------------------------------------------------------------------------
# Rankings


@dataclass(frozen=True)
class Rankings:
    per_window: dict  # (quantity, window) -> [model ids, best first]
    robustness: dict  # quantity -> [model ids, flattest RMSE slope first]


def rank_models(result: SweepResult, split: str = "test", slopes=None) -> Rankings:
    per_window = {}
    for q in result.quantities:
        for w in result.windows:
            scored = []
            for m in result.models:
                cell = result.cells.get((m, q, w))
                if cell is None or not cell.ok:
                    continue
                scored.append((cell.metric("rmse", split), cell.metric("mae", split), m))
            per_window[(q, w)] = [m for _, _, m in sorted(scored)]
    if slopes is None:
        slopes = slope_table(result, split)
    robustness = {}
    for q in result.quantities:
        fits = [(r.fit.m if r.fit else math.inf, r.model) for r in slopes
                if r.quantity == q and r.metric == "rmse"]
        robustness[q] = [m for _, m in sorted(fits)]
    return Rankings(per_window, robustness)
