"""Traffic series ingestion, synthesis, splitting and supervised framing."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from enum import Enum

import numpy as np

from .errors import (
    DegenerateRange,
    EmptyData,
    InvalidProfile,
    MalformedRow,
    MissingColumn, NonFinite,
    TooShort,
)

GRANULARITY_MINUTES = 5
SAMPLES_PER_DAY = 24 * 60 // GRANULARITY_MINUTES
DEFAULT_START = datetime(2024, 1, 1)

# Prefixes tolerate the truncated headers PeMS exports, e.g. "Flow (Veh/5 Mi".
SPEED_HEADER = "Speed (mph)"
FLOW_HEADER = "Flow (Veh/5 Mi"
TIMESTAMP_HEADERS = ("5 Minutes", "Timestamp")
TIMESTAMP_FORMATS = ("%m/%d/%Y %H:%M:%S", "%m/%d/%Y %H:%M", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S")


class Quantity(str, Enum):
    SPEED = "speed"
    FLOW = "flow"

    @property
    def unit(self) -> str:
        return "mph" if self is Quantity.SPEED else "veh/5min"


class Strategy(str, Enum):
    DIRECT = "direct"
    RECURSIVE = "recursive"


@dataclass(frozen=True)
class TrafficSeries:
    quantity: Quantity
    values: np.ndarray
    start: datetime = DEFAULT_START
    granularity_minutes: int = GRANULARITY_MINUTES

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size < 1:
            raise EmptyData("a traffic series needs at least one value")
        if not np.all(np.isfinite(values)):
            raise NonFinite("traffic values must be finite")
        if np.any(values < 0):
            raise ValueError("traffic values must be non-negative")
        if self.granularity_minutes != GRANULARITY_MINUTES:
            raise ValueError("granularity is fixed at 5 minutes")
        values.setflags(write=False)
        object.__setattr__(self, "quantity", Quantity(self.quantity))
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size

    @property
    def unit(self) -> str:
        return self.quantity.unit

    def timestamp(self, index: int) -> datetime:
        return self.start + timedelta(minutes=self.granularity_minutes * index)

    def segment(self, lo: int, hi: int) -> "TrafficSeries":
        return TrafficSeries(self.quantity, self.values[lo:hi], self.timestamp(lo))


def _parse_timestamp(text):
    for fmt in TIMESTAMP_FORMATS:
        try:
            return datetime.strptime(text.strip(), fmt)
        except ValueError:
            continue
    return None


def _find_column(header, prefix):
    for i, name in enumerate(header):
        if name.strip().startswith(prefix):
            return i
    return None


def parse_pems_csv(text: str, quantity) -> TrafficSeries:
    """Extract the aggregate speed or flow column from a PeMS station export."""
    quantity = Quantity(quantity)
    rows = [r for r in csv.reader(io.StringIO(text)) if any(cell.strip() for cell in r)]
    if not rows:
        raise EmptyData("document has no header row")
    header = rows[0]
    prefix = SPEED_HEADER if quantity is Quantity.SPEED else FLOW_HEADER
    col = _find_column(header, prefix)
    if col is None:
        raise MissingColumn(f"no column starting with {prefix!r}")
    ts_col = next((c for c in (_find_column(header, h) for h in TIMESTAMP_HEADERS) if c is not None), None)

    data = rows[1:]
    if not data:
        raise EmptyData("document has no data rows")
    values = np.empty(len(data))
    for i, row in enumerate(data):
        try:
            values[i] = float(row[col])
        except (IndexError, ValueError):
            raise MalformedRow(i, f"cannot parse {prefix!r} cell") from None
        if not math.isfinite(values[i]):
            raise MalformedRow(i, "non-finite value")
    start = DEFAULT_START
    if ts_col is not None:
        start = _parse_timestamp(data[0][ts_col]) or DEFAULT_START
    return TrafficSeries(quantity, values, start)


def write_series_csv(series: TrafficSeries) -> str:
    """Canonical ``timestamp,value`` form used for cached series."""
    out = io.StringIO()
    out.write("timestamp,value\n")
    for i, v in enumerate(series.values):
        out.write(f"{series.timestamp(i).isoformat()},{format(v, '.17g')}\n")
    return out.getvalue()


def read_series_csv(text: str, quantity) -> TrafficSeries:
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if not rows or [c.strip() for c in rows[0]] != ["timestamp", "value"]:
        raise MissingColumn("expected header 'timestamp,value'")
    if len(rows) == 1:
        raise EmptyData("no data rows")
    values = np.empty(len(rows) - 1)
    for i, row in enumerate(rows[1:]):
        try:
            values[i] = float(row[1])
        except (IndexError, ValueError):
            raise MalformedRow(i, "cannot parse value") from None
    start = _parse_timestamp(rows[1][0]) or DEFAULT_START
    return TrafficSeries(quantity, values, start)


@dataclass(frozen=True)
class SyntheticProfile:
    """Shape of a synthetic day: base level, diurnal swing, two rush-hour bumps.

    ``noise_persistence`` is the AR(1) coefficient of the additive noise;
    0 gives white noise. ``peak_direction`` = -1 turns bumps into dips (speed).
    """

    base: float
    daily_amplitude: float
    peak_amplitude: float
    noise_sigma: float
    noise_persistence: float = 0.9
    peak_direction: int = 1
    peak_width: float = 18.0

    def __post_init__(self):
        if min(self.daily_amplitude, self.peak_amplitude, self.noise_sigma) < 0:
            raise InvalidProfile("amplitudes and noise sigma must be non-negative")
        if not 0 <= self.noise_persistence < 1:
            raise InvalidProfile("noise persistence must lie in [0, 1)")
        if self.peak_direction not in (-1, 1) or self.peak_width <= 0:
            raise InvalidProfile("invalid peak shape")


FLOW_PROFILE = SyntheticProfile(base=250.0, daily_amplitude=120.0, peak_amplitude=90.0, noise_sigma=15.0)
SPEED_PROFILE = SyntheticProfile(
    base=62.0, daily_amplitude=3.0, peak_amplitude=12.0, noise_sigma=1.5, peak_direction=-1
)
DEFAULT_PROFILES = {Quantity.FLOW: FLOW_PROFILE, Quantity.SPEED: SPEED_PROFILE}

_PEAK_CENTERS = (8 * 12, 17 * 12 + 6)  # 08:00 and 17:30 in 5-minute slots


def _daily_shape(profile: SyntheticProfile) -> np.ndarray:
    slot = np.arange(SAMPLES_PER_DAY, dtype=np.float64)
    diurnal = -profile.daily_amplitude * np.cos(2 * np.pi * slot / SAMPLES_PER_DAY)
    bumps = np.zeros(SAMPLES_PER_DAY)
    for center in _PEAK_CENTERS:
        # circular distance so the bump wraps cleanly across midnight
        d = np.minimum(np.abs(slot - center), SAMPLES_PER_DAY - np.abs(slot - center))
        bumps += np.exp(-0.5 * (d / profile.peak_width) ** 2)
    # bumps are centered so that `base` stays the daily mean
    bumps = profile.peak_direction * profile.peak_amplitude * (bumps - bumps.mean())
    return profile.base + diurnal + bumps


def generate_synthetic(days: int, seed: int, profile: SyntheticProfile = FLOW_PROFILE,
                       quantity=Quantity.FLOW) -> TrafficSeries:
    """Seeded traffic-like series with 288 samples per day, clamped at zero."""
    if days < 1:
        raise ValueError("days must be >= 1")
    n = days * SAMPLES_PER_DAY
    clean = np.tile(_daily_shape(profile), days)
    noise = np.zeros(n)
    if profile.noise_sigma > 0:
        rng = np.random.default_rng(seed)
        phi = profile.noise_persistence
        shocks = rng.standard_normal(n) * profile.noise_sigma * math.sqrt(1 - phi * phi)
        noise[0] = rng.standard_normal() * profile.noise_sigma
        for t in range(1, n):
            noise[t] = phi * noise[t - 1] + shocks[t]
    return TrafficSeries(quantity, np.maximum(clean + noise, 0.0))


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    validation_fraction: float = 0.1
    test_fraction: float = 0.1

    def __post_init__(self):
        fracs = (self.train_fraction, self.validation_fraction, self.test_fraction)
        if min(fracs) <= 0 or abs(sum(fracs) - 1.0) > 1e-12:
            raise ValueError("split fractions must be positive and sum to 1")


def _floor_fraction(frac, n):
    return int(math.floor(frac * n + 1e-9))


def split_series(series: TrafficSeries, spec: SplitSpec = SplitSpec()):
    """Chronological (train, validation, test) segments; no shuffling."""
    n = len(series)
    if n < 10:
        raise TooShort(f"need at least 10 samples to split, got {n}")
    n_train = _floor_fraction(spec.train_fraction, n)
    n_val = _floor_fraction(spec.validation_fraction, n)
    return (
        series.segment(0, n_train),
        series.segment(n_train, n_train + n_val),
        series.segment(n_train + n_val, n),
    )


@dataclass(frozen=True)
class NormalizationParams:
    min: float
    max: float

    def __post_init__(self):
        if not self.max > self.min:
            raise DegenerateRange("normalization needs max > min")

    @property
    def scale(self) -> float:
        return self.max - self.min

    def normalize(self, x):
        return (np.asarray(x, dtype=np.float64) - self.min) / self.scale

    def denormalize(self, z):
        return np.asarray(z, dtype=np.float64) * self.scale + self.min


def minmax_normalize(series):
    values = series.values if isinstance(series, TrafficSeries) else np.asarray(series, dtype=np.float64)
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        raise DegenerateRange("cannot normalize a constant series")
    params = NormalizationParams(lo, hi)
    return params.normalize(values), params


@dataclass(frozen=True)
class SupervisedSet:
    inputs: np.ndarray
    targets: np.ndarray
    lag: int
    horizon: int
    strategy: Strategy = Strategy.DIRECT
    norm: NormalizationParams | None = field(default=None, compare=False)

    def __len__(self):
        return self.targets.size

    def subset(self, idx) -> "SupervisedSet":
        return SupervisedSet(self.inputs[idx], self.targets[idx], self.lag, self.horizon, self.strategy, self.norm)


def make_supervised(values, lag: int, horizon: int = 1, strategy=Strategy.DIRECT,
                    norm: NormalizationParams | None = None) -> SupervisedSet:
    """Lagged windows paired with targets ``horizon`` steps past each window.

    Under the recursive strategy the training target is always one step
    ahead; the multi-step forecast is produced by iterating at inference.
    """
    values = np.asarray(values, dtype=np.float64)
    strategy = Strategy(strategy)
    if lag < 1 or horizon < 1:
        raise ValueError("lag and horizon must be positive")
    step = horizon if strategy is Strategy.DIRECT else 1
    if values.size <= lag + step:
        raise TooShort(f"series of length {values.size} too short for lag {lag} and horizon {step}")
    m = values.size - lag - step + 1
    windows = np.lib.stride_tricks.sliding_window_view(values, lag)[:m]
    targets = values[lag + step - 1: lag + step - 1 + m]
    return SupervisedSet(np.ascontiguousarray(windows), targets.copy(), lag, horizon, strategy, norm)
