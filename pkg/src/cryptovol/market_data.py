"""Price ingestion, resampling, return series, and descriptive statistics.

All timestamps are UTC (stored tz-naive). Returns are simple returns,
``(S_t - S_{t-1}) / S_{t-1}``, and annualization assumes continuous trading:
365 days per year and the per-frequency period counts in PERIODS_PER_YEAR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
import pandas as pd
from scipy import stats as _stats

from .errors import (
    DuplicateTimestampError,
    InsufficientDataError,
    OrderingError,
    ParseError,
    UnsupportedFrequencyError,
)

#: Supported sampling frequencies, finest to coarsest.
FREQUENCIES = ("1min", "1h", "3h", "6h", "12h", "1d")

_FREQ_RANK = {f: i for i, f in enumerate(FREQUENCIES)}
_FREQ_MINUTES = {"1min": 1, "1h": 60, "3h": 180, "6h": 360, "12h": 720, "1d": 1440}
_FREQ_OFFSET = {"1min": "1min", "1h": "1h", "3h": "3h", "6h": "6h", "12h": "12h", "1d": "1D"}

#: Periods per year by frequency (365-day year; crypto trades continuously).
PERIODS_PER_YEAR = {
    "1d": 365.0,
    "12h": 730.0,
    "6h": 1460.0,
    "3h": 2920.0,
    "1h": 8760.0,
    "1min": 525600.0,
}

#: Wall-clock length of one period at each frequency.
PERIOD_LENGTH = {
    "1min": pd.Timedelta(minutes=1),
    "1h": pd.Timedelta(hours=1),
    "3h": pd.Timedelta(hours=3),
    "6h": pd.Timedelta(hours=6),
    "12h": pd.Timedelta(hours=12),
    "1d": pd.Timedelta(days=1),
}


def annualization_factor(frequency: str) -> float:
    """sqrt(periods per year) for the given sampling frequency."""
    try:
        return math.sqrt(PERIODS_PER_YEAR[frequency])
    except KeyError:
        raise UnsupportedFrequencyError(f"unknown frequency {frequency!r}") from None


@dataclass(frozen=True)
class PriceBar:
    """One price observation."""

    timestamp: pd.Timestamp
    close: float
    volume: float | None = None


@dataclass
class PriceSeries:
    """Ordered price bars at a declared sampling frequency.

    Bars are stored as parallel arrays; ``bar(i)`` and iteration expose them
    as PriceBar rows. Gaps relative to the uniform grid are permitted and
    counted in ``missing_periods``.
    """

    timestamps: np.ndarray  # datetime64[ns], strictly increasing
    closes: np.ndarray  # float64, > 0
    frequency: str
    instrument: str = ""
    volumes: np.ndarray | None = None
    missing_periods: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        self.timestamps = np.asarray(self.timestamps, dtype="datetime64[ns]")
        self.closes = np.asarray(self.closes, dtype=np.float64)
        if self.volumes is not None:
            self.volumes = np.asarray(self.volumes, dtype=np.float64)
        if self.frequency not in _FREQ_RANK:
            raise UnsupportedFrequencyError(f"unknown frequency {self.frequency!r}")
        if self.timestamps.shape[0] != self.closes.shape[0]:
            raise ValueError("timestamps and closes must have equal length")
        if np.any(self.closes <= 0.0) or not np.all(np.isfinite(self.closes)):
            raise ValueError("closes must be finite and positive")
        if self.timestamps.shape[0] > 1:
            deltas = np.diff(self.timestamps.astype("int64"))
            if np.any(deltas <= 0):
                raise OrderingError("timestamps must be strictly increasing")

    def __len__(self) -> int:
        return int(self.timestamps.shape[0])

    def __iter__(self) -> Iterator[PriceBar]:
        return (self.bar(i) for i in range(len(self)))

    def bar(self, i: int) -> PriceBar:
        vol = None if self.volumes is None else float(self.volumes[i])
        return PriceBar(pd.Timestamp(self.timestamps[i]), float(self.closes[i]), vol)

    @property
    def bars(self) -> list[PriceBar]:
        return list(self)


@dataclass
class ReturnSeries:
    """Simple returns; each stamped with the timestamp of the later bar."""

    timestamps: np.ndarray  # datetime64[ns]
    values: np.ndarray  # float64
    frequency: str

    def __post_init__(self) -> None:
        self.timestamps = np.asarray(self.timestamps, dtype="datetime64[ns]")
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.timestamps.shape[0] != self.values.shape[0]:
            raise ValueError("timestamps and values must have equal length")

    def __len__(self) -> int:
        return int(self.values.shape[0])

    def tail(self, n: int) -> "ReturnSeries":
        """The most recent n returns."""
        return ReturnSeries(self.timestamps[-n:], self.values[-n:], self.frequency)

    def through(self, when) -> "ReturnSeries":
        """Returns stamped at or before ``when`` (causal truncation)."""
        cutoff = np.datetime64(pd.Timestamp(when))
        mask = self.timestamps <= cutoff
        return ReturnSeries(self.timestamps[mask], self.values[mask], self.frequency)


@dataclass(frozen=True)
class DescriptiveStats:
    mean_return: float
    annualized_vol: float
    skewness: float
    excess_kurtosis: float
    n: int


def _parse_timestamps(raw: pd.Series) -> pd.Series:
    """ISO-8601 or epoch-milliseconds, auto-detected."""
    if pd.api.types.is_numeric_dtype(raw):
        return pd.to_datetime(raw, unit="ms", errors="coerce")
    parsed = pd.to_datetime(raw, errors="coerce", utc=True, format="ISO8601")
    return parsed.dt.tz_convert(None)


def load_price_csv(path, frequency: str, instrument: str = "") -> PriceSeries:
    """Load a price CSV with columns timestamp, close[, volume].

    Rows must already be sorted by timestamp; duplicates and out-of-order
    rows are rejected rather than silently repaired.
    """
    if frequency not in _FREQ_RANK:
        raise UnsupportedFrequencyError(f"unknown frequency {frequency!r}")
    frame = pd.read_csv(path)
    frame.columns = [str(c).strip().lower() for c in frame.columns]
    for required in ("timestamp", "close"):
        if required not in frame.columns:
            raise ParseError(f"{path}: missing required column {required!r}")
    if len(frame) == 0:
        raise InsufficientDataError(f"{path}: no data rows")

    ts = _parse_timestamps(frame["timestamp"])
    bad = ts.isna()
    if bad.any():
        line = int(bad.idxmax()) + 2  # +1 header, +1 one-based
        raise ParseError(f"{path}: line {line}: unparseable timestamp {frame['timestamp'][bad.idxmax()]!r}")

    close = pd.to_numeric(frame["close"], errors="coerce")
    bad = close.isna() | ~np.isfinite(close) | (close <= 0.0)
    if bad.any():
        line = int(bad.idxmax()) + 2
        raise ParseError(f"{path}: line {line}: invalid close {frame['close'][bad.idxmax()]!r}")

    volumes = None
    if "volume" in frame.columns:
        vol = pd.to_numeric(frame["volume"], errors="coerce")
        if (vol < 0).any():
            line = int((vol < 0).idxmax()) + 2
            raise ParseError(f"{path}: line {line}: negative volume")
        volumes = vol.to_numpy(dtype=np.float64)

    dup = ts.duplicated()
    if dup.any():
        raise DuplicateTimestampError(f"{path}: duplicated timestamp {ts[dup.idxmax()]}")
    if not ts.is_monotonic_increasing:
        raise OrderingError(f"{path}: timestamps are not in ascending order")

    ts64 = ts.to_numpy(dtype="datetime64[ns]")
    series = PriceSeries(
        timestamps=ts64,
        closes=close.to_numpy(dtype=np.float64),
        frequency=frequency,
        instrument=instrument,
        volumes=volumes,
    )
    series.missing_periods = _count_missing(ts64, frequency)
    return series


def _count_missing(ts: np.ndarray, frequency: str) -> int:
    if ts.shape[0] < 2:
        return 0
    span_min = (ts[-1] - ts[0]) / np.timedelta64(1, "m")
    expected = int(round(span_min / _FREQ_MINUTES[frequency])) + 1
    return max(0, expected - ts.shape[0])


def resample(series: PriceSeries, target: str) -> PriceSeries:
    """Downsample to a coarser frequency.

    Buckets are [start, start + period), anchored to UTC midnight; each
    output bar is stamped at the bucket start and carries the last close
    observed inside the bucket (volume, when present, is summed).
    """
    if target not in _FREQ_RANK:
        raise UnsupportedFrequencyError(f"unknown frequency {target!r}")
    if _FREQ_RANK[target] <= _FREQ_RANK[series.frequency]:
        raise UnsupportedFrequencyError(
            f"target {target!r} is not coarser than source {series.frequency!r}"
        )
    index = pd.DatetimeIndex(series.timestamps)
    buckets = index.floor(_FREQ_OFFSET[target])
    frame = pd.DataFrame({"close": series.closes}, index=buckets)
    if series.volumes is not None:
        frame["volume"] = series.volumes
    grouped = frame.groupby(level=0)
    closes = grouped["close"].last()
    volumes = grouped["volume"].sum().to_numpy() if series.volumes is not None else None
    ts64 = closes.index.to_numpy(dtype="datetime64[ns]")
    out = PriceSeries(
        timestamps=ts64,
        closes=closes.to_numpy(dtype=np.float64),
        frequency=target,
        instrument=series.instrument,
        volumes=volumes,
    )
    out.missing_periods = _count_missing(ts64, target)
    return out


def simple_returns(series: PriceSeries) -> ReturnSeries:
    """r_t = (S_t - S_{t-1}) / S_{t-1} between consecutive observed bars."""
    if len(series) < 2:
        raise InsufficientDataError("need at least 2 bars to compute returns")
    closes = series.closes
    values = np.diff(closes) / closes[:-1]
    return ReturnSeries(series.timestamps[1:], values, series.frequency)


def realized_vol(
    returns: ReturnSeries, window: int | None = None, annualize: bool = True
) -> float:
    """Sample standard deviation (divisor N-1) of the last ``window`` returns.

    ``window=None`` uses the full series. Annualization multiplies by
    sqrt(periods per year) for the series frequency.
    """
    if window is not None:
        if window < 2:
            raise InsufficientDataError(f"window must be >= 2, got {window}")
        if len(returns) < window:
            raise InsufficientDataError(
                f"need {window} returns, have {len(returns)}"
            )
        values = returns.values[-window:]
    else:
        if len(returns) < 2:
            raise InsufficientDataError("need at least 2 returns")
        values = returns.values
    vol = float(np.std(values, ddof=1))
    if annualize:
        vol *= annualization_factor(returns.frequency)
    return vol


def descriptive_stats(returns: ReturnSeries) -> DescriptiveStats:
    """Mean, annualized vol, moment skewness, and excess kurtosis."""
    n = len(returns)
    if n < 4:
        raise InsufficientDataError(f"need at least 4 returns, have {n}")
    values = returns.values
    return DescriptiveStats(
        mean_return=float(np.mean(values)),
        annualized_vol=float(np.std(values, ddof=1)) * annualization_factor(returns.frequency),
        skewness=float(_stats.skew(values, bias=True)),
        excess_kurtosis=float(_stats.kurtosis(values, fisher=True, bias=True)),
        n=n,
    )
