"""Walk-forward forecast generation and out-of-sample regression evaluation.

The walk-forward driver re-estimates a model each day on a look-back window
ending at day t and records the day-(t+1) forecast, stamped at t. Forecasts
are then paired with next-day realized volatility (from minute bars) and
evaluated by OLS with homoskedastic t-stats, adjusted R², and mean absolute
error on fitted values. Missing observations (estimation failures, data gaps)
are dropped listwise before regressing.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import (
    AlignmentError,
    CollinearityError,
    EstimationError,
    InsufficientDataError,
    NonStationaryError,
    NumericalOverflowError,
)
from .market_data import (
    PERIOD_LENGTH,
    PriceSeries,
    ReturnSeries,
    annualization_factor,
)
from .models import (
    ForecastSeries,
    ModelKind,
    ema_forecast,
    fit_mle,
    forecast_multi_day_average,
    forecast_one_step,
    hist_forecast,
)

logger = logging.getLogger(__name__)

_FIT_ERRORS = (
    EstimationError,
    InsufficientDataError,
    NonStationaryError,
    NumericalOverflowError,
)


@dataclass(frozen=True)
class LookbackSpec:
    """Look-back window: a fixed day count (>= 30) or the whole history."""

    days: int | None = None

    def __post_init__(self) -> None:
        if self.days is not None and self.days < 30:
            raise ValueError(f"look-back day count must be >= 30, got {self.days}")

    @property
    def label(self) -> str:
        return "whole" if self.days is None else f"{self.days}d"

    @classmethod
    def parse(cls, value) -> "LookbackSpec":
        if isinstance(value, LookbackSpec):
            return value
        if value is None or value in ("whole", "whole-history"):
            return cls(None)
        if isinstance(value, int):
            return cls(value)
        text = str(value).strip().lower()
        if text.endswith("d"):
            text = text[:-1]
        try:
            return cls(int(text))
        except ValueError:
            raise ValueError(f"unrecognized look-back spec {value!r}") from None


#: Standard comparison grid of look-back windows.
DEFAULT_LOOKBACKS = ("whole", "365d", "180d", "90d", "30d")


def _forecast_window(
    kind: ModelKind,
    window: ReturnSeries,
    ema_n: int,
    ema_conventional: bool,
    min_obs: int,
) -> float:
    if kind is ModelKind.HIST:
        return hist_forecast(window)
    if kind is ModelKind.EMA:
        return ema_forecast(window, n=ema_n, conventional=ema_conventional)
    fit = fit_mle(kind, window, min_obs=min_obs)
    return forecast_one_step(fit, window)


def walk_forward(
    kind: ModelKind,
    lookback,
    daily: ReturnSeries,
    start,
    *,
    ema_n: int = 365,
    ema_conventional: bool = False,
    min_obs: int = 30,
) -> ForecastSeries:
    """Daily re-estimated one-step-ahead forecasts, stamped at production day t.

    For each return date t >= ``start``, the model is refit on the look-back
    window ending at t (all history for ``whole``) and the forecast for day
    t+1 is recorded at date t. Strictly causal: nothing after t is touched,
    so extending the input with future data never changes earlier entries.
    Windows whose estimation fails are logged and listed in ``skipped``.
    """
    kind = ModelKind(kind)
    spec = LookbackSpec.parse(lookback)
    ts = pd.DatetimeIndex(daily.timestamps)
    start_ts = pd.Timestamp(start)
    first = int(ts.searchsorted(start_ts, side="left"))
    if first >= len(ts):
        raise InsufficientDataError(f"no return dates on or after {start_ts.date()}")
    min_window = 2 if spec.days is None else spec.days
    if first + 1 < min_window:
        raise InsufficientDataError(
            f"only {first + 1} returns before {ts[first].date()}, "
            f"need {min_window} for lookback {spec.label}"
        )
    dates: list = []
    values: list = []
    skipped: list = []
    for i in range(first, len(ts)):
        lo = 0 if spec.days is None else i + 1 - spec.days
        window = ReturnSeries(
            daily.timestamps[lo : i + 1], daily.values[lo : i + 1], daily.frequency
        )
        try:
            value = _forecast_window(kind, window, ema_n, ema_conventional, min_obs)
        except _FIT_ERRORS as exc:
            logger.warning(
                "%s %s forecast for %s skipped: %s",
                kind.value,
                spec.label,
                ts[i].date(),
                exc,
            )
            skipped.append((ts[i], str(exc)))
            continue
        dates.append(ts[i].to_datetime64())
        values.append(value)
    return ForecastSeries(
        dates=np.array(dates, dtype="datetime64[ns]"),
        values=np.array(values, dtype=np.float64),
        kind=kind,
        lookback=spec.label,
        horizon="1d",
        frequency=daily.frequency,
        skipped=tuple(skipped),
    )


def walk_forward_multi_day(
    kind: ModelKind,
    lookback,
    daily: ReturnSeries,
    start,
    maturity,
    *,
    min_obs: int = 30,
) -> ForecastSeries:
    """Daily refit emitting the multi-day average forecast through ``maturity``.

    The strategy's forecast leg: each day t gets the equal-weighted mean of
    the daily vol forecasts from t+1 through the option maturity. Stops once
    fewer than two days remain to maturity.
    """
    kind = ModelKind(kind)
    if kind not in (ModelKind.ARCH, ModelKind.GARCH):
        raise ValueError(f"multi-day forecasts are ARCH/GARCH only, not {kind.value}")
    spec = LookbackSpec.parse(lookback)
    maturity_ts = pd.Timestamp(maturity).normalize()
    ts = pd.DatetimeIndex(daily.timestamps)
    start_ts = pd.Timestamp(start)
    first = int(ts.searchsorted(start_ts, side="left"))
    if first >= len(ts):
        raise InsufficientDataError(f"no return dates on or after {start_ts.date()}")
    period = PERIOD_LENGTH[daily.frequency]
    dates: list = []
    values: list = []
    skipped: list = []
    for i in range(first, len(ts)):
        if int((maturity_ts - ts[i].normalize()) / period) < 2:
            break
        lo = 0 if spec.days is None else i + 1 - spec.days
        if lo < 0:
            skipped.append((ts[i], "window incomplete"))
            continue
        window = ReturnSeries(
            daily.timestamps[lo : i + 1], daily.values[lo : i + 1], daily.frequency
        )
        try:
            fit = fit_mle(kind, window, min_obs=min_obs)
            value = forecast_multi_day_average(fit, window, maturity_ts)
        except _FIT_ERRORS as exc:
            logger.warning(
                "%s %s multi-day forecast for %s skipped: %s",
                kind.value,
                spec.label,
                ts[i].date(),
                exc,
            )
            skipped.append((ts[i], str(exc)))
            continue
        dates.append(ts[i].to_datetime64())
        values.append(value)
    return ForecastSeries(
        dates=np.array(dates, dtype="datetime64[ns]"),
        values=np.array(values, dtype=np.float64),
        kind=kind,
        lookback=spec.label,
        horizon=f"avg:{maturity_ts.date()}",
        frequency=daily.frequency,
        skipped=tuple(skipped),
    )


def realized_vol_next_day(minute_series: PriceSeries, day) -> float:
    """Annualized sample std of one day's intraday returns.

    Returns are taken between consecutive bars inside [day 00:00, day+1
    00:00) UTC; fewer than 30 of them is an error.
    """
    day_ts = pd.Timestamp(day).normalize()
    ts = pd.DatetimeIndex(minute_series.timestamps)
    lo = int(ts.searchsorted(day_ts, side="left"))
    hi = int(ts.searchsorted(day_ts + pd.Timedelta(days=1), side="left"))
    closes = minute_series.closes[lo:hi]
    if closes.shape[0] < 31:
        raise InsufficientDataError(
            f"{day_ts.date()}: {max(closes.shape[0] - 1, 0)} intraday returns, need >= 30"
        )
    rets = np.diff(closes) / closes[:-1]
    return float(np.std(rets, ddof=1)) * annualization_factor(minute_series.frequency)


def realized_vol_by_day(
    minute_series: PriceSeries, min_returns: int = 30
) -> pd.Series:
    """Per-day annualized realized vol over every day with enough intraday bars.

    Days with fewer than ``min_returns`` intraday returns are logged and
    omitted (they fall out of any later alignment as missing dates).
    """
    factor = annualization_factor(minute_series.frequency)
    frame = pd.DataFrame(
        {"close": minute_series.closes},
        index=pd.DatetimeIndex(minute_series.timestamps),
    )
    out = {}
    for day, group in frame.groupby(frame.index.normalize()):
        closes = group["close"].to_numpy()
        if closes.shape[0] < min_returns + 1:
            logger.warning(
                "realized vol for %s omitted: %d intraday returns",
                day.date(),
                closes.shape[0] - 1,
            )
            continue
        rets = np.diff(closes) / closes[:-1]
        out[day] = float(np.std(rets, ddof=1)) * factor
    return pd.Series(out, dtype=np.float64).sort_index()


def forecast_to_series(forecasts: ForecastSeries, name: str | None = None) -> pd.Series:
    label = name or f"{forecasts.kind.value}_{forecasts.lookback}"
    return pd.Series(
        forecasts.values, index=pd.DatetimeIndex(forecasts.dates), name=label
    )


def regression_table(realized_by_day: pd.Series, regressors) -> pd.DataFrame:
    """Aligned table of RV_{t+1} against day-t regressors, indexed by t.

    ``realized_by_day`` is indexed by the day it measures; it is shifted back
    one day so that row t carries the realized vol of t+1 next to forecasts
    produced on day t. Rows with any missing value are dropped (listwise).
    """
    rv = realized_by_day.copy()
    rv.index = pd.DatetimeIndex(rv.index) - pd.Timedelta(days=1)
    rv.name = "realized_next"
    columns = [rv]
    for item in regressors:
        columns.append(
            forecast_to_series(item) if isinstance(item, ForecastSeries) else item
        )
    table = pd.concat(columns, axis=1, join="inner").dropna()
    return table


@dataclass(frozen=True)
class RegressionResult:
    """OLS fit of realized vol on one or more forecast/IV regressors."""

    names: tuple[str, ...]  # "const" first, then regressor names
    coef: np.ndarray
    stderr: np.ndarray
    tstats: np.ndarray
    r2: float
    adj_r2: float
    mae: float
    n: int
    fitted: np.ndarray = field(repr=False, compare=False, default=None)
    residuals: np.ndarray = field(repr=False, compare=False, default=None)

    @property
    def k(self) -> int:
        return len(self.names) - 1

    def to_dict(self) -> dict:
        row: dict = {}
        for i, _ in enumerate(self.names):
            row[f"b{i}"] = float(self.coef[i])
            row[f"t_b{i}"] = float(self.tstats[i])
        row.update(adj_r2=self.adj_r2, mae=self.mae, n=self.n)
        row["regressors"] = ";".join(self.names[1:])
        return row


def _as_series(obj, fallback: str) -> pd.Series:
    if isinstance(obj, ForecastSeries):
        return forecast_to_series(obj)
    if isinstance(obj, pd.Series):
        return obj if obj.name else obj.rename(fallback)
    values = np.asarray(obj, dtype=np.float64)
    if values.ndim != 1:
        raise ValueError("regressors must be one-dimensional")
    return pd.Series(values, name=fallback)


def ols_predict(rv, regressors, names=None) -> RegressionResult:
    """OLS of realized vol on forecast/IV series with an intercept.

    Inputs may be ForecastSeries, pandas Series (date-indexed), or plain
    arrays (aligned by position). Date-indexed inputs are inner-joined and
    rows with missing values dropped. Raises a collinearity error naming the
    redundant regressors when the design matrix is rank-deficient.
    """
    if isinstance(regressors, (ForecastSeries, pd.Series)) or (
        not isinstance(regressors, (list, tuple))
    ):
        regressors = [regressors]
    y_series = _as_series(rv, "realized").rename("realized")
    x_series = []
    for i, item in enumerate(regressors):
        s = _as_series(item, f"x{i + 1}")
        if names is not None:
            s = s.rename(names[i])
        x_series.append(s)
    table = pd.concat([y_series] + x_series, axis=1, join="inner").dropna()
    n = len(table)
    k = len(x_series)
    if n <= k + 1:
        raise InsufficientDataError(f"need n > k + 1 = {k + 1}, have n = {n}")

    y = table.iloc[:, 0].to_numpy(dtype=np.float64)
    X = np.column_stack(
        [np.ones(n)] + [table.iloc[:, j + 1].to_numpy(dtype=np.float64) for j in range(k)]
    )
    reg_names = tuple(table.columns[1:])
    rank = np.linalg.matrix_rank(X)
    if rank < k + 1:
        offenders = [
            reg_names[j]
            for j in range(k)
            if np.linalg.matrix_rank(np.delete(X, j + 1, axis=1)) == rank
        ]
        raise CollinearityError(
            f"design matrix rank {rank} < {k + 1}; redundant: {', '.join(offenders)}",
            columns=tuple(offenders),
        )

    coef, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    fitted = X @ coef
    resid = y - fitted
    rss = float(resid @ resid)
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    adj_r2 = 1.0 - (1.0 - r2) * (n - 1) / (n - k - 1)
    sigma2 = rss / (n - k - 1)
    xtx_inv = np.linalg.inv(X.T @ X)
    stderr = np.sqrt(np.clip(sigma2 * np.diag(xtx_inv), 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        tstats = np.where(stderr > 0, coef / stderr, np.inf * np.sign(coef))
    return RegressionResult(
        names=("const",) + reg_names,
        coef=coef,
        stderr=stderr,
        tstats=tstats,
        r2=r2,
        adj_r2=float(adj_r2),
        mae=float(np.mean(np.abs(resid))),
        n=n,
        fitted=fitted,
        residuals=resid,
    )


def mae(actual, fitted) -> float:
    """Mean absolute deviation between two equal-length series."""
    a = np.asarray(actual, dtype=np.float64)
    f = np.asarray(fitted, dtype=np.float64)
    if a.shape != f.shape:
        raise AlignmentError(f"length mismatch: {a.shape} vs {f.shape}")
    if a.size == 0:
        raise InsufficientDataError("mae needs at least one observation")
    return float(np.mean(np.abs(a - f)))


def report_frame(entries) -> pd.DataFrame:
    """Assemble evaluation rows into a table, one row per model x lookback.

    ``entries`` is a sequence of (model label, lookback label,
    RegressionResult).
    """
    rows = []
    for model, lookback, result in entries:
        row = {"model": model, "lookback": lookback}
        row.update(result.to_dict())
        rows.append(row)
    return pd.DataFrame(rows)
