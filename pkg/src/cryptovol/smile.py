"""Volatility-smile slope in delta space and the moneyness forecast adjustment.

On a handful of calibration dates where the underlying closed near a
thousand-dollar multiple K, the smile slope is measured from the two
1000-dollar adjacent call contracts:

    slope = ( (IV_{K-1000} - IV_K) / |d_{K-1000} - d_K|
            + (IV_{K+1000} - IV_K) / |d_K - d_{K+1000}| ) / 2

with deltas computed under fixed assumptions (5% rate, 70% vol). The
equal-weighted average slope s_avg then converts a delta gap into a vol
adjustment: adjusted = forecast + s_avg * |d_strike - d_close|, where d_close
belongs to a synthetic call struck exactly at the day's close.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import DegenerateSmileError, InsufficientDataError
from .market_data import PriceSeries
from .models import ForecastSeries
from .options import (
    RISK_FREE_RATE,
    BsInputs,
    atm_strike,
    bs_delta,
    expiry_instant,
    vw_implied_vol,
    year_fraction,
)

logger = logging.getLogger(__name__)

#: Fixed vol assumption for the slope/adjustment delta calculations.
SLOPE_VOL = 0.70

#: Default slope-calibration dates (one per month, close near a $1,000 multiple).
DEFAULT_SLOPE_DATES = (
    "2019-11-01",
    "2019-12-06",
    "2020-01-07",
    "2020-02-04",
    "2020-03-05",
)


@dataclass(frozen=True)
class SmileObservation:
    """IVs and call deltas at a center strike and its two 1000-dollar wings.

    Deltas must be (weakly) decreasing in strike; equal deltas are
    constructible but make the slope degenerate.
    """

    date: pd.Timestamp
    center_strike: float
    iv_low: float  # at center_strike - 1000
    iv_center: float
    iv_high: float  # at center_strike + 1000
    delta_low: float
    delta_center: float
    delta_high: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "date", pd.Timestamp(self.date).normalize())
        if not (self.delta_low >= self.delta_center >= self.delta_high):
            raise ValueError(
                "call deltas must decrease in strike: "
                f"{self.delta_low:.4f}, {self.delta_center:.4f}, {self.delta_high:.4f}"
            )


def slope_on_date(obs: SmileObservation) -> float:
    """Average of the two wing slopes, in vol per unit of delta."""
    gap_low = abs(obs.delta_low - obs.delta_center)
    gap_high = abs(obs.delta_center - obs.delta_high)
    if gap_low == 0.0 or gap_high == 0.0:
        raise DegenerateSmileError(
            f"zero delta gap on {obs.date.date()} at strike {obs.center_strike:g}"
        )
    low_slope = (obs.iv_low - obs.iv_center) / gap_low
    high_slope = (obs.iv_high - obs.iv_center) / gap_high
    return (low_slope + high_slope) / 2.0


def average_slope(observations) -> float:
    """Equal-weighted mean of per-date smile slopes."""
    observations = list(observations)
    if not observations:
        raise InsufficientDataError("no smile observations to average")
    return float(np.mean([slope_on_date(obs) for obs in observations]))


def adjusted_forecast(
    garch_vol: float, s_avg: float, delta_strike: float, delta_close: float
) -> float:
    """Forecast plus the smile adjustment s_avg * |delta gap|."""
    for name, delta in (("delta_strike", delta_strike), ("delta_close", delta_close)):
        if not 0.0 <= delta <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {delta}")
    return garch_vol + s_avg * abs(delta_strike - delta_close)


def fixed_delta(spot: float, strike: float, tau: float) -> float:
    """Call delta under the fixed slope assumptions (5% rate, 70% vol)."""
    return bs_delta(
        BsInputs(
            spot=spot,
            strike=strike,
            tau=tau,
            vol=SLOPE_VOL,
            rate=RISK_FREE_RATE,
            kind="call",
        )
    )


def observation_from_trades(
    day, trades, expiry, spot: float, interval: float = 1000.0
) -> SmileObservation:
    """Build one calibration observation from that day's tick trades.

    The center strike is the ``interval`` multiple nearest ``spot`` (the
    day's close); each of the three strikes gets a volume-weighted IV from
    the day's trades in the given expiry, and a call delta at ``spot`` under
    the fixed assumptions, with tau from the day's 00:00 UTC to expiry.
    """
    day_ts = pd.Timestamp(day).normalize()
    expiry_ts = pd.Timestamp(expiry).normalize()
    center = atm_strike(spot, interval)
    strikes = (center - interval, center, center + interval)
    ivs = []
    for strike in strikes:
        group = [
            t
            for t in trades
            if t.timestamp.normalize() == day_ts
            and t.strike == strike
            and t.expiry == expiry_ts
        ]
        if not group:
            raise InsufficientDataError(
                f"no trades at strike {strike:g} on {day_ts.date()}"
            )
        ivs.append(vw_implied_vol(group))
    tau = year_fraction(day_ts, expiry_instant(expiry_ts))
    deltas = [fixed_delta(spot, strike, tau) for strike in strikes]
    return SmileObservation(
        date=day_ts,
        center_strike=center,
        iv_low=ivs[0],
        iv_center=ivs[1],
        iv_high=ivs[2],
        delta_low=deltas[0],
        delta_center=deltas[1],
        delta_high=deltas[2],
    )


def smile_adjusted_series(
    forecasts: ForecastSeries,
    daily_closes: PriceSeries,
    strike: float,
    expiry,
    s_avg: float,
) -> ForecastSeries:
    """Apply the moneyness adjustment to each day's forecast.

    For each production day t: delta of the traded strike and of a synthetic
    call struck at day t's close, both at the close price under the fixed
    assumptions, with tau from the end of day t to expiry. The adjusted
    forecast is value + s_avg * |delta gap|. Days without a close are
    skipped and logged.
    """
    expiry_ts = pd.Timestamp(expiry).normalize()
    settle = expiry_instant(expiry_ts)
    close_index = pd.DatetimeIndex(daily_closes.timestamps).normalize()
    dates = []
    values = []
    for date, value in zip(forecasts.dates, forecasts.values):
        day_ts = pd.Timestamp(date).normalize()
        pos = close_index.searchsorted(day_ts, side="left")
        if pos >= len(close_index) or close_index[pos] != day_ts:
            logger.warning("no close on %s; smile adjustment skipped", day_ts.date())
            continue
        close = float(daily_closes.closes[pos])
        tau = year_fraction(day_ts + pd.Timedelta(days=1), settle)
        if tau <= 0:
            logger.warning("%s is past expiry; smile adjustment skipped", day_ts.date())
            continue
        delta_strike = fixed_delta(close, strike, tau)
        delta_close = fixed_delta(close, close, tau)
        dates.append(np.datetime64(day_ts))
        values.append(adjusted_forecast(value, s_avg, delta_strike, delta_close))
    return ForecastSeries(
        dates=np.array(dates, dtype="datetime64[ns]"),
        values=np.array(values, dtype=np.float64),
        kind=forecasts.kind,
        lookback=forecasts.lookback,
        horizon=f"{forecasts.horizon}+smile",
        frequency=forecasts.frequency,
        skipped=forecasts.skipped,
    )


def observations_for_dates(
    trades,
    daily_closes: PriceSeries,
    expiry,
    dates=DEFAULT_SLOPE_DATES,
    interval: float = 1000.0,
) -> list[SmileObservation]:
    """Calibration observations for each date, skipping (and logging) dates
    with a missing wing contract or no usable IVs."""
    ts = pd.DatetimeIndex(daily_closes.timestamps)
    out = []
    for day in dates:
        day_ts = pd.Timestamp(day).normalize()
        pos = ts.searchsorted(day_ts, side="left")
        if pos >= len(ts) or ts[pos].normalize() != day_ts:
            logger.warning("no daily close on %s; smile date skipped", day_ts.date())
            continue
        spot = float(daily_closes.closes[pos])
        try:
            out.append(
                observation_from_trades(day_ts, trades, expiry, spot, interval)
            )
        except InsufficientDataError as exc:
            logger.warning("smile date %s skipped: %s", day_ts.date(), exc)
    return out
