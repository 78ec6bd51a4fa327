"""Black-Scholes analytics and option tick-trade handling.

Pricing uses the standard European Black-Scholes formula with a flat 5%
continuously compounded rate and ACT/365 year fractions. Implied volatility
is found by bracketed root search on sigma in [1e-4, 10]. Tick trades carry
USD premiums (BTC-quoted premiums are converted at the trade's underlying
price) and dollar volumes, which weight the per-day ATM implied volatility.
Option expiries settle at 08:00 UTC on the expiry date.
"""

from __future__ import annotations

import datetime as dt
import logging
import math
import re
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from .errors import (
    InsufficientDataError,
    NoImpliedVolError,
    NoSolutionError,
    NumericalError,
    ParseError,
)
from .market_data import PriceSeries

logger = logging.getLogger(__name__)

RISK_FREE_RATE = 0.05
SECONDS_PER_YEAR = 365.0 * 86400.0  # ACT/365
EXPIRY_HOUR_UTC = 8  # options settle 08:00 UTC on the expiry date

IV_BRACKET = (1e-4, 10.0)
IV_TOL = 1e-8

_MONTHS = {
    "JAN": 1, "FEB": 2, "MAR": 3, "APR": 4, "MAY": 5, "JUN": 6,
    "JUL": 7, "AUG": 8, "SEP": 9, "OCT": 10, "NOV": 11, "DEC": 12,
}
_INSTRUMENT_RE = re.compile(
    r"^BTC(?P<strike>\d+(?:\.\d+)?)(?P<kind>[CP])"
    r"(?P<day>\d{2})(?P<mon>[A-Z]{3})(?P<year>\d{2})$"
)


def _norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def year_fraction(start, end) -> float:
    """ACT/365 year fraction between two instants."""
    delta = pd.Timestamp(end) - pd.Timestamp(start)
    return delta.total_seconds() / SECONDS_PER_YEAR


def expiry_instant(expiry) -> pd.Timestamp:
    """The settlement instant (08:00 UTC) of an expiry date."""
    return pd.Timestamp(expiry).normalize() + pd.Timedelta(hours=EXPIRY_HOUR_UTC)


@dataclass(frozen=True)
class BsInputs:
    spot: float
    strike: float
    tau: float
    vol: float = 0.0
    rate: float = RISK_FREE_RATE
    kind: str = "call"

    def __post_init__(self) -> None:
        if self.spot <= 0 or self.strike <= 0:
            raise ValueError("spot and strike must be positive")
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")
        if self.vol < 0:
            raise ValueError("vol must be nonnegative")
        if self.kind not in ("call", "put"):
            raise ValueError(f"kind must be 'call' or 'put', got {self.kind!r}")


def _intrinsic(spot: float, strike_pv: float, kind: str) -> float:
    if kind == "call":
        return max(spot - strike_pv, 0.0)
    return max(strike_pv - spot, 0.0)


def bs_price(inputs: BsInputs) -> float:
    """European Black-Scholes price; tau = 0 returns intrinsic value."""
    s, k, tau, vol, r = inputs.spot, inputs.strike, inputs.tau, inputs.vol, inputs.rate
    if tau == 0.0:
        return _intrinsic(s, k, inputs.kind)
    k_pv = k * math.exp(-r * tau)
    if vol == 0.0:
        return _intrinsic(s, k_pv, inputs.kind)
    sig_rt = vol * math.sqrt(tau)
    d1 = (math.log(s / k) + (r + 0.5 * vol * vol) * tau) / sig_rt
    d2 = d1 - sig_rt
    if inputs.kind == "call":
        return s * _norm_cdf(d1) - k_pv * _norm_cdf(d2)
    return k_pv * _norm_cdf(-d2) - s * _norm_cdf(-d1)


def bs_delta(inputs: BsInputs) -> float:
    """Black-Scholes delta: N(d1) for calls, N(d1) - 1 for puts.

    At tau = 0 (or vol = 0) the delta degenerates to a step function on
    moneyness: 0 or 1 for calls with an at-the-money tie at 0.5.
    """
    s, k, tau, vol, r = inputs.spot, inputs.strike, inputs.tau, inputs.vol, inputs.rate
    if tau == 0.0 or vol == 0.0:
        k_pv = k * math.exp(-r * tau) if tau > 0 else k
        if s > k_pv:
            call = 1.0
        elif s < k_pv:
            call = 0.0
        else:
            call = 0.5
        return call if inputs.kind == "call" else call - 1.0
    d1 = (math.log(s / k) + (r + 0.5 * vol * vol) * tau) / (vol * math.sqrt(tau))
    call = _norm_cdf(d1)
    return call if inputs.kind == "call" else call - 1.0


def implied_vol(premium: float, inputs: BsInputs) -> float:
    """Invert Black-Scholes for sigma on the bracket [1e-4, 10].

    The ``vol`` field of ``inputs`` is ignored. Premiums at or below the
    zero-vol price (but no lower than intrinsic) report the lower bracket
    edge; premiums above the sigma=10 price (or above spot) have no solution.
    """
    lo, hi = IV_BRACKET
    if premium < 0:
        raise NoSolutionError(f"premium {premium} is negative")
    p_lo = bs_price(replace(inputs, vol=lo))
    p_hi = bs_price(replace(inputs, vol=hi))
    if premium <= p_lo:
        floor = bs_price(replace(inputs, vol=0.0))
        if premium >= floor - 1e-12:
            return lo
        raise NoSolutionError(
            f"premium {premium:.6g} below the zero-vol bound {floor:.6g}"
        )
    if premium > p_hi:
        raise NoSolutionError(
            f"premium {premium:.6g} above the vol={hi:g} price {p_hi:.6g}"
        )
    try:
        root = brentq(
            lambda sig: bs_price(replace(inputs, vol=sig)) - premium,
            lo,
            hi,
            xtol=IV_TOL,
            maxiter=200,
        )
    except RuntimeError as exc:
        raise NumericalError(f"implied vol search did not converge: {exc}") from exc
    return float(root)


def atm_strike(vwap: float, interval: float = 1000.0) -> float:
    """Nearest multiple of ``interval``; exact midpoints round up."""
    if vwap <= 0:
        raise ValueError("vwap must be positive")
    return math.floor(vwap / interval + 0.5) * interval


@dataclass(frozen=True)
class OptionTrade:
    """One tick trade in an option contract."""

    timestamp: pd.Timestamp
    strike: float
    expiry: pd.Timestamp  # date (normalized); settlement at 08:00 UTC
    kind: str
    premium_usd: float
    volume_usd: float
    underlying_price: float
    instrument: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "timestamp", pd.Timestamp(self.timestamp))
        object.__setattr__(self, "expiry", pd.Timestamp(self.expiry).normalize())
        if self.kind not in ("call", "put"):
            raise ValueError(f"kind must be 'call' or 'put', got {self.kind!r}")
        if self.strike <= 0:
            raise ValueError("strike must be positive")
        if self.premium_usd < 0:
            raise ValueError("premium must be nonnegative")
        if self.volume_usd <= 0:
            raise ValueError("volume must be positive")
        if self.underlying_price <= 0:
            raise ValueError("underlying price must be positive")
        if self.expiry < self.timestamp.normalize():
            raise ValueError(
                f"expiry {self.expiry.date()} before trade date "
                f"{self.timestamp.date()}"
            )

    @property
    def contract_id(self) -> str:
        if self.instrument:
            return self.instrument
        tag = "C" if self.kind == "call" else "P"
        return (
            f"BTC{self.strike:g}{tag}"
            f"{self.expiry.strftime('%d%b%y').upper()}"
        )

    @property
    def tau(self) -> float:
        return year_fraction(self.timestamp, expiry_instant(self.expiry))

    def bs_inputs(self, vol: float = 0.0) -> BsInputs:
        return BsInputs(
            spot=self.underlying_price,
            strike=self.strike,
            tau=self.tau,
            vol=vol,
            kind=self.kind,
        )


def parse_instrument(name: str) -> tuple[float, str, dt.date]:
    """Parse a BTC<strike><C|P><DDMONYY> contract name.

    Returns (strike, kind, expiry date); raises ParseError otherwise.
    """
    m = _INSTRUMENT_RE.match(name.strip().upper())
    if not m:
        raise ParseError(f"unrecognized instrument name {name!r}")
    month = _MONTHS.get(m.group("mon"))
    if month is None:
        raise ParseError(f"unrecognized month in instrument name {name!r}")
    expiry = dt.date(2000 + int(m.group("year")), month, int(m.group("day")))
    kind = "call" if m.group("kind") == "C" else "put"
    return float(m.group("strike")), kind, expiry


def load_option_csv(path) -> list[OptionTrade]:
    """Read tick trades from CSV, sorted by timestamp.

    Expected columns: ``timestamp``, ``volume_usd``, ``underlying_price``,
    ``premium_usd`` or ``premium_btc`` (converted at the underlying price),
    and either explicit ``strike``/``expiry``/``kind`` columns or an
    ``instrument`` name to parse them from; explicit columns win.
    """
    try:
        frame = pd.read_csv(path)
    except Exception as exc:
        raise ParseError(f"{path}: {exc}") from exc
    frame.columns = [str(c).strip().lower() for c in frame.columns]
    required = {"timestamp", "volume_usd", "underlying_price"}
    missing = required - set(frame.columns)
    if missing:
        raise ParseError(f"{path}: missing columns {sorted(missing)}")
    if "premium_usd" not in frame.columns and "premium_btc" not in frame.columns:
        raise ParseError(f"{path}: need premium_usd or premium_btc column")

    def present(value):
        return None if value is None or pd.isna(value) else value

    trades = []
    for pos, row in enumerate(frame.itertuples(index=False)):
        line = pos + 2  # header is line 1
        data = dict(zip(frame.columns, row))
        try:
            instrument = str(present(data.get("instrument")) or "")
            strike = present(data.get("strike"))
            kind = present(data.get("kind"))
            expiry = present(data.get("expiry"))
            if strike is None or kind is None or expiry is None:
                p_strike, p_kind, p_expiry = parse_instrument(instrument)
                strike = p_strike if strike is None else strike
                kind = p_kind if kind is None else kind
                expiry = p_expiry if expiry is None else expiry
            underlying = float(data["underlying_price"])
            if "premium_usd" in data and not pd.isna(data.get("premium_usd")):
                premium = float(data["premium_usd"])
            else:
                premium = float(data["premium_btc"]) * underlying
            trades.append(
                OptionTrade(
                    timestamp=pd.Timestamp(data["timestamp"]),
                    strike=float(strike),
                    expiry=pd.Timestamp(expiry),
                    kind=str(kind).strip().lower(),
                    premium_usd=premium,
                    volume_usd=float(data["volume_usd"]),
                    underlying_price=underlying,
                    instrument=instrument,
                )
            )
        except ParseError:
            raise
        except (ValueError, TypeError, KeyError) as exc:
            raise ParseError(f"{path}:{line}: {exc}") from exc
    trades.sort(key=lambda t: t.timestamp)
    return trades


def trade_iv(trade: OptionTrade) -> float:
    """Implied volatility of a single tick trade."""
    return implied_vol(trade.premium_usd, trade.bs_inputs())


def vw_implied_vol(trades) -> float:
    """Dollar-volume-weighted average implied vol of a group of trades.

    Trades whose inversion fails are excluded and logged; if every trade
    fails, no IV exists for the group.
    """
    trades = list(trades)
    if not trades:
        raise InsufficientDataError("no trades to average")
    acc = 0.0
    weight = 0.0
    for trade in trades:
        try:
            iv = trade_iv(trade)
        except (NoSolutionError, NumericalError) as exc:
            logger.warning(
                "IV inversion failed for %s at %s: %s",
                trade.contract_id,
                trade.timestamp,
                exc,
            )
            continue
        acc += trade.volume_usd * iv
        weight += trade.volume_usd
    if weight == 0.0:
        raise NoImpliedVolError(f"all {len(trades)} trades failed IV inversion")
    return acc / weight


def vwap(series: PriceSeries, day) -> float:
    """Dollar-volume-weighted average price over one UTC day's bars.

    Falls back to the unweighted mean (with a warning) when the series
    carries no volumes or the day's volume sums to zero.
    """
    day_ts = pd.Timestamp(day).normalize()
    ts = pd.DatetimeIndex(series.timestamps)
    lo = int(ts.searchsorted(day_ts, side="left"))
    hi = int(ts.searchsorted(day_ts + pd.Timedelta(days=1), side="left"))
    if hi == lo:
        raise InsufficientDataError(f"no bars on {day_ts.date()}")
    closes = series.closes[lo:hi]
    if series.volumes is None:
        logger.warning("no volumes on %s; vwap falls back to mean close", day_ts.date())
        return float(np.mean(closes))
    vols = series.volumes[lo:hi]
    total = float(np.sum(vols))
    if total <= 0:
        logger.warning("zero volume on %s; vwap falls back to mean close", day_ts.date())
        return float(np.mean(closes))
    return float(np.dot(closes, vols) / total)


def atm_iv_for_day(
    trades,
    underlying: PriceSeries,
    day,
    expiry=None,
    interval: float = 1000.0,
) -> tuple[float, float]:
    """(ATM strike, volume-weighted IV) for one day.

    Picks the strike nearest the day's VWAP, pools that day's call and put
    trades at that strike (optionally restricted to one expiry), and
    volume-weights their implied vols.
    """
    day_ts = pd.Timestamp(day).normalize()
    strike = atm_strike(vwap(underlying, day_ts), interval)
    selected = [
        t
        for t in trades
        if t.timestamp.normalize() == day_ts
        and t.strike == strike
        and (expiry is None or t.expiry == pd.Timestamp(expiry).normalize())
    ]
    if not selected:
        raise InsufficientDataError(
            f"no trades at strike {strike:g} on {day_ts.date()}"
        )
    return strike, vw_implied_vol(selected)


def exchange_summary(trades, freq: str = "Q") -> pd.DataFrame:
    """Per-quarter contract, trade, and dollar-volume totals.

    Covers every quarter from the first to the last trade; quarters without
    trades get zero rows.
    """
    trades = list(trades)
    if not trades:
        return pd.DataFrame(columns=["period", "contracts", "trades", "volume_usd"])
    frame = pd.DataFrame(
        {
            "timestamp": [t.timestamp for t in trades],
            "contract": [t.contract_id for t in trades],
            "volume_usd": [t.volume_usd for t in trades],
        }
    )
    periods = pd.PeriodIndex(frame["timestamp"], freq=freq)
    grouped = frame.groupby(periods).agg(
        contracts=("contract", "nunique"),
        trades=("contract", "size"),
        volume_usd=("volume_usd", "sum"),
    )
    full = pd.period_range(periods.min(), periods.max(), freq=freq)
    grouped = grouped.reindex(full)
    grouped[["contracts", "trades"]] = (
        grouped[["contracts", "trades"]].fillna(0).astype(int)
    )
    grouped["volume_usd"] = grouped["volume_usd"].fillna(0.0)
    grouped.insert(
        0,
        "period",
        [f"{p.quarter}Q{p.year}" if freq == "Q" else str(p) for p in grouped.index],
    )
    return grouped.reset_index(drop=True)
