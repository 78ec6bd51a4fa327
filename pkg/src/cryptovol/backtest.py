"""Volatility-spread trading strategy: entries, delta hedging, fees, PNL.

The signal is the spread between a dated volatility forecast and the option's
tick implied volatility, recomputed at every trade tick. From flat, a
crossing above +entry_threshold opens long-vol (buy 1 call, short delta BTC
in the perpetual); a crossing below -entry_threshold opens the short-vol
mirror. Long-vol exits once the spread reaches -exit_threshold (strictly
below zero when the exit threshold is zero); short-vol mirrors. While a
position is open the hedge is rebalanced whenever the call's Black-Scholes
delta has drifted more than ``rehedge_band`` from the last hedge. An open
position at expiry is settled at intrinsic value.

Money is tracked in integer cents so ledger identities hold exactly; every
record satisfies pnl_total = pnl_underlying + pnl_option - fees, with the
fee term included only when the config nets fees in. Option fills happen at
the triggering tick's premium; hedge fills at the latest minute close.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np
import pandas as pd

from .errors import InsufficientDataError, NoSolutionError, NumericalError
from .market_data import PERIOD_LENGTH, PriceSeries
from .models import ForecastSeries
from .options import OptionTrade, bs_delta, expiry_instant, trade_iv

logger = logging.getLogger(__name__)

# Exchange cost model constants.
OPTION_FEE_RATE = 0.0004  # of underlying price, per contract
OPTION_FEE_CAP = 0.125  # of the option premium
PERP_FEE_RATE = 0.00075  # of hedge notional
OPTION_HALF_SPREAD = 0.015  # half of the 3% quoted option spread
PERP_HALF_SPREAD_USD = 0.25  # half of the $0.50 quoted perpetual spread

LONG_VOL = "long-vol"
SHORT_VOL = "short-vol"
FLAT = "flat"


def usd_to_cents(x: float) -> int:
    return int(round(x * 100.0))


def vol_spread(forecast: float, iv: float) -> float:
    """Signal: forecast minus implied volatility."""
    if not (math.isfinite(forecast) and math.isfinite(iv)):
        raise ValueError("forecast and iv must be finite")
    return forecast - iv


@dataclass(frozen=True)
class StrategyConfig:
    entry_threshold: float
    exit_threshold: float = 0.0
    rehedge_band: float = 0.02
    garch_refresh_hours: int = 24
    instrument: str = ""
    include_fees: bool = False  # net fees into pnl_total
    bid_ask: bool = False  # add half-spread costs to fees
    smile_adjust: bool = False

    def __post_init__(self) -> None:
        if not self.entry_threshold > self.exit_threshold >= 0:
            raise ValueError(
                "need entry_threshold > exit_threshold >= 0, got "
                f"{self.entry_threshold} / {self.exit_threshold}"
            )
        if self.rehedge_band <= 0:
            raise ValueError("rehedge_band must be positive")
        if self.garch_refresh_hours <= 0:
            raise ValueError("garch_refresh_hours must be positive")


@dataclass(frozen=True)
class Position:
    """Open option-plus-hedge position (or the flat sentinel)."""

    direction: str  # long-vol | short-vol | flat
    option_units: int = 0  # +1 long call, -1 short call
    hedge_units: float = 0.0  # signed perpetual quantity in BTC
    last_hedge_delta: float = 0.0
    last_hedge_price: float = 0.0
    entry_time: pd.Timestamp | None = None
    entry_spread: float = float("nan")
    entry_premium_cents: int = 0

    def __post_init__(self) -> None:
        flat = self.option_units == 0 and self.hedge_units == 0.0
        if (self.direction == FLAT) != flat:
            raise ValueError("flat position must have zero option and hedge units")

    @classmethod
    def flat(cls) -> "Position":
        return cls(direction=FLAT)


@dataclass(frozen=True)
class TradeRecord:
    """One ledger event. Monetary fields are integer cents; USD views below."""

    timestamp: pd.Timestamp
    action: str  # buy-to-open | sell-to-open | buy-to-close | sell-to-close | rehedge
    direction: str
    spread: float
    premium_usd: float  # option fill premium (mark for rehedges)
    delta: float
    contracts: int
    hedge_traded_btc: float
    hedge_price: float
    underlying_price: float
    pnl_underlying_cents: int = 0
    pnl_option_cents: int = 0
    option_fee_cents: int = 0
    hedge_fee_cents: int = 0
    fees_cents: int = 0
    pnl_total_cents: int = 0
    note: str = ""

    @property
    def pnl_underlying(self) -> float:
        return self.pnl_underlying_cents / 100.0

    @property
    def pnl_option(self) -> float:
        return self.pnl_option_cents / 100.0

    @property
    def fees(self) -> float:
        return self.fees_cents / 100.0

    @property
    def pnl_total(self) -> float:
        return self.pnl_total_cents / 100.0

    def to_dict(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "action": self.action,
            "direction": self.direction,
            "spread": self.spread,
            "premium_usd": self.premium_usd,
            "delta": self.delta,
            "hedge_traded_btc": self.hedge_traded_btc,
            "hedge_price": self.hedge_price,
            "pnl_total": self.pnl_total,
            "pnl_underlying": self.pnl_underlying,
            "pnl_option": self.pnl_option,
            "fees": self.fees,
            "note": self.note,
        }


@dataclass(frozen=True)
class PerformanceReport:
    n_trades: int
    wins: int
    losses: int
    win_rate: float
    win_loss_ratio: float | None  # None when there are no losses ("n/a")
    total_pnl_usd: float
    pnl_per_trade_usd: float
    option_fees_usd: float
    hedge_fees_usd: float
    total_fees_usd: float
    hedge_volume_btc: float
    open_trip: bool = False

    def to_dict(self) -> dict:
        row = {
            "n_trades": self.n_trades,
            "win_loss_ratio": "n/a" if self.win_loss_ratio is None else self.win_loss_ratio,
            "win_rate": self.win_rate,
            "total_pnl": self.total_pnl_usd,
            "pnl_per_trade": self.pnl_per_trade_usd,
            "option_fees": self.option_fees_usd,
            "hedge_fees": self.hedge_fees_usd,
            "hedge_volume_btc": self.hedge_volume_btc,
        }
        return row


def option_fee_cents(premium_usd: float, underlying_price: float, contracts: int = 1) -> int:
    """Taker fee per contract: 0.04% of underlying, capped at 12.5% of premium."""
    per_contract = min(OPTION_FEE_RATE * underlying_price, OPTION_FEE_CAP * premium_usd)
    return usd_to_cents(per_contract * contracts)


def perp_fee_cents(quantity_btc: float, price_usd: float) -> int:
    """Taker fee on the perpetual: 0.075% of traded notional."""
    return usd_to_cents(PERP_FEE_RATE * abs(quantity_btc) * price_usd)


def apply_fees(record: TradeRecord, config: StrategyConfig) -> TradeRecord:
    """Fill in the fee fields and recompute pnl_total per the config.

    Option fills pay the capped option fee (expiry settlements pay none, as
    no trade occurs); hedge fills pay the perpetual fee on traded notional.
    With ``bid_ask`` on, half-spread costs are added: 1.5% of premium per
    option fill and $0.25 per perpetual fill. Fees reduce pnl_total only
    when ``include_fees`` is set; they are always recorded.
    """
    opt_fee = 0
    hedge_fee = 0
    if record.contracts > 0:
        opt_fee += option_fee_cents(
            record.premium_usd, record.underlying_price, record.contracts
        )
        if config.bid_ask:
            opt_fee += usd_to_cents(
                OPTION_HALF_SPREAD * record.premium_usd * record.contracts
            )
    if record.hedge_traded_btc != 0.0:
        hedge_fee += perp_fee_cents(record.hedge_traded_btc, record.hedge_price)
        if config.bid_ask:
            hedge_fee += usd_to_cents(PERP_HALF_SPREAD_USD)
    fees = opt_fee + hedge_fee
    total = record.pnl_underlying_cents + record.pnl_option_cents
    if config.include_fees:
        total -= fees
    return replace(
        record,
        option_fee_cents=opt_fee,
        hedge_fee_cents=hedge_fee,
        fees_cents=fees,
        pnl_total_cents=total,
    )


def rehedge(
    position: Position,
    current_delta: float,
    underlying_price: float,
    config: StrategyConfig | None = None,
    *,
    timestamp=None,
    spread: float = float("nan"),
    premium_usd: float = float("nan"),
) -> tuple[Position, TradeRecord]:
    """Return the hedge to delta-neutral and realize the underlying PNL.

    Precondition: the delta has drifted beyond the rehedge band since the
    last hedge. The carried hedge realizes PNL against the price move since
    the previous hedge fill; the new hedge is -option_units * delta.
    """
    if config is None:
        config = StrategyConfig(entry_threshold=0.05)
    if position.direction == FLAT:
        raise ValueError("cannot rehedge a flat position")
    drift = abs(current_delta - position.last_hedge_delta)
    if drift <= config.rehedge_band:
        raise ValueError(
            f"delta drift {drift:.6f} within rehedge band {config.rehedge_band}"
        )
    pnl_u = usd_to_cents(
        position.hedge_units * (underlying_price - position.last_hedge_price)
    )
    new_hedge = -position.option_units * current_delta
    traded = new_hedge - position.hedge_units
    record = TradeRecord(
        timestamp=pd.Timestamp(timestamp) if timestamp is not None else position.entry_time,
        action="rehedge",
        direction=position.direction,
        spread=spread,
        premium_usd=premium_usd,
        delta=current_delta,
        contracts=0,
        hedge_traded_btc=traded,
        hedge_price=underlying_price,
        underlying_price=underlying_price,
        pnl_underlying_cents=pnl_u,
    )
    record = apply_fees(record, config)
    updated = replace(
        position,
        hedge_units=new_hedge,
        last_hedge_delta=current_delta,
        last_hedge_price=underlying_price,
    )
    return updated, record


def _open_position(
    direction: str,
    tick: OptionTrade,
    spread: float,
    delta: float,
    hedge_price: float,
    config: StrategyConfig,
) -> tuple[Position, TradeRecord]:
    option_units = 1 if direction == LONG_VOL else -1
    hedge_units = -option_units * delta
    position = Position(
        direction=direction,
        option_units=option_units,
        hedge_units=hedge_units,
        last_hedge_delta=delta,
        last_hedge_price=hedge_price,
        entry_time=tick.timestamp,
        entry_spread=spread,
        entry_premium_cents=usd_to_cents(tick.premium_usd),
    )
    record = TradeRecord(
        timestamp=tick.timestamp,
        action="buy-to-open" if direction == LONG_VOL else "sell-to-open",
        direction=direction,
        spread=spread,
        premium_usd=tick.premium_usd,
        delta=delta,
        contracts=1,
        hedge_traded_btc=hedge_units,
        hedge_price=hedge_price,
        underlying_price=tick.underlying_price,
    )
    return position, apply_fees(record, config)


def _close_position(
    position: Position,
    timestamp: pd.Timestamp,
    spread: float,
    premium_usd: float,
    delta: float,
    hedge_price: float,
    underlying_price: float,
    config: StrategyConfig,
    *,
    contracts: int = 1,
    note: str = "",
) -> TradeRecord:
    pnl_u = usd_to_cents(
        position.hedge_units * (hedge_price - position.last_hedge_price)
    )
    pnl_o = position.option_units * (
        usd_to_cents(premium_usd) - position.entry_premium_cents
    )
    record = TradeRecord(
        timestamp=timestamp,
        action="sell-to-close" if position.direction == LONG_VOL else "buy-to-close",
        direction=position.direction,
        spread=spread,
        premium_usd=premium_usd,
        delta=delta,
        contracts=contracts,
        hedge_traded_btc=-position.hedge_units,
        hedge_price=hedge_price,
        underlying_price=underlying_price,
        pnl_underlying_cents=pnl_u,
        pnl_option_cents=pnl_o,
        note=note,
    )
    return apply_fees(record, config)


def _should_exit(direction: str, spread: float, config: StrategyConfig) -> bool:
    exit_t = config.exit_threshold
    if direction == LONG_VOL:
        return spread <= -exit_t if exit_t > 0 else spread < 0.0
    return spread >= exit_t if exit_t > 0 else spread > 0.0


def _entry_signal(prev: float, curr: float, config: StrategyConfig) -> str | None:
    if prev < config.entry_threshold <= curr:
        return LONG_VOL
    if prev > -config.entry_threshold >= curr:
        return SHORT_VOL
    return None


def forecast_lookup(forecasts) -> Callable[[pd.Timestamp], float | None]:
    """Turn a forecast series into a causal lookup function.

    A forecast stamped at production period t becomes available one period
    later (t+1 00:00 UTC for daily series); the lookup returns the latest
    forecast available strictly before the queried instant, or None before
    the first one. Callables pass through unchanged.
    """
    if callable(forecasts):
        return forecasts
    if isinstance(forecasts, ForecastSeries):
        index = pd.DatetimeIndex(forecasts.dates)
        values = np.asarray(forecasts.values, dtype=np.float64)
        available = index + PERIOD_LENGTH[forecasts.frequency]
    elif isinstance(forecasts, pd.Series):
        index = pd.DatetimeIndex(forecasts.index)
        values = forecasts.to_numpy(dtype=np.float64)
        available = index.normalize() + pd.Timedelta(days=1)
    else:
        raise TypeError("forecasts must be a ForecastSeries, Series, or callable")

    def lookup(when) -> float | None:
        i = int(available.searchsorted(pd.Timestamp(when), side="left")) - 1
        return float(values[i]) if i >= 0 else None

    return lookup


class BacktestResult(NamedTuple):
    records: tuple
    report: "PerformanceReport"
    curve: pd.DataFrame


def _latest_close(
    ts: pd.DatetimeIndex, closes: np.ndarray, when: pd.Timestamp
) -> float:
    i = int(ts.searchsorted(when, side="right")) - 1
    if i < 0:
        raise InsufficientDataError(f"no underlying price at or before {when}")
    return float(closes[i])


def run_backtest(
    config: StrategyConfig,
    option_ticks,
    underlying: PriceSeries,
    forecasts,
) -> BacktestResult:
    """Run the threshold state machine over a single contract's tick stream.

    Ticks before the first available forecast, or whose IV inversion fails,
    are skipped (logged). Entries require a genuine crossing: the previous
    tick's spread inside the threshold, the current one at or beyond it. An
    exit tick that itself crosses the opposite entry threshold opens the
    reverse position at the same tick. A position still open at expiry is
    settled at intrinsic value (no option fee; the hedge unwind pays its
    perpetual fee). If the data ends before expiry with a position open,
    the position is left open and only closed round trips are scored.
    """
    ticks = list(option_ticks)
    if config.instrument:
        ticks = [t for t in ticks if t.contract_id == config.instrument]
    ticks.sort(key=lambda t: t.timestamp)
    lookup = forecast_lookup(forecasts)
    u_index = pd.DatetimeIndex(underlying.timestamps)
    u_closes = underlying.closes

    records: list[TradeRecord] = []
    position: Position | None = None
    prev_spread: float | None = None
    expiry_at: pd.Timestamp | None = None
    strike = kind = None

    for tick in ticks:
        if expiry_at is None:
            expiry_at = expiry_instant(tick.expiry)
            strike, kind = tick.strike, tick.kind
        if tick.timestamp >= expiry_at:
            break
        forecast = lookup(tick.timestamp)
        if forecast is None:
            logger.warning("tick at %s precedes every forecast; skipped", tick.timestamp)
            continue
        try:
            iv = trade_iv(tick)
        except (NoSolutionError, NumericalError) as exc:
            logger.warning("tick at %s has no IV (%s); skipped", tick.timestamp, exc)
            continue
        spread = vol_spread(forecast, iv)
        delta = bs_delta(tick.bs_inputs(iv))

        if position is not None:
            if _should_exit(position.direction, spread, config):
                hedge_price = _latest_close(u_index, u_closes, tick.timestamp)
                records.append(
                    _close_position(
                        position,
                        tick.timestamp,
                        spread,
                        tick.premium_usd,
                        delta,
                        hedge_price,
                        tick.underlying_price,
                        config,
                    )
                )
                position = None
            elif abs(delta - position.last_hedge_delta) > config.rehedge_band:
                hedge_price = _latest_close(u_index, u_closes, tick.timestamp)
                position, record = rehedge(
                    position,
                    delta,
                    hedge_price,
                    config,
                    timestamp=tick.timestamp,
                    spread=spread,
                    premium_usd=tick.premium_usd,
                )
                records.append(record)

        if position is None and prev_spread is not None:
            direction = _entry_signal(prev_spread, spread, config)
            if direction is not None:
                hedge_price = _latest_close(u_index, u_closes, tick.timestamp)
                position, record = _open_position(
                    direction, tick, spread, delta, hedge_price, config
                )
                records.append(record)

        prev_spread = spread

    if position is not None and expiry_at is not None:
        if len(u_index) and u_index[-1] >= expiry_at:
            settle_price = _latest_close(u_index, u_closes, expiry_at)
            if kind == "call":
                intrinsic = max(settle_price - strike, 0.0)
            else:
                intrinsic = max(strike - settle_price, 0.0)
            records.append(
                _close_position(
                    position,
                    expiry_at,
                    float("nan"),
                    intrinsic,
                    float("nan"),
                    settle_price,
                    settle_price,
                    config,
                    contracts=0,
                    note="expiry",
                )
            )
            position = None
        else:
            logger.warning(
                "data ends %s before expiry %s with an open %s position",
                u_index[-1] if len(u_index) else "(empty)",
                expiry_at,
                position.direction,
            )

    report = performance(records)
    curve = pnl_curve(records)
    return BacktestResult(records=tuple(records), report=report, curve=curve)


def pnl_curve(records) -> pd.DataFrame:
    """Cumulative realized PNL after each ledger event."""
    rows = [(r.timestamp, r.pnl_total_cents) for r in records]
    if not rows:
        return pd.DataFrame(columns=["timestamp", "cumulative_pnl_usd"])
    frame = pd.DataFrame(rows, columns=["timestamp", "cents"])
    frame["cumulative_pnl_usd"] = frame["cents"].cumsum() / 100.0
    return frame[["timestamp", "cumulative_pnl_usd"]]


def _round_trips(records) -> tuple[list[list[TradeRecord]], list[TradeRecord]]:
    trips: list[list[TradeRecord]] = []
    current: list[TradeRecord] | None = None
    for record in records:
        if record.action.endswith("-to-open"):
            current = [record]
        elif record.action.endswith("-to-close"):
            if current is not None:
                current.append(record)
                trips.append(current)
                current = None
        elif current is not None:
            current.append(record)
    return trips, (current or [])


def performance(records) -> PerformanceReport:
    """Aggregate the ledger into round-trip trade statistics.

    A trade is one open-to-close round trip (rehedges included); wins are
    trips with positive pnl_total. Fee totals and hedge volume cover every
    event, including any unclosed trailing trip, which is otherwise
    excluded from the PNL statistics (and flagged).
    """
    records = list(records)
    trips, open_tail = _round_trips(records)
    if open_tail:
        logger.warning("ledger ends with an open position (%d events)", len(open_tail))
    trip_pnls = [sum(r.pnl_total_cents for r in trip) for trip in trips]
    wins = [p for p in trip_pnls if p > 0]
    losses = [p for p in trip_pnls if p < 0]
    gross_win = sum(wins)
    gross_loss = -sum(losses)
    n = len(trips)
    total = sum(trip_pnls)
    return PerformanceReport(
        n_trades=n,
        wins=len(wins),
        losses=len(losses),
        win_rate=len(wins) / n if n else 0.0,
        win_loss_ratio=(gross_win / gross_loss) if gross_loss > 0 else None,
        total_pnl_usd=total / 100.0,
        pnl_per_trade_usd=(total / n) / 100.0 if n else 0.0,
        option_fees_usd=sum(r.option_fee_cents for r in records) / 100.0,
        hedge_fees_usd=sum(r.hedge_fee_cents for r in records) / 100.0,
        total_fees_usd=sum(r.fees_cents for r in records) / 100.0,
        hedge_volume_btc=float(sum(abs(r.hedge_traded_btc) for r in records)),
        open_trip=bool(open_tail),
    )


def ledger_frame(records) -> pd.DataFrame:
    """Event-level ledger as a table (one row per record)."""
    return pd.DataFrame([r.to_dict() for r in records])


def round_trips_frame(records) -> pd.DataFrame:
    """One row per closed round trip, with entry/exit context and PNL splits."""
    trips, _ = _round_trips(records)
    rows = []
    for trip in trips:
        head, tail = trip[0], trip[-1]
        rows.append(
            {
                "entry_time": head.timestamp,
                "exit_time": tail.timestamp,
                "direction": head.direction,
                "entry_spread": head.spread,
                "exit_spread": tail.spread,
                "entry_premium": head.premium_usd,
                "exit_premium": tail.premium_usd,
                "pnl_total": sum(r.pnl_total_cents for r in trip) / 100.0,
                "pnl_underlying": sum(r.pnl_underlying_cents for r in trip) / 100.0,
                "pnl_option": sum(r.pnl_option_cents for r in trip) / 100.0,
                "fees": sum(r.fees_cents for r in trip) / 100.0,
                "rehedges": sum(1 for r in trip if r.action == "rehedge"),
                "note": tail.note,
            }
        )
    return pd.DataFrame(rows)
