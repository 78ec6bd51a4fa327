"""Ledger-level tests for the delta-hedged volatility-spread strategy.

The centerpiece is a six-tick scenario whose every ledger line was
recomputed independently (scipy norm.cdf pricing + brentq inversion at
1e-14, hand ledger arithmetic in integer cents) and frozen below. All
rounded cent values sit >0.09 cents away from a rounding boundary, so the
frozen integers are stable against any sub-cent numerical wiggle.
"""

import math

import numpy as np
import pandas as pd
import pytest

from cryptovol.backtest import (
    BacktestResult,
    Position,
    StrategyConfig,
    TradeRecord,
    _entry_signal,
    _should_exit,
    apply_fees,
    forecast_lookup,
    ledger_frame,
    option_fee_cents,
    performance,
    perp_fee_cents,
    pnl_curve,
    rehedge,
    round_trips_frame,
    run_backtest,
    usd_to_cents,
    vol_spread,
)
from cryptovol.market_data import PriceSeries
from cryptovol.models import ForecastSeries, ModelKind
from cryptovol.options import OptionTrade, trade_iv

# --- the frozen scenario -------------------------------------------------
# BTC 8000 call expiring 2020-03-27 (08:00 UTC settlement), six hourly
# ticks on 2020-03-20. Premiums are fair values at the stated vols rounded
# to whole cents; the engine re-inverts IV from the rounded premium.
STRIKE = 8000.0
EXPIRY = "2020-03-27"
TICK_HOURS = [10, 11, 12, 13, 14, 15]
S_PATH = [8000.0, 8000.0, 8200.0, 8210.0, 7900.0, 7950.0]
PREMIUMS = [346.16, 327.62, 441.05, 448.40, 283.27, 328.12]
FLAT_FORECAST = 0.80

# frozen expected ledger (action, hour, pnl_u cents, pnl_o cents,
# option fee cents, hedge fee cents)
EXPECTED_EVENTS = [
    ("buy-to-open", 11, 0, 0, 320, 314),
    ("rehedge", 12, -10479, 0, 0, 59),
    ("rehedge", 14, 18580, 0, 0, 85),
    ("sell-to-close", 15, -2378, 50, 318, 284),
]
EXPECTED_DELTAS = [0.523943, 0.619338, 0.475646, 0.502465]
EXPECTED_TRADED = [-0.523943, -0.095395, 0.143692, 0.475646]
EXPECTED_SPREADS = [0.06000, 0.05999, 0.03999, -0.00999]


def make_tick(hour, premium, spot, *, day="2020-03-20", strike=STRIKE, kind="call"):
    return OptionTrade(
        timestamp=pd.Timestamp(f"{day} {hour:02d}:00:00"),
        strike=strike,
        expiry=pd.Timestamp(EXPIRY),
        kind=kind,
        premium_usd=premium,
        volume_usd=1000.0,
        underlying_price=spot,
    )


def oracle_ticks():
    return [
        make_tick(h, p, s) for h, p, s in zip(TICK_HOURS, PREMIUMS, S_PATH)
    ]


def oracle_underlying(settle_price=None):
    """Hourly bars matching the tick spots; optionally extended to expiry."""
    stamps = [pd.Timestamp(f"2020-03-20 {h:02d}:00:00") for h in TICK_HOURS]
    closes = list(S_PATH)
    if settle_price is not None:
        stamps.append(pd.Timestamp("2020-03-27 08:00:00"))
        closes.append(settle_price)
    return PriceSeries(
        np.array(stamps, dtype="datetime64[ns]"),
        np.array(closes),
        "1h",
    )


def run_oracle(config=None, settle_price=None, ticks=None):
    config = config or StrategyConfig(entry_threshold=0.05)
    return run_backtest(
        config,
        ticks if ticks is not None else oracle_ticks(),
        oracle_underlying(settle_price),
        lambda ts: FLAT_FORECAST,
    )


# --- the frozen ledger ----------------------------------------------------


def test_oracle_ledger_events_exact():
    result = run_oracle()
    assert isinstance(result, BacktestResult)
    records = result.records
    assert len(records) == len(EXPECTED_EVENTS)
    for rec, (action, hour, pnl_u, pnl_o, ofee, hfee), delta, traded, spread in zip(
        records, EXPECTED_EVENTS, EXPECTED_DELTAS, EXPECTED_TRADED, EXPECTED_SPREADS
    ):
        assert rec.action == action
        assert rec.timestamp == pd.Timestamp(f"2020-03-20 {hour:02d}:00:00")
        assert rec.direction == "long-vol"
        # integer cents must match the hand ledger exactly
        assert rec.pnl_underlying_cents == pnl_u
        assert rec.pnl_option_cents == pnl_o
        assert rec.option_fee_cents == ofee
        assert rec.hedge_fee_cents == hfee
        assert rec.fees_cents == ofee + hfee
        assert rec.delta == pytest.approx(delta, abs=1e-6)
        assert rec.hedge_traded_btc == pytest.approx(traded, abs=1e-6)
        assert rec.spread == pytest.approx(spread, abs=1e-5)
    # fees are recorded but not netted by default
    for rec in records:
        assert rec.pnl_total_cents == rec.pnl_underlying_cents + rec.pnl_option_cents


def test_oracle_totals_and_report():
    result = run_oracle()
    total_cents = sum(r.pnl_total_cents for r in result.records)
    assert total_cents == 5773  # $57.73
    report = result.report
    assert report.n_trades == 1
    assert report.wins == 1 and report.losses == 0
    assert report.win_rate == 1.0
    assert report.win_loss_ratio is None
    assert report.total_pnl_usd == pytest.approx(57.73)
    assert report.pnl_per_trade_usd == pytest.approx(57.73)
    assert report.option_fees_usd == pytest.approx(6.38)
    assert report.hedge_fees_usd == pytest.approx(7.42)
    assert report.total_fees_usd == pytest.approx(13.80)
    assert report.hedge_volume_btc == pytest.approx(1.2386757197235205, rel=1e-9)
    assert report.open_trip is False


def test_oracle_with_fees_netted():
    result = run_oracle(StrategyConfig(entry_threshold=0.05, include_fees=True))
    total = sum(r.pnl_total_cents for r in result.records)
    assert total == 5773 - 638 - 742  # = 4393 cents
    assert result.report.total_pnl_usd == pytest.approx(43.93)


def test_oracle_delta_neutral_after_every_hedge_event():
    result = run_oracle()
    running_hedge = 0.0
    for rec in result.records:
        running_hedge += rec.hedge_traded_btc
        if rec.action in ("buy-to-open", "rehedge"):
            # long one call: hedge must sit at -delta
            assert abs(running_hedge + rec.delta) <= 1e-9
    # closed flat
    assert abs(running_hedge) <= 1e-9


def test_oracle_cents_conservation():
    result = run_oracle()
    total = sum(r.pnl_total_cents for r in result.records)
    assert result.curve["cumulative_pnl_usd"].iloc[-1] == pytest.approx(total / 100.0)
    for rec in result.records:
        assert rec.pnl_total_cents == rec.pnl_underlying_cents + rec.pnl_option_cents


def test_oracle_round_trips_frame():
    result = run_oracle()
    trips = round_trips_frame(result.records)
    assert len(trips) == 1
    row = trips.iloc[0]
    assert row["entry_time"] == pd.Timestamp("2020-03-20 11:00:00")
    assert row["exit_time"] == pd.Timestamp("2020-03-20 15:00:00")
    assert row["direction"] == "long-vol"
    assert row["rehedges"] == 2
    assert row["pnl_total"] == pytest.approx(57.73)
    assert row["note"] == ""


def test_forecast_series_input_matches_callable():
    """A daily forecast stamped the day before is live for the whole session."""
    fs = ForecastSeries(
        np.array(["2020-03-19"], dtype="datetime64[ns]"),
        np.array([FLAT_FORECAST]),
        ModelKind.GARCH,
        "365d",
    )
    via_series = run_backtest(
        StrategyConfig(entry_threshold=0.05), oracle_ticks(), oracle_underlying(), fs
    )
    via_callable = run_oracle()
    assert ledger_frame(via_series.records).to_csv() == ledger_frame(
        via_callable.records
    ).to_csv()


def test_forecast_stamped_same_day_is_not_available():
    # stamped on trade day -> available only from the next midnight -> no events
    fs = ForecastSeries(
        np.array(["2020-03-20"], dtype="datetime64[ns]"),
        np.array([FLAT_FORECAST]),
        ModelKind.GARCH,
        "365d",
    )
    result = run_backtest(
        StrategyConfig(entry_threshold=0.05), oracle_ticks(), oracle_underlying(), fs
    )
    assert result.records == ()


def test_bad_iv_tick_is_skipped_without_touching_state():
    ticks = oracle_ticks()
    # premium above spot has no implied vol; must be skipped, not crash,
    # and must not update the previous-spread state
    bad = OptionTrade(
        timestamp=pd.Timestamp("2020-03-20 10:30:00"),
        strike=STRIKE,
        expiry=pd.Timestamp(EXPIRY),
        kind="call",
        premium_usd=9000.0,
        volume_usd=10.0,
        underlying_price=8000.0,
    )
    with_bad = run_oracle(ticks=sorted(ticks + [bad], key=lambda t: t.timestamp))
    clean = run_oracle()
    assert ledger_frame(with_bad.records).to_csv() == ledger_frame(clean.records).to_csv()


# --- fees -----------------------------------------------------------------


def test_option_fee_hand_cases():
    # 0.04% of 8000 = $3.20, well under the 12.5% premium cap
    assert option_fee_cents(500.0, 8000.0) == 320
    # premium $10: cap binds at $1.25
    assert option_fee_cents(10.0, 8000.0) == 125
    # two contracts double it
    assert option_fee_cents(500.0, 8000.0, contracts=2) == 640


def test_perp_fee_hand_case():
    # 0.075% of 1 BTC * $8000 = $6.00, sign-independent
    assert perp_fee_cents(1.0, 8000.0) == 600
    assert perp_fee_cents(-1.0, 8000.0) == 600
    assert perp_fee_cents(0.0, 8000.0) == 0


def test_bid_ask_adds_half_spreads():
    record = TradeRecord(
        timestamp=pd.Timestamp("2020-03-20 11:00:00"),
        action="buy-to-open",
        direction="long-vol",
        spread=0.06,
        premium_usd=500.0,
        delta=0.5,
        contracts=1,
        hedge_traded_btc=-1.0,
        hedge_price=8000.0,
        underlying_price=8000.0,
    )
    plain = apply_fees(record, StrategyConfig(entry_threshold=0.05))
    assert plain.option_fee_cents == 320
    assert plain.hedge_fee_cents == 600
    spread_cfg = StrategyConfig(entry_threshold=0.05, bid_ask=True)
    padded = apply_fees(record, spread_cfg)
    # 1.5% of the $500 premium = $7.50; $0.25 per perpetual fill
    assert padded.option_fee_cents == 320 + 750
    assert padded.hedge_fee_cents == 600 + 25


def test_fees_only_reduce_total_when_included():
    record = TradeRecord(
        timestamp=pd.Timestamp("2020-03-20 11:00:00"),
        action="rehedge",
        direction="long-vol",
        spread=0.01,
        premium_usd=400.0,
        delta=0.5,
        contracts=0,
        hedge_traded_btc=-0.1,
        hedge_price=8000.0,
        underlying_price=8000.0,
        pnl_underlying_cents=1000,
    )
    excluded = apply_fees(record, StrategyConfig(entry_threshold=0.05))
    assert excluded.fees_cents == 60
    assert excluded.pnl_total_cents == 1000
    included = apply_fees(
        record, StrategyConfig(entry_threshold=0.05, include_fees=True)
    )
    assert included.pnl_total_cents == 1000 - 60


# --- signal plumbing --------------------------------------------------------


def test_vol_spread():
    assert vol_spread(0.80, 0.74) == pytest.approx(0.06)
    assert vol_spread(0.60, 0.74) == pytest.approx(-0.14)
    with pytest.raises(ValueError):
        vol_spread(float("nan"), 0.5)
    with pytest.raises(ValueError):
        vol_spread(0.5, float("inf"))


def test_entry_signal_crossing_conventions():
    cfg = StrategyConfig(entry_threshold=0.05)
    assert _entry_signal(0.04, 0.05, cfg) == "long-vol"  # landing on it counts
    assert _entry_signal(0.04, 0.10, cfg) == "long-vol"
    assert _entry_signal(0.05, 0.10, cfg) is None  # already at threshold: no cross
    assert _entry_signal(0.06, 0.07, cfg) is None
    assert _entry_signal(-0.04, -0.05, cfg) == "short-vol"
    assert _entry_signal(-0.05, -0.10, cfg) is None
    assert _entry_signal(-0.01, 0.01, cfg) is None


def test_exit_conventions():
    zero_exit = StrategyConfig(entry_threshold=0.05, exit_threshold=0.0)
    assert _should_exit("long-vol", -1e-12, zero_exit)
    assert not _should_exit("long-vol", 0.0, zero_exit)  # zero is not an exit
    assert not _should_exit("long-vol", 0.03, zero_exit)
    assert _should_exit("short-vol", 1e-12, zero_exit)
    assert not _should_exit("short-vol", 0.0, zero_exit)

    wide = StrategyConfig(entry_threshold=0.5, exit_threshold=0.3)
    assert _should_exit("long-vol", -0.3, wide)  # boundary inclusive
    assert not _should_exit("long-vol", -0.29, wide)
    assert _should_exit("short-vol", 0.3, wide)
    assert not _should_exit("short-vol", 0.29, wide)


def test_config_validation():
    with pytest.raises(ValueError):
        StrategyConfig(entry_threshold=0.05, exit_threshold=0.05)
    with pytest.raises(ValueError):
        StrategyConfig(entry_threshold=0.05, exit_threshold=-0.01)
    with pytest.raises(ValueError):
        StrategyConfig(entry_threshold=0.05, rehedge_band=0.0)
    with pytest.raises(ValueError):
        StrategyConfig(entry_threshold=0.05, garch_refresh_hours=0)
    cfg = StrategyConfig(entry_threshold=0.05)
    assert cfg.exit_threshold == 0.0
    assert cfg.rehedge_band == 0.02


# --- rehedge --------------------------------------------------------------


def make_long_position(delta=0.50, price=8000.0):
    return Position(
        direction="long-vol",
        option_units=1,
        hedge_units=-delta,
        last_hedge_delta=delta,
        last_hedge_price=price,
        entry_time=pd.Timestamp("2020-03-20 11:00:00"),
        entry_spread=0.06,
        entry_premium_cents=32762,
    )


def test_rehedge_sells_the_delta_increase():
    """Delta 0.50 -> 0.53 on a long call: short 0.03 BTC more."""
    position = make_long_position(delta=0.50, price=8000.0)
    updated, record = rehedge(position, 0.53, 8000.0)
    assert record.hedge_traded_btc == pytest.approx(-0.03)
    assert updated.hedge_units == pytest.approx(-0.53)
    assert updated.last_hedge_delta == 0.53
    # price unchanged since the last hedge fill: no underlying PNL
    assert record.pnl_underlying_cents == 0
    assert record.action == "rehedge"
    assert record.contracts == 0


def test_rehedge_realizes_pnl_since_last_fill():
    position = make_long_position(delta=0.50, price=8000.0)
    updated, record = rehedge(position, 0.60, 8200.0)
    # short 0.5 BTC over a +200 move loses $100
    assert record.pnl_underlying_cents == -10000
    assert updated.last_hedge_price == 8200.0


def test_rehedge_rejects_flat_and_within_band():
    with pytest.raises(ValueError):
        rehedge(Position.flat(), 0.5, 8000.0)
    position = make_long_position(delta=0.50)
    with pytest.raises(ValueError, match="within rehedge band"):
        rehedge(position, 0.51, 8000.0)  # drift 0.01 <= 0.02
    # drift exactly at the band edge is still "within" (dyadic values so the
    # subtraction is exact)
    cfg = StrategyConfig(entry_threshold=0.05, rehedge_band=0.03125)
    with pytest.raises(ValueError, match="within rehedge band"):
        rehedge(position, 0.53125, 8000.0, cfg)


# --- performance aggregation -----------------------------------------------


def hand_record(action, pnl_cents, *, hour=11, direction="long-vol"):
    rec = TradeRecord(
        timestamp=pd.Timestamp(f"2020-03-20 {hour:02d}:00:00"),
        action=action,
        direction=direction,
        spread=0.05,
        premium_usd=300.0,
        delta=0.5,
        contracts=1 if action != "rehedge" else 0,
        hedge_traded_btc=0.1,
        hedge_price=8000.0,
        underlying_price=8000.0,
        pnl_total_cents=pnl_cents,
    )
    return rec


def test_performance_win_loss_ratio():
    records = [
        hand_record("buy-to-open", 0, hour=10),
        hand_record("sell-to-close", 300, hour=11),
        hand_record("buy-to-open", 0, hour=12),
        hand_record("sell-to-close", -100, hour=13),
    ]
    report = performance(records)
    assert report.n_trades == 2
    assert report.wins == 1 and report.losses == 1
    assert report.win_rate == 0.5
    assert report.win_loss_ratio == pytest.approx(3.0)
    assert report.total_pnl_usd == pytest.approx(2.0)
    assert report.pnl_per_trade_usd * report.n_trades == pytest.approx(
        report.total_pnl_usd
    )


def test_performance_no_losses_reports_na():
    records = [
        hand_record("buy-to-open", 0, hour=10),
        hand_record("sell-to-close", 300, hour=11),
    ]
    report = performance(records)
    assert report.win_loss_ratio is None
    assert report.to_dict()["win_loss_ratio"] == "n/a"


def test_performance_empty_ledger():
    report = performance([])
    assert report.n_trades == 0
    assert report.win_rate == 0.0
    assert report.total_pnl_usd == 0.0
    assert report.win_loss_ratio is None
    assert report.open_trip is False
    assert pnl_curve([]).empty


# --- forecast availability --------------------------------------------------


def test_forecast_lookup_series_availability():
    fs = ForecastSeries(
        np.array(["2020-03-19", "2020-03-20"], dtype="datetime64[ns]"),
        np.array([0.70, 0.90]),
        ModelKind.GARCH,
        "365d",
    )
    lookup = forecast_lookup(fs)
    assert lookup(pd.Timestamp("2020-03-19 23:59:59")) is None
    # available strictly AFTER the availability instant, not at it
    assert lookup(pd.Timestamp("2020-03-20 00:00:00")) is None
    assert lookup(pd.Timestamp("2020-03-20 00:00:01")) == pytest.approx(0.70)
    assert lookup(pd.Timestamp("2020-03-20 23:00:00")) == pytest.approx(0.70)
    assert lookup(pd.Timestamp("2020-03-21 00:00:01")) == pytest.approx(0.90)


def test_forecast_lookup_plain_series_normalizes_intraday_stamp():
    series = pd.Series(
        [0.65], index=pd.DatetimeIndex([pd.Timestamp("2020-03-19 13:45:00")])
    )
    lookup = forecast_lookup(series)
    assert lookup(pd.Timestamp("2020-03-19 23:00:00")) is None
    assert lookup(pd.Timestamp("2020-03-20 08:00:00")) == pytest.approx(0.65)


def test_forecast_lookup_callable_passthrough():
    fn = lambda ts: 0.42
    assert forecast_lookup(fn) is fn
    with pytest.raises(TypeError):
        forecast_lookup([0.5, 0.6])


# --- expiry settlement and open tails ---------------------------------------


def five_tick_run(settle_price=None):
    """Drop the final (exit-triggering) tick so the position rides to expiry."""
    ticks = oracle_ticks()[:5]
    return run_backtest(
        StrategyConfig(entry_threshold=0.05),
        ticks,
        oracle_underlying(settle_price),
        lambda ts: FLAT_FORECAST,
    )


def test_expiry_settles_itm_at_intrinsic():
    result = five_tick_run(settle_price=8500.0)
    last = result.records[-1]
    assert last.note == "expiry"
    assert last.action == "sell-to-close"
    assert last.timestamp == pd.Timestamp("2020-03-27 08:00:00")
    assert last.contracts == 0
    assert last.option_fee_cents == 0  # settlement is not a trade
    assert last.premium_usd == pytest.approx(500.0)  # intrinsic of the 8000 call
    # bought at 327.62, settled at 500.00
    assert last.pnl_option_cents == 50000 - 32762
    # final hedge (short ~0.4756 BTC from the 14:00 rehedge) unwinds at 8500
    hedge = -result.records[2].delta
    assert last.hedge_traded_btc == pytest.approx(-hedge)
    assert last.pnl_underlying_cents == usd_to_cents(hedge * (8500.0 - 7900.0))
    assert last.hedge_fee_cents == perp_fee_cents(hedge, 8500.0)
    assert result.report.n_trades == 1
    assert result.report.open_trip is False


def test_expiry_settles_otm_worthless():
    result = five_tick_run(settle_price=7500.0)
    last = result.records[-1]
    assert last.note == "expiry"
    assert last.premium_usd == 0.0
    assert last.pnl_option_cents == -32762
    assert last.option_fee_cents == 0


def test_truncated_data_leaves_position_open():
    result = five_tick_run(settle_price=None)  # underlying ends before expiry
    assert all(not r.action.endswith("-to-close") for r in result.records)
    assert result.report.open_trip is True
    assert result.report.n_trades == 0
    assert result.report.total_pnl_usd == 0.0
    # fee totals still cover the open tail
    assert result.report.option_fees_usd > 0


# --- replay determinism ------------------------------------------------------


def test_truncation_replays_are_ledger_prefixes():
    """Cutting both feeds at any instant reproduces the full run's prefix."""
    full = run_oracle(settle_price=8500.0)
    full_frame = ledger_frame(full.records)
    ticks = oracle_ticks()
    underlying = oracle_underlying(settle_price=8500.0)
    rng = np.random.default_rng(11)
    start = pd.Timestamp("2020-03-20 09:30:00").value
    stop = pd.Timestamp("2020-03-20 16:00:00").value
    for cut_ns in rng.integers(start, stop, size=10):
        cut = pd.Timestamp(int(cut_ns))
        cut_ticks = [t for t in ticks if t.timestamp <= cut]
        mask = pd.DatetimeIndex(underlying.timestamps) <= cut
        if mask.sum() == 0:
            continue
        cut_series = PriceSeries(
            underlying.timestamps[mask], underlying.closes[mask], "1h"
        )
        partial = run_backtest(
            StrategyConfig(entry_threshold=0.05),
            cut_ticks,
            cut_series,
            lambda ts: FLAT_FORECAST,
        )
        expected = full_frame[full_frame["timestamp"] <= cut].reset_index(drop=True)
        got = ledger_frame(partial.records)
        if expected.empty:
            assert got.empty
        else:
            assert got.to_csv() == expected.to_csv()


def test_rerun_is_deterministic():
    a = run_oracle()
    b = run_oracle()
    assert ledger_frame(a.records).to_csv() == ledger_frame(b.records).to_csv()


# --- threshold monotonicity ---------------------------------------------------


def spike_path_run(entry_threshold):
    """Constructed spread path: negative baseline with single-tick spikes."""
    spikes = [-0.01, 0.06, -0.02, 0.09, -0.01, 0.12, -0.03, 0.04, -0.01]
    ticks = [make_tick(9 + i, 300.0, 8000.0) for i in range(len(spikes))]
    ivs = [trade_iv(t) for t in ticks]
    wanted = {
        t.timestamp: iv + s for t, iv, s in zip(ticks, ivs, spikes)
    }
    stamps = np.array([t.timestamp for t in ticks], dtype="datetime64[ns]")
    underlying = PriceSeries(stamps, np.full(len(ticks), 8000.0), "1h")
    result = run_backtest(
        StrategyConfig(entry_threshold=entry_threshold),
        ticks,
        underlying,
        lambda ts: wanted[pd.Timestamp(ts)],
    )
    return result, spikes, ticks


def test_raising_the_entry_threshold_shrinks_to_a_subset():
    low, spikes, ticks = spike_path_run(0.05)
    high, _, _ = spike_path_run(0.08)
    low_entries = [r.timestamp for r in low.records if r.action.endswith("-to-open")]
    high_entries = [r.timestamp for r in high.records if r.action.endswith("-to-open")]
    assert set(high_entries) <= set(low_entries)
    # exactly the low-threshold entry times that still cross at 0.08
    still_cross = {
        t.timestamp
        for t, prev, curr in zip(ticks[1:], spikes, spikes[1:])
        if prev < 0.08 <= curr
    }
    assert set(high_entries) == set(low_entries) & still_cross
    assert len(low_entries) == 3
    assert len(high_entries) == 2
    # every spike collapses to the negative baseline, so every trip closes
    assert low.report.n_trades == 3
    assert high.report.n_trades == 2


def test_constant_spread_never_trades():
    ticks = oracle_ticks()
    ivs = [trade_iv(t) for t in ticks]
    # pin the spread exactly at +0.10 for every tick: no crossing ever happens
    wanted = {t.timestamp: iv + 0.10 for t, iv in zip(ticks, ivs)}
    result = run_backtest(
        StrategyConfig(entry_threshold=0.05),
        ticks,
        oracle_underlying(),
        lambda ts: wanted[pd.Timestamp(ts)],
    )
    assert result.records == ()
    assert result.report.n_trades == 0


# --- direction arithmetic ------------------------------------------------------


def test_long_vol_option_pnl_hand_case():
    """Buy the call, premium rises $100, spot never moves: +$100 exactly."""
    premiums = [300.0, 310.0, 410.0]
    ticks = [make_tick(10 + i, p, 8000.0) for i, p in enumerate(premiums)]
    ivs = [trade_iv(t) for t in ticks]
    spreads = [0.01, 0.06, -0.01]
    wanted = {t.timestamp: iv + s for t, iv, s in zip(ticks, ivs, spreads)}
    stamps = np.array([t.timestamp for t in ticks], dtype="datetime64[ns]")
    underlying = PriceSeries(stamps, np.full(3, 8000.0), "1h")
    result = run_backtest(
        StrategyConfig(entry_threshold=0.05),
        ticks,
        underlying,
        lambda ts: wanted[pd.Timestamp(ts)],
    )
    actions = [r.action for r in result.records]
    assert actions == ["buy-to-open", "sell-to-close"]
    close = result.records[-1]
    assert close.pnl_option_cents == 10000
    assert close.pnl_underlying_cents == 0  # hedge rode a flat price
    assert sum(r.pnl_total_cents for r in result.records) == 10000


def test_short_vol_mirror():
    premiums = [300.0, 310.0, 305.0]
    ticks = [make_tick(10 + i, p, 8000.0) for i, p in enumerate(premiums)]
    ivs = [trade_iv(t) for t in ticks]
    spreads = [-0.01, -0.06, 0.01]
    wanted = {t.timestamp: iv + s for t, iv, s in zip(ticks, ivs, spreads)}
    stamps = np.array([t.timestamp for t in ticks], dtype="datetime64[ns]")
    underlying = PriceSeries(stamps, np.full(3, 8000.0), "1h")
    result = run_backtest(
        StrategyConfig(entry_threshold=0.05),
        ticks,
        underlying,
        lambda ts: wanted[pd.Timestamp(ts)],
    )
    actions = [r.action for r in result.records]
    assert actions == ["sell-to-open", "buy-to-close"]
    opened = result.records[0]
    assert opened.direction == "short-vol"
    # short the call: the hedge is LONG delta BTC
    assert opened.hedge_traded_btc == pytest.approx(opened.delta)
    close = result.records[-1]
    # sold at 310, bought back at 305: +$5
    assert close.pnl_option_cents == -1 * (usd_to_cents(305.0) - usd_to_cents(310.0))
    assert close.pnl_option_cents == 500


def test_ledger_frame_layout():
    frame = ledger_frame(run_oracle().records)
    assert list(frame.columns) == [
        "timestamp",
        "action",
        "direction",
        "spread",
        "premium_usd",
        "delta",
        "hedge_traded_btc",
        "hedge_price",
        "pnl_total",
        "pnl_underlying",
        "pnl_option",
        "fees",
        "note",
    ]
    assert len(frame) == 4
