"""Batch command-line front end.

Wires the library into the standard workflows — descriptive stats, in-sample
fits, walk-forward forecasts, out-of-sample regressions, ATM implied-vol
extraction, smile calibration, strategy backtests, and model simulation — and
writes every result as CSV or JSON under an output directory. Settings come
from an optional YAML config file; command-line flags override file values.
Exit status is 0 only if every requested output was written; any failure
names the stage that broke.

Plot-ready series (forecasts, realized vol, PNL curves) are emitted as
two-column CSVs. Monetary columns are formatted with two decimals.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import pandas as pd
import yaml

from .errors import CryptovolError, UnsupportedFrequencyError
from .evaluation import (
    DEFAULT_LOOKBACKS,
    LookbackSpec,
    ols_predict,
    realized_vol_by_day,
    regression_table,
    report_frame,
    walk_forward,
    walk_forward_multi_day,
)
from .market_data import (
    FREQUENCIES,
    descriptive_stats,
    load_price_csv,
    resample,
    simple_returns,
)
from .models import (
    MLE_KINDS,
    GarchParams,
    ModelKind,
    fit_mle,
    simulate,
)
from .options import (
    atm_iv_for_day,
    exchange_summary,
    load_option_csv,
    parse_instrument,
)
from .smile import (
    DEFAULT_SLOPE_DATES,
    average_slope,
    observations_for_dates,
    slope_on_date,
    smile_adjusted_series,
)
from . import backtest as bt

logger = logging.getLogger(__name__)

STATS_FREQUENCIES = ("1d", "12h", "6h", "3h", "1h")

#: USD columns rendered with two decimals in CSV output.
MONEY_COLUMNS = (
    "premium_usd",
    "hedge_price",
    "underlying_price",
    "pnl_total",
    "pnl_underlying",
    "pnl_option",
    "fees",
    "option_fees",
    "hedge_fees",
    "total_fees",
    "total_pnl",
    "pnl_per_trade",
    "entry_premium",
    "exit_premium",
    "cumulative_pnl_usd",
)


class ConfigError(CryptovolError):
    """Bad or incomplete run configuration."""


class StageError(RuntimeError):
    """A named pipeline stage failed; the message says which."""


@contextlib.contextmanager
def _stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(f"stage '{name}' failed: {exc}") from exc


@dataclass
class RunConfig:
    """Everything a command run needs, merged from YAML file and flags."""

    spot_csv: Path | None = None
    spot_frequency: str = "1min"
    option_csv: Path | None = None
    out_dir: Path = Path("reports")
    seed: int = 0
    models: tuple[str, ...] = ("hist", "ema", "arch", "garch", "egarch")
    lookbacks: tuple[str, ...] = DEFAULT_LOOKBACKS
    start: str | None = None
    instrument: str = ""
    expiry: str | None = None
    entry_thresholds: tuple[float, ...] = (0.05,)
    exit_thresholds: tuple[float, ...] = (0.0,)
    rehedge_band: float = 0.02
    refresh_hours: int = 24
    include_fees: bool = False
    bid_ask: bool = False
    smile_adjust: bool = False
    slope: float | None = None
    slope_dates: tuple[str, ...] = DEFAULT_SLOPE_DATES
    strike_interval: float = 1000.0
    ema_n: int = 365
    sim_model: str = "garch"
    sim_a0: float = 1e-5
    sim_alpha: float = 0.10
    sim_beta: float = 0.85
    sim_theta: float = -0.05
    sim_n: int = 2000

    def __post_init__(self) -> None:
        if self.spot_csv is not None:
            self.spot_csv = Path(self.spot_csv)
        if self.option_csv is not None:
            self.option_csv = Path(self.option_csv)
        self.out_dir = Path(self.out_dir)
        if self.spot_frequency not in FREQUENCIES:
            raise ConfigError(f"unknown spot frequency {self.spot_frequency!r}")
        if self.refresh_hours not in (12, 24):
            raise ConfigError("refresh_hours must be 12 or 24")
        for path, key in ((self.spot_csv, "spot_csv"), (self.option_csv, "option_csv")):
            if path is not None and not path.exists():
                raise ConfigError(f"{key}: {path} does not exist")

    def require(self, *keys: str) -> None:
        for key in keys:
            if getattr(self, key) in (None, ""):
                raise ConfigError(f"{key} must be set (config file or flag)")

    @classmethod
    def load(cls, args: argparse.Namespace) -> "RunConfig":
        """Build a config from an optional YAML file plus flag overrides."""
        raw: dict = {}
        if args.config is not None:
            with open(args.config) as fh:
                loaded = yaml.safe_load(fh) or {}
            if not isinstance(loaded, dict):
                raise ConfigError(f"{args.config} must contain a YAML mapping")
            raw.update(loaded)
        # A nested `simulate:` block is sugar for the flat sim_* keys.
        for key, value in (raw.pop("simulate", None) or {}).items():
            raw[f"sim_{key}" if not key.startswith("sim_") else key] = value
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        overrides = {
            key: value
            for key, value in vars(args).items()
            if key in known and value is not None
        }
        raw.update(overrides)
        for key in ("models", "lookbacks", "slope_dates", "entry_thresholds", "exit_thresholds"):
            if key in raw and not isinstance(raw[key], (list, tuple)):
                raw[key] = (raw[key],)
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# shared loaders


def _spot_series(cfg: RunConfig):
    cfg.require("spot_csv")
    return load_price_csv(cfg.spot_csv, cfg.spot_frequency)


def _returns_at(series, frequency: str):
    at = series if series.frequency == frequency else resample(series, frequency)
    return simple_returns(at)


def _kind(name) -> ModelKind:
    try:
        return ModelKind(str(name).upper())
    except ValueError:
        raise ConfigError(
            f"unknown model {name!r}; choose from "
            + ", ".join(k.value.lower() for k in ModelKind)
        ) from None


def _model_kinds(cfg: RunConfig, allowed=None) -> list[ModelKind]:
    kinds = [_kind(m) for m in cfg.models]
    if allowed is not None:
        kinds = [k for k in kinds if k in allowed]
    if not kinds:
        raise ConfigError(f"no usable model among {cfg.models}")
    return kinds


def _default_start(returns, spec: LookbackSpec) -> pd.Timestamp:
    """First production day: enough history for the window, else day 365."""
    ts = pd.DatetimeIndex(returns.timestamps)
    i = min(364, len(ts) - 2) if spec.days is None else spec.days - 1
    if not 0 <= i < len(ts):
        raise ConfigError(
            f"{len(ts)} return observations cannot support look-back {spec.label}"
        )
    return ts[i]


def _money_format(frame: pd.DataFrame) -> pd.DataFrame:
    """Render USD columns with two decimals (strings), leave the rest alone."""
    out = frame.copy()
    for col in out.columns:
        if col in MONEY_COLUMNS:
            out[col] = out[col].map(lambda x: f"{x:.2f}")
    return out


def _write_csv(frame: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    _money_format(frame).to_csv(path, index=False)
    return path


# ---------------------------------------------------------------------------
# commands


def cmd_stats(cfg: RunConfig) -> list[Path]:
    with _stage("load spot data"):
        series = _spot_series(cfg)
    rows = []
    with _stage("descriptive statistics"):
        for freq in STATS_FREQUENCIES:
            try:
                returns = _returns_at(series, freq)
            except UnsupportedFrequencyError:
                logger.warning("source is coarser than %s; skipped", freq)
                continue
            st = descriptive_stats(returns)
            rows.append(
                {
                    "frequency": freq,
                    "n": st.n,
                    "mean_return": st.mean_return,
                    "annualized_vol": st.annualized_vol,
                    "skewness": st.skewness,
                    "excess_kurtosis": st.excess_kurtosis,
                }
            )
        if not rows:
            raise ConfigError("no frequency at or coarser than the source data")
    with _stage("write stats report"):
        return [_write_csv(pd.DataFrame(rows), cfg.out_dir / "stats.csv")]


def cmd_fit(cfg: RunConfig) -> list[Path]:
    with _stage("load spot data"):
        returns = _returns_at(_spot_series(cfg), "1d")
    rows = []
    with _stage("maximum-likelihood fits"):
        for kind in _model_kinds(cfg, allowed=MLE_KINDS):
            rows.append(fit_mle(kind, returns).to_dict())
    with _stage("write fit report"):
        return [_write_csv(pd.DataFrame(rows), cfg.out_dir / "fit.csv")]


def _produce_forecasts(cfg: RunConfig, returns) -> list[tuple[ModelKind, str, object]]:
    produced = []
    for lookback in cfg.lookbacks:
        spec = LookbackSpec.parse(lookback)
        start = cfg.start or _default_start(returns, spec)
        for kind in _model_kinds(cfg):
            fs = walk_forward(kind, spec, returns, start, ema_n=cfg.ema_n)
            produced.append((kind, spec.label, fs))
    return produced


def cmd_forecast(cfg: RunConfig) -> list[Path]:
    with _stage("load spot data"):
        returns = _returns_at(_spot_series(cfg), "1d")
    with _stage("walk-forward forecasts"):
        produced = _produce_forecasts(cfg, returns)
    written = []
    with _stage("write forecast series"):
        for kind, label, fs in produced:
            path = cfg.out_dir / f"forecasts_{kind.value}_{label}.csv"
            path.parent.mkdir(parents=True, exist_ok=True)
            fs.to_csv(path)
            written.append(path)
    return written


def cmd_evaluate(cfg: RunConfig) -> list[Path]:
    with _stage("load spot data"):
        series = _spot_series(cfg)
        if series.frequency != "1min":
            raise ConfigError("evaluation needs minute bars to measure realized vol")
        returns = _returns_at(series, "1d")
    with _stage("realized volatility"):
        realized = realized_vol_by_day(series)
    with _stage("walk-forward forecasts"):
        produced = _produce_forecasts(cfg, returns)
    written = []
    entries = []
    with _stage("forecast regressions"):
        by_lookback: dict[str, list] = {}
        for kind, label, fs in produced:
            by_lookback.setdefault(label, []).append((kind, fs))
        for label, items in by_lookback.items():
            # One aligned table per look-back so every row shares a sample.
            table = regression_table(realized, [fs for _, fs in items])
            for kind, fs in items:
                col = f"{kind.value}_{label}"
                result = ols_predict(table["realized_next"], [table[col]])
                entries.append((kind.value, label, result))
            mle_cols = [
                f"{kind.value}_{label}" for kind, _ in items if kind in MLE_KINDS
            ]
            if len(mle_cols) >= 2:
                combined = ols_predict(
                    table["realized_next"], [table[c] for c in mle_cols]
                )
                entries.append(("COMBINED", label, combined))
            path = cfg.out_dir / f"forecast_vs_realized_{label}.csv"
            written.append(
                _write_csv(table.rename_axis("date").reset_index(), path)
            )
    with _stage("write evaluation report"):
        written.append(
            _write_csv(report_frame(entries), cfg.out_dir / "evaluation.csv")
        )
        realized_frame = realized.rename_axis("date").reset_index(name="realized_vol")
        written.append(_write_csv(realized_frame, cfg.out_dir / "realized.csv"))
    return written


def cmd_iv(cfg: RunConfig) -> list[Path]:
    with _stage("load option trades"):
        cfg.require("option_csv")
        trades = load_option_csv(cfg.option_csv)
        if cfg.instrument:
            trades = [t for t in trades if t.contract_id == cfg.instrument]
        if not trades:
            raise ConfigError("no option trades after filtering")
    with _stage("load spot data"):
        underlying = _spot_series(cfg)
    rows = []
    with _stage("daily ATM implied vol"):
        expiry = pd.Timestamp(cfg.expiry) if cfg.expiry else None
        days = sorted({t.timestamp.normalize() for t in trades})
        for day in days:
            try:
                strike, iv = atm_iv_for_day(
                    trades, underlying, day, expiry=expiry, interval=cfg.strike_interval
                )
            except CryptovolError as exc:
                logger.warning("%s: %s; day skipped", day.date(), exc)
                continue
            rows.append({"date": day.date(), "atm_strike": strike, "atm_iv": iv})
        if not rows:
            raise StageError("stage 'daily ATM implied vol' failed: no day produced an IV")
    written = []
    with _stage("write IV report"):
        written.append(_write_csv(pd.DataFrame(rows), cfg.out_dir / "atm_iv.csv"))
        written.append(
            _write_csv(exchange_summary(trades), cfg.out_dir / "exchange_summary.csv")
        )
    return written


def _resolve_expiry(cfg: RunConfig) -> pd.Timestamp:
    if cfg.expiry:
        return pd.Timestamp(cfg.expiry).normalize()
    if cfg.instrument:
        _, _, expiry = parse_instrument(cfg.instrument)
        return pd.Timestamp(expiry)
    raise ConfigError("expiry (or an instrument to derive it from) must be set")


def cmd_smile(cfg: RunConfig) -> list[Path]:
    with _stage("load option trades"):
        cfg.require("option_csv")
        trades = load_option_csv(cfg.option_csv)
    with _stage("load spot data"):
        closes = _spot_series(cfg)
        if closes.frequency != "1d":
            closes = resample(closes, "1d")
    with _stage("smile calibration"):
        expiry = _resolve_expiry(cfg)
        observations = observations_for_dates(
            trades, closes, expiry, dates=cfg.slope_dates, interval=cfg.strike_interval
        )
        if not observations:
            raise ConfigError("no calibration date produced a smile observation")
        slopes = [slope_on_date(obs) for obs in observations]
        payload = {
            "expiry": str(expiry.date()),
            "dates": {
                str(pd.Timestamp(obs.date).date()): slope
                for obs, slope in zip(observations, slopes)
            },
            "average_slope": average_slope(observations),
        }
    with _stage("write smile report"):
        path = cfg.out_dir / "smile.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
        return [path]


def cmd_backtest(cfg: RunConfig) -> list[Path]:
    with _stage("load option trades"):
        cfg.require("option_csv")
        trades = load_option_csv(cfg.option_csv)
        ticks = (
            [t for t in trades if t.contract_id == cfg.instrument]
            if cfg.instrument
            else trades
        )
        if not ticks:
            raise ConfigError("no option trades after filtering")
        contracts = {t.contract_id for t in ticks}
        if len(contracts) > 1:
            raise ConfigError(
                f"option data spans {len(contracts)} contracts; set instrument"
            )
        strike, expiry = ticks[0].strike, ticks[0].expiry
    with _stage("load spot data"):
        series = _spot_series(cfg)
        if series.frequency != "1min":
            raise ConfigError("the backtest needs minute bars for hedge fills")
        daily = resample(series, "1d")
        refit_freq = "1d" if cfg.refresh_hours == 24 else "12h"
        returns = _returns_at(series, refit_freq)
    with _stage("forecast leg"):
        kind = _model_kinds(cfg, allowed=(ModelKind.ARCH, ModelKind.GARCH))[0]
        spec = LookbackSpec.parse(cfg.lookbacks[0])
        start = cfg.start or _default_start(returns, spec)
        forecasts = walk_forward_multi_day(kind, spec, returns, start, expiry)
        if len(forecasts) == 0:
            raise ConfigError("no forecast could be produced before expiry")
    if cfg.smile_adjust:
        with _stage("smile adjustment"):
            if cfg.slope is not None:
                s_avg = cfg.slope
            else:
                observations = observations_for_dates(
                    trades,
                    daily,
                    expiry,
                    dates=cfg.slope_dates,
                    interval=cfg.strike_interval,
                )
                if not observations:
                    raise ConfigError(
                        "smile calibration found no usable date; set slope explicitly"
                    )
                s_avg = average_slope(observations)
            forecasts = smile_adjusted_series(forecasts, daily, strike, expiry, s_avg)
    written = []
    rows = []
    with _stage("run backtests"):
        tag_base = f"{kind.value}_{spec.label}_{cfg.refresh_hours}h"
        for entry in cfg.entry_thresholds:
            for exit_ in cfg.exit_thresholds:
                strategy = bt.StrategyConfig(
                    entry_threshold=entry,
                    exit_threshold=exit_,
                    rehedge_band=cfg.rehedge_band,
                    garch_refresh_hours=cfg.refresh_hours,
                    instrument=cfg.instrument,
                    include_fees=cfg.include_fees,
                    bid_ask=cfg.bid_ask,
                    smile_adjust=cfg.smile_adjust,
                )
                result = bt.run_backtest(strategy, ticks, series, forecasts)
                tag = f"{tag_base}_e{entry:g}_x{exit_:g}"
                if cfg.smile_adjust:
                    tag += "_smile"
                written.append(
                    _write_csv(
                        bt.ledger_frame(result.records),
                        cfg.out_dir / f"ledger_{tag}.csv",
                    )
                )
                written.append(
                    _write_csv(
                        bt.round_trips_frame(result.records),
                        cfg.out_dir / f"round_trips_{tag}.csv",
                    )
                )
                written.append(
                    _write_csv(result.curve, cfg.out_dir / f"pnl_{tag}.csv")
                )
                row = {
                    "model": kind.value,
                    "lookback": spec.label,
                    "refresh_hours": cfg.refresh_hours,
                    "entry_threshold": entry,
                    "exit_threshold": exit_,
                    "smile_adjust": cfg.smile_adjust,
                    "include_fees": cfg.include_fees,
                    "bid_ask": cfg.bid_ask,
                }
                row.update(result.report.to_dict())
                rows.append(row)
    with _stage("write performance report"):
        written.append(
            _write_csv(pd.DataFrame(rows), cfg.out_dir / "performance.csv")
        )
    return written


def cmd_simulate(cfg: RunConfig) -> list[Path]:
    with _stage("simulate returns"):
        kind = _kind(cfg.sim_model)
        beta = cfg.sim_beta if kind is not ModelKind.ARCH else None
        theta = cfg.sim_theta if kind is ModelKind.EGARCH else None
        params = GarchParams(a0=cfg.sim_a0, alpha=cfg.sim_alpha, beta=beta, theta=theta)
        returns = simulate(kind, params, cfg.sim_n, cfg.seed)
    with _stage("write simulated series"):
        frame = pd.DataFrame(
            {"timestamp": pd.DatetimeIndex(returns.timestamps), "return": returns.values}
        )
        return [_write_csv(frame, cfg.out_dir / "simulated.csv")]


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML config file; flags override it")
    common.add_argument("--out", dest="out_dir", type=Path, help="output directory")
    common.add_argument("--seed", type=int, help="RNG seed for simulation commands")
    common.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v info, -vv debug"
    )
    spot = argparse.ArgumentParser(add_help=False)
    spot.add_argument("--spot-csv", dest="spot_csv", type=Path, help="spot bars CSV")
    spot.add_argument(
        "--spot-frequency",
        dest="spot_frequency",
        choices=FREQUENCIES,
        help="bar frequency of the spot CSV (default 1min)",
    )
    option = argparse.ArgumentParser(add_help=False)
    option.add_argument(
        "--option-csv", dest="option_csv", type=Path, help="option trade ticks CSV"
    )
    option.add_argument("--instrument", help="restrict to one contract, e.g. BTC8000C27MAR20")

    parser = argparse.ArgumentParser(
        prog="cryptovol",
        description="Volatility modeling, forecast evaluation, and option-strategy backtesting.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser(
        "stats", parents=[common, spot], help="descriptive return statistics per frequency"
    )
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser(
        "fit", parents=[common, spot], help="in-sample maximum-likelihood fits"
    )
    p.add_argument("--models", nargs="+", help="subset of arch garch egarch")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser(
        "forecast", parents=[common, spot], help="walk-forward one-day-ahead forecasts"
    )
    p.add_argument("--models", nargs="+", help="subset of hist ema arch garch egarch")
    p.add_argument("--lookbacks", nargs="+", help="e.g. whole 365d 180d 90d 30d")
    p.add_argument("--start", help="first production date (default: first feasible day)")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser(
        "evaluate",
        parents=[common, spot],
        help="regress next-day realized vol on walk-forward forecasts",
    )
    p.add_argument("--models", nargs="+")
    p.add_argument("--lookbacks", nargs="+")
    p.add_argument("--start")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser(
        "iv", parents=[common, spot, option], help="daily ATM implied vol and exchange summary"
    )
    p.add_argument("--expiry", help="restrict to one expiry date, e.g. 2020-03-27")
    p.set_defaults(func=cmd_iv)

    p = sub.add_parser(
        "smile", parents=[common, spot, option], help="calibrate the delta-space smile slope"
    )
    p.add_argument("--expiry", help="expiry of the calibration chain")
    p.add_argument("--slope-dates", dest="slope_dates", nargs="+", help="calibration dates")
    p.set_defaults(func=cmd_smile)

    p = sub.add_parser(
        "backtest", parents=[common, spot, option], help="run the vol-spread strategy"
    )
    p.add_argument("--models", nargs="+", help="forecast model (arch or garch)")
    p.add_argument("--lookbacks", nargs="+", help="estimation look-back (first one is used)")
    p.add_argument("--start", help="first production date for the forecast leg")
    p.add_argument("--entry", dest="entry_thresholds", nargs="+", type=float)
    p.add_argument("--exit", dest="exit_thresholds", nargs="+", type=float)
    p.add_argument("--band", dest="rehedge_band", type=float, help="rehedge delta band")
    p.add_argument(
        "--refresh-hours", dest="refresh_hours", type=int, choices=(12, 24),
        help="model refresh cadence",
    )
    p.add_argument(
        "--fees", dest="include_fees", action=argparse.BooleanOptionalAction,
        help="net exchange fees into PNL",
    )
    p.add_argument(
        "--bid-ask", dest="bid_ask", action=argparse.BooleanOptionalAction,
        help="charge half-spread costs on every fill",
    )
    p.add_argument(
        "--smile", dest="smile_adjust", action=argparse.BooleanOptionalAction,
        help="apply the smile adjustment to the forecast leg",
    )
    p.add_argument("--slope", type=float, help="smile slope override (skip calibration)")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser(
        "simulate", parents=[common], help="simulate a return series from a fitted recursion"
    )
    p.add_argument("--model", dest="sim_model", help="arch, garch, or egarch")
    p.add_argument("--a0", dest="sim_a0", type=float)
    p.add_argument("--alpha", dest="sim_alpha", type=float)
    p.add_argument("--beta", dest="sim_beta", type=float)
    p.add_argument("--theta", dest="sim_theta", type=float)
    p.add_argument("--n", dest="sim_n", type=int, help="number of observations")
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = RunConfig.load(args)
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        written = args.func(cfg)
    except StageError as exc:
        print(f"cryptovol {args.command}: {exc}", file=sys.stderr)
        return 1
    except (CryptovolError, OSError, ValueError) as exc:
        print(f"cryptovol {args.command}: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
