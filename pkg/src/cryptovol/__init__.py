"""Bitcoin volatility modeling, forecast evaluation, and option backtesting.

The package covers the full pipeline: ingesting spot bars and option trade
ticks, fitting conditional-volatility models by maximum likelihood,
walk-forward out-of-sample forecasting, Black-Scholes pricing and implied
vol, smile-slope forecast adjustment, and a delta-hedged volatility-spread
trading strategy with an exact integer-cent ledger.

The recursion kernels run on a compiled extension when it is built, with a
pure-Python/NumPy fallback selected automatically at import
(``cryptovol._kernels.BACKEND`` says which one is active).
"""

from ._kernels import BACKEND
from .errors import (
    AlignmentError,
    CollinearityError,
    CryptovolError,
    DegenerateSmileError,
    DuplicateTimestampError,
    EstimationError,
    InsufficientDataError,
    NoImpliedVolError,
    NonStationaryError,
    NoSolutionError,
    NumericalError,
    NumericalOverflowError,
    OrderingError,
    ParseError,
    UnsupportedFrequencyError,
)
from .market_data import (
    FREQUENCIES,
    PERIOD_LENGTH,
    PERIODS_PER_YEAR,
    DescriptiveStats,
    PriceBar,
    PriceSeries,
    ReturnSeries,
    annualization_factor,
    descriptive_stats,
    load_price_csv,
    realized_vol,
    resample,
    simple_returns,
)
from .models import (
    MLE_KINDS,
    FitResult,
    ForecastSeries,
    GarchParams,
    ModelKind,
    conditional_loglik,
    ema_forecast,
    ema_variance,
    expected_variance_path,
    fit_mle,
    forecast_multi_day_average,
    forecast_one_step,
    hist_forecast,
    simulate,
    step_variance,
    unconditional_vol,
    variance_filter,
)
from .evaluation import (
    DEFAULT_LOOKBACKS,
    LookbackSpec,
    RegressionResult,
    mae,
    ols_predict,
    realized_vol_by_day,
    realized_vol_next_day,
    regression_table,
    report_frame,
    walk_forward,
    walk_forward_multi_day,
)
from .options import (
    BsInputs,
    OptionTrade,
    atm_iv_for_day,
    atm_strike,
    bs_delta,
    bs_price,
    exchange_summary,
    expiry_instant,
    implied_vol,
    load_option_csv,
    parse_instrument,
    trade_iv,
    vw_implied_vol,
    vwap,
)
from .smile import (
    DEFAULT_SLOPE_DATES,
    SmileObservation,
    adjusted_forecast,
    average_slope,
    fixed_delta,
    observation_from_trades,
    observations_for_dates,
    slope_on_date,
    smile_adjusted_series,
)
from .backtest import (
    BacktestResult,
    PerformanceReport,
    Position,
    StrategyConfig,
    TradeRecord,
    forecast_lookup,
    ledger_frame,
    performance,
    pnl_curve,
    rehedge,
    round_trips_frame,
    run_backtest,
    vol_spread,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "__version__",
    # errors
    "AlignmentError",
    "CollinearityError",
    "CryptovolError",
    "DegenerateSmileError",
    "DuplicateTimestampError",
    "EstimationError",
    "InsufficientDataError",
    "NoImpliedVolError",
    "NonStationaryError",
    "NoSolutionError",
    "NumericalError",
    "NumericalOverflowError",
    "OrderingError",
    "ParseError",
    "UnsupportedFrequencyError",
    # market data
    "FREQUENCIES",
    "PERIOD_LENGTH",
    "PERIODS_PER_YEAR",
    "DescriptiveStats",
    "PriceBar",
    "PriceSeries",
    "ReturnSeries",
    "annualization_factor",
    "descriptive_stats",
    "load_price_csv",
    "realized_vol",
    "resample",
    "simple_returns",
    # models
    "MLE_KINDS",
    "FitResult",
    "ForecastSeries",
    "GarchParams",
    "ModelKind",
    "conditional_loglik",
    "ema_forecast",
    "ema_variance",
    "expected_variance_path",
    "fit_mle",
    "forecast_multi_day_average",
    "forecast_one_step",
    "hist_forecast",
    "simulate",
    "step_variance",
    "unconditional_vol",
    "variance_filter",
    # evaluation
    "DEFAULT_LOOKBACKS",
    "LookbackSpec",
    "RegressionResult",
    "mae",
    "ols_predict",
    "realized_vol_by_day",
    "realized_vol_next_day",
    "regression_table",
    "report_frame",
    "walk_forward",
    "walk_forward_multi_day",
    # options
    "BsInputs",
    "OptionTrade",
    "atm_iv_for_day",
    "atm_strike",
    "bs_delta",
    "bs_price",
    "exchange_summary",
    "expiry_instant",
    "implied_vol",
    "load_option_csv",
    "parse_instrument",
    "trade_iv",
    "vw_implied_vol",
    "vwap",
    # smile
    "DEFAULT_SLOPE_DATES",
    "SmileObservation",
    "adjusted_forecast",
    "average_slope",
    "fixed_delta",
    "observation_from_trades",
    "observations_for_dates",
    "slope_on_date",
    "smile_adjusted_series",
    # backtest
    "BacktestResult",
    "PerformanceReport",
    "Position",
    "StrategyConfig",
    "TradeRecord",
    "forecast_lookup",
    "ledger_frame",
    "performance",
    "pnl_curve",
    "rehedge",
    "round_trips_frame",
    "run_backtest",
    "vol_spread",
]
