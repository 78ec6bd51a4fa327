"""Volatility models: variance filters, MLE fits, forecasts, simulation.

Five model kinds are supported. HIST is the annualized sample standard
deviation over a look-back window and EMA an exponential smoother of squared
returns; neither is estimated. ARCH(1), GARCH(1,1), and EGARCH(1,1,1) are
estimated by maximizing the Gaussian conditional log-likelihood

    sum_t [ -0.5*ln(2*pi*z2_t) - r_t^2 / (2*z2_t) ]

with returns treated as zero-mean (r_t = z_t * v_t, no conditional mean
equation). Variance recursions:

    ARCH    z2_t = a0 + alpha * r_{t-1}^2
    GARCH   z2_t = a0 + alpha * r_{t-1}^2 + beta * z2_{t-1}
    EGARCH  ln z2_t = a0 + alpha * (|eps_{t-1}| - sqrt(2/pi))
                         + theta * eps_{t-1} + beta * ln z2_{t-1}

where eps = r / z is the standardized residual. Every filter is seeded with
z2_0 = sample variance of the estimation window, used identically in fitting,
filtering, and forecasting.

HIST and EMA forecasts are exposed as ``hist_forecast`` / ``ema_forecast``;
the estimated models go through ``fit_mle`` + ``forecast_one_step``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import pandas as pd
from scipy.optimize import minimize
from scipy.special import expit, logit

from . import _kernels
from .errors import (
    EstimationError,
    InsufficientDataError,
    NonStationaryError,
    NumericalOverflowError,
)
from .market_data import (
    PERIOD_LENGTH,
    ReturnSeries,
    annualization_factor,
    realized_vol,
)

_PENALTY = 1e6  # objective value assigned to invalid parameter points
_BOUNDARY_EPS = 1e-6


class ModelKind(str, Enum):
    HIST = "HIST"
    EMA = "EMA"
    ARCH = "ARCH"
    GARCH = "GARCH"
    EGARCH = "EGARCH"


#: Estimated (MLE) model kinds, in nesting order.
MLE_KINDS = (ModelKind.ARCH, ModelKind.GARCH, ModelKind.EGARCH)


@dataclass(frozen=True)
class GarchParams:
    """Natural parameters; ``beta``/``theta`` None where the model lacks them."""

    a0: float
    alpha: float
    beta: float | None = None
    theta: float | None = None

    def as_array(self, kind: ModelKind) -> np.ndarray:
        return np.array([self._value(name) for name in param_names(kind)])

    def _value(self, name: str) -> float:
        v = getattr(self, name)
        if v is None:
            raise ValueError(f"parameter {name!r} is not set")
        return float(v)


def param_names(kind: ModelKind) -> tuple[str, ...]:
    kind = ModelKind(kind)
    if kind is ModelKind.ARCH:
        return ("a0", "alpha")
    if kind is ModelKind.GARCH:
        return ("a0", "alpha", "beta")
    if kind is ModelKind.EGARCH:
        return ("a0", "alpha", "theta", "beta")
    raise ValueError(f"{kind.value} has no estimated parameters")


def _params_from_array(kind: ModelKind, values) -> GarchParams:
    return GarchParams(**dict(zip(param_names(kind), map(float, values))))


def validate_params(kind: ModelKind, params: GarchParams) -> None:
    """Check the sign/stationarity constraints for the given model kind."""
    kind = ModelKind(kind)
    if kind in (ModelKind.ARCH, ModelKind.GARCH):
        if params.a0 <= 0:
            raise ValueError("a0 must be positive")
        if params.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if kind is ModelKind.GARCH and (params.beta is None or params.beta < 0):
            raise ValueError("beta must be nonnegative for GARCH")
    elif kind is ModelKind.EGARCH:
        if params.beta is None or params.theta is None:
            raise ValueError("EGARCH requires beta and theta")
        if abs(params.beta) >= 1:
            raise NonStationaryError(f"|beta| = {abs(params.beta):.4f} >= 1")
    else:
        raise ValueError(f"{kind.value} has no filter parameters")


@dataclass(frozen=True)
class FitResult:
    """One maximum-likelihood fit on one estimation window."""

    kind: ModelKind
    params: GarchParams
    tstats: dict[str, float]
    stderrs: dict[str, float]
    loglik: float
    aic: float
    bic: float
    n: int
    window: tuple[pd.Timestamp, pd.Timestamp]
    flags: tuple[str, ...] = ()

    @property
    def k(self) -> int:
        return len(param_names(self.kind))

    def to_dict(self) -> dict:
        names = param_names(self.kind)
        row: dict = {"model": self.kind.value, "n": self.n}
        arr = self.params.as_array(self.kind)
        for name, value in zip(names, arr):
            row[name] = float(value)
            row[f"tstat_{name}"] = self.tstats.get(name, float("nan"))
        row.update(
            loglik=self.loglik,
            aic=self.aic,
            bic=self.bic,
            window_start=str(self.window[0]),
            window_end=str(self.window[1]),
            flags=";".join(self.flags),
        )
        return row

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass
class ForecastSeries:
    """Dated annualized volatility forecasts from one model configuration.

    Each entry is stamped with the production day t; the value is the
    forecast for day t+1 (or the multi-day average through ``horizon``),
    built from data through day t only.
    """

    dates: np.ndarray  # datetime64[ns]
    values: np.ndarray  # float64, >= 0
    kind: ModelKind
    lookback: str
    horizon: str = "1d"
    frequency: str = "1d"  # sampling frequency of the source returns
    skipped: tuple = ()

    def __post_init__(self) -> None:
        self.dates = np.asarray(self.dates, dtype="datetime64[ns]")
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.dates.shape[0] != self.values.shape[0]:
            raise ValueError("dates and values must have equal length")

    def __len__(self) -> int:
        return int(self.values.shape[0])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "date": pd.DatetimeIndex(self.dates),
                "forecast_vol": self.values,
            }
        )

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False)

    def to_json(self, path=None):
        payload = {
            "model": self.kind.value,
            "lookback": self.lookback,
            "horizon": self.horizon,
            "entries": [
                {"date": str(pd.Timestamp(d).date()), "forecast_vol": float(v)}
                for d, v in zip(self.dates, self.values)
            ],
        }
        if path is None:
            return json.dumps(payload)
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
        return None


def _window_variance(values: np.ndarray) -> float:
    if values.shape[0] < 2:
        raise InsufficientDataError("need at least 2 returns to seed the filter")
    return float(np.var(values, ddof=1))


def ema_variance(
    returns: ReturnSeries,
    n: int = 365,
    seed: float | None = None,
    conventional: bool = False,
) -> np.ndarray:
    """EMA variance path z2_t = lam*z2_{t-1} + (1-lam)*r_t^2, lam = 2/(n+1).

    The default weighting follows that recursion literally, which puts
    weight 1-lam on the newest squared return. ``conventional=True`` swaps
    the weights to the usual smoother (newest observation gets lam). The
    seed z2_0 defaults to the sample variance of the first min(30, len)
    returns.
    """
    values = np.ascontiguousarray(returns.values, dtype=np.float64)
    if values.shape[0] == 0:
        raise InsufficientDataError("EMA needs at least one return")
    lam = 2.0 / (n + 1.0)
    if seed is None:
        head = values[: min(30, values.shape[0])]
        seed = float(np.var(head, ddof=1)) if head.shape[0] >= 2 else float(head[0] ** 2)
    w_prev, w_new = (1.0 - lam, lam) if conventional else (lam, 1.0 - lam)
    return np.asarray(_kernels.ema_filter(values, w_prev, w_new, float(seed)))


def variance_filter(
    kind: ModelKind,
    params: GarchParams,
    returns: ReturnSeries,
    seed: float | None = None,
) -> np.ndarray:
    """Conditional variance path for ARCH/GARCH/EGARCH parameters.

    ``variances[0]`` is the seed (sample variance of the window unless
    overridden); later entries follow the model recursion.
    """
    kind = ModelKind(kind)
    validate_params(kind, params)
    values = np.ascontiguousarray(returns.values, dtype=np.float64)
    if seed is None:
        seed = _window_variance(values)
    if seed <= 0:
        raise InsufficientDataError("filter seed variance must be positive")
    if kind is ModelKind.ARCH:
        out = _kernels.garch_filter(values, params.a0, params.alpha, 0.0, seed)
    elif kind is ModelKind.GARCH:
        out = _kernels.garch_filter(values, params.a0, params.alpha, params.beta, seed)
    else:
        out = _kernels.egarch_filter(
            values, params.a0, params.alpha, params.theta, params.beta, seed
        )
    out = np.asarray(out)
    if not np.all(np.isfinite(out)) or out.max(initial=0.0) >= math.exp(
        _kernels.LN_VAR_CAP - 1.0
    ):
        raise NumericalOverflowError(
            f"{kind.value} variance recursion overflowed for {params}"
        )
    return out


def conditional_loglik(
    kind: ModelKind,
    params: GarchParams,
    returns: ReturnSeries,
    seed: float | None = None,
) -> float:
    """Gaussian conditional log-likelihood of the window under ``params``."""
    variances = variance_filter(kind, params, returns, seed=seed)
    values = np.ascontiguousarray(returns.values, dtype=np.float64)
    return float(_kernels.gaussian_loglik(values, variances))


# --- MLE machinery ---------------------------------------------------------
#
# The optimizer works in an unconstrained space; smooth maps enforce the
# constraints: a0 = exp(u), alpha+beta = expit(u) (GARCH persistence),
# alpha share = expit(u), EGARCH |beta| < 1 via tanh.


def _to_natural(kind: ModelKind, u: np.ndarray) -> np.ndarray:
    # exp is clamped so a wild optimizer probe yields a finite (terrible)
    # point for the penalty branch instead of an OverflowError.
    if kind is ModelKind.ARCH:
        return np.array([math.exp(min(u[0], 700.0)), expit(u[1])])
    if kind is ModelKind.GARCH:
        persistence = expit(u[1])
        share = expit(u[2])
        return np.array(
            [math.exp(min(u[0], 700.0)), persistence * share, persistence * (1.0 - share)]
        )
    return np.array([u[0], u[1], u[2], math.tanh(u[3])])


def _from_natural(kind: ModelKind, theta: np.ndarray) -> np.ndarray:
    if kind is ModelKind.ARCH:
        return np.array([math.log(theta[0]), logit(theta[1])])
    if kind is ModelKind.GARCH:
        persistence = theta[1] + theta[2]
        share = theta[1] / persistence
        return np.array([math.log(theta[0]), logit(persistence), logit(share)])
    return np.array([theta[0], theta[1], theta[2], math.atanh(theta[3])])


def _kernel_loglik(kind: ModelKind, theta: np.ndarray, values, seed: float) -> float:
    if kind is ModelKind.ARCH:
        return _kernels.garch_loglik(values, theta[0], theta[1], 0.0, seed)
    if kind is ModelKind.GARCH:
        return _kernels.garch_loglik(values, theta[0], theta[1], theta[2], seed)
    return _kernels.egarch_loglik(values, theta[0], theta[1], theta[2], theta[3], seed)


def _fixed_starts(kind: ModelKind, sample_var: float) -> list[np.ndarray]:
    # Variance targeting: a0 = s2 * (1 - alpha0 - beta0).
    if kind is ModelKind.ARCH:
        alphas = (0.10, 0.30, 0.60)
        return [np.array([sample_var * (1.0 - a), a]) for a in alphas]
    if kind is ModelKind.GARCH:
        pairs = ((0.10, 0.80), (0.05, 0.90), (0.20, 0.60))
        return [
            np.array([sample_var * (1.0 - a - b), a, b]) for a, b in pairs
        ]
    ln_s2 = math.log(sample_var)
    triples = ((0.10, 0.0, 0.90), (0.20, 0.0, 0.50), (0.05, -0.05, 0.80))
    return [np.array([(1.0 - b) * ln_s2, a, th, b]) for a, th, b in triples]


def _optimize(kind: ModelKind, values: np.ndarray, seed: float, starts) -> tuple:
    """Minimize the mean negative log-likelihood from multiple starts."""
    n = values.shape[0]

    def nll(u):
        theta = _to_natural(kind, u)
        ll = _kernel_loglik(kind, theta, values, seed)
        if not math.isfinite(ll):
            return _PENALTY
        return -ll / n

    best = None
    for theta0 in starts:
        u0 = _from_natural(kind, np.asarray(theta0, dtype=np.float64))
        res = minimize(
            nll,
            u0,
            method="L-BFGS-B",
            options={"ftol": 1e-13, "gtol": 1e-9, "maxiter": 500},
        )
        if not math.isfinite(res.fun) or res.fun >= _PENALTY:
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise EstimationError(
            f"{kind.value} likelihood not finite from any start", best=None
        )
    # Polish from the winning start with the f-based stop disabled, so the
    # reported optimum satisfies a first-order (small-gradient) check.
    polished = minimize(
        nll,
        best.x,
        method="L-BFGS-B",
        options={"ftol": 1e-16, "gtol": 1e-10, "maxiter": 1000},
    )
    if math.isfinite(polished.fun) and polished.fun <= best.fun:
        best = polished
    return _to_natural(kind, best.x), -best.fun * n


def _numerical_hessian(f, x: np.ndarray, rel_step: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian with per-coordinate relative steps."""
    k = x.shape[0]
    h = rel_step * np.maximum(np.abs(x), 1e-8)
    hess = np.empty((k, k))
    f0 = f(x)
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = h[i]
        hess[i, i] = (f(x + ei) - 2.0 * f0 + f(x - ei)) / (h[i] * h[i])
        for j in range(i + 1, k):
            ej = np.zeros(k)
            ej[j] = h[j]
            hess[i, j] = hess[j, i] = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4.0 * h[i] * h[j])
    return hess


def _boundary_flags(kind: ModelKind, theta: np.ndarray) -> tuple[str, ...]:
    flags = []
    names = param_names(kind)
    if kind in (ModelKind.ARCH, ModelKind.GARCH):
        if theta[1] < _BOUNDARY_EPS:
            flags.append("alpha at lower bound")
        if kind is ModelKind.ARCH and theta[1] > 1.0 - _BOUNDARY_EPS:
            flags.append("alpha at upper bound")
        if kind is ModelKind.GARCH:
            if theta[2] < _BOUNDARY_EPS:
                flags.append("beta at lower bound")
            if theta[1] + theta[2] > 1.0 - _BOUNDARY_EPS:
                flags.append("persistence at upper bound")
    else:
        if abs(theta[names.index("beta")]) > 1.0 - _BOUNDARY_EPS:
            flags.append("beta at stationarity bound")
    return tuple(flags)


def fit_mle(kind: ModelKind, returns: ReturnSeries, min_obs: int = 30) -> FitResult:
    """Fit ARCH/GARCH/EGARCH by constrained maximum likelihood.

    Multi-start L-BFGS-B over the reparameterized space; for GARCH an extra
    start at the fitted ARCH point (beta near 0) guarantees the fitted GARCH
    likelihood weakly dominates the nested ARCH fit.

    t-statistics come from the inverse observed information (numerical
    Hessian of the negative log-likelihood at the optimum).
    """
    kind = ModelKind(kind)
    if kind not in MLE_KINDS:
        raise ValueError(f"{kind.value} is not an estimated model")
    values = np.ascontiguousarray(returns.values, dtype=np.float64)
    n = values.shape[0]
    if n < min_obs:
        raise InsufficientDataError(f"need at least {min_obs} returns, have {n}")
    sample_var = _window_variance(values)
    if sample_var <= 0:
        raise InsufficientDataError("window has zero variance")

    starts = _fixed_starts(kind, sample_var)
    arch_theta = None
    if kind is ModelKind.GARCH:
        # Nesting-aware extra start: the ARCH optimum with a tiny beta.
        try:
            arch_theta, _ = _optimize(
                ModelKind.ARCH, values, sample_var, _fixed_starts(ModelKind.ARCH, sample_var)
            )
            alpha = min(max(arch_theta[1], 1e-6), 1.0 - 1e-4)
            starts.append(np.array([arch_theta[0], alpha, 1e-4]))
        except EstimationError:
            pass

    theta, loglik = _optimize(kind, values, sample_var, starts)
    if arch_theta is not None:
        # beta = 0 sits at the edge of the reparameterized search space, so
        # the optimizer can stall just short of the ARCH point; comparing
        # against it directly makes the nested fit a hard floor.
        nested = np.array([arch_theta[0], arch_theta[1], 0.0])
        nested_ll = _kernel_loglik(kind, nested, values, sample_var)
        if math.isfinite(nested_ll) and nested_ll > loglik:
            theta, loglik = nested, nested_ll

    names = param_names(kind)

    def neg_loglik_natural(th):
        ll = _kernel_loglik(kind, th, values, sample_var)
        return _PENALTY * n if not math.isfinite(ll) else -ll

    hess = _numerical_hessian(neg_loglik_natural, theta)
    stderrs = {}
    tstats = {}
    try:
        cov = np.linalg.inv(hess)
        diag = np.diag(cov)
    except np.linalg.LinAlgError:
        diag = np.full(len(names), np.nan)
    for i, name in enumerate(names):
        se = math.sqrt(diag[i]) if diag[i] > 0 else float("nan")
        stderrs[name] = se
        tstats[name] = theta[i] / se if se > 0 else float("nan")

    k = len(names)
    return FitResult(
        kind=kind,
        params=_params_from_array(kind, theta),
        tstats=tstats,
        stderrs=stderrs,
        loglik=loglik,
        aic=2.0 * k - 2.0 * loglik,
        bic=k * math.log(n) - 2.0 * loglik,
        n=n,
        window=(pd.Timestamp(returns.timestamps[0]), pd.Timestamp(returns.timestamps[-1])),
        flags=_boundary_flags(kind, theta),
    )


def unconditional_vol(params: GarchParams) -> float:
    """Annualized unconditional volatility sqrt(a0/(1-alpha-beta))*sqrt(365)."""
    beta = params.beta if params.beta is not None else 0.0
    if params.a0 <= 0:
        raise ValueError("a0 must be positive")
    persistence = params.alpha + beta
    if persistence >= 1.0:
        raise NonStationaryError(
            f"alpha + beta = {persistence:.4f} >= 1; unconditional variance undefined"
        )
    return math.sqrt(params.a0 / (1.0 - persistence)) * math.sqrt(365.0)


def step_variance(
    kind: ModelKind, params: GarchParams, r_prev: float, var_prev: float
) -> float:
    """One application of the variance recursion given day-t inputs."""
    kind = ModelKind(kind)
    if kind is ModelKind.ARCH:
        return params.a0 + params.alpha * r_prev * r_prev
    if kind is ModelKind.GARCH:
        return params.a0 + params.alpha * r_prev * r_prev + params.beta * var_prev
    if kind is ModelKind.EGARCH:
        eps = r_prev / math.sqrt(var_prev)
        ln_next = (
            params.a0
            + params.alpha * (abs(eps) - _kernels.SQRT_2_OVER_PI)
            + params.theta * eps
            + params.beta * math.log(var_prev)
        )
        return math.exp(ln_next)
    raise ValueError(f"{kind.value} has no variance recursion")


def _one_step_variance(fit: FitResult, returns: ReturnSeries) -> float:
    """Variance forecast for the period after the last return."""
    values = np.ascontiguousarray(returns.values, dtype=np.float64)
    seed = _window_variance(values)
    variances = variance_filter(fit.kind, fit.params, returns, seed=seed)
    return step_variance(fit.kind, fit.params, float(values[-1]), float(variances[-1]))


def forecast_one_step(fit: FitResult, returns: ReturnSeries) -> float:
    """Annualized one-step-ahead volatility forecast for an estimated model.

    ``returns`` must be the estimation window (data through day t); the
    forecast targets day t+1. HIST and EMA forecasts are produced by
    ``hist_forecast`` / ``ema_forecast``.
    """
    z2_next = _one_step_variance(fit, returns)
    return math.sqrt(z2_next) * annualization_factor(returns.frequency)


def hist_forecast(returns: ReturnSeries, window: int | None = None) -> float:
    """HIST forecast: realized volatility of the look-back window."""
    return realized_vol(returns, window=window, annualize=True)


def ema_forecast(
    returns: ReturnSeries, n: int = 365, conventional: bool = False
) -> float:
    """EMA forecast: sqrt of the latest smoothed variance, annualized."""
    path = ema_variance(returns, n=n, conventional=conventional)
    return math.sqrt(float(path[-1])) * annualization_factor(returns.frequency)


def expected_variance_path(
    params: GarchParams, z2_next: float, horizon: int
) -> np.ndarray:
    """E[z2_{t+h}] for h = 1..horizon under the ARCH/GARCH recursion.

    Mean reversion toward the unconditional variance vbar = a0/(1-alpha-beta):
    E[z2_{t+h}] = vbar + (alpha+beta)^(h-1) * (z2_{t+1} - vbar).
    """
    beta = params.beta if params.beta is not None else 0.0
    persistence = params.alpha + beta
    if persistence >= 1.0:
        raise NonStationaryError(f"alpha + beta = {persistence:.4f} >= 1")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    vbar = params.a0 / (1.0 - persistence)
    h = np.arange(horizon, dtype=np.float64)
    return vbar + persistence**h * (z2_next - vbar)


def forecast_multi_day_average(
    fit: FitResult, returns: ReturnSeries, maturity
) -> float:
    """Equal-weighted mean of daily vol forecasts from day t+1 through maturity.

    Each E[z2_{t+h}] along ``expected_variance_path`` is converted to an
    annualized vol before averaging. Defined for the ARCH/GARCH recursion
    (beta = 0 for ARCH); requires alpha + beta < 1.
    """
    if fit.kind not in (ModelKind.ARCH, ModelKind.GARCH):
        raise ValueError(f"multi-day average is defined for ARCH/GARCH, not {fit.kind.value}")
    t_last = pd.Timestamp(returns.timestamps[-1])
    period = PERIOD_LENGTH[returns.frequency]
    horizon = int((pd.Timestamp(maturity).normalize() - t_last.normalize()) / period)
    if horizon < 2:
        raise ValueError("maturity must be strictly after day t+1")
    z2_next = _one_step_variance(fit, returns)
    path = expected_variance_path(fit.params, z2_next, horizon)
    factor = annualization_factor(returns.frequency)
    return float(np.mean(np.sqrt(path)) * factor)


def simulate(
    kind: ModelKind,
    params: GarchParams,
    n: int,
    seed: int,
    frequency: str = "1d",
    start: str = "2017-01-01",
    burn: int = 500,
) -> ReturnSeries:
    """Simulate r_t = z_t * v_t with standard-normal innovations.

    Deterministic for a given ``seed``. The recursion starts at its
    unconditional level and the first ``burn`` draws are discarded. HIST and
    EMA have no generative recursion and are rejected.
    """
    kind = ModelKind(kind)
    if kind not in MLE_KINDS:
        raise ValueError(f"{kind.value} has no generative recursion to simulate")
    validate_params(kind, params)
    beta = params.beta if params.beta is not None else 0.0
    rng = np.random.default_rng(seed)
    shocks = np.ascontiguousarray(rng.standard_normal(n + burn))
    if kind in (ModelKind.ARCH, ModelKind.GARCH):
        persistence = params.alpha + beta
        if persistence >= 1.0:
            raise NonStationaryError(f"alpha + beta = {persistence:.4f} >= 1")
        z0_sq = params.a0 / (1.0 - persistence)
        values = _kernels.garch_simulate(shocks, params.a0, params.alpha, beta, z0_sq, burn)
    else:
        lnz0_sq = params.a0 / (1.0 - params.beta)
        values = _kernels.egarch_simulate(
            shocks, params.a0, params.alpha, params.theta, params.beta, lnz0_sq, burn
        )
    timestamps = pd.date_range(
        start=start, periods=n, freq=PERIOD_LENGTH[frequency]
    ).to_numpy()
    return ReturnSeries(timestamps, np.asarray(values), frequency)
