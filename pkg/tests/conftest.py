import numpy as np
import pandas as pd
import pytest

from cryptovol import GarchParams, ModelKind, ReturnSeries, simulate

TRUE_PARAMS = GarchParams(a0=1e-5, alpha=0.10, beta=0.85)


def make_returns(values, start="2020-01-01", frequency="1d"):
    """ReturnSeries from raw values on a daily grid starting at ``start``."""
    values = np.asarray(values, dtype=np.float64)
    ts = pd.date_range(start, periods=values.shape[0], freq="1D").to_numpy()
    return ReturnSeries(ts, values, frequency)


@pytest.fixture(scope="session")
def garch_returns():
    """One simulated GARCH(1,1) daily series shared across modules."""
    return simulate(ModelKind.GARCH, TRUE_PARAMS, n=1500, seed=7)


@pytest.fixture
def returns_factory():
    return make_returns
