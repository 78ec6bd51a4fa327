"""Recursion kernels: hand-stepped references and backend equivalence."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from cryptovol._kernels import (
    BACKEND,
    LOG_2PI,
    SQRT_2_OVER_PI,
    _recursions_py as pykern,
)
from cryptovol import _kernels as kernels


def test_constants():
    assert LOG_2PI == pytest.approx(math.log(2.0 * math.pi), abs=0)
    assert SQRT_2_OVER_PI == pytest.approx(math.sqrt(2.0 / math.pi), abs=0)


def test_garch_filter_hand_steps():
    # variances[0] is the seed; variances[i] is driven by returns[i-1]
    r = np.array([0.01, -0.02, 0.03])
    a0, alpha, beta, seed = 1e-4, 0.1, 0.8, 2e-4
    out = np.asarray(kernels.garch_filter(r, a0, alpha, beta, seed))
    v1 = a0 + alpha * 0.01**2 + beta * seed
    v2 = a0 + alpha * 0.02**2 + beta * v1
    np.testing.assert_allclose(out, [seed, v1, v2], rtol=1e-14)


def test_arch_is_garch_with_zero_beta():
    r = np.array([0.05, -0.01])
    out = np.asarray(kernels.garch_filter(r, 1e-4, 0.2, 0.0, 3e-4))
    np.testing.assert_allclose(out, [3e-4, 1e-4 + 0.2 * 0.05**2], rtol=1e-14)


def test_egarch_filter_hand_steps():
    r = np.array([0.02, -0.02])
    a0, alpha, theta, beta, seed = -0.5, 0.1, -0.05, 0.9, 4e-4
    out = np.asarray(kernels.egarch_filter(r, a0, alpha, theta, beta, seed))
    eps = 0.02 / math.sqrt(seed)
    ln_v1 = a0 + alpha * (abs(eps) - SQRT_2_OVER_PI) + theta * eps + beta * math.log(seed)
    assert out[0] == seed
    assert out[1] == pytest.approx(math.exp(ln_v1), rel=1e-14)


def test_ema_filter_hand_step():
    # one return, seed 1e-4: out[1] = w_prev*seed + w_new*r^2
    lam = 2.0 / 366.0
    out = np.asarray(kernels.ema_filter(np.array([0.02]), lam, 1.0 - lam, 1e-4))
    assert out[0] == pytest.approx(lam * 1e-4 + (1.0 - lam) * 4e-4, rel=1e-13)


def test_gaussian_loglik_matches_scipy():
    rng = np.random.default_rng(3)
    r = rng.normal(0, 0.02, size=50)
    v = rng.uniform(1e-4, 9e-4, size=50)
    expected = stats.norm.logpdf(r, loc=0.0, scale=np.sqrt(v)).sum()
    assert kernels.gaussian_loglik(r, v) == pytest.approx(expected, rel=1e-12)


def test_gaussian_loglik_rejects_bad_variance():
    r = np.array([0.01, 0.02])
    assert math.isnan(kernels.gaussian_loglik(r, np.array([1e-4, 0.0])))
    assert math.isnan(kernels.gaussian_loglik(r, np.array([1e-4, -1e-5])))
    assert math.isnan(kernels.gaussian_loglik(r, np.array([1e-4, math.inf])))


def test_egarch_loglik_overflow_is_nan():
    # beta ~ 1 with a huge intercept pushes ln z^2 past the cap
    r = np.full(200, 0.02)
    ll = kernels.egarch_loglik(r, 50.0, 0.1, 0.0, 0.999, 1e-4)
    assert math.isnan(ll)


def test_garch_simulate_deterministic_and_scaled():
    shocks = np.random.default_rng(11).standard_normal(600)
    a = np.asarray(kernels.garch_simulate(shocks, 1e-5, 0.1, 0.85, 2e-4, burn=100))
    b = np.asarray(kernels.garch_simulate(shocks, 1e-5, 0.1, 0.85, 2e-4, burn=100))
    np.testing.assert_array_equal(a, b)
    assert a.shape == (500,)
    # every draw is shock * conditional std, so none can be exactly repeated
    assert np.std(a) > 0


@given(
    a0=st.floats(1e-8, 1e-3),
    alpha=st.floats(0.0, 0.3),
    beta=st.floats(0.0, 0.69),
    seed=st.floats(1e-8, 1e-2),
)
@settings(max_examples=60, deadline=None)
def test_garch_filter_stays_positive(a0, alpha, beta, seed):
    r = np.array([0.05, -0.2, 0.0, 0.01, -0.001])
    out = np.asarray(kernels.garch_filter(r, a0, alpha, beta, seed))
    assert np.all(out > 0)


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(21)
    return np.ascontiguousarray(rng.normal(0, 0.03, size=4000))


@pytest.mark.skipif(BACKEND != "cython", reason="compiled backend not built")
class TestBackendEquivalence:
    """The compiled and pure-Python kernels must agree to near machine precision.

    Fitted parameters may drift apart at ~1e-5 relative (different summation
    order moves the optimizer along a flat likelihood), but on identical
    inputs the kernels themselves have no such excuse.
    """

    rtol = 1e-12

    def _compiled(self):
        from cryptovol._kernels import _recursions

        return _recursions

    def test_garch_filter(self, data):
        c = self._compiled()
        a = np.asarray(c.garch_filter(data, 1e-5, 0.1, 0.85, 9e-4))
        b = np.asarray(pykern.garch_filter(data, 1e-5, 0.1, 0.85, 9e-4))
        np.testing.assert_allclose(a, b, rtol=self.rtol)

    def test_egarch_filter(self, data):
        c = self._compiled()
        a = np.asarray(c.egarch_filter(data, -0.4, 0.15, -0.06, 0.94, 9e-4))
        b = np.asarray(pykern.egarch_filter(data, -0.4, 0.15, -0.06, 0.94, 9e-4))
        np.testing.assert_allclose(a, b, rtol=self.rtol)

    def test_ema_filter(self, data):
        c = self._compiled()
        lam = 2.0 / 366.0
        a = np.asarray(c.ema_filter(data, lam, 1.0 - lam, 9e-4))
        b = np.asarray(pykern.ema_filter(data, lam, 1.0 - lam, 9e-4))
        np.testing.assert_allclose(a, b, rtol=self.rtol)

    def test_logliks(self, data):
        c = self._compiled()
        assert c.garch_loglik(data, 1e-5, 0.1, 0.85, 9e-4) == pytest.approx(
            pykern.garch_loglik(data, 1e-5, 0.1, 0.85, 9e-4), rel=self.rtol
        )
        assert c.egarch_loglik(data, -0.4, 0.15, -0.06, 0.94, 9e-4) == pytest.approx(
            pykern.egarch_loglik(data, -0.4, 0.15, -0.06, 0.94, 9e-4), rel=self.rtol
        )

    def test_simulate(self):
        c = self._compiled()
        shocks = np.random.default_rng(5).standard_normal(800)
        a = np.asarray(c.garch_simulate(shocks, 1e-5, 0.1, 0.85, 2e-4, 200))
        b = np.asarray(pykern.garch_simulate(shocks, 1e-5, 0.1, 0.85, 2e-4, 200))
        np.testing.assert_allclose(a, b, rtol=self.rtol)
        a = np.asarray(c.egarch_simulate(shocks, -0.4, 0.15, -0.06, 0.94, -8.0, 200))
        b = np.asarray(pykern.egarch_simulate(shocks, -0.4, 0.15, -0.06, 0.94, -8.0, 200))
        np.testing.assert_allclose(a, b, rtol=self.rtol)
