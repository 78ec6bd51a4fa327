"""Pure-Python variance-recursion kernels.

Fallback used when the compiled extension is unavailable (or when
``CRYPTOVOL_PURE_PYTHON=1``). Linear recursions are expressed through
``scipy.signal.lfilter`` so the fallback stays usable on real sample sizes;
the EGARCH recursion is nonlinear in the state and runs as a plain loop.

Shared indexing convention for ARCH/GARCH/EGARCH filters: ``variances[0]``
is the seed (the variance assigned to the first return) and
``variances[i]`` for ``i >= 1`` is driven by ``returns[i-1]`` and
``variances[i-1]``. The EMA filter differs: its output at index ``i``
already incorporates ``returns[i]``, matching its role as a smoother.
"""

import numpy as np
from scipy.signal import lfilter

LOG_2PI = 1.8378770664093453
SQRT_2_OVER_PI = 0.7978845608028654  # E|e| for e ~ N(0,1)
LN_VAR_CAP = 700.0  # |ln z^2| above this would overflow exp()


def garch_filter(returns, a0, alpha, beta, seed):
    """GARCH(1,1) conditional variances; ARCH(1) via beta=0."""
    returns = np.asarray(returns, dtype=np.float64)
    n = returns.shape[0]
    out = np.empty(n, dtype=np.float64)
    out[0] = seed
    if n > 1:
        x = a0 + alpha * (returns[:-1] * returns[:-1])
        out[1:] = lfilter([1.0], [1.0, -beta], x, zi=[beta * seed])[0]
    return out


def egarch_filter(returns, a0, alpha, theta, beta, seed):
    """EGARCH(1,1,1) conditional variances from the log-variance recursion.

    ln z2 is clamped to +/-LN_VAR_CAP so the exponential stays finite;
    callers treat clamped paths as overflowed.
    """
    returns = np.asarray(returns, dtype=np.float64)
    n = returns.shape[0]
    out = np.empty(n, dtype=np.float64)
    lnz2 = np.log(seed)
    out[0] = seed
    for i in range(1, n):
        eps = returns[i - 1] / np.sqrt(out[i - 1])
        lnz2 = a0 + alpha * (abs(eps) - SQRT_2_OVER_PI) + theta * eps + beta * lnz2
        if lnz2 > LN_VAR_CAP:
            lnz2 = LN_VAR_CAP
        elif lnz2 < -LN_VAR_CAP:
            lnz2 = -LN_VAR_CAP
        out[i] = np.exp(lnz2)
    return out


def ema_filter(returns, w_prev, w_new, seed):
    """Exponential smoother z2[i] = w_prev*z2[i-1] + w_new*r[i]^2."""
    returns = np.asarray(returns, dtype=np.float64)
    x = w_new * (returns * returns)
    out, _ = lfilter([1.0], [1.0, -w_prev], x, zi=[w_prev * seed])
    return out


def gaussian_loglik(returns, variances):
    """Gaussian conditional log-likelihood; NaN if any variance is invalid."""
    returns = np.asarray(returns, dtype=np.float64)
    variances = np.asarray(variances, dtype=np.float64)
    if not np.all(np.isfinite(variances)) or np.any(variances <= 0.0):
        return float("nan")
    return float(
        -0.5 * np.sum(LOG_2PI + np.log(variances) + returns * returns / variances)
    )


def garch_loglik(returns, a0, alpha, beta, seed):
    """Fused filter + likelihood for the MLE hot path."""
    return gaussian_loglik(returns, garch_filter(returns, a0, alpha, beta, seed))


def egarch_loglik(returns, a0, alpha, theta, beta, seed):
    variances = egarch_filter(returns, a0, alpha, theta, beta, seed)
    if variances.max() >= np.exp(LN_VAR_CAP - 1.0):
        return float("nan")
    return gaussian_loglik(returns, variances)


def garch_simulate(shocks, a0, alpha, beta, z0_sq, burn):
    """Simulate r_t = z_t*v_t from pre-drawn standard-normal shocks.

    The first ``burn`` draws warm up the recursion and are discarded.
    """
    shocks = np.asarray(shocks, dtype=np.float64)
    n_total = shocks.shape[0]
    out = np.empty(n_total - burn, dtype=np.float64)
    z2 = z0_sq
    for i in range(n_total):
        r = np.sqrt(z2) * shocks[i]
        if i >= burn:
            out[i - burn] = r
        z2 = a0 + alpha * r * r + beta * z2
    return out


def egarch_simulate(shocks, a0, alpha, theta, beta, lnz0_sq, burn):
    shocks = np.asarray(shocks, dtype=np.float64)
    n_total = shocks.shape[0]
    out = np.empty(n_total - burn, dtype=np.float64)
    lnz2 = lnz0_sq
    for i in range(n_total):
        eps = shocks[i]
        if i >= burn:
            out[i - burn] = np.exp(0.5 * lnz2) * eps
        lnz2 = a0 + alpha * (abs(eps) - SQRT_2_OVER_PI) + theta * eps + beta * lnz2
        if lnz2 > LN_VAR_CAP:
            lnz2 = LN_VAR_CAP
        elif lnz2 < -LN_VAR_CAP:
            lnz2 = -LN_VAR_CAP
    return out
