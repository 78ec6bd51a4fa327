# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled variance-recursion kernels.

Signature-for-signature twin of ``_recursions_py``; see that module for the
indexing conventions. Keep the arithmetic order identical between the two
backends so results agree to rounding.
"""

from libc.math cimport exp, fabs, isfinite, log, sqrt

import numpy as np

cdef double LOG_2PI = 1.8378770664093453
cdef double SQRT_2_OVER_PI = 0.7978845608028654
cdef double LN_VAR_CAP = 700.0


def garch_filter(double[::1] returns, double a0, double alpha, double beta,
                 double seed):
    """GARCH(1,1) conditional variances; ARCH(1) via beta=0."""
    cdef Py_ssize_t n = returns.shape[0]
    cdef object out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double x
    out[0] = seed
    for i in range(1, n):
        x = a0 + alpha * (returns[i - 1] * returns[i - 1])
        out[i] = x + beta * out[i - 1]
    return out_arr


def egarch_filter(double[::1] returns, double a0, double alpha, double theta,
                  double beta, double seed):
    """EGARCH(1,1,1) conditional variances; ln z2 clamped to +/-LN_VAR_CAP."""
    cdef Py_ssize_t n = returns.shape[0]
    cdef object out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double lnz2 = log(seed)
    cdef double eps
    out[0] = seed
    for i in range(1, n):
        eps = returns[i - 1] / sqrt(out[i - 1])
        lnz2 = a0 + alpha * (fabs(eps) - SQRT_2_OVER_PI) + theta * eps + beta * lnz2
        if lnz2 > LN_VAR_CAP:
            lnz2 = LN_VAR_CAP
        elif lnz2 < -LN_VAR_CAP:
            lnz2 = -LN_VAR_CAP
        out[i] = exp(lnz2)
    return out_arr


def ema_filter(double[::1] returns, double w_prev, double w_new, double seed):
    """Exponential smoother z2[i] = w_prev*z2[i-1] + w_new*r[i]^2."""
    cdef Py_ssize_t n = returns.shape[0]
    cdef object out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double state = seed
    for i in range(n):
        state = w_new * (returns[i] * returns[i]) + w_prev * state
        out[i] = state
    return out_arr


def gaussian_loglik(double[::1] returns, double[::1] variances):
    """Gaussian conditional log-likelihood; NaN if any variance is invalid."""
    cdef Py_ssize_t n = returns.shape[0]
    cdef Py_ssize_t i
    cdef double acc = 0.0
    cdef double z2
    for i in range(n):
        z2 = variances[i]
        if z2 <= 0.0 or not isfinite(z2):
            return float("nan")
        acc += LOG_2PI + log(z2) + returns[i] * returns[i] / z2
    return -0.5 * acc


def garch_loglik(double[::1] returns, double a0, double alpha, double beta,
                 double seed):
    """Fused filter + likelihood for the MLE hot path."""
    cdef Py_ssize_t n = returns.shape[0]
    cdef Py_ssize_t i
    cdef double z2 = seed
    cdef double acc = 0.0
    for i in range(n):
        if z2 <= 0.0 or not isfinite(z2):
            return float("nan")
        acc += LOG_2PI + log(z2) + returns[i] * returns[i] / z2
        z2 = (a0 + alpha * (returns[i] * returns[i])) + beta * z2
    return -0.5 * acc


def egarch_loglik(double[::1] returns, double a0, double alpha, double theta,
                  double beta, double seed):
    cdef Py_ssize_t n = returns.shape[0]
    cdef Py_ssize_t i
    cdef double lnz2 = log(seed)
    cdef double z2 = seed
    cdef double acc = 0.0
    cdef double eps
    for i in range(n):
        if z2 <= 0.0 or not isfinite(z2):
            return float("nan")
        acc += LOG_2PI + log(z2) + returns[i] * returns[i] / z2
        eps = returns[i] / sqrt(z2)
        lnz2 = a0 + alpha * (fabs(eps) - SQRT_2_OVER_PI) + theta * eps + beta * lnz2
        if lnz2 >= LN_VAR_CAP - 1.0:
            return float("nan")
        elif lnz2 < -LN_VAR_CAP:
            lnz2 = -LN_VAR_CAP
        z2 = exp(lnz2)
    return -0.5 * acc


def garch_simulate(double[::1] shocks, double a0, double alpha, double beta,
                   double z0_sq, Py_ssize_t burn):
    """Simulate r_t = z_t*v_t from pre-drawn standard-normal shocks."""
    cdef Py_ssize_t n_total = shocks.shape[0]
    cdef object out_arr = np.empty(n_total - burn, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double z2 = z0_sq
    cdef double r
    for i in range(n_total):
        r = sqrt(z2) * shocks[i]
        if i >= burn:
            out[i - burn] = r
        z2 = a0 + alpha * r * r + beta * z2
    return out_arr


def egarch_simulate(double[::1] shocks, double a0, double alpha, double theta,
                    double beta, double lnz0_sq, Py_ssize_t burn):
    cdef Py_ssize_t n_total = shocks.shape[0]
    cdef object out_arr = np.empty(n_total - burn, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double lnz2 = lnz0_sq
    cdef double eps
    for i in range(n_total):
        eps = shocks[i]
        if i >= burn:
            out[i - burn] = exp(0.5 * lnz2) * eps
        lnz2 = a0 + alpha * (fabs(eps) - SQRT_2_OVER_PI) + theta * eps + beta * lnz2
        if lnz2 > LN_VAR_CAP:
            lnz2 = LN_VAR_CAP
        elif lnz2 < -LN_VAR_CAP:
            lnz2 = -LN_VAR_CAP
    return out_arr
