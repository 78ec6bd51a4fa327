"""Variance-recursion kernels with backend selection at import time.

The compiled Cython extension is preferred; the pure-Python module is the
fallback. Set ``CRYPTOVOL_PURE_PYTHON=1`` to force the fallback (used by the
benchmark and the backend-equivalence tests). ``BACKEND`` reports which
implementation is active.
"""

import os

from . import _recursions_py

if os.environ.get("CRYPTOVOL_PURE_PYTHON", "0") not in ("", "0"):
    _impl = _recursions_py
    BACKEND = "python"
else:
    try:
        from . import _recursions as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _recursions_py
        BACKEND = "python"

LOG_2PI = _recursions_py.LOG_2PI
SQRT_2_OVER_PI = _recursions_py.SQRT_2_OVER_PI
LN_VAR_CAP = _recursions_py.LN_VAR_CAP

garch_filter = _impl.garch_filter
egarch_filter = _impl.egarch_filter
ema_filter = _impl.ema_filter
gaussian_loglik = _impl.gaussian_loglik
garch_loglik = _impl.garch_loglik
egarch_loglik = _impl.egarch_loglik
garch_simulate = _impl.garch_simulate
egarch_simulate = _impl.egarch_simulate

__all__ = [
    "BACKEND",
    "LOG_2PI",
    "SQRT_2_OVER_PI",
    "LN_VAR_CAP",
    "garch_filter",
    "egarch_filter",
    "ema_filter",
    "gaussian_loglik",
    "garch_loglik",
    "egarch_loglik",
    "garch_simulate",
    "egarch_simulate",
]
