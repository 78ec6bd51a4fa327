"""Benchmark the compiled recursion kernels against the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--sizes 1000 10000 100000]

Both implementations are imported side by side (no env var needed), timed on
the same inputs, and printed as a table with the speedup of the compiled
extension. Exits with a note instead of failing when the extension was not
built.
"""

import argparse
import timeit

import numpy as np

from cryptovol._kernels import _recursions_py

try:
    from cryptovol._kernels import _recursions as _compiled
except ImportError:
    _compiled = None


def _bench(fn, *args, repeat: int = 5, number: int = 20) -> float:
    """Best-of wall time per call, in seconds."""
    timer = timeit.Timer(lambda: fn(*args))
    return min(timer.repeat(repeat=repeat, number=number)) / number


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--sizes", nargs="+", type=int, default=[1_000, 10_000, 100_000]
    )
    args = parser.parse_args()

    if _compiled is None:
        print("compiled extension not built; nothing to compare against")
        return 0

    rng = np.random.default_rng(0)
    cases = []
    for n in args.sizes:
        returns = 0.02 * rng.standard_normal(n)
        seed = float(np.var(returns, ddof=1))
        shocks = rng.standard_normal(n + 500)
        cases.extend(
            [
                (f"garch_filter   n={n:>7,}", "garch_filter", (returns, 1e-5, 0.10, 0.85, seed)),
                (f"garch_loglik   n={n:>7,}", "garch_loglik", (returns, 1e-5, 0.10, 0.85, seed)),
                (f"egarch_filter  n={n:>7,}", "egarch_filter", (returns, -0.40, 0.10, -0.05, 0.95, seed)),
                (f"egarch_loglik  n={n:>7,}", "egarch_loglik", (returns, -0.40, 0.10, -0.05, 0.95, seed)),
                (f"garch_simulate n={n:>7,}", "garch_simulate", (shocks, 1e-5, 0.10, 0.85, 2e-4, 500)),
            ]
        )

    header = f"{'kernel':<26} {'python':>12} {'cython':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for label, name, call_args in cases:
        t_py = _bench(getattr(_recursions_py, name), *call_args)
        t_cy = _bench(getattr(_compiled, name), *call_args)
        print(f"{label:<26} {t_py * 1e3:>10.3f}ms {t_cy * 1e3:>10.3f}ms {t_py / t_cy:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
