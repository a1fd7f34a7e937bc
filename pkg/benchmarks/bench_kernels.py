"""Compare the compiled kernels with the pure-Python fallback.

Usage: ``python3 benchmarks/bench_kernels.py [--repeat K]``.  Each case runs
under both backends, checks that the results agree, and prints the median
wall time and the speedup.
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from rcpanel import _backend, estimators, intermediate
from rcpanel.panel_model import BetaSquared, Gaussian, StudentT, simulate_panel


def _panel(N, n, innovation):
    return lambda: simulate_panel(N, n, BetaSquared(2.0, 1.5), innovation, seed=11).values


def _summary(N, n):
    def f():
        s = estimators.simulate_summary(N, n, BetaSquared(2.0, 1.5), Gaussian(), seed=11,
                                        lags=((0, 0), (1, 0), (0, 1)))
        return s.products(0, 0)
    return f


def _z_iso(reps):
    return lambda: intermediate.simulate_Z_iso(1.5, 1.0, 1.0, seed=5, reps=reps).values


CASES = {
    "simulate_panel 2000x500 gaussian": _panel(2000, 500, Gaussian()),
    "simulate_panel 2000x500 student-t": _panel(2000, 500, StudentT(5.0)),
    "simulate_summary 5000x200, 3 lags": _summary(5000, 200),
    "intermediate iso, 50 reps": _z_iso(50),
}


def _time(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not _backend.compiled_available():
        raise SystemExit("compiled kernels are not built; run pip install -e . first")
    print(f"{'case':38s} {'compiled s':>11s} {'python s':>10s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, fn in CASES.items():
        with _backend.use_backend("compiled"):
            tc, rc = _time(fn, args.repeat)
        with _backend.use_backend("python"):
            tp, rp = _time(fn, args.repeat)
        diff = float(np.max(np.abs(np.asarray(rc) - np.asarray(rp))))
        print(f"{name:38s} {tc:11.4f} {tp:10.4f} {tp / tc:8.1f} {diff:11.2e}")


if __name__ == "__main__":
    main()
