"""Time the numba kernels against their pure-numpy fallbacks.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel is run once to warm the JIT cache, then timed with the compiled
path and with WHITEPET_DISABLE_NUMBA=1.  The largest absolute difference
between the two outputs is printed next to the timings.
"""

import argparse
import os
import time

import numpy as np

from whitepet import _accel
from whitepet.detect import trace_events
from whitepet.geometry import build_scanner
from whitepet.projection import Sinogram, SinogramGeometry, back_project, radon
from whitepet.response import rotated_numeric
from whitepet.whiteimage import GridSpec, Image


def _cases():
    rng = np.random.default_rng(0)
    grid = GridSpec(128, 32.0)
    sg = SinogramGeometry(128, 90, 32.0)
    img = Image(rng.random((128, 128)), grid)
    sino = Sinogram(rng.random((128, 90)), sg)
    geom = build_scanner()
    n = 1 << 15
    ev = (rng.uniform(-20, 20, n), rng.uniform(-20, 20, n),
          rng.uniform(0, np.pi, n), rng.uniform(0, 2 * np.pi, n))
    r = np.linspace(0.0, 52.0, 200)
    return {
        "rotated_numeric (200 radii)": lambda: rotated_numeric(r, 3.0, 50.0, 1.0, 2000),
        "radon 128x128 / 128x90": lambda: radon(img, sg).values,
        "back_project 128x90 -> 128x128": lambda: back_project(sino, grid).values,
        "trace_events (32768 events)": lambda: np.concatenate(
            [np.nan_to_num(a, nan=0.0) for a in trace_events(geom, *ev)]),
    }


def _time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed")
    print(f"{'kernel':34s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speed-up':>9s} {'max |diff|':>11s}")
    for name, fn in _cases().items():
        os.environ.pop(_accel.DISABLE_ENV, None)
        fn()
        t_nb, a = _time(fn, args.repeat)
        os.environ[_accel.DISABLE_ENV] = "1"
        try:
            t_np, b = _time(fn, max(1, args.repeat // 2))
        finally:
            os.environ.pop(_accel.DISABLE_ENV, None)
        diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
        print(f"{name:34s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:9.1f} {diff:11.2e}")


if __name__ == "__main__":
    main()
