#!/usr/bin/env python3
"""Timing comparison of the compiled and reference sequential kernels.

Run as ``python3 benchmarks/bench_kernels.py [--n 2000000] [--repeat 5]``.
Both backends are imported directly (ignoring SPINMAG_BACKEND) so they can
be timed side by side in one process; outputs are compared bitwise first so
the numbers below are for identical results.
"""

import argparse
import math
import timeit

import numpy as np

from spinmag.kernels import _ref

try:
    from spinmag.kernels import _fast
except ImportError:
    _fast = None


def time_call(fn, args, repeat, number=1):
    best = min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat))
    return best / number


def bench(name, ref_fn, fast_fn, args, repeat):
    if fast_fn is not None:
        r = ref_fn(*args)
        f = fast_fn(*args)
        if not np.array_equal(np.asarray(r), np.asarray(f)):
            raise AssertionError(f"{name}: backends disagree")
    t_ref = time_call(ref_fn, args, repeat)
    row = f"{name:28s} ref {t_ref * 1e3:9.2f} ms"
    if fast_fn is not None:
        t_fast = time_call(fast_fn, args, repeat)
        row += f"   fast {t_fast * 1e3:9.2f} ms   speedup {t_ref / t_fast:6.1f}x"
    print(row)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=2_000_000, help="samples per kernel call")
    ap.add_argument("--repeat", type=int, default=5, help="timing repeats (best is reported)")
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    n = args.n
    alpha = math.exp(-1.0 / 200.0)

    xr = rng.standard_normal(n)
    xc = rng.standard_normal(n) + 1j * rng.standard_normal(n)

    # Bloch integration state: sinusoidal field deviation and pump drive on
    # the half grid (two points per output step plus the endpoint).
    n_bloch = n // 8
    th = np.arange(2 * n_bloch + 1) * (0.5 / 50_000.0)
    b_half = np.zeros((th.shape[0], 3))
    b_half[:, 2] = 5e-11 * np.sin(2.0 * np.pi * 37.0 * th)
    pump_half = 50.0 * (1.0 + 0.99 * np.cos(2.0 * np.pi * 7000.0 * th))

    print(f"backend available: {'yes' if _fast is not None else 'no (reference only)'}")
    print(f"n = {n} samples, best of {args.repeat}")

    bench(
        "ar1_real",
        _ref.ar1_real,
        _fast.ar1_real if _fast else None,
        (xr, alpha, 0.0),
        args.repeat,
    )
    bench(
        "ar1_complex",
        _ref.ar1_complex,
        _fast.ar1_complex if _fast else None,
        (xc, alpha, 0.0 + 0.0j),
        args.repeat,
    )
    bench(
        "onepole_cascade_real (4)",
        _ref.onepole_cascade_real,
        _fast.onepole_cascade_real if _fast else None,
        (xr, alpha, 4),
        args.repeat,
    )
    bench(
        "onepole_cascade_complex (4)",
        _ref.onepole_cascade_complex,
        _fast.onepole_cascade_complex if _fast else None,
        (xc, alpha, 4),
        args.repeat,
    )
    bench(
        "bloch_rk4",
        _ref.bloch_rk4,
        _fast.bloch_rk4 if _fast else None,
        (b_half, pump_half, 1.0 / 50_000.0, 2.0 * math.pi * 6.9958e9, 4e-4, 4e-4, 0.0, (0.1, 0.0, 0.0)),
        args.repeat,
    )


if __name__ == "__main__":
    main()
