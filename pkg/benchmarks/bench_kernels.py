#!/usr/bin/env python3
"""Side-by-side benchmark of the numba kernels against the numpy fallbacks.

Times the hot raster kernels on a 512x512 image and checks both backends
agree. The package itself picks a backend at import from DEFOCUS_NUMBA;
this script imports both implementation modules directly.

Usage: python benchmarks/bench_kernels.py [--size 512] [--repeats 5]
"""

import argparse
import time

import numpy as np

from defocus import _kernels_np as knp

try:
    from defocus import _kernels_nb as knb
except ImportError:
    knb = None


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=512)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    img = rng.random((args.size, args.size))
    codes = (img * 255.999).astype(np.uint8)
    taps_small = np.exp(-np.linspace(-3, 3, 13) ** 2 / 2)
    taps_small /= taps_small.sum()
    taps_large = np.exp(-np.linspace(-3, 3, 49) ** 2 / 2)
    taps_large /= taps_large.sum()

    cases = [
        ("convolve 13 taps", lambda k: k.convolve_axis1(k.convolve_axis0(img, taps_small), taps_small)),
        ("convolve 49 taps", lambda k: k.convolve_axis1(k.convolve_axis0(img, taps_large), taps_large)),
        ("box_sum r=8", lambda k: k.box_sum(img, 8)),
        ("box_sum r=32", lambda k: k.box_sum(img, 32)),
        ("laplacian", lambda k: k.laplacian4(img)),
        ("window_entropy 16", lambda k: k.window_entropy(codes, 16)),
    ]

    if knb is None:
        print("numba unavailable; timing the numpy backend only")
    else:
        for _, fn in cases:  # warm the JIT outside the timed region
            fn(knb)

    print(f"{args.size}x{args.size} image, best of {args.repeats}")
    header = f"{'kernel':>20}  {'numpy (ms)':>11}"
    if knb is not None:
        header += f"  {'numba (ms)':>11}  {'speedup':>8}  {'max diff':>9}"
    print(header)
    print("-" * len(header))
    for name, fn in cases:
        t_np = best_of(lambda: fn(knp), args.repeats)
        row = f"{name:>20}  {t_np * 1e3:>11.2f}"
        if knb is not None:
            t_nb = best_of(lambda: fn(knb), args.repeats)
            diff = float(np.abs(fn(knp) - fn(knb)).max())
            row += f"  {t_nb * 1e3:>11.2f}  {t_np / t_nb:>7.1f}x  {diff:>9.1e}"
        print(row)


if __name__ == "__main__":
    main()
