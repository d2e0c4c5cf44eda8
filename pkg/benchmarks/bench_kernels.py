#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy/SciPy fallback.

Times 26-connectivity labeling and separable Gaussian smoothing on
synthetic volumes, checks both backends agree, and prints a table.

    python benchmarks/bench_kernels.py [--sizes 64 96 128] [--repeats 3]
"""

import argparse
import time

import numpy as np

from tumorcp import kernels


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_labeling(size, repeats, gen):
    fg = gen.random((size, size, size)) > 0.8
    rows = []
    results = {}
    for backend in kernels.AVAILABLE_BACKENDS:
        t = timeit(lambda: kernels.label_components(fg, backend=backend), repeats)
        labels, count = kernels.label_components(fg, backend=backend)
        results[backend] = count
        rows.append((f"label26 {size}^3", backend, t, f"{count} components"))
    assert len(set(results.values())) == 1, f"backends disagree: {results}"
    return rows


def bench_blur(size, sigma, repeats, gen):
    arr = gen.normal(size=(size, size, size))
    rows = []
    outs = {}
    for backend in kernels.AVAILABLE_BACKENDS:
        t = timeit(lambda: kernels.gaussian_blur(arr, sigma, backend=backend), repeats)
        outs[backend] = kernels.gaussian_blur(arr, sigma, backend=backend)
        rows.append((f"blur {size}^3 s={sigma}", backend, t, ""))
    if len(outs) == 2:
        identical = np.array_equal(outs["numpy"], outs["cython"])
        rows[-1] = rows[-1][:3] + (f"bit-identical: {identical}",)
        assert identical
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[48, 64, 96])
    ap.add_argument("--sigmas", type=float, nargs="+", default=[1.0, 9.0])
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    print(f"available backends: {kernels.AVAILABLE_BACKENDS} (default: {kernels.BACKEND})")
    gen = np.random.default_rng(0)
    rows = []
    for size in args.sizes:
        rows += bench_labeling(size, args.repeats, gen)
    for size in args.sizes:
        for sigma in args.sigmas:
            rows += bench_blur(size, sigma, args.repeats, gen)

    width = max(len(r[0]) for r in rows)
    print(f"\n{'case'.ljust(width)}  backend  seconds    notes")
    baselines = {}
    for case, backend, seconds, notes in rows:
        baselines.setdefault(case, seconds)
        speedup = baselines[case] / seconds
        print(f"{case.ljust(width)}  {backend:7}  {seconds:8.4f}  {notes} "
              f"({speedup:.2f}x vs first)")


if __name__ == "__main__":
    main()
