"""Compare the compiled and pure-numpy kernels.

Usage: python benchmarks/bench_backends.py [--size 512] [--repeats 7]
"""
import argparse
import time

import numpy as np

from ffd import _backend, _fallback
from ffd.detector import detect
from ffd.evaluation import make_synthetic
from ffd.pyramid import atrous_kernel, build_scale_space

try:
    from ffd import _core
except ImportError:
    _core = None


def median_ms(fn, repeats):
    fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1e3)
    return float(np.median(times))


def use(impl):
    _backend.separable_convolve = impl.separable_convolve
    _backend.find_extrema = impl.find_extrema


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=512)
    ap.add_argument("--repeats", type=int, default=7)
    args = ap.parse_args()

    img = make_synthetic("random_texture", args.size, args.size, seed=0)
    space = build_scale_space(img)
    stack = space.fine_stack
    taps, step = atrous_kernel(3).compact()
    levels = [1, 2, 3]
    margins = [5, 9, 17]

    impls = {"python": _fallback}
    if _core is not None:
        impls["cython"] = _core
    else:
        print("# compiled extension not built; only the fallback is timed")

    cases = {
        "convolve_h3": lambda m: m.separable_convolve(img, taps, step),
        "find_extrema": lambda m: m.find_extrema(stack, levels, margins),
        "build_scale_space": lambda m: build_scale_space(img),
        "detect": lambda m: detect(img),
    }
    print(f"# {args.size}x{args.size}, median of {args.repeats} runs (ms)")
    print("case," + ",".join(impls) + ("" if len(impls) == 1 else ",speedup"))
    for name, case in cases.items():
        row = []
        for impl in impls.values():
            use(impl)
            row.append(median_ms(lambda: case(impl), args.repeats))
        line = f"{name}," + ",".join(f"{t:.2f}" for t in row)
        if len(row) == 2:
            line += f",{row[0] / row[1]:.2f}x"
        print(line)


if __name__ == "__main__":
    main()
