"""Timing of the compiled kernels against the numpy fallback.

    python benchmarks/bench_core.py [--repeat 3] [--paths 2000]

Prints one row per kernel with the best wall time of each backend and the
speed-up.  Outputs of the two backends are compared before timing.
"""

import argparse
import time

import numpy as np

from qsdlab import _fallback

try:
    from qsdlab import _core
except ImportError:
    _core = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(n_paths):
    x = np.geomspace(1e-6, 1e4, 200_000)
    table = np.linspace(0.0, 0.3, 400)
    sim = (1.0, 0.0, 1.0, 1e-3, 20_000, 20240601, 0, n_paths, table, 0.01, 1e-2)
    return [
        ("log_bessel_i nu=0.5 (2e5 pts)", lambda m: m.log_bessel_i_array(0.5, x, True)),
        ("log_bessel_i nu=12 (2e5 pts)", lambda m: m.log_bessel_i_array(12.0, x, True)),
        (f"euler_absorb ({n_paths} paths)",
         lambda m: m.euler_absorb(*sim) if m is _fallback else m.euler_absorb(*sim, 1)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--paths", type=int, default=2000)
    args = ap.parse_args()
    if _core is None:
        print("compiled kernels not built; nothing to compare")
        return
    print(f"{'kernel':34s} {'compiled s':>11s} {'numpy s':>10s} {'speed-up':>9s}")
    for name, fn in cases(args.paths):
        a, b = fn(_core), fn(_fallback)
        if a.dtype.kind == "f":
            assert np.allclose(a, b, rtol=1e-12, atol=1e-12), name
        else:
            assert np.array_equal(a, b), name
        tc = best_of(lambda: fn(_core), args.repeat)
        tf = best_of(lambda: fn(_fallback), args.repeat)
        print(f"{name:34s} {tc:11.4f} {tf:10.4f} {tf / tc:8.1f}x")


if __name__ == "__main__":
    main()
