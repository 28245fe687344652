"""Numba vs numpy timings for the hot kernels.

    python benchmarks/bench_kernels.py [--repeat 5] [--resolution 101]

The first numba call compiles (or loads the on-disk cache); it is timed
separately and excluded from the steady-state numbers.
"""

import argparse
import time

import numpy as np

from catsim import kernels
from catsim.analysis import GridSpec, output_cutoff
from catsim.states import cat, coherent


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(resolution):
    ket = cat(2.0, +1, 24).amp
    rho = 0.5 * (np.outer(ket, ket.conj()) + np.outer(coherent(2.0, 24).amp, coherent(2.0, 24).amp.conj()))
    x, p = GridSpec(resolution=resolution).axes()
    betas = x[:, None] + 1j * p[None, :]
    n_out = output_cutoff(24, float(np.abs(betas).max()))
    rng = np.random.default_rng(0)
    psis = rng.normal(size=(256, 24, 24, 3)) + 1j * rng.normal(size=(256, 24, 24, 3))
    proj = coherent(2.0, 24).amp
    return {
        "wigner_ket": lambda: kernels.displaced_parity(ket, betas, n_out),
        "wigner_dm": lambda: kernels.displaced_parity(rho, betas, n_out),
        "projected_overlap": lambda: kernels.projected_overlap(psis, proj, ket),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--resolution", type=int, default=101)
    args = ap.parse_args()

    todo = cases(args.resolution)
    results = {}
    for name in kernels.available_backends():
        kernels.use_backend(name)
        for case, fn in todo.items():
            t0 = time.perf_counter()
            out = fn()
            first = time.perf_counter() - t0
            results[(name, case)] = (first, _time(fn, args.repeat), out)

    print(f"{'kernel':<20}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}{'numba 1st':>12}{'max |diff|':>13}")
    for case in todo:
        npy = results[("numpy", case)]
        nb = results.get(("numba", case))
        if nb is None:
            print(f"{case:<20}{npy[1]:>12.4f}{'n/a':>12}")
            continue
        diff = max(float(np.max(np.abs(a - b))) for a, b in zip(npy[2], nb[2]))
        print(f"{case:<20}{npy[1]:>12.4f}{nb[1]:>12.4f}{npy[1] / nb[1]:>10.2f}{nb[0]:>12.3f}{diff:>13.2e}")


if __name__ == "__main__":
    main()
