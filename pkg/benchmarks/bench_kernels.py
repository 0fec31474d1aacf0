"""Benchmark the numba kernels against the pure-numpy fallbacks.

Run twice to compare the paths:

    python benchmarks/bench_kernels.py             # numba (default)
    ELASTOSCAT_NO_NUMBA=1 python benchmarks/bench_kernels.py

The Legendre table builder is the shared inner loop of every boundary
assembly; the end-to-end row times a representative forward solve.
"""

import os
import time

import numpy as np

from elastoscat import _kernels, forward, geometry, modal


def timeit(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    mode = "numpy-fallback" if not _kernels.USE_NUMBA else "numba"
    print(f"kernel path: {mode}  (ELASTOSCAT_NO_NUMBA={os.environ.get('ELASTOSCAT_NO_NUMBA', '')!r})")

    rng = np.random.default_rng(0)
    for nmax, npts in ((16, 800), (24, 2000), (40, 4000)):
        x = rng.uniform(-0.999, 0.999, npts)
        s = np.sqrt(1 - x**2)
        _kernels.legendre_tables(nmax, x, s)  # warm up / compile
        dt = timeit(lambda: _kernels.legendre_tables(nmax, x, s))
        print(f"legendre_tables(nmax={nmax:3d}, npts={npts:5d}): {dt * 1e3:8.2f} ms")

    med = modal.Medium(2.0, 1.0, 2.0)
    ell = geometry.ellipsoid_coeffs(0.7, 0.75, 0.8, 1)
    wave = forward.IncidentWave("p", (0.0, 1.0, 0.0))
    opts = forward.SolverOptions(n_trunc=12, quad_order=16, residual_tol=1e-3)
    forward.solve_rigid_scattering(ell, wave, med, 1.0, opts)  # warm up
    dt = timeit(lambda: forward.solve_rigid_scattering(ell, wave, med, 1.0, opts), repeats=3)
    print(f"forward solve (ellipsoid, n_trunc=12): {dt * 1e3:8.1f} ms")


if __name__ == "__main__":
    main()
