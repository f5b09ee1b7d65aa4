#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the NumPy fallback.

Times the hot per-step kernels (Laplacian stencil, Helmholtz sweep,
energy sums, metric dot) and one full gradient + energy evaluation per
backend, then prints a speedup table.  Run from the repository root:

    python3 benchmarks/bench_kernels.py [--n 33] [--h 1.0] [--repeat 7]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from nlcbox.backend import available_backends
from nlcbox.energy import ModelParams, energy, gradient
from nlcbox.grid import build_grid
from nlcbox.seeds import wors_seed
from nlcbox.tensor import BulkParams


def kernel_cases(kern, q, dx, lam2):
    """Callable per kernel, all writing into preallocated buffers."""
    shape = q.shape[:-1]
    comp = np.ascontiguousarray(q[..., 0])
    out = np.empty_like(comp)
    coef = np.full(shape, 0.3)
    work = np.empty_like(comp)
    trq2 = np.empty(shape)
    qb = q + 0.01
    return {
        "laplacian": lambda: kern.laplacian(comp, dx, out),
        "helmholtz": lambda: kern.helmholtz(comp, coef, 10.0, dx, work),
        "trq2_field": lambda: kern.trq2_field(q, trq2),
        "metric_dot": lambda: kern.metric_dot(q, qb),
        "elastic_energy": lambda: kern.elastic_energy(q, dx),
        "bulk_energy": lambda: kern.bulk_energy(q, lam2, 0.5, 1.0, 0.25, 0.1),
    }


def time_call(fn, repeat: int) -> float:
    """Best-of-repeat wall time in seconds for one call."""
    timer = timeit.Timer(fn)
    number = max(1, timer.autorange()[0] // 10)
    return min(timer.repeat(repeat=repeat, number=number)) / number


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=33, help="nodes per square edge")
    ap.add_argument("--h", type=float, default=1.0, help="half-height")
    ap.add_argument("--repeat", type=int, default=7)
    args = ap.parse_args()

    backends = available_backends()
    if "compiled" not in backends:
        print("compiled backend unavailable; timing the fallback only")

    geom = build_grid(args.n, args.n, args.h)
    bulk = BulkParams.mbba()
    params = ModelParams(bulk=bulk, lam2=50.0, omega=10.0)
    f = wors_seed(geom, bulk)
    rng = np.random.default_rng(20240817)
    f.q += 0.05 * rng.standard_normal(f.q.shape)
    q = np.ascontiguousarray(f.q)

    print(f"grid {geom.nx}x{geom.ny}x{geom.nz} ({geom.n_nodes} nodes)")
    header = f"{'kernel':<16}" + "".join(f"{name:>12}" for name in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))

    names = list(kernel_cases(backends["numpy"], q, geom.dx, 50.0))
    for case in names:
        times = {}
        for bname, kern in backends.items():
            fn = kernel_cases(kern, q, geom.dx, 50.0)[case]
            times[bname] = time_call(fn, args.repeat)
        row = f"{case:<16}" + "".join(
            f"{times[b] * 1e6:>10.1f}us" for b in backends
        )
        if len(times) == 2:
            row += f"{times['numpy'] / times['compiled']:>9.2f}x"
        print(row)

    # Whole-evaluation comparison: swap the kernel module in both the
    # backend registry and the energy layer's bound name.  importlib is
    # needed because the package re-exports a function named `energy`.
    import importlib

    backend_mod = importlib.import_module("nlcbox.backend")
    energy_mod = importlib.import_module("nlcbox.energy")

    originals = (backend_mod.kernels, energy_mod.kernels)
    times = {}
    try:
        for bname, kern in backends.items():
            backend_mod.kernels = kern
            energy_mod.kernels = kern
            times[bname] = time_call(
                lambda: (energy(f, params), gradient(f, params)), args.repeat
            )
    finally:
        backend_mod.kernels, energy_mod.kernels = originals
    row = f"{'energy+gradient':<16}" + "".join(
        f"{times[b] * 1e3:>10.2f}ms" for b in backends
    )
    if len(times) == 2:
        row += f"{times['numpy'] / times['compiled']:>9.2f}x"
    print(row)


if __name__ == "__main__":
    main()
