#!/usr/bin/env python3
"""Benchmark the compiled DG kernels against the pure-numpy fallback.

Usage:
    python benchmarks/bench_kernels.py            # kernel-level timings
    python benchmarks/bench_kernels.py --solver   # additionally time solve_divp

The compiled backend must be built (pip install -e . --no-build-isolation);
the fallback timings use the same inputs through `_kernels.python_ref`.
"""

import argparse
import time

import numpy as np

from nispdg import _kernels
from nispdg._kernels import python_ref
from nispdg.mesh import Mesh1D, basis_tables
from nispdg.models import Burgers, LinearAdvection, ShallowWater


def time_call(fn, repeats=200):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def bench_rhs():
    rng = np.random.default_rng(0)
    print(f"{'model':14s} {'N':>5s} {'p':>2s} {'python':>10s} {'compiled':>10s} {'speedup':>8s}")
    for model in (LinearAdvection(1.0), Burgers(), ShallowWater()):
        for n in (32, 128, 512):
            for p in (1, 2):
                tables = basis_tables(p, p + 2)
                if model.m == 1:
                    coeffs = rng.standard_normal((n, p + 1, 1))
                else:
                    coeffs = rng.standard_normal((n, p + 1, 2)) * 0.05
                    coeffs[:, 0, 0] += 2.0
                out = np.empty_like(coeffs)
                h = 1.0 / n

                t_py = time_call(
                    lambda: python_ref.dg_rhs(
                        model, coeffs, tables.phi_q, tables.dphi_q, tables.w_q,
                        tables.phi_l, tables.phi_r, h, out,
                    )
                )
                if _kernels.HAVE_COMPILED:
                    t_c = time_call(lambda: _kernels.dg_rhs(model, coeffs, tables, h, out))
                    # correctness cross-check on the same inputs
                    out_c = np.empty_like(coeffs)
                    out_p = np.empty_like(coeffs)
                    _kernels.dg_rhs(model, coeffs, tables, h, out_c)
                    python_ref.dg_rhs(
                        model, coeffs, tables.phi_q, tables.dphi_q, tables.w_q,
                        tables.phi_l, tables.phi_r, h, out_p,
                    )
                    assert np.allclose(out_c, out_p, rtol=1e-12, atol=1e-12)
                    print(
                        f"{model.name:14s} {n:5d} {p:2d} {t_py * 1e6:9.1f}u {t_c * 1e6:9.1f}u "
                        f"{t_py / t_c:7.1f}x"
                    )
                else:
                    print(f"{model.name:14s} {n:5d} {p:2d} {t_py * 1e6:9.1f}u {'n/a':>10s} {'':>8s}")


def bench_solver():
    import os

    from nispdg.rkdg import RkdgConfig, solve_divp, sync_time_partition

    print(f"\nsolver backend: {_kernels.BACKEND}")
    model = Burgers()
    u0 = lambda x: 0.5 + 0.25 * np.sin(x)
    for n in (64, 256):
        mesh = Mesh1D(0.0, 2 * np.pi, n)
        cfg = RkdgConfig(p=2)
        t0 = time.perf_counter()
        part = sync_time_partition(model, [u0], mesh, cfg, 0.5)
        solve_divp(model, u0, mesh, cfg, part)
        print(f"  burgers N={n:4d} p=2 T=0.5: {time.perf_counter() - t0:7.3f}s "
              f"({part.n_intervals} steps)")
    print("set NISPDG_PURE_PYTHON=1 to benchmark the fallback solver path")


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--solver", action="store_true", help="also time full solves")
    args = parser.parse_args()
    print(f"kernel backend selected at import: {_kernels.BACKEND}\n")
    bench_rhs()
    if args.solver:
        bench_solver()
