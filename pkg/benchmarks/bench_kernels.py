#!/usr/bin/env python3
"""Numba vs numpy kernels: timing and agreement.

Usage: python3 benchmarks/bench_kernels.py [--repeat 200]

Also times a short end-to-end run under each backend in a subprocess
(``QDD_NUMBA=0`` selects the numpy path).
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from qdd.grid import build_grid
from qdd.kernels import numba_backend, numpy_backend


def _inputs(N):
    grid = build_grid(2, "radial", N)
    x = grid.nodes
    u = np.log(1.0 + 0.3 * np.cos(np.pi * x * x)) - np.log(np.pi)
    phi = (1 - x * x) / (4 * np.pi)
    w = np.exp(u)
    c = np.zeros(N)
    step_args = (u, phi, w, c, 1.0, 1e-4, 0.01, 16 * np.pi, grid.cl, grid.cr,
                 grid.face_g, grid.quad_weights, grid.dirichlet)
    rng = np.random.default_rng(0)
    lower, upper = -rng.uniform(0.5, 1, N), -rng.uniform(0.5, 1, N)
    diag = 3.0 + rng.uniform(size=N)
    tri_args = (lower, diag, upper, rng.standard_normal(N))
    bohm_args = (u, u + 0.1, 0.01, grid.cl, grid.cr)
    cls_args = (w, np.diff(phi), 4 * np.pi, 1e-4, grid.cl, grid.cr, grid.face_g,
                grid.quad_weights)
    return {"solve_tridiagonal": tri_args, "tridiag_matvec": tri_args,
            "bohm_system": bohm_args, "step_system": step_args,
            "classical_system": cls_args}


def _time(fn, args, repeat):
    fn(*args)  # warm-up (compiles on the numba path)
    t0 = time.perf_counter()
    for _ in range(repeat):
        out = fn(*args)
    return (time.perf_counter() - t0) / repeat, out


def _maxdiff(a, b):
    if isinstance(a, tuple):
        return max(_maxdiff(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / (1.0 + np.abs(b))))


def end_to_end(flag):
    code = ("import time, numpy as np\n"
            "from qdd import build_grid, evolve, ModelParams, StepConfig\n"
            "from qdd.config import make_profile\n"
            "g = build_grid(2, 'radial', 201)\n"
            "evolve(g, make_profile(g, 'cosine'), ModelParams(0.1, 4*np.pi),"
            " StepConfig(tau=1e-4), 1e-3)\n"
            "t0 = time.perf_counter()\n"
            "evolve(g, make_profile(g, 'cosine'), ModelParams(0.1, 4*np.pi),"
            " StepConfig(tau=1e-4), 0.05)\n"
            "print(time.perf_counter() - t0)\n")
    env = dict(os.environ, QDD_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True)
    return float(out.stdout.strip())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--sizes", default="201,801,3201")
    ap.add_argument("--skip-e2e", action="store_true")
    args = ap.parse_args()
    if numba_backend is None:
        sys.exit("numba backend unavailable (QDD_NUMBA=0 or numba missing)")

    print(f"{'kernel':>18}  {'N':>5}  {'numpy (us)':>11}  {'numba (us)':>11}  "
          f"{'speedup':>8}  {'max rel diff':>12}")
    print("-" * 76)
    for N in (int(s) for s in args.sizes.split(",")):
        for name, kargs in _inputs(N).items():
            t_np, out_np = _time(getattr(numpy_backend, name), kargs, args.repeat)
            t_nb, out_nb = _time(getattr(numba_backend, name), kargs, args.repeat)
            print(f"{name:>18}  {N:>5}  {t_np * 1e6:>11.1f}  {t_nb * 1e6:>11.1f}  "
                  f"{t_np / t_nb:>7.1f}x  {_maxdiff(out_nb, out_np):>12.2e}")

    if not args.skip_e2e:
        print("\nend-to-end: radial N=201, sigma=4pi, eps=0.1, 500 steps")
        t_np, t_nb = end_to_end("0"), end_to_end("1")
        print(f"numpy {t_np:.2f} s   numba {t_nb:.2f} s   speedup {t_np / t_nb:.1f}x")


if __name__ == "__main__":
    main()
