"""Compiled vs numpy log-sum-exp kernel, alone and inside a full bridge solve.

    python benchmarks/bench_kernels.py [--sizes 256 512 1024] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from ldpjko import _accel, _kernels_py
from ldpjko.bridge import solve_bridge
from ldpjko.grid import GridDensity
from ldpjko.heat import KernelParams, log_kernel

try:
    from ldpjko import _kernels as compiled
except ImportError:
    compiled = None


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench_kernel(n, repeat):
    x = (np.arange(n) + 0.5) / n
    logk = np.ascontiguousarray(log_kernel(x[:, None], x[None, :], KernelParams(0.05)))
    pot = np.random.default_rng(0).standard_normal(n)
    out = np.empty(n)
    rows = {"python": best_of(lambda: _kernels_py.lse_rows(logk, pot, out), repeat)}
    if compiled is not None:
        rows["cython"] = best_of(lambda: compiled.lse_rows(logk, pot, out), repeat)
    return rows


def bench_solve(n, repeat):
    rho0 = GridDensity.uniform(1.0, n)
    rho1 = GridDensity.from_function(lambda x: 1 + 0.2 * np.cos(2 * np.pi * x), 1.0, n)
    p = KernelParams(max(0.05, 4.0 / n))
    saved = _accel.lse_rows
    rows = {}
    try:
        for name, fn in (("python", _kernels_py.lse_rows), ("cython", getattr(compiled, "lse_rows", None))):
            if fn is None:
                continue
            _accel.lse_rows = fn
            rows[name] = best_of(lambda: solve_bridge(rho0, rho1, p, tol=1e-9), max(1, repeat // 2))
    finally:
        _accel.lse_rows = saved
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[256, 512, 1024])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"active backend: {_accel.BACKEND}")
    print(f"{'case':<22}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}")
    for label, bench in (("lse_rows", bench_kernel), ("solve_bridge", bench_solve)):
        for n in args.sizes:
            r = bench(n, args.repeat)
            py, cy = r["python"] * 1e3, r.get("cython", float("nan")) * 1e3
            print(f"{f'{label} n={n}':<22}{py:>14.3f}{cy:>14.3f}{py / cy:>10.2f}")


if __name__ == "__main__":
    main()
