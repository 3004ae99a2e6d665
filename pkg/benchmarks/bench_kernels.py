"""Time the numba kernels against the numpy fallback on identical inputs.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``. The first numba
call includes compilation and is reported separately.
"""
import argparse
import time

import numpy as np

from combqns import _accel


def _inputs(rng, n_intervals=16, m=20000, ntraj=200, nsteps=2000):
    starts = np.cumsum(rng.uniform(0.1, 1.0, n_intervals)) * 1e-7
    widths = rng.uniform(0.1, 1.0, n_intervals) * 1e-7
    vals = rng.normal(size=(n_intervals, 9)) + 1j * rng.normal(size=(n_intervals, 9))
    w = rng.normal(scale=3e7, size=m)
    wp = rng.normal(scale=3e7, size=m)
    h = rng.normal(scale=1e6, size=(ntraj, nsteps, 3))
    return starts, widths, vals, w, wp, h


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _accel.ff1_numba is None:
        raise SystemExit("numba is not available")
    rng = np.random.default_rng(7)
    starts, widths, vals, w, wp, h = _inputs(rng)
    ya, yb = vals[:, :3], vals[:, 3:6]
    cases = {
        "ff1": (lambda: _accel.ff1_numpy(starts, widths, vals, w),
                lambda: _accel.ff1_numba(starts, widths, vals, w)),
        "ff2": (lambda: _accel.ff2_numpy(starts, widths, ya, yb, w, wp),
                lambda: _accel.ff2_numba(starts, widths, ya, yb, w, wp)),
        "su2_propagate": (lambda: _accel.su2_propagate_numpy(h, 1e-9),
                          lambda: _accel.su2_propagate_numba(h, 1e-9)),
    }
    print(f"{'kernel':<15}{'compile+first (s)':>18}{'numpy (s)':>12}{'numba (s)':>12}{'speedup':>10}{'max |diff|':>13}")
    for name, (f_np, f_nb) in cases.items():
        t0 = time.perf_counter()
        f_nb()
        first = time.perf_counter() - t0
        t_np, r_np = _best(f_np, args.repeat)
        t_nb, r_nb = _best(f_nb, args.repeat)
        diff = float(np.max(np.abs(r_np - r_nb)))
        print(f"{name:<15}{first:>18.3f}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>10.1f}{diff:>13.2e}")


if __name__ == "__main__":
    main()
