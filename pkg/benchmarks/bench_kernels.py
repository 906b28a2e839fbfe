#!/usr/bin/env python3
"""Benchmark the numba kernels against their numpy / pure-Python fallbacks.

Kernels timed:
  * moment RK4 (scalar loop; fallback is the same function uninterpreted)
  * ensemble propagation (fallback is vectorised over trajectory blocks)

Usage:
    python3 benchmarks/bench_kernels.py [--n-traj N] [--tau-end T] [--repeat R]

Setting QFEEDBACK_DISABLE_NUMBA=1 makes the library itself skip compilation;
this script compares both paths in one process instead.
"""
import argparse
import time

import numpy as np

from qfeedback import _accel
from qfeedback.control import optimal_gains
from qfeedback.moments import FIG1_INITIAL, _rk4_kernel
from qfeedback.quadratures import FeedbackGains, OscillatorConfig
from qfeedback.trajectories import EnsembleSpec, GaussianTrajectoryState, run_ensemble


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-traj", type=int, default=100)
    ap.add_argument("--tau-end", type=float, default=60.0)
    ap.add_argument("--moment-steps", type=int, default=50_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    if not _accel.USE_NUMBA:
        print("numba disabled; only the fallback path can be timed")

    s = FIG1_INITIAL
    args_rk4 = (s.x, s.y, s.z, 0.5, 1.0, 1.0, 1.0, 1e-3, args.moment_steps, 100)
    py_rk4 = getattr(_rk4_kernel, "py_func", _rk4_kernel)
    t_py, (ref, _) = best_of(lambda: py_rk4(*args_rk4), 1)
    print(f"moments RK4 {args.moment_steps} steps   python {t_py * 1e3:9.2f} ms")
    if _accel.USE_NUMBA:
        _rk4_kernel(*args_rk4)  # compile
        t_nb, (out, _) = best_of(lambda: _rk4_kernel(*args_rk4), args.repeat)
        print(f"moments RK4 {args.moment_steps} steps   numba  {t_nb * 1e3:9.2f} ms"
              f"   speedup {t_py / t_nb:7.1f}x   max|diff| {np.max(np.abs(out - ref)):.1e}")

    og = optimal_gains(0.25, OscillatorConfig())
    spec = EnsembleSpec(n_traj=args.n_traj, tau_end=args.tau_end, kappa=0.25,
                        gains=FeedbackGains(og.u_tilde, og.v_tilde),
                        initial=GaussianTrajectoryState(0.0, 1.0, FIG1_INITIAL))
    t_np, r_np = best_of(lambda: run_ensemble(spec, use_numba=False), args.repeat)
    print(f"ensemble {args.n_traj} x {spec.n_steps()} steps  numpy  {t_np:9.3f} s")
    if _accel.USE_NUMBA:
        run_ensemble(EnsembleSpec(n_traj=1, tau_end=0.1), use_numba=True)  # compile
        t_nb, r_nb = best_of(lambda: run_ensemble(spec, use_numba=True), args.repeat)
        diff = np.max(np.abs(r_nb.mean_E - r_np.mean_E))
        print(f"ensemble {args.n_traj} x {spec.n_steps()} steps  numba  {t_nb:9.3f} s"
              f"   speedup {t_np / t_nb:7.1f}x   max|dE| {diff:.1e}")


if __name__ == "__main__":
    main()
