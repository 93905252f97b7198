"""Benchmark of the numba rollout kernels against the pure-numpy fallback.

Times both implementations on identical batches for each task and prints a
comparison table; run via `dsmppi bench`.
"""

from __future__ import annotations

import time

import numpy as np

from . import kernels
from .envs import cartpole_task, truck_task


def _time_fn(fn, args, repeats: int) -> float:
    fn(*args)  # warmup / JIT compile
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _kernel_args(task, n: int, horizon: int, rng):
    x0 = np.zeros(4) if task.name == "truck" else np.array([0.0, 0.0, np.pi, 0.0])
    c = task.cost
    if task.name == "cartpole":
        controls = rng.normal(0.0, 10.0, (n, horizon))
        from .envs import (CART_MASS, CARTPOLE_DT, GRAVITY, POLE_HALF_LENGTH,
                           POLE_MASS)
        return (x0, controls, float(task.u_min[0]), float(task.u_max[0]),
                CARTPOLE_DT, CART_MASS, POLE_MASS, POLE_HALF_LENGTH, GRAVITY,
                c.q, float(c.r[0]), c.q_terminal, c.x_goal)
    controls = rng.normal(0.0, 1.0, (n, horizon, 2))
    from .envs import CAB_LENGTH, DIST_MAX, STEER_MAX, TRAILER_LENGTH
    return (x0, controls, task.u_min, task.u_max, TRAILER_LENGTH, CAB_LENGTH,
            STEER_MAX, DIST_MAX, 0, c.q, c.r, c.q_terminal, c.x_goal)


def run_benchmark(n_samples: int = 100, repeats: int = 50, seed: int = 0) -> list[dict]:
    """Return per-task timing rows for both backends; also checks agreement."""
    rng = np.random.default_rng(seed)
    rows = []
    cases = [(cartpole_task(), 30, kernels.cartpole_costs_numba, kernels.cartpole_costs_numpy),
             (truck_task(), 15, kernels.truck_costs_numba, kernels.truck_costs_numpy)]
    for task, horizon, fn_numba, fn_numpy in cases:
        args = _kernel_args(task, n_samples, horizon, rng)
        t_numpy = _time_fn(fn_numpy, args, repeats)
        row = {"task": task.name, "n": n_samples, "horizon": horizon,
               "numpy_ms": t_numpy * 1e3, "numba_ms": float("nan"),
               "speedup": float("nan"), "max_abs_diff": float("nan")}
        if kernels.HAVE_NUMBA:
            t_numba = _time_fn(fn_numba, args, repeats)
            diff = float(np.max(np.abs(fn_numba(*args) - fn_numpy(*args))))
            row.update(numba_ms=t_numba * 1e3, speedup=t_numpy / t_numba,
                       max_abs_diff=diff)
        rows.append(row)
    return rows


def print_benchmark(rows) -> None:
    print(f"active backend: {kernels.backend_name()} "
          f"(numba importable: {kernels.HAVE_NUMBA})")
    print(f"{'task':<10} {'N':>5} {'H':>4} {'numpy ms':>10} {'numba ms':>10} "
          f"{'speedup':>8} {'max|diff|':>10}")
    for r in rows:
        print(f"{r['task']:<10} {r['n']:>5} {r['horizon']:>4} "
              f"{r['numpy_ms']:>10.3f} {r['numba_ms']:>10.3f} "
              f"{r['speedup']:>8.1f} {r['max_abs_diff']:>10.2e}")
