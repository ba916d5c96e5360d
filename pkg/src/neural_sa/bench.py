"""Benchmark of the compiled kernel against the pure-Python fallback.

Runs the same seeded rollouts on both backends, checks that the trajectories
are bit-identical, and reports steps/second plus the speedup.
"""

from __future__ import annotations

import time

import numpy as np

from . import backend, policy
from .rng import derive
from .rollout import anneal
from .schedule import TemperatureSchedule

CASES = [
    ("knapsack", 50, 500),
    ("binpacking", 50, 500),
    ("tsp", 20, 400),
    ("rosenbrock", 1, 100),
]


def _instance(problem: str, n: int, rng):
    from . import harness
    if problem == "knapsack":
        return harness.knapsack_instances(n, 1, rng)[0]
    if problem == "binpacking":
        return harness.binpacking_instances(n, 1, rng)[0]
    if problem == "tsp":
        return harness.tsp_instances(n, 1, rng)[0]
    from .problems.rosenbrock import RosenbrockInstance
    return RosenbrockInstance()


def _time_backend(name: str, problem, inst, pol, sch, reps: int, min_s: float = 0.2):
    backend.set_backend(name)
    trajs = []
    t0 = time.perf_counter()
    done = 0
    while done < reps or time.perf_counter() - t0 < min_s:
        trajs.append(anneal(problem, inst, pol, sch, "sampled", seed=derive(0, done)))
        done += 1
    dt = (time.perf_counter() - t0) / done
    return dt, trajs[: reps]


def _identical(a, b) -> bool:
    same = (np.array_equal(a.actions, b.actions)
            and np.array_equal(a.energy_after, b.energy_after)
            and np.array_equal(a.accepted, b.accepted)
            and np.array_equal(a.log_probs, b.log_probs))
    if a.actions_real is not None:
        same = same and np.array_equal(a.actions_real, b.actions_real)
    return same


def run_benchmark(cases=None, reps: int = 5, out=print) -> list:
    if not backend.have_cython():
        out("compiled kernel not available; nothing to compare")
        return []
    cases = cases or CASES
    prev = backend.active_backend()
    rows = []
    out(f"{'problem':<12} {'N':>5} {'K':>6} {'python':>12} {'cython':>12} "
        f"{'speedup':>8}  parity")
    try:
        for problem, n, k in cases:
            inst = _instance(problem, n, derive(1234))
            pol = policy.random_policy(problem, derive(99))
            sch = TemperatureSchedule(1.0, 0.01, k)
            dt_py, t_py = _time_backend("python", problem, inst, pol, sch, reps)
            dt_cy, t_cy = _time_backend("cython", problem, inst, pol, sch, reps)
            parity = all(_identical(a, b) for a, b in zip(t_py, t_cy))
            rows.append({
                "problem": problem, "n": n, "k": k,
                "python_steps_per_s": k / dt_py, "cython_steps_per_s": k / dt_cy,
                "speedup": dt_py / dt_cy, "bit_identical": parity,
            })
            out(f"{problem:<12} {n:>5} {k:>6} {k / dt_py:>10.0f}/s {k / dt_cy:>10.0f}/s "
                f"{dt_py / dt_cy:>7.1f}x  {'bit-identical' if parity else 'MISMATCH'}")
    finally:
        backend.set_backend(prev)
    return rows
