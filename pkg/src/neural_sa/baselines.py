"""Classical baselines and the vanilla (uniform-proposal) annealer.

A zero-weight policy already produces exactly uniform probabilities over
unmasked actions through the masked softmax, so vanilla SA is the same engine
with all-zero nets; the fixed-sigma Gaussian baseline for Rosenbrock sets the
output bias of the sigma net to log(sigma).
"""

from __future__ import annotations

import math

import numpy as np

from . import policy as P
from .problems.binpacking import BinPackingInstance, BinPackingSolution
from .problems.knapsack import KnapsackInstance, KnapsackSolution
from .rollout import SamplingMode, batch_anneal
from .schedule import TemperatureSchedule


def uniform_policy(problem: str, sigma: float = 1.0) -> P.PolicyBundle:
    """Uniform proposals over unmasked actions (fixed-sigma Gaussian for
    Rosenbrock)."""
    bundle = P.zero_policy(problem)
    if problem == "rosenbrock":
        bundle.nets[0].b2[:] = math.log(sigma)
    return bundle


def greedy_value_weight(inst: KnapsackInstance):
    """Pack items by descending value-to-weight ratio while they fit."""
    ratio = inst.values / inst.weights
    order = sorted(range(inst.n), key=lambda i: (-ratio[i], i))
    bits = np.zeros(inst.n, dtype=np.uint8)
    total_w = 0.0
    total_v = 0.0
    for i in order:
        if total_w + inst.weights[i] <= inst.capacity:
            bits[i] = 1
            total_w += inst.weights[i]
            total_v += inst.values[i]
    return KnapsackSolution(bits, total_w, total_v), total_v


def ffd(inst: BinPackingInstance):
    """First-fit-decreasing: heaviest first, into the lowest-indexed open bin."""
    order = sorted(range(inst.n), key=lambda i: (-inst.weights[i], i))
    n = inst.n
    free = np.full(n, inst.capacity)
    counts = np.zeros(n, dtype=np.int32)
    bin_of = np.zeros(n, dtype=np.int32)
    n_open = 0
    for i in order:
        w = inst.weights[i]
        placed = False
        for j in range(n_open):
            if free[j] >= w:
                bin_of[i] = j
                free[j] -= w
                counts[j] += 1
                placed = True
                break
        if not placed:
            bin_of[i] = n_open
            free[n_open] = inst.capacity - w
            counts[n_open] = 1
            n_open += 1
    return BinPackingSolution(bin_of, free, counts, n_open), n_open


def random_search_knapsack(inst: KnapsackInstance, trials: int, seed) -> float:
    """Best value over `trials` random fills (permute, insert until overflow).

    This sampling scheme is this package's definition; the procedure behind
    the published random-search numbers is not specified anywhere.
    """
    from .rng import derive
    rng = seed if isinstance(seed, np.random.Generator) else derive(int(seed))
    best = 0.0
    for _ in range(trials):
        perm = rng.permutation(inst.n)
        total_w = 0.0
        total_v = 0.0
        for i in perm:
            if total_w + inst.weights[i] > inst.capacity:
                break
            total_w += inst.weights[i]
            total_v += inst.values[i]
        if total_v > best:
            best = total_v
    return best


def fixed_sigma_sweep(a: float, b: float, sigmas, k: int, t0: float, tk: float,
                      n_instances: int, seed: int, workers=None) -> list:
    """Vanilla Gaussian SA at each fixed sigma; returns one result row per sigma."""
    from .problems.rosenbrock import RosenbrockInstance
    schedule = TemperatureSchedule(t0, tk, k)
    instances = [RosenbrockInstance(a, b)] * n_instances
    rows = []
    for sigma in sigmas:
        pol = uniform_policy("rosenbrock", sigma=sigma)
        trajs = batch_anneal("rosenbrock", instances, pol, schedule,
                             SamplingMode.SAMPLED, master_seed=seed, workers=workers)
        best = np.array([t.best_energy for t in trajs])
        rows.append({
            "sigma": float(sigma),
            "mean_best_energy": float(best.mean()),
            "std_best_energy": float(best.std()),
            "n": n_instances,
        })
    return rows


def sweep_to_csv(rows: list) -> str:
    from .serialize import format_float
    lines = ["sigma,mean_best_energy,std_best_energy,n"]
    for r in rows:
        lines.append(",".join([
            format_float(r["sigma"]), format_float(r["mean_best_energy"]),
            format_float(r["std_best_energy"]), str(r["n"]),
        ]))
    return "\n".join(lines) + "\n"
