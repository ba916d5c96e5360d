"""The annealing loop: sample an action from the policy, Metropolis-test it,
repeat for K steps while the temperature decays.

`anneal` runs one rollout and returns a Trajectory; `batch_anneal` runs one
rollout per instance on independent RNG substreams (derive(master, i)), so
results do not depend on worker count or execution order.
"""

from __future__ import annotations

from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
import os

import numpy as np

from . import backend, problems
from .errors import BatchItemError, DegenerateStateError, ShapeError
from .policy import PolicyBundle
from .rng import derive
from .schedule import TemperatureSchedule


class SamplingMode(Enum):
    SAMPLED = "sampled"
    GREEDY = "greedy"

    @staticmethod
    def parse(name) -> "SamplingMode":
        if isinstance(name, SamplingMode):
            return name
        return SamplingMode(str(name).lower())


StepRecord = namedtuple(
    "StepRecord",
    "action energy_before energy_after accepted log_prob reward temperature auto_rejected",
)


@dataclass
class Trajectory:
    problem: str
    temperatures: np.ndarray  # (K,)
    actions: np.ndarray  # (K, 2) int32; second column -1 for one-stage problems
    actions_real: np.ndarray | None  # (K, 2) float64, Rosenbrock only
    energy_before: np.ndarray
    energy_after: np.ndarray
    accepted: np.ndarray
    auto_rejected: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    best_energy: float
    final_energy: float
    best_solution: object
    final_solution: object
    acceptance_count: int
    train_data: dict | None = None

    def __len__(self) -> int:
        return len(self.energy_before)

    @property
    def records(self) -> list:
        out = []
        for k in range(len(self)):
            if self.actions_real is not None:
                action = (float(self.actions_real[k, 0]), float(self.actions_real[k, 1]))
            elif self.actions[k, 1] >= 0:
                action = (int(self.actions[k, 0]), int(self.actions[k, 1]))
            else:
                action = int(self.actions[k, 0])
            out.append(StepRecord(
                action, float(self.energy_before[k]), float(self.energy_after[k]),
                bool(self.accepted[k]), float(self.log_probs[k]), float(self.rewards[k]),
                float(self.temperatures[k]), bool(self.auto_rejected[k]),
            ))
        return out

    @property
    def acceptance_rate(self) -> float:
        return self.acceptance_count / max(len(self), 1)


def _net_arrays(net):
    return (
        np.ascontiguousarray(net.w1), np.ascontiguousarray(net.b1),
        np.ascontiguousarray(net.w2), np.ascontiguousarray(net.b2),
    )


def _coerce_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return derive(int(seed))


_D1 = np.zeros((1, 1, 1))
_D2 = np.zeros((1, 1), dtype=np.uint8)
_D3 = np.zeros((1, 1))


def anneal(problem: str, instance, policy: PolicyBundle, schedule: TemperatureSchedule,
           mode=SamplingMode.SAMPLED, seed=0, record_features: bool = False) -> Trajectory:
    """Run one rollout of exactly schedule.steps annealing steps."""
    mode = SamplingMode.parse(mode)
    if policy.problem != problem:
        raise ShapeError(f"policy is for {policy.problem!r}, not {problem!r}")
    mod = problems.get(problem)
    rng = _coerce_rng(seed)
    kern = backend.kernel()
    K = schedule.steps
    n = instance.n
    temps = schedule.temperatures()
    t_final = schedule.temperature_at(K)
    greedy = 1 if mode is SamplingMode.GREEDY else 0
    train = 1 if record_features else 0

    act1 = np.full(K, -1, dtype=np.int32)
    act2 = np.full(K, -1, dtype=np.int32)
    e0 = np.zeros(K)
    e1 = np.zeros(K)
    acc = np.zeros(K, dtype=np.uint8)
    aux = np.zeros(K, dtype=np.uint8)
    logp = np.zeros(K)
    rew = np.zeros(K)
    actions_real = None
    train_data = None

    sol = mod.initial(instance, rng)

    if problem == "knapsack":
        if train:
            feat1 = np.zeros((K, n, 5))
            mask1 = np.zeros((K, n), dtype=np.uint8)
            featT = np.zeros((n, 5))
        else:
            feat1, mask1, featT = _D1, _D2, _D3
        bits = sol.bits.copy()
        best_bits = bits.copy()
        w1, b1, w2, b2 = _net_arrays(policy.nets[0])
        best_e, fin_e, n_acc, fail = kern.anneal_knapsack(
            instance.weights, instance.values, instance.capacity, temps, t_final,
            greedy, train, w1, b1, w2, b2, rng,
            bits, sol.total_weight, -float(sol.total_value),
            act1, e0, e1, acc, logp, rew, feat1, mask1, featT, best_bits)
        if fail >= 0:
            raise DegenerateStateError(fail)
        final = _knap_solution(instance, bits)
        best = _knap_solution(instance, best_bits)
        if train:
            train_data = {"feat1": feat1, "mask1": mask1, "featT": featT}
    elif problem == "binpacking":
        if train:
            feat1 = np.zeros((K, n, 3))
            feat2 = np.zeros((K, n, 3))
            mask2 = np.zeros((K, n), dtype=np.uint8)
            featT = np.zeros((n, 3))
        else:
            feat1, feat2, mask2, featT = _D1, _D1, _D2, _D3
        bin_of = sol.bin_of_item.copy()
        counts = sol.counts.copy()
        free = sol.free_capacity.copy()
        best_bin = bin_of.copy()
        iw1, ib1, iw2, ib2 = _net_arrays(policy.nets[0])
        bw1, bb1, bw2, bb2 = _net_arrays(policy.nets[1])
        best_e, fin_e, n_acc, fail = kern.anneal_binpacking(
            instance.weights, instance.capacity, temps, t_final, greedy, train,
            iw1, ib1, iw2, ib2, bw1, bb1, bw2, bb2, rng,
            bin_of, counts, free, sol.occupied_bins,
            act1, act2, e0, e1, acc, aux, logp, rew,
            feat1, feat2, mask2, featT, best_bin)
        final = _bin_solution(instance, bin_of)
        best = _bin_solution(instance, best_bin)
        if train:
            train_data = {"feat1": feat1, "feat2": feat2, "mask2": mask2, "featT": featT}
    elif problem == "tsp":
        if train:
            feat1 = np.zeros((K, n, 7))
            feat2 = np.zeros((K, n, 13))
            mask2 = np.zeros((K, n), dtype=np.uint8)
            featT = np.zeros((n, 7))
        else:
            feat1, feat2, mask2, featT = _D1, _D1, _D2, _D3
        order = sol.order.copy()
        pos = sol.position.copy()
        best_order = order.copy()
        sw1, sb1, sw2, sb2 = _net_arrays(policy.nets[0])
        ew1, eb1, ew2, eb2 = _net_arrays(policy.nets[1])
        best_e, fin_e, n_acc, fail = kern.anneal_tsp(
            instance.coords, temps, t_final, greedy, train,
            sw1, sb1, sw2, sb2, ew1, eb1, ew2, eb2, rng,
            order, pos, sol.length,
            act1, act2, e0, e1, acc, logp, rew,
            feat1, feat2, mask2, featT, best_order)
        final = _tour(instance, order, fin_e)
        best = _tour(instance, best_order, best_e)
        if train:
            train_data = {"feat1": feat1, "feat2": feat2, "mask2": mask2, "featT": featT}
    elif problem == "rosenbrock":
        if train:
            feat1 = np.zeros((K, 1, 2))
            featT = np.zeros((1, 2))
        else:
            feat1, featT = _D1, _D3
        actions_real = np.zeros((K, 2))
        best_x = np.zeros(2)
        w1, b1, w2, b2 = _net_arrays(policy.nets[0])
        best_e, fin_e, n_acc, fail, fx0, fx1 = kern.anneal_rosenbrock(
            instance.a, instance.b, temps, t_final, greedy, train,
            w1, b1, w2, b2, rng, sol.x0, sol.x1,
            actions_real, e0, e1, acc, logp, rew, feat1, featT, best_x)
        from .problems.rosenbrock import RosenbrockPoint
        final = RosenbrockPoint(fx0, fx1)
        best = RosenbrockPoint(float(best_x[0]), float(best_x[1]))
        if train:
            train_data = {"feat1": feat1, "featT": featT}
    else:
        raise ShapeError(f"unknown problem {problem!r}")

    return Trajectory(
        problem=problem, temperatures=temps, actions=np.stack([act1, act2], axis=1),
        actions_real=actions_real, energy_before=e0, energy_after=e1,
        accepted=acc.astype(bool), auto_rejected=aux.astype(bool),
        log_probs=logp, rewards=rew, best_energy=float(best_e),
        final_energy=float(fin_e), best_solution=best, final_solution=final,
        acceptance_count=int(n_acc), train_data=train_data,
    )


def _knap_solution(inst, bits):
    from .problems.knapsack import KnapsackSolution
    return KnapsackSolution(bits, float(np.dot(inst.weights, bits)),
                            float(np.dot(inst.values, bits)))


def _bin_solution(inst, bin_of):
    from .problems.binpacking import BinPackingSolution
    n = inst.n
    counts = np.zeros(n, dtype=np.int32)
    np.add.at(counts, bin_of, 1)
    loads = np.zeros(n)
    np.add.at(loads, bin_of, inst.weights)
    return BinPackingSolution(bin_of, inst.capacity - loads, counts,
                              int(np.count_nonzero(counts)))


def _tour(inst, order, length):
    from .problems.tsp import TspTour
    pos = np.empty(inst.n, dtype=np.int32)
    pos[order] = np.arange(inst.n, dtype=np.int32)
    return TspTour(order, pos, float(length))


def resolve_workers(workers=None) -> int:
    if workers is None:
        workers = os.environ.get("NEURAL_SA_WORKERS", "1")
    workers = int(workers)
    if workers < 1:
        raise ValueError("workers must be >= 1")
    return workers


def batch_anneal(problem: str, instances, policy: PolicyBundle, schedule: TemperatureSchedule,
                 mode=SamplingMode.SAMPLED, master_seed=0, workers=None,
                 record_features: bool = False) -> list:
    """One rollout per instance; element i uses the substream derive(master, i).

    `master_seed` may also be a path tuple (master, p1, ...), in which case
    element i uses derive(master, p1, ..., i).
    """
    mode = SamplingMode.parse(mode)
    workers = resolve_workers(workers)
    path = master_seed if isinstance(master_seed, tuple) else (int(master_seed),)

    def run(i):
        try:
            return anneal(problem, instances[i], policy, schedule, mode,
                          seed=derive(path[0], *path[1:], i),
                          record_features=record_features)
        except Exception as exc:
            raise BatchItemError(i, exc) from exc

    idx = range(len(instances))
    if workers == 1 or len(instances) <= 1:
        return [run(i) for i in idx]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, idx))
