"""0-1 knapsack: maximise packed value under a weight cap.

Energy is the negated packed value, so the annealer's minimisation matches the
usual maximisation convention. Moves flip one bit; flipping 0 -> 1 is only
feasible while the capacity allows it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InfeasibleActionError

NAME = "knapsack"
# one proposal stage: a categorical over the N bit flips
STAGES = (("flip", 5),)
CRITIC_DIM = 5


@dataclass(frozen=True)
class KnapsackInstance:
    weights: np.ndarray  # (N,) positive
    values: np.ndarray  # (N,) positive
    capacity: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "values", v)
        if w.shape != v.shape or w.ndim != 1:
            raise ValueError("weights and values must be 1-d arrays of equal length")
        if not (np.all(w > 0) and np.all(v > 0)):
            raise ValueError("weights and values must be positive")
        if not self.capacity > 0:
            raise ValueError("capacity must be positive")

    @property
    def n(self) -> int:
        return self.weights.shape[0]


@dataclass
class KnapsackSolution:
    bits: np.ndarray  # (N,) uint8
    total_weight: float
    total_value: float

    def copy(self) -> "KnapsackSolution":
        return KnapsackSolution(self.bits.copy(), self.total_weight, self.total_value)


def initial(inst: KnapsackInstance, rng=None) -> KnapsackSolution:
    """Empty knapsack: the trivial feasible start."""
    return KnapsackSolution(np.zeros(inst.n, dtype=np.uint8), 0.0, 0.0)


def energy(inst: KnapsackInstance, sol: KnapsackSolution) -> float:
    return -float(np.dot(inst.values, sol.bits))


def mask(inst: KnapsackInstance, sol: KnapsackSolution) -> np.ndarray:
    """Feasible flips: any removal, or an insertion that still fits."""
    fits = sol.total_weight + inst.weights <= inst.capacity
    return (sol.bits == 1) | fits


def apply(inst: KnapsackInstance, sol: KnapsackSolution, i: int):
    """Flip bit i; returns (new solution, energy delta)."""
    if not mask(inst, sol)[i]:
        raise InfeasibleActionError(f"flip of item {i} violates capacity")
    out = sol.copy()
    if out.bits[i]:
        out.bits[i] = 0
        out.total_weight -= inst.weights[i]
        out.total_value -= inst.values[i]
        delta = float(inst.values[i])
    else:
        out.bits[i] = 1
        out.total_weight += inst.weights[i]
        out.total_value += inst.values[i]
        delta = -float(inst.values[i])
    return out, delta


def features(inst: KnapsackInstance, sol: KnapsackSolution, temperature: float) -> np.ndarray:
    """Per-item rows [x_i, w_i, v_i, W, T]."""
    n = inst.n
    out = np.empty((n, 5), dtype=np.float64)
    out[:, 0] = sol.bits
    out[:, 1] = inst.weights
    out[:, 2] = inst.values
    out[:, 3] = inst.capacity
    out[:, 4] = temperature
    return out


def validate(inst: KnapsackInstance, sol: KnapsackSolution, tol: float = 1e-9) -> None:
    w = float(np.dot(inst.weights, sol.bits))
    v = float(np.dot(inst.values, sol.bits))
    assert w <= inst.capacity + tol, "capacity violated"
    assert abs(w - sol.total_weight) <= tol, "stale weight cache"
    assert abs(v - sol.total_value) <= tol, "stale value cache"


def instance_to_json(inst: KnapsackInstance) -> dict:
    return {
        "problem": NAME,
        "weights": inst.weights.tolist(),
        "values": inst.values.tolist(),
        "capacity": inst.capacity,
    }


def instance_from_json(obj: dict) -> KnapsackInstance:
    return KnapsackInstance(
        np.asarray(obj["weights"], dtype=np.float64),
        np.asarray(obj["values"], dtype=np.float64),
        float(obj["capacity"]),
    )
