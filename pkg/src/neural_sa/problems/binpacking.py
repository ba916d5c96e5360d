"""Bin packing: place all items into as few unit-capacity bins as possible.

A solution maps each of the N items to one of N available bins; the energy is
the number of occupied bins. A move picks an item, then a destination bin with
enough free capacity. Occupancy is tracked by integer item counts so that the
energy stays exact; free capacities are floating caches refreshed whenever a
bin empties.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InfeasibleActionError

NAME = "binpacking"
# two proposal stages: pick an item, then a destination bin
STAGES = (("item", 3), ("bin", 3))
CRITIC_DIM = 3


@dataclass(frozen=True)
class BinPackingInstance:
    weights: np.ndarray  # (N,) positive
    capacity: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        if w.ndim != 1 or not np.all(w > 0):
            raise ValueError("weights must be a 1-d array of positive reals")
        if self.capacity < float(np.max(w)):
            raise ValueError("capacity below the largest item: no feasible solution")

    @property
    def n(self) -> int:
        return self.weights.shape[0]


@dataclass
class BinPackingSolution:
    bin_of_item: np.ndarray  # (N,) int32
    free_capacity: np.ndarray  # (N,) float64
    counts: np.ndarray  # (N,) int32 items per bin
    occupied_bins: int

    def copy(self) -> "BinPackingSolution":
        return BinPackingSolution(
            self.bin_of_item.copy(),
            self.free_capacity.copy(),
            self.counts.copy(),
            self.occupied_bins,
        )


def initial(inst: BinPackingInstance, rng=None) -> BinPackingSolution:
    """One item per bin: the trivial feasible start with energy N."""
    n = inst.n
    return BinPackingSolution(
        np.arange(n, dtype=np.int32),
        inst.capacity - inst.weights,
        np.ones(n, dtype=np.int32),
        n,
    )


def energy(inst: BinPackingInstance, sol: BinPackingSolution) -> float:
    return float(sol.occupied_bins)


def bin_mask(inst: BinPackingInstance, sol: BinPackingSolution, i: int) -> np.ndarray:
    """Destination bins for item i: enough free room, and not its own bin."""
    m = sol.free_capacity >= inst.weights[i]
    m[sol.bin_of_item[i]] = False
    return m


def apply(inst: BinPackingInstance, sol: BinPackingSolution, i: int, j: int):
    """Move item i to bin j; returns (new solution, energy delta in {-1,0,+1})."""
    if not bin_mask(inst, sol, i)[j]:
        raise InfeasibleActionError(f"bin {j} cannot take item {i}")
    out = sol.copy()
    w = float(inst.weights[i])
    src = int(out.bin_of_item[i])
    delta = 0
    out.counts[src] -= 1
    if out.counts[src] == 0:
        out.free_capacity[src] = inst.capacity  # exact reset kills float drift
        out.occupied_bins -= 1
        delta -= 1
    else:
        out.free_capacity[src] += w
    if out.counts[j] == 0:
        out.free_capacity[j] = inst.capacity - w
        out.occupied_bins += 1
        delta += 1
    else:
        out.free_capacity[j] -= w
    out.counts[j] += 1
    out.bin_of_item[i] = j
    return out, float(delta)


def item_features(inst: BinPackingInstance, sol: BinPackingSolution, temperature: float) -> np.ndarray:
    """Per-item rows [w_i, free capacity of its bin, T]."""
    n = inst.n
    out = np.empty((n, 3), dtype=np.float64)
    out[:, 0] = inst.weights
    out[:, 1] = sol.free_capacity[sol.bin_of_item]
    out[:, 2] = temperature
    return out


def bin_features(inst: BinPackingInstance, sol: BinPackingSolution, temperature: float, item: int) -> np.ndarray:
    """Per-bin rows [w_item, c_j, T] for the chosen item."""
    n = inst.n
    out = np.empty((n, 3), dtype=np.float64)
    out[:, 0] = inst.weights[item]
    out[:, 1] = sol.free_capacity
    out[:, 2] = temperature
    return out


def validate(inst: BinPackingInstance, sol: BinPackingSolution, tol: float = 1e-9) -> None:
    n = inst.n
    loads = np.zeros(n)
    np.add.at(loads, sol.bin_of_item, inst.weights)
    counts = np.zeros(n, dtype=np.int64)
    np.add.at(counts, sol.bin_of_item, 1)
    assert np.all(loads <= inst.capacity + tol), "bin capacity violated"
    assert np.array_equal(counts, sol.counts), "stale count cache"
    assert np.allclose(inst.capacity - loads, sol.free_capacity, atol=tol), "stale capacity cache"
    assert sol.occupied_bins == int(np.count_nonzero(counts)), "stale occupancy"


def instance_to_json(inst: BinPackingInstance) -> dict:
    return {"problem": NAME, "weights": inst.weights.tolist(), "capacity": inst.capacity}


def instance_from_json(obj: dict) -> BinPackingInstance:
    return BinPackingInstance(np.asarray(obj["weights"], dtype=np.float64), float(obj["capacity"]))
