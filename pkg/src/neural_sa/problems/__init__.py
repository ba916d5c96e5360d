"""Problem kernels: instances, solutions, energies, moves and feature layouts."""

from __future__ import annotations

from . import binpacking, knapsack, rosenbrock, tsp

PROBLEMS = {
    "knapsack": knapsack,
    "binpacking": binpacking,
    "tsp": tsp,
    "rosenbrock": rosenbrock,
}

# integer ids used by the rollout kernels
PROBLEM_IDS = {"knapsack": 0, "binpacking": 1, "tsp": 2, "rosenbrock": 3}


def get(name: str):
    try:
        return PROBLEMS[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; expected one of {sorted(PROBLEMS)}") from None


def instance_from_json(obj: dict):
    """Decode one instance from its JSON object form ({"problem": ..., fields})."""
    mod = get(obj["problem"])
    return mod.instance_from_json(obj)


def instance_to_json(name: str, inst) -> dict:
    return get(name).instance_to_json(inst)
