"""Rosenbrock's banana function, the continuous toy problem.

Proposals add a Gaussian step to the current point; the per-axis standard
deviations come from the policy net. There is no incremental delta: the
energy is cheap enough to evaluate twice per step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NAME = "rosenbrock"
STAGES = (("step_sigma", 2),)
CRITIC_DIM = 2

# start-point box for random initial solutions
START_LOW = -2.0
START_HIGH = 2.0


@dataclass(frozen=True)
class RosenbrockInstance:
    a: float = 1.0
    b: float = 100.0

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("b must be positive")

    @property
    def n(self) -> int:
        return 1  # one feature row: the point itself


@dataclass
class RosenbrockPoint:
    x0: float
    x1: float

    def copy(self) -> "RosenbrockPoint":
        return RosenbrockPoint(self.x0, self.x1)


def energy(inst: RosenbrockInstance, p: RosenbrockPoint) -> float:
    return (inst.a - p.x0) ** 2 + inst.b * (p.x1 - p.x0 * p.x0) ** 2


def initial(inst: RosenbrockInstance, rng: np.random.Generator) -> RosenbrockPoint:
    """Uniform start in the square [START_LOW, START_HIGH)^2."""
    span = START_HIGH - START_LOW
    x0 = START_LOW + span * rng.random()
    x1 = START_LOW + span * rng.random()
    return RosenbrockPoint(x0, x1)


def apply(inst: RosenbrockInstance, p: RosenbrockPoint, action) -> tuple[RosenbrockPoint, float]:
    """Translate by `action`; delta from two full energy evaluations."""
    q = RosenbrockPoint(p.x0 + float(action[0]), p.x1 + float(action[1]))
    return q, energy(inst, q) - energy(inst, p)


def features(inst: RosenbrockInstance, p: RosenbrockPoint, temperature: float) -> np.ndarray:
    return np.array([[p.x0, p.x1]], dtype=np.float64)


def validate(inst: RosenbrockInstance, p: RosenbrockPoint, tol: float = 1e-9) -> None:
    assert np.isfinite(p.x0) and np.isfinite(p.x1), "non-finite point"


def instance_to_json(inst: RosenbrockInstance) -> dict:
    return {"problem": NAME, "a": inst.a, "b": inst.b}


def instance_from_json(obj: dict) -> RosenbrockInstance:
    return RosenbrockInstance(float(obj["a"]), float(obj["b"]))
