"""Exponential multiplicative cooling schedule and the Metropolis acceptance rule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidScheduleError, ScheduleRangeError

__all__ = ["TemperatureSchedule", "compute_alpha", "temperature_at", "mh_accept"]

# Below this temperature exp(-delta/T) under/overflows; fall back to the
# zero-temperature rule (accept only non-increasing moves).
TEMP_FLOOR = 1e-300


def compute_alpha(t0: float, tK: float, steps: int) -> float:
    """Per-step decay factor so that t0 * alpha**steps == tK."""
    if not (t0 > 0.0 and tK > 0.0):
        raise InvalidScheduleError(f"temperatures must be positive, got t0={t0}, tK={tK}")
    if tK > t0:
        raise InvalidScheduleError(f"final temperature {tK} exceeds initial {t0}")
    if steps < 1:
        raise InvalidScheduleError(f"steps must be >= 1, got {steps}")
    return (tK / t0) ** (1.0 / steps)


@dataclass(frozen=True)
class TemperatureSchedule:
    """Geometric cooling from t0 down to tK over `steps` steps.

    The temperature at step k is t0 * alpha**k with alpha = (tK/t0)**(1/steps),
    so the endpoint t0 * alpha**steps recovers tK up to rounding. Step 0 is
    the first Metropolis test of a rollout.
    """

    t0: float
    tK: float
    steps: int
    alpha: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "alpha", compute_alpha(self.t0, self.tK, self.steps))

    def temperature_at(self, k: int) -> float:
        if k < 0 or k > self.steps:
            raise ScheduleRangeError(f"step {k} outside [0, {self.steps}]")
        return self.t0 * self.alpha**k

    def temperatures(self) -> np.ndarray:
        """Temperatures for steps 0..steps-1, the ones a rollout consumes."""
        ks = np.arange(self.steps, dtype=np.float64)
        return self.t0 * np.power(self.alpha, ks)


def temperature_at(schedule: TemperatureSchedule, k: int) -> float:
    return schedule.temperature_at(k)


def mh_accept(delta_e: float, temperature: float, u: float) -> bool:
    """Metropolis rule: accept iff u < exp(-delta_e / temperature).

    `u` is drawn uniform on [0,1) by the caller, so downhill or flat moves
    (delta_e <= 0) are always accepted.
    """
    if temperature < TEMP_FLOOR:
        return delta_e <= 0.0
    x = -delta_e / temperature
    if x >= 0.0:
        return True
    return u < math.exp(x)
