"""Optimizers over flat parameter vectors: Adam with decoupled weight decay,
and SGD with (heavy-ball) momentum for the ES updates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @staticmethod
    def zeros(n: int) -> "AdamState":
        return AdamState(np.zeros(n), np.zeros(n), 0)


def adam_step(params: np.ndarray, grad: np.ndarray, state: AdamState,
              lr: float, weight_decay: float = 0.0,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> np.ndarray:
    """One Adam step with bias correction; decay shrinks params *before* the
    moment update (decoupled, multiplicative)."""
    if weight_decay != 0.0:
        params = params * (1.0 - lr * weight_decay)
    state.t += 1
    state.m = beta1 * state.m + (1.0 - beta1) * grad
    state.v = beta2 * state.v + (1.0 - beta2) * grad * grad
    mhat = state.m / (1.0 - beta1 ** state.t)
    vhat = state.v / (1.0 - beta2 ** state.t)
    return params - lr * mhat / (np.sqrt(vhat) + eps)


@dataclass
class SgdMomentumState:
    velocity: np.ndarray

    @staticmethod
    def zeros(n: int) -> "SgdMomentumState":
        return SgdMomentumState(np.zeros(n))


def sgd_momentum_step(params: np.ndarray, grad: np.ndarray, state: SgdMomentumState,
                      lr: float, momentum: float = 0.9) -> np.ndarray:
    """v <- momentum * v + g; params <- params - lr * v."""
    state.velocity = momentum * state.velocity + grad
    return params - lr * state.velocity
