"""Reward definitions and generalized advantage estimation."""

from __future__ import annotations

import numpy as np

from ..rollout import Trajectory


def immediate_gain(traj: Trajectory, k: int) -> float:
    """Per-step reward: energy drop E(x_k) - E(x_{k+1}); zero on rejection."""
    return float(traj.energy_before[k] - traj.energy_after[k])


def primal_reward(traj: Trajectory) -> float:
    """Terminal reward: negated best energy seen over the rollout (incl. x_0)."""
    return -traj.best_energy


def gae_advantages(rewards, values, gamma: float, lam: float):
    """GAE over a finite rollout.

    `values` has one more entry than `rewards`: the terminal state's value is
    the critic's own estimate (the final state is not absorbing, so it is not
    zeroed). Returns (advantages, returns) with returns = advantages + values.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    K = rewards.shape[0]
    if values.shape[0] != K + 1:
        raise ValueError(f"need {K + 1} values for {K} rewards, got {values.shape[0]}")
    deltas = rewards + gamma * values[1:] - values[:-1]
    adv = np.empty(K)
    run = 0.0
    for k in range(K - 1, -1, -1):
        run = deltas[k] + gamma * lam * run
        adv[k] = run
    return adv, adv + values[:-1]


def gae_advantages_batch(rewards, values, gamma: float, lam: float):
    """Vectorized GAE across a batch: rewards (B, K), values (B, K+1)."""
    deltas = rewards + gamma * values[:, 1:] - values[:, :-1]
    adv = np.empty_like(rewards)
    run = np.zeros(rewards.shape[0])
    for k in range(rewards.shape[1] - 1, -1, -1):
        run = deltas[:, k] + gamma * lam * run
        adv[:, k] = run
    return adv, adv + values[:, :-1]
