"""Training configurations and the epoch loop.

Defaults encode the published training recipes: train on the smallest problem
size with short rollouts (Knap50/Bin50 at K=100, TSP20 at K=40), 256 fresh
instances per epoch, and the per-trainer temperature ranges. A config file
may override any field; unknown keys are rejected.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .. import policy as P
from ..errors import ConfigError
from ..rng import derive
from .es import es_epoch
from .optim import AdamState, SgdMomentumState
from .ppo import ppo_epoch


@dataclass
class PpoConfig:
    lr: float = 2e-4
    weight_decay: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    gamma: float = 0.9
    clip_eps: float = 0.25
    gae_lambda: float = 0.9
    update_epochs: int = 4
    epochs: int = 1000
    batch: int = 256
    n: int = 50
    k: int = 100
    t0: float = 1.0
    tk: float = 0.1
    a: float = 1.0
    b: float = 100.0

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("gamma must be in (0, 1]")
        if self.clip_eps <= 0.0:
            raise ConfigError("clip_eps must be positive")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ConfigError("gae_lambda must be in [0, 1]")


@dataclass
class EsConfig:
    population: int = 16
    sigma: float = 0.05
    lr: float = 1e-3
    momentum: float = 0.9
    mirrored: bool = False
    epochs: int = 1000
    batch: int = 256
    n: int = 50
    k: int = 100
    t0: float = 1.0
    tk: float = 0.1
    a: float = 1.0
    b: float = 100.0

    def __post_init__(self):
        if self.population < 2:
            raise ConfigError("population must be >= 2")
        if self.sigma <= 0.0:
            raise ConfigError("sigma must be positive")


# (problem, trainer) -> field overrides on top of the dataclass defaults
_DEFAULTS = {
    ("knapsack", "ppo"): {},
    ("knapsack", "es"): {},
    ("binpacking", "ppo"): {},
    ("binpacking", "es"): {"t0": 0.1, "tk": 1e-4},
    ("tsp", "ppo"): {"n": 20, "k": 40, "tk": 1e-2},
    ("tsp", "es"): {"n": 20, "k": 40, "tk": 1e-4, "epochs": 10000},
    ("rosenbrock", "ppo"): {"n": 1},
    ("rosenbrock", "es"): {"n": 1},
}


def default_config(problem: str, trainer: str):
    try:
        overrides = _DEFAULTS[(problem, trainer)]
    except KeyError:
        raise ConfigError(f"no trainer {trainer!r} for problem {problem!r}") from None
    cls = PpoConfig if trainer == "ppo" else EsConfig
    return cls(**overrides)


def config_from_dict(problem: str, trainer: str, overrides: dict | None):
    cfg = default_config(problem, trainer)
    if not overrides:
        return cfg
    valid = {f.name for f in fields(cfg)}
    bad = set(overrides) - valid
    if bad:
        raise ConfigError(
            f"unknown config keys {sorted(bad)}; valid keys: {sorted(valid)}")
    return replace(cfg, **overrides)


def make_training_instances(problem: str, cfg, master_seed: int, epoch: int):
    from .. import harness  # local import: harness pulls in baselines
    gen_rng = derive(master_seed, 1 + epoch, 0)
    if problem == "knapsack":
        return harness.knapsack_instances(cfg.n, cfg.batch, gen_rng)
    if problem == "binpacking":
        return harness.binpacking_instances(cfg.n, cfg.batch, gen_rng)
    if problem == "tsp":
        return harness.tsp_instances(cfg.n, cfg.batch, gen_rng)
    if problem == "rosenbrock":
        from ..problems.rosenbrock import RosenbrockInstance
        return [RosenbrockInstance(cfg.a, cfg.b)] * cfg.batch
    raise ConfigError(f"unknown problem {problem!r}")


def train(problem: str, trainer: str, cfg, master_seed: int,
          out_path: str | None = None, curve_path: str | None = None,
          workers=None, timing: bool = True, init: dict | None = None,
          log=None) -> dict:
    """Full training run; returns {"bundle", "critic", "curve"} and optionally
    writes the checkpoint (atomically) plus a per-epoch curve CSV."""
    if trainer not in ("es", "ppo"):
        raise ConfigError(f"trainer must be 'es' or 'ppo', got {trainer!r}")
    if init is not None:
        bundle = init["bundle"].copy()
        critic = None if init.get("critic") is None else init["critic"].copy()
        if bundle.problem != problem:
            raise ConfigError(f"init checkpoint is for {bundle.problem!r}, not {problem!r}")
    else:
        bundle = P.random_policy(problem, derive(master_seed, 0, 0))
        critic = None
    if trainer == "ppo" and critic is None:
        critic = P.random_critic(problem, derive(master_seed, 0, 1))

    if trainer == "ppo":
        pol_state = AdamState.zeros(P.flatten_params(bundle.nets).size)
        crit_state = AdamState.zeros(P.flatten_params([critic]).size)
    else:
        sgd_state = SgdMomentumState.zeros(P.flatten_params(bundle.nets).size)

    curve = []
    for epoch in range(cfg.epochs):
        tic = time.perf_counter()
        instances = make_training_instances(problem, cfg, master_seed, epoch)
        if trainer == "ppo":
            stats = ppo_epoch(problem, instances, bundle, critic, cfg,
                              master_seed, epoch, pol_state, crit_state, workers)
        else:
            stats = es_epoch(problem, instances, bundle, cfg,
                             master_seed, epoch, sgd_state, workers)
        wall_ms = (time.perf_counter() - tic) * 1e3 if timing else 0.0
        curve.append({
            "epoch": epoch,
            "mean_best_energy": stats["mean_best_energy"],
            "mean_acceptance_rate": stats["mean_acceptance"],
            "wall_ms": wall_ms,
        })
        if log is not None:
            log(f"epoch {epoch:5d}  best_energy {stats['mean_best_energy']:12.5f}  "
                f"acc_rate {stats['mean_acceptance']:.3f}  wall_ms {wall_ms:.0f}")

    config_echo = {"problem": problem, "trainer": trainer, **asdict(cfg)}
    if out_path is not None:
        P.save_checkpoint(out_path, bundle, critic, trainer, master_seed, config_echo)
    if curve_path is not None:
        write_curve(curve_path, curve)
    return {"bundle": bundle, "critic": critic, "curve": curve, "config": config_echo}


def write_curve(path: str, curve: list) -> None:
    from ..serialize import atomic_write_text, format_float
    lines = ["epoch,mean_best_energy,mean_acceptance_rate,wall_ms"]
    for row in curve:
        lines.append(",".join([
            str(row["epoch"]),
            format_float(float(row["mean_best_energy"])),
            format_float(float(row["mean_acceptance_rate"])),
            format_float(float(row["wall_ms"])),
        ]))
    atomic_write_text(path, "\n".join(lines) + "\n")
