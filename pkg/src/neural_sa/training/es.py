"""Evolution strategies on the flat policy parameter vector.

Each epoch draws a population of Gaussian parameter perturbations, scores
every member by its mean primal reward (negated best energy) over a shared
batch of fresh instances, standardizes the fitness values and feeds the
resulting gradient estimate to SGD with momentum. Rollout seeds are shared
across members (common random numbers), so fitness differences come from the
perturbations alone.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .. import policy as P
from ..rng import derive
from ..rollout import SamplingMode, anneal, resolve_workers
from ..schedule import TemperatureSchedule
from .optim import SgdMomentumState, sgd_momentum_step


def es_gradient(fitness: np.ndarray, eps: np.ndarray, sigma: float) -> np.ndarray:
    """Ascent direction (1 / (pop * sigma)) * sum_p F~_p eps_p, F~ standardized."""
    if fitness.max() == fitness.min():  # zero variance: no signal
        return np.zeros(eps.shape[1])
    mu = fitness.mean()
    sd = fitness.std()
    f = (fitness - mu) / max(sd, 1e-8)
    return (f @ eps) / (fitness.shape[0] * sigma)


def es_epoch(problem: str, instances, bundle: P.PolicyBundle, cfg,
             master_seed: int, epoch: int, state: SgdMomentumState,
             workers=None) -> dict:
    """One ES epoch; mutates `bundle` in place. Returns epoch stats."""
    schedule = TemperatureSchedule(cfg.t0, cfg.tk, cfg.k)
    workers = resolve_workers(workers)
    flat = P.flatten_params(bundle.nets)
    pop = cfg.population
    rng = derive(master_seed, 1 + epoch, 2)
    if cfg.mirrored:
        if pop % 2:
            raise ValueError("mirrored sampling needs an even population")
        half = rng.standard_normal((pop // 2, flat.size)) * cfg.sigma
        eps = np.concatenate([half, -half], axis=0)
    else:
        eps = rng.standard_normal((pop, flat.size)) * cfg.sigma

    members = [P.PolicyBundle(problem, P.unflatten_params(flat + eps[p], bundle.nets))
               for p in range(pop)]
    n_inst = len(instances)
    best_e = np.empty((pop, n_inst))
    acc = np.empty((pop, n_inst))

    def run(job):
        p, i = divmod(job, n_inst)
        # common random numbers: instance i gets the same stream for every member
        seed = derive(master_seed, 1 + epoch, 1, i)
        t = anneal(problem, instances[i], members[p], schedule,
                   SamplingMode.SAMPLED, seed=seed)
        return job, t.best_energy, t.acceptance_rate

    jobs = range(pop * n_inst)
    if workers == 1:
        results = map(run, jobs)
    else:
        pool = ThreadPoolExecutor(max_workers=workers)
        results = pool.map(run, jobs)
    for job, be, ar in results:
        p, i = divmod(job, n_inst)
        best_e[p, i] = be
        acc[p, i] = ar
    if workers != 1:
        pool.shutdown()

    fitness = -best_e.mean(axis=1)  # mean primal reward per member
    stats = {
        "mean_best_energy": float(best_e.mean()),
        "mean_acceptance": float(acc.mean()),
        "fitness_mean": float(fitness.mean()),
        "fitness_std": float(fitness.std()),
    }
    if fitness.max() == fitness.min():
        stats["skipped"] = True  # zero fitness variance; leave parameters untouched
        return stats
    ghat = es_gradient(fitness, eps, cfg.sigma)
    flat = sgd_momentum_step(flat, -ghat, state, cfg.lr, cfg.momentum)
    bundle.nets = P.unflatten_params(flat, bundle.nets)
    return stats
