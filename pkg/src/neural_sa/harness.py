"""Seeded dataset generation, the evaluation protocol and result reporting.

Evaluation follows the published protocol: fixed test sets (generation seed
0), rollout lengths as multiples of the problem size (N for knapsack and bin
packing, N^2 for the TSP), five run seeds (1..5), mean and standard deviation
reported across run seeds. Knapsack results are reported as positive packed
value; the sign flip happens here, at the reporting boundary only.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import policy as P
from . import problems
from .errors import BatchItemError, ConfigError
from .rng import derive
from .rollout import SamplingMode, anneal, resolve_workers
from .schedule import TemperatureSchedule
from .serialize import atomic_write_text, dumps, format_float

DEFAULT_RUN_SEEDS = (1, 2, 3, 4, 5)

# published capacities for the standard sizes; N/8 beyond the table
KNAPSACK_CAPACITY = {50: 12.5, 100: 25.0, 200: 25.0}

# evaluation temperature ranges used when a checkpoint does not provide its
# training configuration (they match the PPO training settings)
DEFAULT_TEMPS = {
    "knapsack": (1.0, 0.1),
    "binpacking": (1.0, 0.1),
    "tsp": (1.0, 1e-2),
    "rosenbrock": (1.0, 0.1),
}


def knapsack_capacity(n: int) -> float:
    return KNAPSACK_CAPACITY.get(n, n / 8.0)


def _u01_open(rng: np.random.Generator, shape) -> np.ndarray:
    """U(0, 1]: 1 - U[0, 1), honoring the half-open interval."""
    return 1.0 - rng.random(shape)


def knapsack_instances(n: int, count: int, rng: np.random.Generator) -> list:
    from .problems.knapsack import KnapsackInstance
    cap = knapsack_capacity(n)
    w = _u01_open(rng, (count, n))
    v = _u01_open(rng, (count, n))
    return [KnapsackInstance(w[i], v[i], cap) for i in range(count)]


def binpacking_instances(n: int, count: int, rng: np.random.Generator) -> list:
    from .problems.binpacking import BinPackingInstance
    w = _u01_open(rng, (count, n))
    return [BinPackingInstance(w[i], 1.0) for i in range(count)]


def tsp_instances(n: int, count: int, rng: np.random.Generator) -> list:
    from .problems.tsp import TspInstance
    coords = rng.random((count, n, 2))
    return [TspInstance(coords[i]) for i in range(count)]


@dataclass
class Dataset:
    problem: str
    n: int
    count: int
    seed: int
    instances: list = field(repr=False)

    def __len__(self) -> int:
        return self.count


def generate_knapsack(n: int, count: int, seed: int) -> Dataset:
    return Dataset("knapsack", n, count, seed,
                   knapsack_instances(n, count, derive(seed)))


def generate_binpacking(n: int, count: int, seed: int) -> Dataset:
    return Dataset("binpacking", n, count, seed,
                   binpacking_instances(n, count, derive(seed)))


def generate_tsp(n: int, count: int, seed: int) -> Dataset:
    return Dataset("tsp", n, count, seed, tsp_instances(n, count, derive(seed)))


GENERATORS = {
    "knapsack": generate_knapsack,
    "binpacking": generate_binpacking,
    "tsp": generate_tsp,
}


def generate(problem: str, n: int, count: int, seed: int) -> Dataset:
    if problem not in GENERATORS:
        raise ConfigError(f"no generator for problem {problem!r}")
    if n < 1 or count < 1:
        raise ConfigError("n and count must be positive")
    return GENERATORS[problem](n, count, seed)


def dataset_to_json(ds: Dataset) -> dict:
    return {
        "problem": ds.problem,
        "n": ds.n,
        "count": ds.count,
        "seed": ds.seed,
        "instances": [problems.instance_to_json(ds.problem, inst) for inst in ds.instances],
    }


def dataset_from_json(obj: dict) -> Dataset:
    insts = [problems.instance_from_json(o) for o in obj["instances"]]
    return Dataset(obj["problem"], int(obj["n"]), len(insts), int(obj.get("seed", -1)), insts)


def save_dataset(path: str, ds: Dataset) -> None:
    atomic_write_text(path, dumps(dataset_to_json(ds)))


def load_dataset(path: str) -> Dataset:
    with open(path) as fh:
        return dataset_from_json(json.load(fh))


def rollout_length(problem: str, n: int, multiplier: int, rosenbrock_k: int = 100) -> int:
    """K = m*N for knapsack/bin packing, m*N^2 for TSP, a constant for
    Rosenbrock."""
    if problem in ("knapsack", "binpacking"):
        return multiplier * n
    if problem == "tsp":
        return multiplier * n * n
    if problem == "rosenbrock":
        return rosenbrock_k
    raise ConfigError(f"unknown problem {problem!r}")


@dataclass
class EvalReport:
    problem: str
    n: int
    k: int
    mode: str
    trainer: str
    run_seeds: tuple
    per_seed_mean: list  # reported metric per run seed
    mean: float
    std: float
    mean_acceptance: float
    wall_ms: float
    config: dict


def _reported(problem: str, mean_energy: float) -> float:
    return -mean_energy if problem == "knapsack" else mean_energy


def evaluate(bundle: P.PolicyBundle, dataset: Dataset, multiplier: int,
             mode=SamplingMode.SAMPLED, run_seeds=DEFAULT_RUN_SEEDS,
             t0: float | None = None, tk: float | None = None,
             trainer: str = "none", workers=None, timing: bool = True,
             rosenbrock_k: int = 100) -> EvalReport:
    """Anneal every instance once per run seed; aggregate across seeds."""
    if bundle.problem != dataset.problem:
        raise ConfigError(
            f"checkpoint problem {bundle.problem!r} does not match dataset "
            f"{dataset.problem!r}")
    mode = SamplingMode.parse(mode)
    workers = resolve_workers(workers)
    d0, dK = DEFAULT_TEMPS[dataset.problem]
    t0 = d0 if t0 is None else t0
    tk = dK if tk is None else tk
    k = rollout_length(dataset.problem, dataset.n, multiplier, rosenbrock_k)
    schedule = TemperatureSchedule(t0, tk, k)
    tic = time.perf_counter()

    per_seed_mean = []
    acc_all = []
    for r in run_seeds:
        best = np.empty(len(dataset))
        acc = np.empty(len(dataset))

        def run(i):
            try:
                t = anneal(dataset.problem, dataset.instances[i], bundle, schedule,
                           mode, seed=derive(int(r), i))
                return i, t.best_energy, t.acceptance_rate
            except Exception as exc:
                raise BatchItemError(i, exc) from exc

        if workers == 1:
            results = map(run, range(len(dataset)))
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(run, range(len(dataset))))
        for i, be, ar in results:
            best[i] = be
            acc[i] = ar
        per_seed_mean.append(_reported(dataset.problem, float(best.mean())))
        acc_all.append(float(acc.mean()))

    wall_ms = (time.perf_counter() - tic) * 1e3 if timing else 0.0
    means = np.array(per_seed_mean)
    return EvalReport(
        problem=dataset.problem, n=dataset.n, k=k, mode=mode.value, trainer=trainer,
        run_seeds=tuple(int(r) for r in run_seeds), per_seed_mean=per_seed_mean,
        mean=float(means.mean()), std=float(means.std()),
        mean_acceptance=float(np.mean(acc_all)), wall_ms=wall_ms,
        config={"t0": t0, "tk": tk, "multiplier": multiplier},
    )


def gap(report_value: float, reference_value: float, sense: str) -> float:
    """Percentage gap to a reference optimum; positive = worse than reference."""
    if sense == "max":
        return (reference_value - report_value) / reference_value * 100.0
    if sense == "min":
        return (report_value - reference_value) / reference_value * 100.0
    raise ConfigError(f"sense must be 'min' or 'max', got {sense!r}")


RESULTS_HEADER = "problem,N,K,mode,trainer,seed,mean,std,acc_rate,wall_ms"


def results_csv(reports: list) -> str:
    lines = [RESULTS_HEADER]
    for rep in reports:
        seeds = rep.run_seeds
        seed_str = f"{seeds[0]}-{seeds[-1]}" if len(seeds) > 1 else str(seeds[0])
        lines.append(",".join([
            rep.problem, str(rep.n), str(rep.k), rep.mode, rep.trainer, seed_str,
            format_float(rep.mean), format_float(rep.std),
            format_float(rep.mean_acceptance), format_float(rep.wall_ms),
        ]))
    return "\n".join(lines) + "\n"


def results_json(reports: list) -> dict:
    return {"results": [{
        "problem": rep.problem, "n": rep.n, "k": rep.k, "mode": rep.mode,
        "trainer": rep.trainer, "run_seeds": list(rep.run_seeds),
        "per_seed_mean": rep.per_seed_mean, "mean": rep.mean, "std": rep.std,
        "acc_rate": rep.mean_acceptance, "wall_ms": rep.wall_ms,
        "config": rep.config,
    } for rep in reports]}


def export_policy_logits(bundle: P.PolicyBundle, role: str, base, vary: dict) -> str:
    """Evaluate one stage net over a grid of feature values.

    `base` fixes every input feature; `vary` maps feature index -> (start,
    stop, num) linspace specs (one or two axes). Returns CSV text with one row
    per grid point: all feature values followed by the logit.
    """
    try:
        net = bundle.nets[bundle.roles.index(role)]
    except ValueError:
        raise ConfigError(f"no stage {role!r}; available: {bundle.roles}") from None
    base = np.asarray(base, dtype=np.float64)
    if base.shape != (net.in_dim,):
        raise ConfigError(f"base must have {net.in_dim} entries")
    axes = sorted(vary.items())
    grids = [np.linspace(*spec) for _, spec in axes]
    mesh = np.meshgrid(*grids, indexing="ij") if grids else []
    count = mesh[0].size if mesh else 1
    F = np.tile(base, (count, 1))
    for (axis, _), m in zip(axes, mesh):
        F[:, axis] = m.ravel()
    logits = P.pointwise_logits(net, F)
    header = ",".join([f"f{i}" for i in range(net.in_dim)] + ["logit"])
    lines = [header]
    for row, z in zip(F, logits):
        lines.append(",".join([format_float(x) for x in row] + [format_float(z)]))
    return "\n".join(lines) + "\n"


def acceptance_curve(trajectories: list, buckets: int) -> str:
    """Mean acceptance rate per step bucket, across trajectories (CSV)."""
    K = len(trajectories[0])
    edges = np.linspace(0, K, buckets + 1).astype(int)
    acc = np.stack([t.accepted for t in trajectories]).astype(np.float64)
    lines = ["bucket,step_lo,step_hi,acceptance_rate"]
    for b in range(buckets):
        lo, hi = edges[b], edges[b + 1]
        rate = float(acc[:, lo:hi].mean()) if hi > lo else 0.0
        lines.append(f"{b},{lo},{hi},{format_float(rate)}")
    return "\n".join(lines) + "\n"
