"""Command-line interface.

Subcommands: generate, train, solve, eval, oracle, bench. Every command that
takes --seed is reproducible bit-for-bit; --no-timing additionally zeroes the
wall-clock columns so output files are byte-identical across repeated runs.
Exit codes: 0 success, 2 usage or configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import baselines, harness, policy, problems
from .backend import active_backend
from .errors import ConfigError, NeuralSaError, TrainingDivergenceError
from .rollout import SamplingMode, anneal
from .rng import derive
from .schedule import TemperatureSchedule
from .serialize import atomic_write_text, dumps, format_float


def _add_workers(p):
    p.add_argument("--workers", type=int, default=None,
                   help="parallel rollouts (default: NEURAL_SA_WORKERS or 1)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="neural-sa",
        description="Simulated annealing with learnable proposal policies.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a seeded dataset file")
    g.add_argument("--problem", required=True, choices=["knapsack", "binpacking", "tsp"])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    t = sub.add_parser("train", help="train a proposal policy")
    t.add_argument("--problem", required=True,
                   choices=["knapsack", "binpacking", "tsp", "rosenbrock"])
    t.add_argument("--trainer", required=True, choices=["es", "ppo"])
    t.add_argument("--config", help="JSON file overriding the default hyperparameters")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--curve", help="training-curve CSV (default: <out>.curve.csv)")
    t.add_argument("--init", help="checkpoint to resume parameters from")
    t.add_argument("--no-timing", action="store_true",
                   help="write wall_ms as 0 for byte-reproducible output")
    t.add_argument("--quiet", action="store_true")
    _add_workers(t)

    s = sub.add_parser("solve", help="anneal a single instance")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--checkpoint")
    src.add_argument("--vanilla", action="store_true",
                     help="uniform proposals (vanilla SA)")
    s.add_argument("--instance", required=True, help="instance JSON file")
    s.add_argument("--mult", type=int, default=10,
                   help="rollout length multiplier (K = mult*N, or mult*N^2 for tsp)")
    s.add_argument("--mode", default="sampled", choices=["sampled", "greedy"])
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--t0", type=float)
    s.add_argument("--tk", type=float)
    s.add_argument("--sigma", type=float, default=1.0,
                   help="fixed sigma for --vanilla on rosenbrock")
    s.add_argument("--rosenbrock-k", type=int, default=100)
    s.add_argument("--trace", help="write a per-step trace CSV here")

    e = sub.add_parser("eval", help="evaluate on a dataset across run seeds")
    esrc = e.add_mutually_exclusive_group(required=True)
    esrc.add_argument("--checkpoint")
    esrc.add_argument("--vanilla", action="store_true")
    e.add_argument("--dataset", required=True)
    e.add_argument("--mults", default="1,2,5,10")
    e.add_argument("--mode", default="sampled", choices=["sampled", "greedy"])
    e.add_argument("--runs", type=int, default=5, help="run seeds 1..runs")
    e.add_argument("--t0", type=float)
    e.add_argument("--tk", type=float)
    e.add_argument("--sigma", type=float, default=1.0)
    e.add_argument("--rosenbrock-k", type=int, default=100)
    e.add_argument("--out", help="results CSV path (stdout when omitted); a JSON "
                                 "mirror is written next to it")
    e.add_argument("--no-timing", action="store_true")
    _add_workers(e)

    o = sub.add_parser("oracle", help="exact optima for a small-instance dataset")
    o.add_argument("--dataset", required=True)
    o.add_argument("--out", required=True)

    b = sub.add_parser("bench", help="compare the compiled and python kernels")
    b.add_argument("--reps", type=int, default=5)

    return ap


def _load_policy(args, problem: str):
    if getattr(args, "vanilla", False) or args.checkpoint is None:
        sigma = getattr(args, "sigma", 1.0)
        return baselines.uniform_policy(problem, sigma=sigma), "vanilla", {}
    ck = policy.load_checkpoint(args.checkpoint)
    if ck["bundle"].problem != problem:
        raise ConfigError(
            f"checkpoint is for {ck['bundle'].problem!r}, dataset/instance is "
            f"{problem!r}")
    return ck["bundle"], ck["trainer"], ck.get("config", {})


def _temps(args, problem: str, ck_config: dict):
    t0 = args.t0 if args.t0 is not None else ck_config.get("t0")
    tk = args.tk if args.tk is not None else ck_config.get("tk")
    d0, dK = harness.DEFAULT_TEMPS[problem]
    return (d0 if t0 is None else t0), (dK if tk is None else tk)


def cmd_generate(args) -> int:
    ds = harness.generate(args.problem, args.n, args.count, args.seed)
    harness.save_dataset(args.out, ds)
    print(f"wrote {ds.count} {ds.problem} instances (N={ds.n}, seed={ds.seed}) "
          f"to {args.out}")
    return 0


def cmd_train(args) -> int:
    from .training import config_from_dict, train
    overrides = None
    if args.config:
        with open(args.config) as fh:
            overrides = json.load(fh)
    cfg = config_from_dict(args.problem, args.trainer, overrides)
    init = policy.load_checkpoint(args.init) if args.init else None
    curve = args.curve or (args.out + ".curve.csv")
    log = None if args.quiet else lambda msg: print(msg, flush=True)
    train(args.problem, args.trainer, cfg, args.seed, out_path=args.out,
          curve_path=curve, workers=args.workers, timing=not args.no_timing,
          init=init, log=log)
    print(f"wrote checkpoint {args.out} and curve {curve} [{active_backend()} backend]")
    return 0


def cmd_solve(args) -> int:
    with open(args.instance) as fh:
        obj = json.load(fh)
    problem = obj["problem"]
    inst = problems.instance_from_json(obj)
    bundle, trainer, ck_config = _load_policy(args, problem)
    t0, tk = _temps(args, problem, ck_config)
    k = harness.rollout_length(problem, inst.n, args.mult, args.rosenbrock_k)
    schedule = TemperatureSchedule(t0, tk, k)
    traj = anneal(problem, inst, bundle, schedule, args.mode, seed=derive(args.seed))
    reported = -traj.best_energy if problem == "knapsack" else traj.best_energy
    label = "value" if problem == "knapsack" else "energy"
    print(f"problem={problem} N={inst.n} K={k} mode={args.mode} policy={trainer} "
          f"seed={args.seed}")
    print(f"best_{label}={format_float(reported)} "
          f"acceptance_rate={traj.acceptance_rate:.4f}")
    print("solution=" + json.dumps(_solution_json(problem, traj.best_solution)))
    if args.trace:
        atomic_write_text(args.trace, _trace_csv(traj))
        print(f"wrote trace {args.trace}")
    return 0


def _solution_json(problem: str, sol):
    if problem == "knapsack":
        return {"bits": sol.bits.astype(int).tolist()}
    if problem == "binpacking":
        return {"bin_of_item": sol.bin_of_item.tolist()}
    if problem == "tsp":
        return {"order": sol.order.tolist()}
    return {"x0": sol.x0, "x1": sol.x1}


def _trace_csv(traj) -> str:
    lines = ["step,temperature,energy_before,energy_after,accepted,auto_rejected,"
             "log_prob,reward"]
    for k in range(len(traj)):
        lines.append(",".join([
            str(k), format_float(float(traj.temperatures[k])),
            format_float(float(traj.energy_before[k])),
            format_float(float(traj.energy_after[k])),
            str(int(traj.accepted[k])), str(int(traj.auto_rejected[k])),
            format_float(float(traj.log_probs[k])),
            format_float(float(traj.rewards[k])),
        ]))
    return "\n".join(lines) + "\n"


def cmd_eval(args) -> int:
    ds = harness.load_dataset(args.dataset)
    bundle, trainer, ck_config = _load_policy(args, ds.problem)
    t0, tk = _temps(args, ds.problem, ck_config)
    mults = [int(m) for m in args.mults.split(",") if m]
    run_seeds = tuple(range(1, args.runs + 1))
    reports = []
    for m in mults:
        rep = harness.evaluate(bundle, ds, m, args.mode, run_seeds, t0=t0, tk=tk,
                               trainer=trainer, workers=args.workers,
                               timing=not args.no_timing,
                               rosenbrock_k=args.rosenbrock_k)
        reports.append(rep)
    csv_text = harness.results_csv(reports)
    if args.out:
        atomic_write_text(args.out, csv_text)
        stem = args.out[:-4] if args.out.endswith(".csv") else args.out
        mirror = stem + ".json"
        atomic_write_text(mirror, dumps(harness.results_json(reports)))
        print(f"wrote {args.out} and {mirror}")
    else:
        sys.stdout.write(csv_text)
    return 0


def cmd_oracle(args) -> int:
    from . import oracles
    ds = harness.load_dataset(args.dataset)
    out = {"problem": ds.problem, "n": ds.n, "seed": ds.seed, "optima": [],
           "skipped": []}
    caps = {"knapsack": oracles.KNAPSACK_CAP, "tsp": oracles.TSP_CAP,
            "binpacking": oracles.BINPACKING_CAP}
    cap = caps.get(ds.problem)
    if cap is None:
        raise ConfigError(f"no oracle for problem {ds.problem!r}")
    for i, inst in enumerate(ds.instances):
        if inst.n > cap:
            print(f"warning: instance {i} has N={inst.n} > oracle cap {cap}; skipped",
                  file=sys.stderr)
            out["skipped"].append(i)
            out["optima"].append(None)
            continue
        if ds.problem == "knapsack":
            val, _ = oracles.brute_force_knapsack(inst)
            out["optima"].append(val)
        elif ds.problem == "tsp":
            length, _ = oracles.brute_force_tsp(inst)
            out["optima"].append(length)
        else:
            out["optima"].append(oracles.brute_force_binpacking(inst))
    atomic_write_text(args.out, dumps(out))
    n_done = ds.count - len(out["skipped"])
    print(f"wrote {n_done}/{ds.count} optima to {args.out}")
    return 3 if n_done == 0 else 0


def cmd_bench(args) -> int:
    from .bench import run_benchmark
    run_benchmark(reps=args.reps)
    return 0


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    handlers = {
        "generate": cmd_generate, "train": cmd_train, "solve": cmd_solve,
        "eval": cmd_eval, "oracle": cmd_oracle, "bench": cmd_bench,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingDivergenceError as exc:
        print(f"training diverged: {exc} {exc.diagnostics}", file=sys.stderr)
        return 3
    except (NeuralSaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
