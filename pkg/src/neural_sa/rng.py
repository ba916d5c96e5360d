"""Seedable RNG streams with reproducible hash-based substream derivation.

All randomness in the package flows through `derive`: a master seed plus an
integer path is hashed by numpy's SeedSequence into an independent PCG64
stream. Rollout i of a batch uses derive(master, i); epoch e of a training
run uses derive(master, e, ...) and so on. Results are therefore independent
of execution order and of the number of workers.
"""

from __future__ import annotations

import numpy as np

__all__ = ["derive", "spawn_key"]


def spawn_key(*path: int) -> tuple[int, ...]:
    for p in path:
        if p < 0:
            raise ValueError("substream path entries must be non-negative")
    return tuple(int(p) for p in path)


def derive(master_seed: int, *path: int) -> np.random.Generator:
    """Return the PCG64 generator for substream `path` of `master_seed`."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=spawn_key(*path))
    return np.random.Generator(np.random.PCG64(ss))
