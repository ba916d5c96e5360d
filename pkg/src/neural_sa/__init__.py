"""Simulated annealing with learnable proposal policies.

The proposal distribution of a simulated annealer is a tiny pointwise MLP
trained by evolution strategies or PPO. Problem kernels: 0-1 knapsack, bin
packing, Euclidean TSP (2-opt) and Rosenbrock's function. The hot rollout
loop runs in a compiled Cython core with a bit-identical pure-Python
fallback (see `neural_sa.backend`).
"""

from .backend import active_backend, have_cython
from .rollout import SamplingMode, Trajectory, anneal, batch_anneal
from .schedule import TemperatureSchedule, compute_alpha, mh_accept, temperature_at

__version__ = "0.1.0"

__all__ = [
    "TemperatureSchedule", "compute_alpha", "temperature_at", "mh_accept",
    "SamplingMode", "Trajectory", "anneal", "batch_anneal",
    "active_backend", "have_cython", "__version__",
]
