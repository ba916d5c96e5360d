"""Proposal policies: pointwise two-layer MLPs with masked softmax heads.

The same tiny MLP is applied to every element of a state (item, bin or city),
producing one logit per element; a masked softmax turns the logits into a
categorical proposal distribution. Two-stage policies factor the action as
pi(i) * pi(j | i) with a separate net per stage. Rosenbrock instead uses one
net that outputs per-axis log standard deviations for a zero-mean Gaussian
step.

All gradients here are exact and hand-derived; there is no autograd anywhere
in the package.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import problems
from .errors import ConfigError, DegenerateMaskError, ShapeError
from .serialize import atomic_write_text, dumps

HIDDEN = 16
SIGMA_CLAMP_LO = -10.0
SIGMA_CLAMP_HI = 3.0
LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

@dataclass
class MlpParams:
    """Weights of one input_dim -> HIDDEN -> out_dim ReLU MLP."""

    w1: np.ndarray  # (hidden, d)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (o, hidden)
    b2: np.ndarray  # (o,)

    @property
    def in_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    @property
    def out_dim(self) -> int:
        return self.w2.shape[0]

    @property
    def n_params(self) -> int:
        return self.w1.size + self.b1.size + self.w2.size + self.b2.size

    def copy(self) -> "MlpParams":
        return MlpParams(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())

    @staticmethod
    def zeros(in_dim: int, out_dim: int = 1, hidden: int = HIDDEN) -> "MlpParams":
        return MlpParams(
            np.zeros((hidden, in_dim)), np.zeros(hidden),
            np.zeros((out_dim, hidden)), np.zeros(out_dim),
        )

    @staticmethod
    def random(in_dim: int, out_dim: int, rng: np.random.Generator, hidden: int = HIDDEN) -> "MlpParams":
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.

        Keeps the initial logits near zero, so an untrained categorical policy
        starts out (numerically) uniform over unmasked actions.
        """
        s1 = 1.0 / math.sqrt(in_dim)
        s2 = 1.0 / math.sqrt(hidden)
        return MlpParams(
            rng.uniform(-s1, s1, size=(hidden, in_dim)),
            np.zeros(hidden),
            rng.uniform(-s2, s2, size=(out_dim, hidden)),
            np.zeros(out_dim),
        )


@dataclass
class PolicyBundle:
    """Role-tagged nets for one problem family (one or two proposal stages)."""

    problem: str
    nets: list  # list[MlpParams], aligned with problems.<mod>.STAGES
    roles: list = field(default_factory=list)

    def __post_init__(self):
        stages = problems.get(self.problem).STAGES
        if not self.roles:
            self.roles = [name for name, _ in stages]
        if len(self.nets) != len(stages):
            raise ShapeError(f"{self.problem} needs {len(stages)} nets, got {len(self.nets)}")
        for net, (role, dim) in zip(self.nets, stages):
            if net.in_dim != dim:
                raise ShapeError(f"net {role!r} expects input dim {dim}, got {net.in_dim}")

    def copy(self) -> "PolicyBundle":
        return PolicyBundle(self.problem, [n.copy() for n in self.nets], list(self.roles))


def zero_policy(problem: str) -> PolicyBundle:
    out_dims = {"rosenbrock": 2}
    o = out_dims.get(problem, 1)
    stages = problems.get(problem).STAGES
    return PolicyBundle(problem, [MlpParams.zeros(dim, o) for _, dim in stages])


def random_policy(problem: str, rng: np.random.Generator) -> PolicyBundle:
    out_dims = {"rosenbrock": 2}
    o = out_dims.get(problem, 1)
    stages = problems.get(problem).STAGES
    return PolicyBundle(problem, [MlpParams.random(dim, o, rng) for _, dim in stages])


def make_critic(problem: str) -> MlpParams:
    """Critic net: same input layout as the policy's first stage, own weights."""
    return MlpParams.zeros(problems.get(problem).CRITIC_DIM, 1)


def random_critic(problem: str, rng: np.random.Generator) -> MlpParams:
    return MlpParams.random(problems.get(problem).CRITIC_DIM, 1, rng)


# ---------------------------------------------------------------------------
# forward passes
# ---------------------------------------------------------------------------

def mlp_forward(params: MlpParams, x) -> np.ndarray:
    """Single input vector -> output vector (w2 @ relu(w1 @ x + b1) + b2)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.in_dim,):
        raise ShapeError(f"expected input of shape ({params.in_dim},), got {x.shape}")
    h = np.maximum(params.w1 @ x + params.b1, 0.0)
    return params.w2 @ h + params.b2


def mlp_forward_batch(params: MlpParams, F: np.ndarray):
    """F (..., d) -> (pre (..., hidden), out (..., o)); pre is kept for backprop.

    Leading dimensions are flattened before the matmuls: one big GEMM beats
    numpy's batched tiny-matrix path by orders of magnitude.
    """
    if F.shape[-1] != params.in_dim:
        raise ShapeError(f"expected trailing dim {params.in_dim}, got {F.shape[-1]}")
    lead = F.shape[:-1]
    flat = F.reshape(-1, params.in_dim)
    pre = flat @ params.w1.T
    pre += params.b1
    out = np.maximum(pre, 0.0) @ params.w2.T
    out += params.b2
    return pre.reshape(*lead, params.hidden), out.reshape(*lead, params.out_dim)


def pointwise_logits(params: MlpParams, features: np.ndarray) -> np.ndarray:
    """Apply the MLP to each row of an (N, d) feature matrix -> (N,) logits."""
    _, out = mlp_forward_batch(params, np.asarray(features, dtype=np.float64))
    return out[..., 0]


def masked_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Probabilities over unmasked entries; masked entries are exactly zero."""
    logits = np.asarray(logits, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise DegenerateMaskError("all actions masked")
    zmax = logits[mask].max()
    e = np.zeros_like(logits)
    e[mask] = np.exp(logits[mask] - zmax)
    return e / e.sum()


def masked_softmax_batch(Z: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Row-wise masked softmax for (B, N) logits and boolean masks."""
    if not M.any(axis=1).all():
        raise DegenerateMaskError("some rows have every action masked")
    zmax = np.where(M, Z, -np.inf).max(axis=1, keepdims=True)
    e = np.where(M, np.exp(Z - zmax), 0.0)
    return e / e.sum(axis=1, keepdims=True)


def sample_action(probs: np.ndarray, greedy: bool, rng: np.random.Generator | None):
    """Draw an index from a categorical; returns (index, log probability).

    Sampled mode uses one inverse-CDF draw; greedy mode takes the argmax with
    lowest-index tie-breaking.
    """
    if greedy:
        idx = int(np.argmax(probs))  # argmax returns the first maximum
    else:
        cum = np.cumsum(probs)
        idx = int(np.searchsorted(cum, rng.random(), side="right"))
        if idx >= len(probs):  # cumulative sum fell just short of 1
            idx = int(np.flatnonzero(probs > 0.0)[-1])
    return idx, math.log(probs[idx])


# ---------------------------------------------------------------------------
# Gaussian head (Rosenbrock)
# ---------------------------------------------------------------------------

def gaussian_sigma(params: MlpParams, point) -> np.ndarray:
    """Per-axis standard deviations exp(clamp(mlp(x), lo, hi))."""
    q = mlp_forward(params, np.asarray(point, dtype=np.float64))
    return np.exp(np.clip(q, SIGMA_CLAMP_LO, SIGMA_CLAMP_HI))


def gaussian_logprob(sigma: np.ndarray, action: np.ndarray) -> float:
    z = action / sigma
    return float(np.sum(-0.5 * z * z - np.log(sigma) - 0.5 * LOG_2PI))


# ---------------------------------------------------------------------------
# exact gradients
# ---------------------------------------------------------------------------

def _mlp_backward_rows(params: MlpParams, F: np.ndarray, pre: np.ndarray, g_out: np.ndarray) -> MlpParams:
    """Backprop g_out (rows, o) through the MLP applied rowwise to F (rows, d)."""
    h = np.maximum(pre, 0.0)
    gw2 = g_out.T @ h
    gb2 = g_out.sum(axis=0)
    gh = (g_out @ params.w2) * (pre > 0.0)
    gw1 = gh.T @ F
    gb1 = gh.sum(axis=0)
    return MlpParams(gw1, gb1, gw2, gb2)


def policy_backward(params: MlpParams, features: np.ndarray, mask: np.ndarray,
                    action: int, upstream: float) -> MlpParams:
    """Gradient of upstream * log softmax(logits)[action] w.r.t. the net weights.

    The softmax couples all rows, so every unmasked row contributes through
    the shared MLP; ReLU uses subgradient 0 at 0.
    """
    F = np.asarray(features, dtype=np.float64)
    pre, out = mlp_forward_batch(params, F)
    probs = masked_softmax(out[:, 0], mask)
    g_z = -probs * upstream
    g_z[action] += upstream
    return _mlp_backward_rows(params, F, pre, g_z[:, None])


def critic_value(params: MlpParams, features: np.ndarray) -> float:
    """State value: mean of the per-row scalars."""
    _, out = mlp_forward_batch(params, np.asarray(features, dtype=np.float64))
    return float(out[..., 0].mean())


def critic_backward(params: MlpParams, features: np.ndarray, upstream: float) -> MlpParams:
    F = np.asarray(features, dtype=np.float64)
    pre, _ = mlp_forward_batch(params, F)
    g = np.full((F.shape[0], 1), upstream / F.shape[0])
    return _mlp_backward_rows(params, F, pre, g)


def gaussian_backward(params: MlpParams, point, action, upstream: float) -> MlpParams:
    """Gradient of upstream * log N(action; 0, sigma(point)^2) w.r.t. the net."""
    x = np.asarray(point, dtype=np.float64)
    pre, q = mlp_forward_batch(params, x[None, :])
    q = q[0]
    inside = (q > SIGMA_CLAMP_LO) & (q < SIGMA_CLAMP_HI)
    sigma = np.exp(np.clip(q, SIGMA_CLAMP_LO, SIGMA_CLAMP_HI))
    z = np.asarray(action, dtype=np.float64) / sigma
    g_q = upstream * (z * z - 1.0) * inside  # d logpdf / d log sigma
    return _mlp_backward_rows(params, x[None, :], pre, g_q[None, :])


# ---------------------------------------------------------------------------
# flat parameter vectors (ES perturbations, optimizers)
# ---------------------------------------------------------------------------

def flatten_params(nets: list) -> np.ndarray:
    return np.concatenate([
        np.concatenate([n.w1.ravel(), n.b1, n.w2.ravel(), n.b2]) for n in nets
    ])


def unflatten_params(flat: np.ndarray, like: list) -> list:
    out, k = [], 0
    for n in like:
        w1 = flat[k:k + n.w1.size].reshape(n.w1.shape); k += n.w1.size
        b1 = flat[k:k + n.b1.size].copy(); k += n.b1.size
        w2 = flat[k:k + n.w2.size].reshape(n.w2.shape); k += n.w2.size
        b2 = flat[k:k + n.b2.size].copy(); k += n.b2.size
        out.append(MlpParams(w1.copy(), b1, w2.copy(), b2))
    if k != flat.size:
        raise ShapeError(f"flat vector of size {flat.size} does not match layout ({k})")
    return out


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def _net_to_json(net: MlpParams, role: str) -> dict:
    return {
        "role": role,
        "in": net.in_dim,
        "hidden": net.hidden,
        "out": net.out_dim,
        "w1": net.w1.ravel().tolist(),
        "b1": net.b1.tolist(),
        "w2": net.w2.ravel().tolist(),
        "b2": net.b2.tolist(),
    }


def _net_from_json(obj: dict) -> MlpParams:
    h, d, o = obj["hidden"], obj["in"], obj["out"]
    return MlpParams(
        np.asarray(obj["w1"], dtype=np.float64).reshape(h, d),
        np.asarray(obj["b1"], dtype=np.float64),
        np.asarray(obj["w2"], dtype=np.float64).reshape(o, h),
        np.asarray(obj["b2"], dtype=np.float64),
    )


def save_checkpoint(path: str, bundle: PolicyBundle, critic: MlpParams | None,
                    trainer: str, seed: int, config: dict) -> None:
    obj = {
        "problem": bundle.problem,
        "trainer": trainer,
        "seed": int(seed),
        "nets": [_net_to_json(n, r) for n, r in zip(bundle.nets, bundle.roles)],
        "critic": None if critic is None else _net_to_json(critic, "critic"),
        "config": config,
    }
    atomic_write_text(path, dumps(obj))


def load_checkpoint(path: str) -> dict:
    with open(path) as fh:
        obj = json.load(fh)
    if "problem" not in obj or "nets" not in obj:
        raise ConfigError(f"{path} is not a policy checkpoint")
    bundle = PolicyBundle(obj["problem"], [_net_from_json(n) for n in obj["nets"]],
                          [n["role"] for n in obj["nets"]])
    critic = None if obj.get("critic") is None else _net_from_json(obj["critic"])
    return {
        "bundle": bundle,
        "critic": critic,
        "trainer": obj.get("trainer", "none"),
        "seed": obj.get("seed", 0),
        "config": obj.get("config", {}),
    }
