"""Proximal policy optimization with a clipped surrogate and GAE.

One epoch rolls the current policy over a fresh batch of instances (sampled
mode, features recorded by the kernel), computes GAE advantages from the
critic, then runs a few full-batch Adam passes on both nets. Log-probs are
recomputed by this module's own forward pass, never taken from the kernel, so
the probability ratio is exactly 1 on the first pass.
"""

from __future__ import annotations

import numpy as np

from .. import policy as P
from ..errors import TrainingDivergenceError
from ..rng import derive
from ..rollout import SamplingMode, batch_anneal
from ..schedule import TemperatureSchedule
from .optim import AdamState, adam_step
from .rewards import gae_advantages_batch

CHUNK = 8192  # samples per forward/backward chunk; bounds peak memory


# ---------------------------------------------------------------------------
# batched categorical forward/backward (shared MLP over N rows + masked softmax)
# ---------------------------------------------------------------------------

def _forward_stage(net: P.MlpParams, F: np.ndarray, M: np.ndarray, act: np.ndarray):
    """F (C,N,d), M (C,N) bool, act (C,) -> (logp (C,), cache for backward)."""
    C, N, d = F.shape
    flat = F.reshape(C * N, d)
    pre = flat @ net.w1.T
    pre += net.b1
    h = np.maximum(pre, 0.0)
    z = (h @ net.w2[0] + net.b2[0]).reshape(C, N)
    p = P.masked_softmax_batch(z, M)
    idx = np.arange(C)
    logp = np.log(p[idx, act])
    return logp, (F, pre, h, p, act)


def _backward_stage(net: P.MlpParams, cache, coef: np.ndarray) -> P.MlpParams:
    """Gradient of sum_c coef_c * logp_c w.r.t. the stage net."""
    F, pre, h, p, act = cache  # pre/h are (C*N, hidden)
    C, N, d = F.shape
    gz = -p * coef[:, None]
    gz[np.arange(C), act] += coef
    gz_flat = gz.reshape(C * N)
    gw2 = (gz_flat @ h)[None, :]
    gb2 = np.array([gz.sum()])
    gh = gz_flat[:, None] * net.w2[0]
    gh *= pre > 0.0
    gw1 = gh.T @ F.reshape(C * N, d)
    gb1 = gh.sum(axis=0)
    return P.MlpParams(gw1, gb1, gw2, gb2)


def _forward_gaussian(net: P.MlpParams, X: np.ndarray, A: np.ndarray):
    """X (C,2) points, A (C,2) actions -> (logp (C,), cache)."""
    pre = X @ net.w1.T + net.b1
    h = np.maximum(pre, 0.0)
    q = h @ net.w2.T + net.b2
    inside = (q > P.SIGMA_CLAMP_LO) & (q < P.SIGMA_CLAMP_HI)
    qc = np.clip(q, P.SIGMA_CLAMP_LO, P.SIGMA_CLAMP_HI)
    z = A * np.exp(-qc)
    logp = np.sum(-0.5 * z * z - qc - 0.5 * P.LOG_2PI, axis=1)
    return logp, (X, pre, h, z, inside)


def _backward_gaussian(net: P.MlpParams, cache, coef: np.ndarray) -> P.MlpParams:
    X, pre, h, z, inside = cache
    gq = coef[:, None] * (z * z - 1.0) * inside
    gw2 = gq.T @ h
    gb2 = gq.sum(axis=0)
    gh = (gq @ net.w2) * (pre > 0.0)
    gw1 = gh.T @ X
    gb1 = gh.sum(axis=0)
    return P.MlpParams(gw1, gb1, gw2, gb2)


def _critic_values(critic: P.MlpParams, F: np.ndarray) -> np.ndarray:
    """F (..., N, d) -> per-state values, chunked to bound memory."""
    lead = F.shape[:-2]
    flat = F.reshape(-1, F.shape[-2], F.shape[-1])
    out = np.empty(flat.shape[0])
    for lo in range(0, flat.shape[0], CHUNK):
        chunk = flat[lo:lo + CHUNK]
        _, val = P.mlp_forward_batch(critic, chunk)
        out[lo:lo + CHUNK] = val[..., 0].mean(axis=1)
    return out.reshape(lead)


def _zero_like_flat(nets) -> np.ndarray:
    return np.zeros(sum(n.n_params for n in nets))


def ppo_loss_and_grad(bundle: P.PolicyBundle, critic: P.MlpParams, batch: dict, cfg):
    """Clipped-surrogate + value losses and their exact gradients.

    `batch` holds per-sample arrays: stage feature tensors/masks/actions,
    old_logp, adv (already normalized), ret, valid. Returns
    (policy_loss, critic_loss, flat policy grad, flat critic grad).
    """
    B = batch["old_logp"].shape[0]
    valid = batch["valid"]
    n_valid = int(valid.sum())
    if n_valid == 0:
        raise TrainingDivergenceError("no valid policy samples in batch")
    eps = cfg.clip_eps
    pol_loss = 0.0
    crit_loss = 0.0
    pol_grads = [P.MlpParams.zeros(n.in_dim, n.out_dim, n.hidden) for n in bundle.nets]
    crit_grad = P.MlpParams.zeros(critic.in_dim, critic.out_dim, critic.hidden)
    gaussian = bundle.problem == "rosenbrock"

    for lo in range(0, B, CHUNK):
        sl = slice(lo, min(lo + CHUNK, B))
        adv = batch["adv"][sl]
        old = batch["old_logp"][sl]
        vmask = valid[sl]

        if gaussian:
            caches = []
            logp, cache = _forward_gaussian(bundle.nets[0], batch["feat1"][sl][:, 0, :],
                                            batch["act_real"][sl])
            caches.append(cache)
        else:
            logp, cache1 = _forward_stage(bundle.nets[0], batch["feat1"][sl],
                                          batch["mask1"][sl], batch["act1"][sl])
            caches = [cache1]
            if len(bundle.nets) > 1:
                lp2, cache2 = _forward_stage(bundle.nets[1], batch["feat2"][sl],
                                             batch["mask2"][sl], batch["act2"][sl])
                logp = logp + np.where(vmask, lp2, 0.0)
                caches.append(cache2)

        ratio = np.exp(np.where(vmask, logp - old, 0.0))
        clipped = np.clip(ratio, 1.0 - eps, 1.0 + eps)
        surr1 = ratio * adv
        surr2 = clipped * adv
        use_first = surr1 <= surr2
        obj = np.where(use_first, surr1, surr2)
        pol_loss -= float(obj[vmask].sum())
        coef = np.where(vmask & use_first, -adv * ratio, 0.0) / n_valid

        if gaussian:
            g = _backward_gaussian(bundle.nets[0], caches[0], coef)
            _acc(pol_grads[0], g)
        else:
            g = _backward_stage(bundle.nets[0], caches[0], coef)
            _acc(pol_grads[0], g)
            if len(bundle.nets) > 1:
                g2 = _backward_stage(bundle.nets[1], caches[1], coef)
                _acc(pol_grads[1], g2)

        # critic on the same chunk of states
        Fv = batch["featV"][sl]
        Cv, Nv, dv = Fv.shape
        fv_flat = Fv.reshape(Cv * Nv, dv)
        pre = fv_flat @ critic.w1.T
        pre += critic.b1
        h = np.maximum(pre, 0.0)
        vals = (h @ critic.w2[0] + critic.b2[0]).reshape(Cv, Nv).mean(axis=1)
        err = vals - batch["ret"][sl]
        crit_loss += float(np.dot(err, err))
        gz = np.repeat((2.0 * err / B) / Nv, Nv)  # (Cv*Nv,)
        gw2 = (gz @ h)[None, :]
        gb2 = np.array([gz.sum()])
        gh = gz[:, None] * critic.w2[0]
        gh *= pre > 0.0
        gw1 = gh.T @ fv_flat
        gb1 = gh.sum(axis=0)
        _acc(crit_grad, P.MlpParams(gw1, gb1, gw2, gb2))

    pol_loss /= n_valid
    crit_loss /= B
    if not (np.isfinite(pol_loss) and np.isfinite(crit_loss)):
        raise TrainingDivergenceError(
            "non-finite PPO loss",
            {"policy_loss": pol_loss, "critic_loss": crit_loss},
        )
    return pol_loss, crit_loss, P.flatten_params(pol_grads), P.flatten_params([crit_grad])


def _acc(dst: P.MlpParams, src: P.MlpParams) -> None:
    dst.w1 += src.w1
    dst.b1 += src.b1
    dst.w2 += src.w2
    dst.b2 += src.b2


# ---------------------------------------------------------------------------
# epoch driver
# ---------------------------------------------------------------------------

def collect_batch(problem: str, instances, bundle, schedule, seed_path, workers):
    """Roll out once per instance and stack per-step tensors for the update."""
    trajs = batch_anneal(problem, instances, bundle, schedule,
                         SamplingMode.SAMPLED, master_seed=seed_path,
                         workers=workers, record_features=True)
    B = len(trajs)
    K = schedule.steps
    gaussian = problem == "rosenbrock"
    two_stage = problem in ("binpacking", "tsp")
    td0 = trajs[0].train_data
    feat1 = np.stack([t.train_data["feat1"] for t in trajs])  # (B,K,N,d1)
    featT = np.stack([t.train_data["featT"] for t in trajs])  # (B,N,d1)
    batch = {
        "rewards": np.stack([t.rewards for t in trajs]),
        "feat1": feat1.reshape(B * K, *feat1.shape[2:]),
        "featV": np.concatenate([feat1, featT[:, None]], axis=1),  # (B,K+1,N,d1)
        "act1": np.stack([t.actions[:, 0] for t in trajs]).reshape(-1).astype(np.int64),
        "valid": ~np.stack([t.auto_rejected for t in trajs]).reshape(-1),
        "best_energy": np.array([t.best_energy for t in trajs]),
        "acceptance": np.array([t.acceptance_rate for t in trajs]),
    }
    n = feat1.shape[2]
    if "mask1" in td0:
        batch["mask1"] = np.stack([t.train_data["mask1"] for t in trajs]) \
            .reshape(B * K, n).astype(bool)
    elif not gaussian:
        batch["mask1"] = np.ones((B * K, n), dtype=bool)
    if two_stage:
        feat2 = np.stack([t.train_data["feat2"] for t in trajs])
        batch["feat2"] = feat2.reshape(B * K, *feat2.shape[2:])
        mask2 = np.stack([t.train_data["mask2"] for t in trajs]) \
            .reshape(B * K, n).astype(bool)
        # stuck steps (no feasible bin) never reach the softmax: unmask them so
        # the batched forward stays finite; their loss weight is zeroed below
        mask2[~batch["valid"]] = True
        batch["mask2"] = mask2
        act2 = np.stack([t.actions[:, 1] for t in trajs]).reshape(-1).astype(np.int64)
        batch["act2"] = np.where(act2 >= 0, act2, 0)
    if gaussian:
        batch["act_real"] = np.stack([t.actions_real for t in trajs]).reshape(B * K, 2)
    return batch


def recompute_logp(bundle: P.PolicyBundle, batch: dict) -> np.ndarray:
    """Log-probs of the recorded actions under `bundle`, chunked."""
    B = batch["feat1"].shape[0] if bundle.problem != "rosenbrock" \
        else batch["act_real"].shape[0]
    out = np.empty(B)
    valid = batch["valid"]
    for lo in range(0, B, CHUNK):
        sl = slice(lo, min(lo + CHUNK, B))
        if bundle.problem == "rosenbrock":
            lp, _ = _forward_gaussian(bundle.nets[0], batch["feat1"][sl][:, 0, :],
                                      batch["act_real"][sl])
        else:
            lp, _ = _forward_stage(bundle.nets[0], batch["feat1"][sl],
                                   batch["mask1"][sl], batch["act1"][sl])
            if len(bundle.nets) > 1:
                lp2, _ = _forward_stage(bundle.nets[1], batch["feat2"][sl],
                                        batch["mask2"][sl], batch["act2"][sl])
                lp = lp + np.where(valid[sl], lp2, 0.0)
        out[sl] = lp
    return out


def ppo_epoch(problem: str, instances, bundle: P.PolicyBundle, critic: P.MlpParams,
              cfg, master_seed: int, epoch: int,
              pol_state: AdamState, crit_state: AdamState, workers=None) -> dict:
    """One PPO epoch; mutates bundle/critic in place. Returns epoch stats."""
    schedule = TemperatureSchedule(cfg.t0, cfg.tk, cfg.k)
    batch = collect_batch(problem, instances, bundle, schedule,
                          (master_seed, 1 + epoch, 1), workers)
    B, K = batch["rewards"].shape

    values = _critic_values(critic, batch["featV"])  # (B, K+1)
    adv, ret = gae_advantages_batch(batch["rewards"], values, cfg.gamma, cfg.gae_lambda)
    adv = adv.reshape(-1)
    valid = batch["valid"]
    mu = adv[valid].mean()
    sd = adv[valid].std()
    batch["adv"] = np.where(valid, (adv - mu) / max(sd, 1e-8), 0.0)
    batch["ret"] = ret.reshape(-1)
    batch["featV"] = batch["featV"][:, :K].reshape(B * K, *batch["featV"].shape[2:])
    batch["old_logp"] = recompute_logp(bundle, batch)

    pol_flat = P.flatten_params(bundle.nets)
    crit_flat = P.flatten_params([critic])
    stats = {}
    for _ in range(cfg.update_epochs):
        bundle.nets = P.unflatten_params(pol_flat, bundle.nets)
        new_critic = P.unflatten_params(crit_flat, [critic])[0]
        critic.w1, critic.b1, critic.w2, critic.b2 = \
            new_critic.w1, new_critic.b1, new_critic.w2, new_critic.b2
        pl, cl, pg, cg = ppo_loss_and_grad(bundle, critic, batch, cfg)
        stats.setdefault("policy_loss", pl)
        stats.setdefault("critic_loss", cl)
        pol_flat = adam_step(pol_flat, pg, pol_state, cfg.lr, cfg.weight_decay,
                             cfg.beta1, cfg.beta2)
        crit_flat = adam_step(crit_flat, cg, crit_state, cfg.lr, cfg.weight_decay,
                              cfg.beta1, cfg.beta2)
    bundle.nets = P.unflatten_params(pol_flat, bundle.nets)
    new_critic = P.unflatten_params(crit_flat, [critic])[0]
    critic.w1, critic.b1, critic.w2, critic.b2 = \
        new_critic.w1, new_critic.b1, new_critic.w2, new_critic.b2

    stats["mean_best_energy"] = float(batch["best_energy"].mean())
    stats["mean_acceptance"] = float(batch["acceptance"].mean())
    return stats
