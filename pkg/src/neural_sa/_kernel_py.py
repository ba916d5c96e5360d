"""Pure-Python rollout kernel: the reference for the compiled core.

Both this module and the Cython twin (`_kernel`) execute the inner annealing
loop with the *same* sequence of IEEE-754 operations and the same RNG draw
order, so trajectories are bit-identical across backends:

- MLP logits accumulate sequentially over the input dimension, then over the
  hidden units (elementwise numpy ops preserve that order per element).
- Transcendentals go through libm (`math.exp` / `math.log` / ...), which is
  what the C kernel calls; numpy's SIMD ufuncs may differ in the last ulp and
  are not used here.
- Per step, sampled mode draws: u per categorical stage (or the Box-Muller
  pair for the Gaussian), then one u for the Metropolis test. Greedy mode
  draws only the Metropolis u. A bin-packing step whose chosen item has no
  feasible destination draws nothing beyond the item stage.

All state/record buffers are allocated (and the initial solution drawn) by
`rollout.py`, which hands the same buffers to whichever backend is active.
Each kernel returns (best_energy, final_energy, n_accept, fail_step) with
fail_step = -1 on success.
"""

from __future__ import annotations

import math

import numpy as np

TEMP_FLOOR = 1e-300
TWO_PI = 2.0 * math.pi
LOG_2PI = math.log(2.0 * math.pi)
SIGMA_CLAMP_LO = -10.0
SIGMA_CLAMP_HI = 3.0


def _logits(F: np.ndarray, w1, b1, w2, b2) -> np.ndarray:
    """Rowwise 2-layer MLP, accumulated in fixed sequential order."""
    n, d = F.shape
    h = w1.shape[0]
    acc = np.empty((n, h))
    acc[:] = b1
    for t in range(d):
        acc += F[:, t, None] * w1[:, t]
    np.maximum(acc, 0.0, out=acc)
    z = np.empty(n)
    z[:] = b2[0]
    for t in range(h):
        z += acc[:, t] * w2[0, t]
    return z


def _choose(z: np.ndarray, m, greedy: int, rng) -> tuple[int, float]:
    """Masked-softmax selection; one uniform draw in sampled mode."""
    n = z.shape[0]
    e = np.zeros(n)
    if m is None:
        zmax = float(np.max(z))
        for i in range(n):
            e[i] = math.exp(z[i] - zmax)
    else:
        zmax = float(np.max(z[m]))
        for i in range(n):
            if m[i]:
                e[i] = math.exp(z[i] - zmax)
    s = float(np.cumsum(e)[-1])
    p = e / s
    if greedy:
        idx = int(np.argmax(p))
    else:
        u = rng.random()
        cum = np.cumsum(p)
        idx = int(np.searchsorted(cum, u, side="right"))
        if idx >= n:
            idx = int(np.flatnonzero(p > 0.0)[-1])
    return idx, math.log(p[idx])


def _mh(delta: float, temp: float, u: float) -> bool:
    if temp < TEMP_FLOOR:
        return delta <= 0.0
    x = -delta / temp
    if x >= 0.0:
        return True
    return u < math.exp(x)


def anneal_knapsack(w, v, cap, temps, t_final, greedy, train,
                    w1, b1, w2, b2, rng,
                    bits, total_w, e_init,
                    act1, e0, e1, acc, logp, rew,
                    feat1, mask1, featT, best_bits):
    n = w.shape[0]
    K = temps.shape[0]
    energy = e_init
    best = e_init
    n_acc = 0
    F = np.empty((n, 5))
    F[:, 1] = w
    F[:, 2] = v
    F[:, 3] = cap
    for k in range(K):
        T = temps[k]
        F[:, 0] = bits
        F[:, 4] = T
        m = (bits == 1) | (total_w + w <= cap)
        if not m.any():
            return best, energy, n_acc, k
        z = _logits(F, w1, b1, w2, b2)
        idx, lp = _choose(z, m, greedy, rng)
        delta = float(v[idx]) if bits[idx] else -float(v[idx])
        u = rng.random()
        ok = _mh(delta, T, u)
        if train:
            feat1[k] = F
            mask1[k] = m
        act1[k] = idx
        e0[k] = energy
        logp[k] = lp
        if ok:
            n_acc += 1
            if bits[idx]:
                bits[idx] = 0
                total_w -= w[idx]
            else:
                bits[idx] = 1
                total_w += w[idx]
            energy += delta
            if energy < best:
                best = energy
                best_bits[:] = bits
        acc[k] = ok
        e1[k] = energy
        rew[k] = e0[k] - e1[k]
    if train:
        featT[:, 0] = bits
        featT[:, 1] = w
        featT[:, 2] = v
        featT[:, 3] = cap
        featT[:, 4] = t_final
    return best, energy, n_acc, -1


def anneal_binpacking(w, cap, temps, t_final, greedy, train,
                      iw1, ib1, iw2, ib2, bw1, bb1, bw2, bb2, rng,
                      bin_of, counts, free, occupied,
                      act1, act2, e0, e1, acc, aux, logp, rew,
                      feat1, feat2, mask2, featT, best_bin):
    n = w.shape[0]
    K = temps.shape[0]
    energy = float(occupied)
    best = energy
    n_acc = 0
    F1 = np.empty((n, 3))
    F1[:, 0] = w
    F2 = np.empty((n, 3))
    for k in range(K):
        T = temps[k]
        F1[:, 1] = free[bin_of]
        F1[:, 2] = T
        z1 = _logits(F1, iw1, ib1, iw2, ib2)
        i, lp = _choose(z1, None, greedy, rng)
        m2 = free >= w[i]
        m2[bin_of[i]] = False
        F2[:, 0] = w[i]
        F2[:, 1] = free
        F2[:, 2] = T
        if train:
            feat1[k] = F1
            feat2[k] = F2
            mask2[k] = m2
        act1[k] = i
        e0[k] = energy
        if not m2.any():
            # item stuck: automatic rejection, no further draws this step
            aux[k] = 1
            logp[k] = lp
            e1[k] = energy
            rew[k] = 0.0
            continue
        z2 = _logits(F2, bw1, bb1, bw2, bb2)
        j, lp2 = _choose(z2, m2, greedy, rng)
        lp += lp2
        src = int(bin_of[i])
        delta_i = 0
        if counts[src] == 1:
            delta_i -= 1
        if counts[j] == 0:
            delta_i += 1
        delta = float(delta_i)
        u = rng.random()
        ok = _mh(delta, T, u)
        act2[k] = j
        logp[k] = lp
        if ok:
            n_acc += 1
            wi = float(w[i])
            counts[src] -= 1
            if counts[src] == 0:
                free[src] = cap  # exact reset kills float drift
                occupied -= 1
            else:
                free[src] += wi
            if counts[j] == 0:
                free[j] = cap - wi
                occupied += 1
            else:
                free[j] -= wi
            counts[j] += 1
            bin_of[i] = j
            energy = float(occupied)
            if energy < best:
                best = energy
                best_bin[:] = bin_of
        acc[k] = ok
        e1[k] = energy
        rew[k] = e0[k] - e1[k]
    if train:
        featT[:, 0] = w
        featT[:, 1] = free[bin_of]
        featT[:, 2] = t_final
    return best, energy, n_acc, -1


def anneal_tsp(coords, temps, t_final, greedy, train,
               sw1, sb1, sw2, sb2, ew1, eb1, ew2, eb2, rng,
               order, pos, length,
               act1, act2, e0, e1, acc, logp, rew,
               feat1, feat2, mask2, featT, best_order):
    n = order.shape[0]
    K = temps.shape[0]
    energy = length
    best = energy
    n_acc = 0
    F1 = np.empty((n, 7))
    F2 = np.empty((n, 13))
    for k in range(K):
        T = temps[k]
        pred = order[(pos - 1) % n]
        succ = order[(pos + 1) % n]
        F1[:, 0:2] = coords[pred]
        F1[:, 2:4] = coords
        F1[:, 4:6] = coords[succ]
        F1[:, 6] = T
        z1 = _logits(F1, sw1, sb1, sw2, sb2)
        i, lp = _choose(z1, None, greedy, rng)
        F2[:, 0:6] = F1[i, 0:6]
        F2[:, 6:12] = F1[:, 0:6]
        F2[:, 12] = T
        m2 = np.ones(n, dtype=bool)
        m2[i] = False
        m2[pred[i]] = False
        m2[succ[i]] = False
        z2 = _logits(F2, ew1, eb1, ew2, eb2)
        j, lp2 = _choose(z2, m2, greedy, rng)
        lp += lp2
        s = int(succ[i])
        t = int(succ[j])
        dij = _dist(coords, i, j)
        dst = _dist(coords, s, t)
        dis = _dist(coords, i, s)
        djt = _dist(coords, j, t)
        delta = dij + dst - dis - djt
        u = rng.random()
        ok = _mh(delta, T, u)
        if train:
            feat1[k] = F1
            feat2[k] = F2
            mask2[k] = m2
        act1[k] = i
        act2[k] = j
        e0[k] = energy
        logp[k] = lp
        if ok:
            n_acc += 1
            _reverse_segment(order, pos, int(pos[i]), int(pos[j]))
            energy += delta
            if energy < best:
                best = energy
                best_order[:] = order
        acc[k] = ok
        e1[k] = energy
        rew[k] = e0[k] - e1[k]
    if train:
        pred = order[(pos - 1) % n]
        succ = order[(pos + 1) % n]
        featT[:, 0:2] = coords[pred]
        featT[:, 2:4] = coords
        featT[:, 4:6] = coords[succ]
        featT[:, 6] = t_final
    return best, energy, n_acc, -1


def _dist(coords, a: int, b: int) -> float:
    dx = coords[a, 0] - coords[b, 0]
    dy = coords[a, 1] - coords[b, 1]
    return math.sqrt(dx * dx + dy * dy)


def _reverse_segment(order, pos, pi: int, pj: int) -> None:
    """Reverse tour positions pi+1..pj (cyclic), taking the shorter side."""
    n = order.shape[0]
    inner = (pj - pi) % n
    if inner <= n - inner:
        lo, seg = (pi + 1) % n, inner
        hi = pj
    else:
        lo, seg = (pj + 1) % n, n - inner
        hi = pi
    for k in range(seg // 2):
        a = (lo + k) % n
        b = (hi - k) % n
        ca = order[a]
        cb = order[b]
        order[a] = cb
        order[b] = ca
        pos[ca] = b
        pos[cb] = a


def anneal_rosenbrock(a_par, b_par, temps, t_final, greedy, train,
                      w1, b1, w2, b2, rng,
                      x0, x1,
                      act_r, e0, e1, acc, logp, rew,
                      feat1, featT, best_x):
    K = temps.shape[0]
    h = w1.shape[0]
    hid = np.empty(h)
    energy = _rosen(a_par, b_par, x0, x1)
    best = energy
    best_x[0] = x0
    best_x[1] = x1
    n_acc = 0
    for k in range(K):
        T = temps[k]
        for t in range(h):
            hid[t] = b1[t] + w1[t, 0] * x0 + w1[t, 1] * x1
            if hid[t] < 0.0:
                hid[t] = 0.0
        q0 = b2[0]
        q1 = b2[1]
        for t in range(h):
            q0 += w2[0, t] * hid[t]
            q1 += w2[1, t] * hid[t]
        q0 = _clamp(q0)
        q1 = _clamp(q1)
        s0 = math.exp(q0)
        s1 = math.exp(q1)
        if greedy:
            a0 = 0.0
            a1 = 0.0
        else:
            u1 = rng.random()
            u2 = rng.random()
            r = math.sqrt(-2.0 * math.log(1.0 - u1))
            th = TWO_PI * u2
            a0 = s0 * (r * math.cos(th))
            a1 = s1 * (r * math.sin(th))
        za0 = a0 / s0
        za1 = a1 / s1
        lp = (-0.5 * za0 * za0 - math.log(s0) - 0.5 * LOG_2PI) \
            + (-0.5 * za1 * za1 - math.log(s1) - 0.5 * LOG_2PI)
        nx0 = x0 + a0
        nx1 = x1 + a1
        e_new = _rosen(a_par, b_par, nx0, nx1)
        delta = e_new - energy
        u = rng.random()
        ok = _mh(delta, T, u)
        if train:
            feat1[k, 0, 0] = x0
            feat1[k, 0, 1] = x1
        act_r[k, 0] = a0
        act_r[k, 1] = a1
        e0[k] = energy
        logp[k] = lp
        if ok:
            n_acc += 1
            x0 = nx0
            x1 = nx1
            energy = e_new
            if energy < best:
                best = energy
                best_x[0] = x0
                best_x[1] = x1
        acc[k] = ok
        e1[k] = energy
        rew[k] = e0[k] - e1[k]
    if train:
        featT[0, 0] = x0
        featT[0, 1] = x1
    return best, energy, n_acc, -1, x0, x1


def _rosen(a: float, b: float, x0: float, x1: float) -> float:
    dx = a - x0
    t = x1 - x0 * x0
    return dx * dx + b * (t * t)


def _clamp(q: float) -> float:
    if q < SIGMA_CLAMP_LO:
        return SIGMA_CLAMP_LO
    if q > SIGMA_CLAMP_HI:
        return SIGMA_CLAMP_HI
    return q
