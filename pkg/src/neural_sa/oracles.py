"""Exact solvers for small instances, used as references in tests and gap
reports. Each has a second, independent implementation used to cross-check it
in the test suite."""

from __future__ import annotations

import itertools
import math

import numpy as np

from .problems.binpacking import BinPackingInstance
from .problems.knapsack import KnapsackInstance
from .problems.tsp import TspInstance

KNAPSACK_CAP = 24
TSP_CAP = 10
BINPACKING_CAP = 10


class OracleSizeError(ValueError):
    pass


def brute_force_knapsack(inst: KnapsackInstance):
    """Exhaustive subset enumeration; returns (optimal value, bit vector)."""
    n = inst.n
    if n > KNAPSACK_CAP:
        raise OracleSizeError(f"knapsack oracle capped at N={KNAPSACK_CAP}, got {n}")
    best_v = 0.0
    best_mask = 0
    powers = 1 << np.arange(n, dtype=np.int64)
    chunk = 1 << 20
    for lo in range(0, 1 << n, chunk):
        idx = np.arange(lo, min(lo + chunk, 1 << n), dtype=np.int64)
        bits = (idx[:, None] & powers) != 0
        w = bits @ inst.weights
        ok = w <= inst.capacity
        if not ok.any():
            continue
        v = bits[ok] @ inst.values
        j = int(np.argmax(v))
        if v[j] > best_v:
            best_v = float(v[j])
            best_mask = int(idx[ok][j])
    bits = np.array([(best_mask >> i) & 1 for i in range(n)], dtype=np.uint8)
    return best_v, bits


def knapsack_pareto(inst: KnapsackInstance):
    """Independent cross-check: Nemhauser-Ullmann pareto list over real weights."""
    pareto = [(0.0, 0.0)]  # (weight, value), undominated, weight-sorted
    for w, v in zip(inst.weights, inst.values):
        merged = []
        extended = [(pw + w, pv + v) for pw, pv in pareto if pw + w <= inst.capacity]
        a = b = 0
        while a < len(pareto) or b < len(extended):
            if b >= len(extended) or (a < len(pareto) and pareto[a][0] <= extended[b][0]):
                merged.append(pareto[a]); a += 1
            else:
                merged.append(extended[b]); b += 1
        pareto = []
        best_v = -1.0
        for pw, pv in merged:
            if pv > best_v:
                pareto.append((pw, pv))
                best_v = pv
    return max(pv for _, pv in pareto)


def brute_force_tsp(inst: TspInstance):
    """Enumerate canonical tours (city 0 first, direction fixed); returns
    (optimal length, tour)."""
    n = inst.n
    if n > TSP_CAP:
        raise OracleSizeError(f"tsp oracle capped at N={TSP_CAP}, got {n}")
    c = inst.coords
    d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(-1))
    best_len = math.inf
    best_tour = None
    for perm in itertools.permutations(range(1, n)):
        if perm[0] > perm[-1]:
            continue  # each cycle counted once per direction
        length = d[0, perm[0]] + d[perm[-1], 0]
        for a, b in zip(perm, perm[1:]):
            length += d[a, b]
        if length < best_len:
            best_len = float(length)
            best_tour = (0,) + perm
    return best_len, np.array(best_tour, dtype=np.int32)


def held_karp_tsp(inst: TspInstance) -> float:
    """Independent cross-check: Held-Karp dynamic program."""
    n = inst.n
    c = inst.coords
    d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(-1))
    size = 1 << (n - 1)  # subsets of cities 1..n-1
    dp = np.full((size, n - 1), math.inf)
    for j in range(n - 1):
        dp[1 << j, j] = d[0, j + 1]
    for s in range(size):
        row = dp[s]
        for j in range(n - 1):
            cur = row[j]
            if not math.isfinite(cur):
                continue
            for m in range(n - 1):
                if s & (1 << m):
                    continue
                ns = s | (1 << m)
                cand = cur + d[j + 1, m + 1]
                if cand < dp[ns, m]:
                    dp[ns, m] = cand
    full = size - 1
    return float(min(dp[full, j] + d[j + 1, 0] for j in range(n - 1)))


def brute_force_binpacking(inst: BinPackingInstance) -> int:
    """Exact minimum bin count by DFS with symmetric-bin pruning."""
    n = inst.n
    if n > BINPACKING_CAP:
        raise OracleSizeError(f"binpacking oracle capped at N={BINPACKING_CAP}, got {n}")
    w = sorted(inst.weights.tolist(), reverse=True)
    lower = math.ceil(sum(w) / inst.capacity - 1e-12)
    best = [n]

    def dfs(i: int, loads: list):
        if len(loads) >= best[0]:
            return
        if i == n:
            best[0] = len(loads)
            return
        remaining_lb = math.ceil((sum(w[i:]) + sum(loads)) / inst.capacity - 1e-12)
        if max(len(loads), remaining_lb) >= best[0]:
            return
        seen = set()
        for j in range(len(loads)):
            if loads[j] + w[i] <= inst.capacity + 1e-12:
                key = round(loads[j], 12)
                if key in seen:
                    continue  # identical bins are interchangeable
                seen.add(key)
                loads[j] += w[i]
                dfs(i + 1, loads)
                loads[j] -= w[i]
        loads.append(w[i])
        dfs(i + 1, loads)
        loads.pop()
        if best[0] == lower:
            return

    dfs(0, [])
    return best[0]
