"""Euclidean TSP with 2-opt moves.

A tour is a permutation of city indices plus its inverse (position of each
city). The move (i, j) adds edge (i, j): with s = succ(i) and t = succ(j) it
reverses the tour segment s..j, replacing edges (i,s) and (j,t) by (i,j) and
(s,t). The delta is computed from those four edges in O(1); the reversal is
applied over the shorter of the two complementary segments, which yields the
same cyclic tour.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InfeasibleActionError

NAME = "tsp"
# two proposal stages: segment start city, then end city
STAGES = (("start_city", 7), ("end_city", 13))
CRITIC_DIM = 7


@dataclass(frozen=True)
class TspInstance:
    coords: np.ndarray  # (N, 2) in the unit square

    def __post_init__(self):
        c = np.ascontiguousarray(np.asarray(self.coords, dtype=np.float64))
        object.__setattr__(self, "coords", c)
        if c.ndim != 2 or c.shape[1] != 2:
            raise ValueError("coords must be an (N, 2) array")
        if c.shape[0] < 4:
            raise ValueError("need at least 4 cities for 2-opt with neighbour masking")

    @property
    def n(self) -> int:
        return self.coords.shape[0]


@dataclass
class TspTour:
    order: np.ndarray  # (N,) int32, order[k] = city at tour position k
    position: np.ndarray  # (N,) int32, inverse of order
    length: float

    def copy(self) -> "TspTour":
        return TspTour(self.order.copy(), self.position.copy(), self.length)


def dist(inst: TspInstance, a: int, b: int) -> float:
    dx = inst.coords[a, 0] - inst.coords[b, 0]
    dy = inst.coords[a, 1] - inst.coords[b, 1]
    return math.sqrt(dx * dx + dy * dy)


def tour_length(inst: TspInstance, order: np.ndarray) -> float:
    total = 0.0
    n = len(order)
    for k in range(n):
        total += dist(inst, int(order[k]), int(order[(k + 1) % n]))
    return total


def energy(inst: TspInstance, tour: TspTour) -> float:
    return tour_length(inst, tour.order)


def initial(inst: TspInstance, rng: np.random.Generator) -> TspTour:
    """Uniformly random tour from the rollout's own stream."""
    order = rng.permutation(inst.n).astype(np.int32)
    position = np.empty(inst.n, dtype=np.int32)
    position[order] = np.arange(inst.n, dtype=np.int32)
    return TspTour(order, position, tour_length(inst, order))


def from_order(inst: TspInstance, order) -> TspTour:
    order = np.asarray(order, dtype=np.int32)
    position = np.empty(inst.n, dtype=np.int32)
    position[order] = np.arange(inst.n, dtype=np.int32)
    return TspTour(order, position, tour_length(inst, order))


def city_mask(tour: TspTour, i: int) -> np.ndarray:
    """Candidate end cities for start i: everything but i and its tour neighbours."""
    n = len(tour.order)
    m = np.ones(n, dtype=bool)
    pi = tour.position[i]
    m[i] = False
    m[tour.order[(pi - 1) % n]] = False
    m[tour.order[(pi + 1) % n]] = False
    return m


def neighbours(tour: TspTour, i: int) -> tuple[int, int]:
    """(predecessor, successor) of city i in the tour."""
    n = len(tour.order)
    pi = tour.position[i]
    return int(tour.order[(pi - 1) % n]), int(tour.order[(pi + 1) % n])


def apply_2opt(inst: TspInstance, tour: TspTour, i: int, j: int):
    """Apply move (i, j); returns (new tour, length delta)."""
    if not city_mask(tour, i)[j]:
        raise InfeasibleActionError(f"invalid 2-opt end city {j} for start {i}")
    out = tour.copy()
    delta = _apply_2opt_inplace(inst.coords, out.order, out.position, i, j)
    out.length += delta
    return out, delta


def _apply_2opt_inplace(coords, order, position, i: int, j: int) -> float:
    """Shared bookkeeping: reverse the shorter segment, return the edge delta."""
    n = len(order)
    pi = int(position[i])
    pj = int(position[j])
    s = int(order[(pi + 1) % n])
    t = int(order[(pj + 1) % n])

    def d(a, b):
        dx = coords[a, 0] - coords[b, 0]
        dy = coords[a, 1] - coords[b, 1]
        return math.sqrt(dx * dx + dy * dy)

    delta = d(i, j) + d(s, t) - d(i, s) - d(j, t)

    inner = (pj - pi) % n  # segment s..j has `inner` cities
    if inner <= n - inner:
        lo, hi, seg = (pi + 1) % n, pj, inner
    else:
        lo, hi, seg = (pj + 1) % n, pi, n - inner
    for k in range(seg // 2):
        a = (lo + k) % n
        b = (hi - k) % n
        ca, cb = order[a], order[b]
        order[a], order[b] = cb, ca
        position[ca], position[cb] = b, a
    return delta


def city_features(inst: TspInstance, tour: TspTour, temperature: float) -> np.ndarray:
    """Per-city rows [c_pred, c_city, c_succ, T] in R^7."""
    n = inst.n
    out = np.empty((n, 7), dtype=np.float64)
    pred_pos = (tour.position - 1) % n
    succ_pos = (tour.position + 1) % n
    out[:, 0:2] = inst.coords[tour.order[pred_pos]]
    out[:, 2:4] = inst.coords
    out[:, 4:6] = inst.coords[tour.order[succ_pos]]
    out[:, 6] = temperature
    return out


def pair_features(inst: TspInstance, tour: TspTour, temperature: float, i: int) -> np.ndarray:
    """Per-candidate rows [c_pred(i), c_i, c_succ(i), c_pred(j), c_j, c_succ(j), T] in R^13."""
    n = inst.n
    base = city_features(inst, tour, temperature)
    out = np.empty((n, 13), dtype=np.float64)
    out[:, 0:6] = base[i, 0:6]
    out[:, 6:12] = base[:, 0:6]
    out[:, 12] = temperature
    return out


def validate(inst: TspInstance, tour: TspTour, tol: float = 1e-9) -> None:
    n = inst.n
    assert sorted(tour.order.tolist()) == list(range(n)), "not a permutation"
    assert np.array_equal(tour.position[tour.order], np.arange(n)), "stale inverse"
    assert abs(tour.length - tour_length(inst, tour.order)) <= tol, "stale length cache"


def instance_to_json(inst: TspInstance) -> dict:
    return {"problem": NAME, "coords": inst.coords.tolist()}


def instance_from_json(obj: dict) -> TspInstance:
    return TspInstance(np.asarray(obj["coords"], dtype=np.float64))
