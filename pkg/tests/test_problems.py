import math

import numpy as np
import pytest

from neural_sa.errors import InfeasibleActionError
from neural_sa.problems import binpacking as bp
from neural_sa.problems import knapsack as kp
from neural_sa.problems import rosenbrock as rb
from neural_sa.problems import tsp
from neural_sa.problems import instance_from_json, instance_to_json


# ---------------------------------------------------------------------------
# knapsack
# ---------------------------------------------------------------------------

def _knap(w, v, cap):
    return kp.KnapsackInstance(np.array(w, float), np.array(v, float), cap)


def _knap_sol(inst, bits):
    bits = np.array(bits, dtype=np.uint8)
    return kp.KnapsackSolution(bits, float(inst.weights @ bits), float(inst.values @ bits))


def test_knapsack_energy_examples():
    inst = _knap([0.2, 0.3, 0.4], [1.0, 2.0, 3.0], 1.0)
    assert kp.energy(inst, _knap_sol(inst, [0, 0, 0])) == 0.0
    assert kp.energy(inst, _knap_sol(inst, [1, 0, 1])) == -4.0
    assert kp.energy(inst, _knap_sol(inst, [1, 1, 1])) == pytest.approx(-6.0)


def test_knapsack_initial():
    for n in (1, 50):
        inst = _knap([0.5] * n, [0.5] * n, 10.0)
        sol = kp.initial(inst)
        assert sol.bits.tolist() == [0] * n
        assert sol.total_weight == 0.0 and sol.total_value == 0.0
        assert kp.energy(inst, sol) == 0.0
        kp.validate(inst, sol)


def test_knapsack_mask_examples():
    inst = _knap([0.3, 0.9], [1.0, 1.0], 1.0)
    assert kp.mask(inst, _knap_sol(inst, [0, 0])).tolist() == [True, True]
    assert kp.mask(inst, _knap_sol(inst, [1, 0])).tolist() == [True, False]
    inst3 = _knap([0.3, 0.3, 0.3], [1, 1, 1], 1.0)
    assert kp.mask(inst3, _knap_sol(inst3, [1, 1, 1])).tolist() == [True] * 3


def test_knapsack_apply_signs_and_involution():
    inst = _knap([0.2, 0.3], [0.7, 0.4], 1.0)
    sol = kp.initial(inst)
    s1, d1 = kp.apply(inst, sol, 0)
    assert d1 == pytest.approx(-0.7)
    s2, d2 = kp.apply(inst, s1, 0)
    assert d2 == pytest.approx(0.7)
    assert s2.bits.tolist() == sol.bits.tolist()
    assert d1 + d2 == pytest.approx(0.0)


def test_knapsack_apply_infeasible_raises():
    inst = _knap([0.9, 0.9], [1.0, 1.0], 1.0)
    sol, _ = kp.apply(inst, kp.initial(inst), 0)
    with pytest.raises(InfeasibleActionError):
        kp.apply(inst, sol, 1)


def test_knapsack_incremental_delta_matches_recompute():
    rng = np.random.default_rng(1)
    inst = _knap(1 - rng.random(10), 1 - rng.random(10), 2.5)
    sol = kp.initial(inst)
    for _ in range(1000):
        m = kp.mask(inst, sol)
        choices = np.flatnonzero(m)
        i = int(rng.choice(choices))
        new, delta = kp.apply(inst, sol, i)
        assert delta == pytest.approx(kp.energy(inst, new) - kp.energy(inst, sol), abs=1e-12)
        kp.validate(inst, new)
        sol = new


def test_knapsack_energy_bounds():
    rng = np.random.default_rng(2)
    inst = _knap(1 - rng.random(8), 1 - rng.random(8), 2.0)
    sol = kp.initial(inst)
    for _ in range(200):
        m = kp.mask(inst, sol)
        i = int(rng.choice(np.flatnonzero(m)))
        sol, _ = kp.apply(inst, sol, i)
        e = kp.energy(inst, sol)
        assert -float(inst.values.sum()) - 1e-9 <= e <= 0.0


def test_knapsack_features():
    inst = _knap([0.2, 0.3], [0.7, 0.4], 1.5)
    sol = kp.initial(inst)
    F = kp.features(inst, sol, 0.25)
    assert F.shape == (2, 5)
    assert np.all(F[:, 0] == 0)
    assert np.all(F[:, 3] == 1.5) and np.all(F[:, 4] == 0.25)
    assert F[1].tolist() == [0.0, 0.3, 0.4, 1.5, 0.25]


# ---------------------------------------------------------------------------
# bin packing
# ---------------------------------------------------------------------------

def _bp(w, cap=1.0):
    return bp.BinPackingInstance(np.array(w, float), cap)


def test_binpacking_initial_and_energy():
    inst = _bp([0.6, 0.6, 0.3])
    sol = bp.initial(inst)
    assert bp.energy(inst, sol) == 3.0
    bp.validate(inst, sol)
    one = bp.BinPackingInstance(np.array([0.4]), 1.0)
    assert bp.energy(one, bp.initial(one)) == 1.0


def test_binpacking_energy_hand_count():
    inst = _bp([0.6, 0.6, 0.3])
    sol = bp.initial(inst)
    sol, d = bp.apply(inst, sol, 2, 0)  # put item 2 with item 0
    assert bp.energy(inst, sol) == 2.0 and d == -1.0


def test_binpacking_capacity_invariant():
    with pytest.raises(ValueError):
        bp.BinPackingInstance(np.array([1.2, 0.3]), 1.0)


def test_binpacking_bin_mask():
    inst = _bp([0.4, 0.7])
    sol = bp.initial(inst)
    # item 0 cannot join bin 1 (0.3 free), item 1 cannot join bin 0 (0.6 free)
    assert bp.bin_mask(inst, sol, 0).tolist() == [False, False]
    assert bp.bin_mask(inst, sol, 1).tolist() == [False, False]
    full = _bp([1.0, 1.0])
    m = bp.bin_mask(full, bp.initial(full), 0)
    assert m.tolist() == [False, False]  # own bin excluded, other bin is full


def test_binpacking_apply_deltas():
    inst = _bp([0.3, 0.3, 0.3])
    sol = bp.initial(inst)
    merged, d = bp.apply(inst, sol, 0, 1)  # sole occupant into occupied bin
    assert d == -1.0 and merged.occupied_bins == 2
    # item 0 (not alone in bin 1) back into its old, now-empty bin: split
    back, d2 = bp.apply(inst, merged, 0, 0)
    assert d2 == 1.0 and back.occupied_bins == 3
    # move within occupied bins, source keeps an item: delta 0
    merged2, _ = bp.apply(inst, sol, 0, 1)
    moved, d3 = bp.apply(inst, merged2, 0, 2)
    assert d3 == 0.0 and moved.occupied_bins == 2


def test_binpacking_apply_infeasible():
    inst = _bp([0.6, 0.6])
    sol = bp.initial(inst)
    with pytest.raises(InfeasibleActionError):
        bp.apply(inst, sol, 0, 1)


def test_binpacking_random_walk_caches_and_bounds():
    rng = np.random.default_rng(3)
    inst = _bp((1 - rng.random(12)) * 0.8 + 0.1)
    sol = bp.initial(inst)
    lower = math.ceil(inst.weights.sum() / inst.capacity - 1e-12)
    for _ in range(1000):
        i = int(rng.integers(inst.n))
        m = bp.bin_mask(inst, sol, i)
        if not m.any():
            continue
        j = int(rng.choice(np.flatnonzero(m)))
        new, delta = bp.apply(inst, sol, i, j)
        assert delta == pytest.approx(bp.energy(inst, new) - bp.energy(inst, sol), abs=1e-12)
        assert lower <= bp.energy(inst, new) <= inst.n
        sol = new
    bp.validate(inst, sol)


def test_binpacking_features():
    inst = _bp([0.4, 0.7])
    sol = bp.initial(inst)
    F = bp.item_features(inst, sol, 0.5)
    assert F.shape == (2, 3)
    assert F[:, 1] == pytest.approx([0.6, 0.3])  # c_{b(i)} = W - w_i initially
    G = bp.bin_features(inst, sol, 0.5, item=1)
    assert np.all(G[:, 0] == 0.7)
    assert G[:, 1] == pytest.approx([0.6, 0.3])


# ---------------------------------------------------------------------------
# tsp
# ---------------------------------------------------------------------------

CORNERS = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def test_tsp_energy_perimeter_and_crossing():
    inst = tsp.TspInstance(CORNERS)
    perimeter = tsp.from_order(inst, [0, 1, 2, 3])
    assert tsp.energy(inst, perimeter) == pytest.approx(4.0)
    # crossing tour over the corners: 2 + 2*sqrt(2)
    crossing = tsp.from_order(inst, [0, 2, 1, 3])
    assert tsp.energy(inst, crossing) == pytest.approx(2 + 2 * math.sqrt(2))
    reverse = tsp.from_order(inst, [3, 2, 1, 0])
    assert tsp.energy(inst, reverse) == pytest.approx(4.0)


def test_tsp_initial_deterministic_and_consistent():
    rng = np.random.default_rng(5)
    inst = tsp.TspInstance(rng.random((6, 2)))
    t1 = tsp.initial(inst, np.random.default_rng(11))
    t2 = tsp.initial(inst, np.random.default_rng(11))
    assert np.array_equal(t1.order, t2.order)
    assert np.array_equal(t1.position[t1.order], np.arange(6))
    assert t1.length == pytest.approx(tsp.tour_length(inst, t1.order), abs=1e-9)


def test_tsp_city_mask():
    inst = tsp.TspInstance(CORNERS)
    tour = tsp.from_order(inst, [0, 1, 2, 3])
    m = tsp.city_mask(tour, 0)
    assert m.sum() == 1 and m[2]  # N=4: single candidate, the opposite city
    rng = np.random.default_rng(6)
    inst20 = tsp.TspInstance(rng.random((20, 2)))
    tour20 = tsp.initial(inst20, rng)
    for i in range(20):
        assert tsp.city_mask(tour20, i).sum() == 17


def test_tsp_2opt_uncrossing_example():
    inst = tsp.TspInstance(CORNERS)
    crossing = tsp.from_order(inst, [0, 2, 1, 3])  # c00, c11, c10, c01
    # 2-opt adding edge between city 0 (corner 00) and city 1 (corner 10)
    new, delta = tsp.apply_2opt(inst, crossing, 0, 1)
    assert delta == pytest.approx(4.0 - (2 + 2 * math.sqrt(2)))
    assert new.length == pytest.approx(4.0)
    tsp.validate(inst, new)


def test_tsp_2opt_inverse_restores_length():
    rng = np.random.default_rng(7)
    inst = tsp.TspInstance(rng.random((10, 2)))
    tour = tsp.initial(inst, rng)
    i = int(tour.order[0])
    j = int(tour.order[4])
    fwd, d1 = tsp.apply_2opt(inst, tour, i, j)
    # the inverse move re-creates the old edges (i, s) and (j, t)
    s = tsp.neighbours(tour, i)[1]
    back, d2 = tsp.apply_2opt(inst, fwd, i, s)
    assert d1 + d2 == pytest.approx(0.0, abs=1e-9)
    assert back.length == pytest.approx(tour.length, abs=1e-9)


def test_tsp_2opt_delta_matches_recompute():
    rng = np.random.default_rng(8)
    inst = tsp.TspInstance(rng.random((10, 2)))
    tour = tsp.initial(inst, rng)
    for _ in range(1000):
        i = int(rng.integers(10))
        m = tsp.city_mask(tour, i)
        j = int(rng.choice(np.flatnonzero(m)))
        new, delta = tsp.apply_2opt(inst, tour, i, j)
        assert delta == pytest.approx(
            tsp.tour_length(inst, new.order) - tsp.tour_length(inst, tour.order), abs=1e-9)
        assert abs(new.length - tsp.tour_length(inst, new.order)) <= 1e-9
        tour = new
    tsp.validate(inst, tour)


def test_tsp_length_invariant_under_rotation_and_reversal():
    rng = np.random.default_rng(9)
    inst = tsp.TspInstance(rng.random((8, 2)))
    order = rng.permutation(8)
    base = tsp.tour_length(inst, order)
    for shift in range(8):
        assert tsp.tour_length(inst, np.roll(order, shift)) == pytest.approx(base)
    assert tsp.tour_length(inst, order[::-1]) == pytest.approx(base)


def test_tsp_min_size():
    with pytest.raises(ValueError):
        tsp.TspInstance(np.array([[0.0, 0.0], [1.0, 1.0], [0.5, 0.5]]))


def test_tsp_features_layout():
    inst = tsp.TspInstance(CORNERS)
    tour = tsp.from_order(inst, [0, 1, 2, 3])
    F = tsp.city_features(inst, tour, 0.7)
    assert F.shape == (4, 7)
    # city 1 on the perimeter tour: pred = 0, succ = 2
    assert F[1].tolist() == [0, 0, 1, 0, 1, 1, 0.7]
    assert np.all(F[:, 6] == 0.7)
    # rotating the order leaves per-city features unchanged
    rot = tsp.from_order(inst, [2, 3, 0, 1])
    assert np.allclose(tsp.city_features(inst, rot, 0.7), F)
    G = tsp.pair_features(inst, tour, 0.7, 1)
    assert G.shape == (4, 13)
    assert np.all(G[:, 0:6] == F[1, 0:6])
    assert np.all(G[:, 6:12] == F[:, 0:6])


# ---------------------------------------------------------------------------
# rosenbrock
# ---------------------------------------------------------------------------

def test_rosenbrock_energy_examples():
    inst = rb.RosenbrockInstance(1.0, 100.0)
    assert rb.energy(inst, rb.RosenbrockPoint(1.0, 1.0)) == 0.0
    assert rb.energy(inst, rb.RosenbrockPoint(0.0, 0.0)) == 1.0
    assert rb.energy(inst, rb.RosenbrockPoint(1.5, 2.0)) == pytest.approx(6.5)


def test_rosenbrock_apply():
    inst = rb.RosenbrockInstance(1.0, 100.0)
    p = rb.RosenbrockPoint(1.0, 1.0)
    q, d0 = rb.apply(inst, p, (0.0, 0.0))
    assert d0 == 0.0 and (q.x0, q.x1) == (1.0, 1.0)
    # hand evaluation: (1,1)+(0.5,1.0) = (1.5,2.0), E = 0.25 + 100*0.0625 = 6.5
    q, d = rb.apply(inst, p, (0.5, 1.0))
    assert rb.energy(inst, q) == pytest.approx(6.5)
    assert d == pytest.approx(6.5)
    # successive actions add up
    q2, _ = rb.apply(inst, q, (-0.5, -1.0))
    assert (q2.x0, q2.x1) == (1.0, 1.0)


def test_rosenbrock_invariants():
    with pytest.raises(ValueError):
        rb.RosenbrockInstance(1.0, 0.0)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_instance_json_round_trip():
    rng = np.random.default_rng(10)
    insts = [
        ("knapsack", _knap(1 - rng.random(5), 1 - rng.random(5), 2.0)),
        ("binpacking", _bp(1 - rng.random(5))),
        ("tsp", tsp.TspInstance(rng.random((5, 2)))),
        ("rosenbrock", rb.RosenbrockInstance(1.0, 100.0)),
    ]
    for name, inst in insts:
        obj = instance_to_json(name, inst)
        assert obj["problem"] == name
        back = instance_from_json(obj)
        for f in ("weights", "values", "coords"):
            if hasattr(inst, f):
                assert np.array_equal(getattr(inst, f), getattr(back, f))
