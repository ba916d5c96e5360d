import math

import numpy as np
import pytest

from neural_sa.errors import InvalidScheduleError, ScheduleRangeError
from neural_sa.schedule import TemperatureSchedule, compute_alpha, mh_accept, temperature_at


def test_alpha_identity_case():
    assert compute_alpha(1.0, 1.0, 100) == 1.0


def test_alpha_closed_form():
    # direct evaluation of the closed form, endpoint recovered to 1e-9 relative
    a = compute_alpha(1.0, 0.1, 100)
    assert a == pytest.approx(0.1 ** 0.01, rel=1e-12)
    assert a == pytest.approx(0.977237, abs=1e-6)
    assert 1.0 * a**100 == pytest.approx(0.1, rel=1e-9)

    a = compute_alpha(1.0, 0.01, 40)
    assert a == pytest.approx(0.01 ** (1 / 40), rel=1e-12)
    assert a == pytest.approx(0.891251, abs=1e-6)
    assert 1.0 * a**40 == pytest.approx(0.01, rel=1e-9)


def test_alpha_endpoint_relative_error_random():
    rng = np.random.default_rng(0)
    for _ in range(50):
        t0 = 10.0 ** rng.uniform(-3, 2)
        tk = t0 * 10.0 ** rng.uniform(-6, 0)
        K = int(rng.integers(1, 5000))
        a = compute_alpha(t0, tk, K)
        assert t0 * a**K == pytest.approx(tk, rel=1e-9)


def test_alpha_invalid():
    with pytest.raises(InvalidScheduleError):
        compute_alpha(1.0, 2.0, 10)  # tK > t0
    with pytest.raises(InvalidScheduleError):
        compute_alpha(0.0, 0.0, 10)
    with pytest.raises(InvalidScheduleError):
        compute_alpha(1.0, -0.1, 10)
    with pytest.raises(InvalidScheduleError):
        compute_alpha(1.0, 0.1, 0)


def test_temperature_at():
    s = TemperatureSchedule(1.0, 0.1, 100)
    assert temperature_at(s, 0) == 1.0
    assert temperature_at(s, 100) == pytest.approx(0.1, abs=1e-9)
    # geometric midpoint is sqrt(0.1)
    assert temperature_at(s, 50) == pytest.approx(math.sqrt(0.1), rel=1e-12)
    assert temperature_at(s, 50) == pytest.approx(0.316228, abs=1e-6)


def test_temperature_out_of_range():
    s = TemperatureSchedule(1.0, 0.1, 100)
    with pytest.raises(ScheduleRangeError):
        s.temperature_at(101)
    with pytest.raises(ScheduleRangeError):
        s.temperature_at(-1)


def test_temperatures_monotone_nonincreasing():
    for t0, tk, k in [(1.0, 0.1, 100), (2.0, 2.0, 7), (0.5, 1e-6, 313)]:
        temps = TemperatureSchedule(t0, tk, k).temperatures()
        assert temps.shape == (k,)
        assert np.all(np.diff(temps) <= 0)


def test_mh_accept_downhill_always():
    assert mh_accept(-0.5, 1.0, 0.999) is True
    assert mh_accept(0.0, 0.01, 0.9999) is True  # exp(0) = 1 boundary


def test_mh_accept_half_probability_point():
    # delta = T ln 2 makes p exactly 0.5
    delta = 1.0 * math.log(2.0)
    assert mh_accept(delta, 1.0, 0.499) is True
    assert mh_accept(delta, 1.0, 0.501) is False


def test_mh_accept_underflow_guard():
    assert mh_accept(-1e-9, 1e-305, 0.5) is True
    assert mh_accept(1e-9, 1e-305, 0.0) is False
    assert mh_accept(0.0, 1e-305, 0.9) is True


def test_mh_statistics_within_4_sigma():
    # empirical acceptance over 1e5 draws vs p = min(1, exp(-dE/T))
    rng = np.random.default_rng(42)
    draws = 10**5
    for _ in range(20):
        delta = rng.uniform(-1.0, 3.0)
        temp = 10.0 ** rng.uniform(-2, 1)
        p = min(1.0, math.exp(-delta / temp))
        u = rng.random(draws)
        emp = np.mean(u < np.exp(min(0.0, -delta / temp)))
        tol = 4.0 * math.sqrt(p * (1.0 - p) / draws)
        assert abs(emp - p) <= tol + 1e-12


def test_mh_statistics_via_function():
    rng = np.random.default_rng(7)
    draws = 10**5
    delta, temp = 0.8, 1.3
    p = math.exp(-delta / temp)
    hits = sum(mh_accept(delta, temp, rng.random()) for _ in range(draws))
    tol = 4.0 * math.sqrt(p * (1.0 - p) / draws)
    assert abs(hits / draws - p) <= tol
