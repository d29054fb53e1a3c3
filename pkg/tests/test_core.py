import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corridor_dta import (CallableSchedule, CorridorNetwork, Direction, PiecewiseLinearSchedule, VSchedule,
                          eval_schedule, eval_schedule_slope, window_from_length)
from corridor_dta.core import window_by_bisection
from corridor_dta.errors import AmbiguityError, DomainError, HorizonError


def test_network_validation():
    with pytest.raises(ValueError):
        CorridorNetwork([50, -1], [0, 0], [1, 1], 10)
    with pytest.raises(ValueError):
        CorridorNetwork([50, 30], [1, 0], [1, 1], 10)  # free-flow times must not decrease
    with pytest.raises(ValueError):
        CorridorNetwork([50, 30], [0, 0], [1, -1], 10)
    net = CorridorNetwork([50, 30, 10], [0, 0, 0], [100, 350, 250], 60)
    assert net.direction is Direction.MORNING
    assert np.allclose(net.merged_capacities, [20, 20, 10])


def test_v_schedule_values_and_slopes():
    s = VSchedule(0.5, 2.0, 30.0)
    assert eval_schedule(s, 28.0) == pytest.approx(1.0)
    assert eval_schedule(s, 31.0) == pytest.approx(2.0)
    assert eval_schedule_slope(s, 29.0) == pytest.approx(-0.5)
    assert eval_schedule_slope(s, 30.0, "right") == pytest.approx(2.0)
    with pytest.raises(AmbiguityError):
        eval_schedule_slope(s, 30.0)


def test_piecewise_schedule_domain_and_quasiconvexity():
    s = PiecewiseLinearSchedule([0, 10, 20], [5, 0, 5])
    with pytest.raises(DomainError):
        s.value(25.0)
    with pytest.raises(ValueError):
        PiecewiseLinearSchedule([0, 10, 20, 30], [5, 0, 5, 1])


@given(st.floats(0.1, 3), st.floats(0.1, 3), st.floats(0, 20))
@settings(max_examples=100, deadline=None)
def test_v_window_closed_form_matches_bisection(beta, gamma, length):
    s = VSchedule(beta, gamma, 30.0)
    w1, v1 = window_from_length(s, length)
    w2, v2 = window_by_bisection(s, length, (0.0, 60.0))
    assert abs(w1.start - w2.start) <= 1e-8 and abs(v1 - v2) <= 1e-8
    assert abs(s.value(w1.start) - s.value(w1.end)) <= 1e-9


@given(st.lists(st.floats(0.1, 2), min_size=2, max_size=4), st.lists(st.floats(0.1, 2), min_size=2, max_size=4))
@settings(max_examples=60, deadline=None)
def test_piecewise_window_equal_endpoints_and_monotone_value(left, right):
    left = sorted(left, reverse=True)  # steeper further from the desired time
    right = sorted(right)
    bp = [30.0 - 3 * k for k in range(len(left), 0, -1)] + [30.0] + [30.0 + 3 * k for k in range(1, len(right) + 1)]
    vals = [3 * sum(left[k:]) for k in range(len(left))] + [0.0] + [3 * sum(right[:k]) for k in range(1, len(right) + 1)]
    s = PiecewiseLinearSchedule(bp, vals)
    prev = -1.0
    for L in np.linspace(0, 5.5, 12):
        w, val = window_from_length(s, L)
        assert abs(s.value(w.start) - s.value(w.end)) <= 1e-9
        assert val >= prev - 1e-12
        prev = val


def test_callable_schedule_window():
    s = CallableSchedule(lambda t: (t - 30.0) ** 2 / 10, lambda t: (t - 30.0) / 5, 30.0, (0.0, 60.0))
    w, val = window_from_length(s, 10.0)
    assert w.start == pytest.approx(25.0, abs=1e-8)
    assert val == pytest.approx(2.5, abs=1e-8)


def test_window_outside_horizon():
    s = VSchedule(0.5, 0.5, 5.0)
    with pytest.raises(HorizonError):
        window_from_length(s, 20.0, (0.0, 60.0))


def test_zero_length_window_at_desired_time():
    w, val = window_from_length(VSchedule(1.0, 2.0, 30.0), 0.0)
    assert w.start == pytest.approx(30.0) and w.length == 0 and val == 0.0
