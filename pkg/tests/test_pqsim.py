import numpy as np
import pytest

from corridor_dta import CorridorNetwork, VSchedule, solve_dso, solve_due
from corridor_dta.pqsim import InflowProfile, inflows_from_solution, point_queue, simulate, verify_equilibrium
from corridor_dta.pwl import PiecewiseLinearFn

from conftest import example


def test_point_queue_constant_overload():
    # inflow 2 mu on [0, Q/(2 mu)] builds a queue that peaks at Q/2 vehicles
    mu, Q = 10.0, 100.0
    A = PiecewiseLinearFn([0, Q / (2 * mu)], [0, Q], 0, Q)
    D = point_queue(A, mu)
    assert D.right == pytest.approx(Q)
    assert D.first_reach(Q) == pytest.approx(Q / mu)
    net = CorridorNetwork([mu], [0], [Q], 20)
    res = simulate(net, InflowProfile((A,)))
    assert res.delay(0, Q / (2 * mu) - 1e-12) == pytest.approx(Q / (2 * mu))
    assert res.delay(0, 0.0) == pytest.approx(0.0)


def test_point_queue_below_capacity_has_no_delay():
    A = PiecewiseLinearFn([0, 10], [0, 50], 0, 50)
    D = point_queue(A, 10.0)
    t = np.linspace(0, 12, 61)
    assert np.allclose(D(t), A(t))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_conservation_fifo_causality(n):
    net, s = example(n)
    res = simulate(net, inflows_from_solution(solve_dso(net, s)))
    t = np.linspace(-5, 80, 851)
    for i in range(net.n_bottlenecks):
        A, D = res.arrival[i], res.departure[i]
        assert D.right == pytest.approx(A.right)           # conservation
        assert np.all(D(t) <= A(t) + 1e-9)                  # causality
        assert np.all(np.diff(D(t)) >= -1e-9)
        rate = np.diff(D(t)) / np.diff(t)
        assert rate.max() <= net.capacities[i] * (1 + 1e-9)
        assert np.all(np.diff(res.exit_time(i, t)) >= -1e-9)  # FIFO


@pytest.mark.parametrize("n", [1, 3])
def test_due_replay_reproduces_delays(n):
    """Replaying the closed-form DUE flows through the simulator gives back w."""
    net, s = example(n)
    due = solve_due(solve_dso(net, s), net, s)
    res = simulate(net, inflows_from_solution(due))
    rep = verify_equilibrium(res, s)
    assert rep.ok
    assert [c.min_cost for c in rep.checks] == pytest.approx(due.costs, rel=1e-6)
    c = net.free_flow_times
    for i in range(net.n_bottlenecks):
        w = due.windows[i]
        t = np.linspace(w.start, w.end, 201)[1:-1]
        if net.direction.value == "morning":
            u = due.tau[i](t)  # entry into bottleneck i of the commuter arriving at t
            assert np.max(np.abs(res.trace(i, u) - t)) <= 1e-6
        else:
            u = t  # Lagrangian time is the origin departure time
        waited = res.trace(i, u) - u - c[i]
        expected = sum(due.delays[j](t) for j in range(i + 1))
        assert np.max(np.abs(waited - expected)) <= 1e-6
        assert res.queue_length(i).right == pytest.approx(0.0, abs=1e-9)


def test_untolled_dso_replay_is_not_equilibrium():
    net, s = example(1)
    res = simulate(net, inflows_from_solution(solve_dso(net, s)))
    rep = verify_equilibrium(res, s)
    assert not rep.ok and rep.max_spread > 1.0


def test_zero_inflow_is_vacuous():
    net = CorridorNetwork([10, 5], [0, 0], [0, 0], 10)
    zero = PiecewiseLinearFn([0, 10], [0, 0], 0, 0)
    res = simulate(net, InflowProfile((zero, zero)))
    assert verify_equilibrium(res, VSchedule(1, 1, 5)).ok
