import numpy as np
import pytest

from corridor_dta import (CorridorNetwork, VSchedule, build_cumulative_curves, check_due_feasibility, solve_dso,
                          solve_due, solve_due_evening, solve_due_morning)
from corridor_dta.errors import DueInfeasibleError, HorizonError

from conftest import example, random_feasible


def test_example1_closed_form(ex1):
    net, s = ex1
    sol = solve_dso(net, s)
    assert np.allclose(sol.window_lengths, [5, 17.5, 25])
    assert np.allclose(sol.costs, [1.25, 4.375, 6.25])
    assert [(w.start, w.end) for w in sol.windows] == pytest.approx([(27.5, 32.5), (21.25, 38.75), (17.5, 42.5)])


def test_single_bottleneck_is_vickrey():
    net = CorridorNetwork([40], [0], [200], 60)
    s = VSchedule(0.5, 1.5, 30)
    sol = solve_dso(net, s)
    w = sol.windows[0]
    assert w.length == pytest.approx(5.0)
    assert s.value(w.start) == pytest.approx(s.value(w.end))
    assert sol.flows[0](w.start + 1) == pytest.approx(40)


def test_price_telescoping_example1(ex1):
    net, s = ex1
    sol = solve_dso(net, s)
    t = np.linspace(27.5, 32.5, 51)[:-1]
    assert np.allclose(sol.prices[1](t), 3.125)


@pytest.mark.parametrize("n", [1, 3])
def test_structure_properties(n):
    net, s = example(n)
    sol = solve_dso(net, s)
    W = sol.windows
    for i in range(net.n_bottlenecks - 1):
        assert W[i + 1].start < W[i].start and W[i].end < W[i + 1].end
    t = np.linspace(0, 60, 6001)
    c = net.free_flow_times
    for i, w in enumerate(W):
        inside = (t > w.start + 1e-9) & (t < w.end - 1e-9)
        outside = (t < w.start) | (t >= w.end)
        assert np.all(sol.prices[i](t[inside]) > 0)
        assert np.all(sol.prices[i](t[outside]) == 0)
        total = sum(sol.prices[j](t) for j in range(i + 1)) + s.value(t) + c[i]
        assert np.all(np.abs(total[inside] - sol.costs[i]) <= 1e-9)
        assert np.all(total[outside] >= sol.costs[i] - 1e-9)
        assert sol.flows[i].integral() == pytest.approx(net.demands[i])


def test_structure_on_random_instances():
    rng = np.random.default_rng(11)
    for _ in range(30):
        net, s, sol = random_feasible(rng)
        for i in range(net.n_bottlenecks):
            w = sol.windows[i]
            assert w.length == pytest.approx(net.demands[i] / net.merged_capacities[i])
            if i:
                assert sol.windows[i - 1].start >= w.start and sol.windows[i - 1].end <= w.end
            mid = 0.5 * (w.start + w.end)
            assert sol.prices[i](mid) > 0


def test_feasibility_reports():
    assert check_due_feasibility(*example(1)[:2], solve_dso(*example(1)).windows).ok
    net, s = example(2)
    rep = check_due_feasibility(net, s, solve_dso(net, s).windows)
    assert not rep.ok
    assert any(v.condition == "slope <= mu_i/mu_{i+1} - 1" and v.bottleneck == 0 and
               v.bound == pytest.approx(2 / 3) for v in rep.violations)
    net, s = example(4)
    rep = check_due_feasibility(net, s, solve_dso(net, s).windows)
    assert any(v.condition == "slope >= 1 - mu_i/mu_{i+1}" and v.bound == pytest.approx(-2 / 3)
               for v in rep.violations)


def test_due_refuses_when_infeasible():
    net, s = example(2)
    with pytest.raises(DueInfeasibleError) as exc:
        solve_due(solve_dso(net, s), net, s)
    assert not exc.value.report.ok


def test_morning_due_example1_flows(ex1):
    net, s = ex1
    dso = solve_dso(net, s)
    due = solve_due_morning(dso, net, s)
    assert due.flows[0](28.0) == pytest.approx(35.0)
    assert due.flows[0](31.0) == pytest.approx(5.0)
    assert due.flows[2](18.0) == pytest.approx(10.0)
    t = np.linspace(0, 60, 6001)
    for i in range(3):
        assert np.all(due.flows[i](t) >= -1e-12)
        assert due.flows[i].integral() == pytest.approx(net.demands[i], rel=1e-8)
        assert np.allclose(due.delays[i](t), dso.prices[i](t))
    assert np.allclose(sum(f(t) for f in due.flows), sum(f(t) for f in dso.flows))
    assert np.allclose(due.costs, dso.costs)


def test_evening_due_example3():
    net, s = example(3)
    dso = solve_dso(net, s)
    due = solve_due_evening(dso, net, s)
    assert due.flows[0](28.0) == pytest.approx(30.0)
    assert due.flows[0](31.0) == pytest.approx(10.0)
    # outflow of bottleneck 1 on the second window outside the first
    assert due.outflows[0](22.0) == pytest.approx((1 - s.slope(22.0)) * 30.0)
    t = np.linspace(0, 60, 6001)
    for i in range(3):
        assert due.flows[i].integral() == pytest.approx(net.demands[i], rel=1e-8)
        assert np.all(due.outflows[i](t) <= net.capacities[i] + 1e-9)


def test_pareto_cost_identity(ex1):
    net, s = ex1
    dso = solve_dso(net, s)
    due = solve_due(dso, net, s)
    assert dso.toll_revenue() == pytest.approx(due.total_queuing_delay(), rel=1e-9)


def test_cumulative_curves_properties():
    for n in (1, 3):
        net, s = example(n)
        dso = solve_dso(net, s)
        due = solve_due(dso, net, s)
        cd = build_cumulative_curves(dso)
        ce = build_cumulative_curves(due)
        u = np.linspace(-5, 70, 3001)
        for i in range(3):
            assert np.allclose(cd.arrival[i](u), cd.departure[i](u))
            A, D = ce.arrival[i](u), ce.departure[i](u)
            assert np.all(A >= D - 1e-9)
            assert np.all(np.diff(A) >= -1e-12) and np.all(np.diff(D) >= -1e-12)
            assert A[-1] == pytest.approx(D[-1])
        if n == 1:  # morning: equal aggregate departures
            for i in range(3):
                assert np.allclose(cd.departure[i](u), ce.departure[i](u), atol=1e-9)
        else:  # evening: equal destination arrivals
            for i in range(3):
                assert np.allclose(cd.destination[i](u), ce.destination[i](u), atol=1e-9)


def test_horizon_too_short():
    net = CorridorNetwork([10], [0], [500], 20)
    with pytest.raises(HorizonError):
        solve_dso(net, VSchedule(0.5, 0.5, 10))


def test_zero_demand_origin():
    net = CorridorNetwork([50, 30], [0, 0], [0, 100], 60)
    sol = solve_dso(net, VSchedule(0.5, 0.5, 30))
    assert sol.windows[0].length == 0
    assert sol.costs[0] == 0.0
