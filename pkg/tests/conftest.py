"""Shared scenarios: the four three-bottleneck examples and random generators."""
from __future__ import annotations

import numpy as np
import pytest

from corridor_dta import CorridorNetwork, PiecewiseLinearSchedule, VSchedule, reduce, solve_dso
from corridor_dta.analytic import check_due_feasibility

BASE = dict(capacities=[50.0, 30.0, 10.0], free_flow_times=[0.0, 0.0, 0.0],
            demands=[100.0, 350.0, 250.0], horizon=60.0)
SLOPES = {1: ("morning", 0.5, 0.5), 2: ("morning", 0.5, 8.0),
          3: ("evening", 0.5, 0.5), 4: ("evening", 8.0, 0.5)}


def example(n: int):
    direction, early, late = SLOPES[n]
    return CorridorNetwork(direction=direction, **BASE), VSchedule(early, late, 30.0)


@pytest.fixture(params=[1, 2, 3, 4], ids=lambda n: f"example{n}")
def any_example(request):
    return example(request.param)


@pytest.fixture
def ex1():
    return example(1)


def random_feasible(rng, max_n: int = 5):
    """Reduced corridor with a symmetric convex schedule that passes the slope checks."""
    while True:
        N = int(rng.integers(1, max_n + 1))
        mu = np.sort(rng.uniform(5, 60, N))[::-1]
        if N > 1 and np.min(mu[:-1] / mu[1:]) < 1.05:
            continue
        Q = rng.uniform(10, 300, N)
        direction = str(rng.choice(["morning", "evening"]))
        probe = CorridorNetwork(mu, np.zeros(N), Q, 1.0, direction)
        if not reduce(probe).is_identity:
            continue
        bound = min([1.0] + [mu[i] / mu[i + 1] - 1 for i in range(N - 1)])
        k1 = rng.uniform(0.1, 0.6) * bound
        k2 = rng.uniform(k1, 0.99 * bound)
        L = float((Q / probe.merged_capacities).max())
        a = rng.uniform(0.2, 0.6) * L / 2
        T = 1.3 * L
        td = T / 2
        s = PiecewiseLinearSchedule([0, td - a, td, td + a, T],
                                    [k1 * a + k2 * (td - a), k1 * a, 0, k1 * a, k1 * a + k2 * (T - td - a)])
        c = np.sort(rng.uniform(0, 2, N)) if rng.random() < 0.5 else np.zeros(N)
        net = CorridorNetwork(mu, c, Q, T, direction)
        dso = solve_dso(net, s)
        if check_due_feasibility(net, s, dso.windows).ok:
            return net, s, dso


def random_corridor(rng, max_n: int = 5):
    """Arbitrary capacities (non-monotone allowed) with a horizon that fits the demand."""
    N = int(rng.integers(1, max_n + 1))
    mu = rng.uniform(5, 60, N)
    Q = rng.uniform(10, 300, N)
    c = np.sort(rng.uniform(0, 2, N))
    L = max(Q[i:].sum() / mu[i] for i in range(N))
    T = 1.6 * L + 2
    direction = str(rng.choice(["morning", "evening"]))
    return CorridorNetwork(mu, c, Q, T, direction), VSchedule(rng.uniform(0.2, 1.5), rng.uniform(0.2, 3), T / 2)
