"""Gap metrics between closed-form and discrete solutions.

Every solution is first mapped to a :class:`SampledState` on a common time
grid, so a state compared with itself yields exactly zero gaps.

* aggregate curves: cumulative departures from bottleneck i in Eulerian time;
* destination curves: cumulative arrivals of class i at its destination in
  Eulerian time.

Discrete curves place the mass of interval k at the Eulerian image of the
grid edge t_k and interpolate linearly in between.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..analytic import DsoSolution, DueSolution, check_due_feasibility, solve_dso
from ..core import CorridorNetwork, Direction, ScheduleDelay
from ..reduction import reduce
from .grid import TimeGrid
from .lcp import LcpSolution
from .lp import LpSolution


class Regime(str, enum.Enum):
    MORNING_FEASIBLE = "example-1"
    MORNING_INFEASIBLE = "example-2"
    EVENING_FEASIBLE = "example-3"
    EVENING_INFEASIBLE = "example-4"

    @property
    def description(self) -> str:
        return {
            "example-1": "morning, slope conditions hold",
            "example-2": "morning, slope conditions violated",
            "example-3": "evening, slope conditions hold",
            "example-4": "evening, slope conditions violated",
        }[self.value]


def classify_regime(net: CorridorNetwork, s: ScheduleDelay) -> Regime:
    red = reduce(net).network
    dso = solve_dso(red, s)
    ok = check_due_feasibility(red, s, dso.windows).ok
    if net.direction is Direction.MORNING:
        return Regime.MORNING_FEASIBLE if ok else Regime.MORNING_INFEASIBLE
    return Regime.EVENING_FEASIBLE if ok else Regime.EVENING_INFEASIBLE


@dataclass(frozen=True, eq=False)
class _Interp:
    x: np.ndarray
    y: np.ndarray

    def __call__(self, u):
        return np.interp(u, self.x, self.y, left=self.y[0], right=self.y[-1])


@dataclass(frozen=True, eq=False)
class SampledState:
    label: str
    network: CorridorNetwork
    grid: TimeGrid
    costs: np.ndarray
    delays: np.ndarray        # (K, N) at t_k
    flows: np.ndarray         # (K, N) vehicles per interval
    arrival: tuple            # callables of Eulerian time, one per bottleneck
    departure: tuple
    destination: tuple        # callables of Eulerian time, one per origin
    queued: bool

    def euler_span(self) -> tuple[float, float]:
        c = self.network.free_flow_times
        w = float(np.max(self.delays.sum(axis=1), initial=0.0))
        return -c.max() - w - self.grid.dk, self.grid.horizon + c.max() + w + self.grid.dk


def _from_arrays(label, net, grid, costs, delays, flows, queued) -> SampledState:
    N = net.n_bottlenecks
    cum = np.vstack([np.zeros(N), np.cumsum(flows, axis=0)])
    through = np.cumsum(cum[:, ::-1], axis=1)[:, ::-1]
    edges = grid.edges
    c = net.free_flow_times
    w = np.vstack([np.zeros(N), delays])
    morning = net.direction is Direction.MORNING
    arr, dep, dest = [], [], []
    for i in range(N):
        if morning:
            sigma = edges - w[:, :i].sum(axis=1) - c[i]
            arrive = edges
        else:
            sigma = edges + w[:, : i + 1].sum(axis=1) + c[i]
            arrive = sigma
        dep.append(_Interp(np.maximum.accumulate(sigma), through[:, i]))
        arr.append(_Interp(np.maximum.accumulate(sigma - w[:, i]), through[:, i]))
        dest.append(_Interp(np.maximum.accumulate(arrive), cum[:, i]))
    return SampledState(label, net, grid, np.asarray(costs, float), delays, flows, tuple(arr), tuple(dep), tuple(dest),
                        queued)


def sample_state(sol, grid: TimeGrid | None = None) -> SampledState:
    """Map any supported solution type onto the grid representation."""
    if isinstance(sol, LcpSolution):
        g = sol.problem.grid
        return _from_arrays("lcp", sol.problem.network, g, sol.rho, sol.w, sol.q, True)
    if isinstance(sol, LpSolution):
        g = sol.lp.grid
        flows = sol.flows * g.dk
        return _from_arrays("lp", sol.lp.network, g, sol.costs, sol.prices, flows, False)
    if isinstance(sol, (DsoSolution, DueSolution)):
        if grid is None:
            raise ValueError("a grid is required to sample a closed-form solution")
        net = sol.network
        N = net.n_bottlenecks
        edges = grid.edges
        flows = np.empty((grid.K, N))
        delays = np.empty((grid.K, N))
        series = sol.delays if isinstance(sol, DueSolution) else sol.prices
        for i in range(N):
            cum = np.array([sol.flows[i].integral(edges[0], e) for e in edges])
            flows[:, i] = np.diff(cum)
            delays[:, i] = series[i](grid.times)
        state = _from_arrays("due" if isinstance(sol, DueSolution) else "dso", net, grid,
                             sol.costs, delays, flows, isinstance(sol, DueSolution))
        # exact destination curves from the closed form
        from ..analytic import build_cumulative_curves

        curves = build_cumulative_curves(sol)
        return SampledState(state.label, net, grid, state.costs, delays, flows, curves.arrival,
                            curves.departure, curves.destination, state.queued)
    raise TypeError(f"cannot sample {type(sol).__name__}")


@dataclass(frozen=True)
class ComparisonReport:
    regime: Regime
    cost_gap: float
    delay_gap_sup: float
    delay_gap_l1: float
    flow_gap_l1: float
    aggregate_gap: float
    destination_gap: float
    delay_tol: float
    curve_tol: float

    @property
    def delays_match(self) -> bool:
        return self.delay_gap_sup <= self.delay_tol and self.cost_gap <= self.delay_tol

    @property
    def aggregate_match(self) -> bool:
        return self.aggregate_gap <= self.curve_tol

    @property
    def destination_match(self) -> bool:
        return self.destination_gap <= self.curve_tol

    @property
    def verdict(self) -> str:
        head = ("w = p: queuing delays equal optimal prices" if self.delays_match
                else "w != p: queuing delays differ from optimal prices")
        if self.aggregate_match and self.destination_match:
            tail = "aggregate and disaggregate flows match"
        elif self.aggregate_match:
            tail = "aggregate departures match, destination arrivals differ"
        elif self.destination_match:
            tail = "destination arrivals match, aggregate departures differ"
        else:
            tail = "both aggregate and disaggregate flows differ"
        return f"{head}; {tail}"

    def as_dict(self) -> dict:
        return {
            "regime": self.regime.value,
            "cost_gap": self.cost_gap,
            "delay_gap_sup": self.delay_gap_sup,
            "delay_gap_l1": self.delay_gap_l1,
            "flow_gap_l1": self.flow_gap_l1,
            "aggregate_gap": self.aggregate_gap,
            "destination_gap": self.destination_gap,
            "delay_tol": self.delay_tol,
            "curve_tol": self.curve_tol,
            "verdict": self.verdict,
        }


def max_abs_slope(s: ScheduleDelay, a: float, b: float) -> float:
    from ..analytic import _slope_pieces

    pieces = _slope_pieces(s, a, b)
    return max((max(abs(lo), abs(hi)) for _, _, lo, hi in pieces), default=0.0)


def grid_tolerances(net: CorridorNetwork, s: ScheduleDelay, grid: TimeGrid) -> tuple[float, float]:
    """(delay tolerance, curve tolerance) for first-order discretisations.

    Delays: 3 max|s'| dk. Curves: two intervals of full capacity, 2 mu_1 dk.
    """
    lo, hi = max(0.0, s.domain[0]), min(net.horizon, s.domain[1])
    slope = max_abs_slope(s, lo, hi)
    return 3.0 * slope * grid.dk + 1e-9, 2.0 * float(net.capacities.max()) * grid.dk + 1e-9


def compare_solutions(reference, other, grid: TimeGrid | None = None,
                      schedule: ScheduleDelay | None = None) -> ComparisonReport:
    """Gaps between two solutions of the same instance (e.g. closed form vs LCP)."""
    if grid is None:
        for cand in (other, reference):
            if isinstance(cand, LcpSolution):
                grid = cand.problem.grid
            elif isinstance(cand, LpSolution):
                grid = cand.lp.grid
            if grid is not None:
                break
    A = sample_state(reference, grid)
    B = sample_state(other, grid)
    if A.delays.shape != B.delays.shape or A.grid != B.grid:
        raise ValueError("solutions are on different grids or networks")
    net = A.network
    s = schedule or getattr(reference, "schedule", None) or getattr(other, "schedule", None)
    if s is None:
        for cand in (reference, other):
            if isinstance(cand, LcpSolution):
                s = cand.problem.schedule
            elif isinstance(cand, LpSolution):
                s = cand.lp.schedule
    if s is None:
        raise ValueError("schedule needed to classify the regime")
    g = A.grid
    dtol, ctol = grid_tolerances(net, s, g)
    lo1, hi1 = A.euler_span()
    lo2, hi2 = B.euler_span()
    u = np.linspace(min(lo1, lo2), max(hi1, hi2), 8 * g.K + 1)
    def sup_gap(fs, gs):
        return max(float(np.max(np.abs(np.asarray(f(u)) - np.asarray(g_(u))))) for f, g_ in zip(fs, gs))

    return ComparisonReport(
        regime=classify_regime(net, s),
        cost_gap=float(np.max(np.abs(A.costs - B.costs))),
        delay_gap_sup=float(np.max(np.abs(A.delays - B.delays))),
        delay_gap_l1=float(np.max(np.abs(A.delays - B.delays).sum(axis=0) * g.dk)),
        flow_gap_l1=float(np.max(np.abs(A.flows - B.flows).sum(axis=0))),
        aggregate_gap=sup_gap(A.departure, B.departure),
        destination_gap=sup_gap(A.destination, B.destination),
        delay_tol=dtol,
        curve_tol=ctol,
    )
