"""Closed-form optimum (DSO) and equilibrium (DUE) solutions on a corridor."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ArrivalWindow, CorridorNetwork, Direction, ScheduleDelay, window_from_length
from .errors import DueInfeasibleError, PreconditionError
from .pwl import PiecewiseLinearFn, _dedupe_jumps
from .reduction import reduce

SLOPE_TOL = 1e-12
PRICE_SNAP = 1e-9  # relative; removes round-off jumps where a price meets zero at a window edge


@dataclass(frozen=True, eq=False)
class DsoSolution:
    """System optimum: windows, costs, optimal prices and all-or-nothing flows.

    ``prices[i]`` and ``flows[i]`` are functions of destination-arrival time
    (morning) or origin-departure time (evening).
    """

    network: CorridorNetwork
    schedule: ScheduleDelay
    windows: tuple[ArrivalWindow, ...]
    costs: np.ndarray
    prices: tuple[PiecewiseLinearFn, ...]
    flows: tuple[PiecewiseLinearFn, ...]
    merged_capacities: np.ndarray
    flow_split_unique: bool = True

    @property
    def direction(self) -> Direction:
        return self.network.direction

    @property
    def window_lengths(self) -> np.ndarray:
        return np.array([w.length for w in self.windows])

    def objective(self) -> float:
        """Total schedule-delay plus free-flow cost, sum_i int (s + c_i) q_i dt."""
        c = self.network.free_flow_times
        total = 0.0
        for i, (w, q) in enumerate(zip(self.windows, self.flows)):
            if w.length == 0:
                continue
            S = self.schedule.as_pwl(w.start, w.end)
            rate = self.merged_capacities[i]
            total += rate * S.integral(w.start, w.end) + c[i] * q.integral(w.start, w.end)
        return float(total)

    def toll_revenue(self) -> float:
        """sum_i int p_i(t) y_i(t) dt, where y_i is the flow through bottleneck i."""
        total = 0.0
        N = self.network.n_bottlenecks
        for i in range(N):
            y = _sum_fns(self.flows[i:])
            total += _integral_product(self.prices[i], y)
        return total


@dataclass(frozen=True, eq=False)
class DueSolution:
    """Equilibrium with queuing; ``delays`` are the queuing delays w_i^E.

    ``sigma[i]``/``tau[i]`` give the departure/arrival time at bottleneck i of
    the commuter indexed by Lagrangian time t, valid on the horizon.
    ``outflows[i]`` is x_i^E(sigma_i^E(t)).
    """

    network: CorridorNetwork
    schedule: ScheduleDelay
    dso: DsoSolution
    flows: tuple[PiecewiseLinearFn, ...]
    delays: tuple[PiecewiseLinearFn, ...]
    costs: np.ndarray
    sigma: tuple[PiecewiseLinearFn, ...]
    tau: tuple[PiecewiseLinearFn, ...]
    outflows: tuple[PiecewiseLinearFn, ...]

    @property
    def direction(self) -> Direction:
        return self.network.direction

    @property
    def windows(self):
        return self.dso.windows

    def total_queuing_delay(self) -> float:
        total = 0.0
        for i in range(self.network.n_bottlenecks):
            total += _integral_product(self.delays[i], _sum_fns(self.flows[i:]))
        return total


@dataclass(frozen=True)
class ViolatedCondition:
    condition: str
    bottleneck: int
    interval: tuple[float, float]
    slope: float
    bound: float

    def __str__(self):
        a, b = self.interval
        return (f"bottleneck {self.bottleneck + 1}: {self.condition} fails on "
                f"[{a:.6g}, {b:.6g}) with slope {self.slope:.6g} vs bound {self.bound:.6g}")


@dataclass(frozen=True)
class FeasibilityReport:
    direction: Direction
    violations: tuple[ViolatedCondition, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return f"{self.direction.value} closed-form DUE is feasible"
        lines = [f"{self.direction.value} closed-form DUE is infeasible:"]
        lines += [f"  {v}" for v in self.violations]
        return "\n".join(lines)


@dataclass(frozen=True, eq=False)
class CumulativeCurves:
    """Eulerian cumulative curves per bottleneck and per origin class.

    ``arrival[i]``/``departure[i]``: bottleneck i. ``disaggregate[i]``:
    departure[i] - departure[i+1]. ``destination[i]``: arrivals of class i at
    its destination (morning: the common destination).
    """

    direction: Direction
    arrival: tuple[PiecewiseLinearFn, ...]
    departure: tuple[PiecewiseLinearFn, ...]
    disaggregate: tuple[PiecewiseLinearFn, ...]
    destination: tuple[PiecewiseLinearFn, ...]


# ----------------------------------------------------------------------
# helpers


def _sum_fns(fns) -> PiecewiseLinearFn:
    out = PiecewiseLinearFn.zero()
    for f in fns:
        out = out + f
    return out


def _integral_product(f: PiecewiseLinearFn, g: PiecewiseLinearFn) -> float:
    """Exact integral of f*g when one factor is piecewise constant."""
    xs = np.union1d(f.x, g.x)
    total = 0.0
    for a, b in zip(xs[:-1], xs[1:]):
        if b <= a:
            continue
        # both linear on (a, b): Simpson is exact for quadratics
        fa, fb, fm = f(a), f.left_limit(b), f(0.5 * (a + b))
        ga, gb, gm = g(a), g.left_limit(b), g(0.5 * (a + b))
        total += (b - a) / 6.0 * (fa * ga + 4 * fm * gm + fb * gb)
    return float(total)


def _schedule_span(net: CorridorNetwork, s: ScheduleDelay) -> tuple[float, float]:
    lo, hi = s.domain
    return max(0.0, lo), min(net.horizon, hi)


def _identity(lo: float, hi: float) -> PiecewiseLinearFn:
    return PiecewiseLinearFn([lo, hi], [lo, hi], left=lo, right=hi)


def _restrict_window(f: PiecewiseLinearFn, w: ArrivalWindow | None) -> PiecewiseLinearFn:
    if w is None or w.length == 0:
        return PiecewiseLinearFn.zero()
    return f.restrict(w.start, w.end)


def _snap_zero(f: PiecewiseLinearFn, tol: float) -> PiecewiseLinearFn:
    y = np.where(np.abs(f.y) <= tol, 0.0, f.y)
    return _dedupe_jumps(f.x, y, f.left, f.right)


def _slope_pieces(s: ScheduleDelay, a: float, b: float):
    """(start, end, slope) for each smooth piece of s on [a, b)."""
    if b <= a:
        return []
    kinks = np.asarray(s.kinks(), dtype=float)
    cuts = np.unique(np.concatenate([[a, b], kinks[(kinks > a) & (kinks < b)]]))
    pieces = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        pts = np.linspace(lo, hi, 9)[1:-1]
        slopes = [s.slope(t, "right") for t in pts]
        pieces.append((float(lo), float(hi), float(min(slopes)), float(max(slopes))))
    return pieces


def _difference(outer: ArrivalWindow, inner: ArrivalWindow | None):
    """outer minus inner as at most two half-open intervals."""
    if inner is None or inner.length == 0:
        return [(outer.start, outer.end)]
    return [(outer.start, inner.start), (inner.end, outer.end)]


# ----------------------------------------------------------------------
# DSO


def solve_dso(net: CorridorNetwork, s: ScheduleDelay, require_reduced: bool = True) -> DsoSolution:
    """Closed-form optimum on a reduced corridor (same math both directions)."""
    if require_reduced:
        red = reduce(net)
        if not red.is_identity:
            raise PreconditionError(
                "network has false bottlenecks "
                f"{sorted(i + 1 for i in red.false_set)}; reduce it first")
    N = net.n_bottlenecks
    muh = net.merged_capacities
    c = net.free_flow_times
    span = _schedule_span(net, s)
    windows, costs = [], []
    for i in range(N):
        w, sbar = window_from_length(s, net.demands[i] / muh[i], horizon=(0.0, net.horizon))
        windows.append(w)
        costs.append(sbar + c[i])
    costs = np.array(costs)
    outer = windows[-1]
    S = s.as_pwl(min(outer.start, span[0]), max(outer.end, span[1]))
    prices, flows = [], []
    prev = PiecewiseLinearFn.zero()
    for i in range(N):
        cur = _snap_zero(_restrict_window((costs[i] - c[i]) - S, windows[i]), PRICE_SNAP * max(1.0, costs[i]))
        prices.append((cur - prev).clip_min(0.0) if i else cur.clip_min(0.0))
        prev = cur
        flows.append(PiecewiseLinearFn.constant(muh[i], windows[i].start, windows[i].end))
    return DsoSolution(net, s, tuple(windows), costs, tuple(prices), tuple(flows), muh.copy())


# ----------------------------------------------------------------------
# feasibility


def check_due_feasibility(net: CorridorNetwork, s: ScheduleDelay, windows, direction=None) -> FeasibilityReport:
    """Slope conditions under which delays equal optimal prices."""
    direction = Direction.parse(direction or net.direction)
    mu = net.capacities
    N = net.n_bottlenecks
    out = []
    W = list(windows)
    last = W[-1]
    for lo, hi, smin, smax in _slope_pieces(s, last.start, last.end):
        if direction is Direction.MORNING and smin < -1 - SLOPE_TOL:
            out.append(ViolatedCondition("slope >= -1", N - 1, (lo, hi), smin, -1.0))
        if direction is Direction.EVENING and smax > 1 + SLOPE_TOL:
            out.append(ViolatedCondition("slope <= 1", N - 1, (lo, hi), smax, 1.0))
    for i in range(N - 1):
        ratio = mu[i] / mu[i + 1]
        if direction is Direction.MORNING:
            bound = ratio - 1.0
            parts = _difference(W[i], W[i - 1] if i > 0 else None)
            for a, b in parts:
                for lo, hi, smin, smax in _slope_pieces(s, a, b):
                    if smax > bound + SLOPE_TOL:
                        out.append(ViolatedCondition("slope <= mu_i/mu_{i+1} - 1", i, (lo, hi), smax, bound))
        else:
            bound = 1.0 - ratio
            for a, b in _difference(W[i + 1], W[i]):
                for lo, hi, smin, smax in _slope_pieces(s, a, b):
                    if smin < bound - SLOPE_TOL:
                        out.append(ViolatedCondition("slope >= 1 - mu_i/mu_{i+1}", i, (lo, hi), smin, bound))
    return FeasibilityReport(direction, tuple(out))


# ----------------------------------------------------------------------
# DUE


def _due_common(dso: DsoSolution, net: CorridorNetwork, s: ScheduleDelay, direction: Direction):
    if dso.direction is not direction and net.direction is not direction:
        raise PreconditionError(f"solution direction {dso.direction.value} does not match {direction.value}")
    report = check_due_feasibility(net, s, dso.windows, direction)
    if not report.ok:
        raise DueInfeasibleError(report)
    lo, hi = 0.0, net.horizon
    outer = dso.windows[-1]
    span = _schedule_span(net, s)
    S = s.as_pwl(min(outer.start, span[0]), max(outer.end, span[1]))
    slope = S.derivative()
    return lo, hi, slope


def solve_due_morning(dso: DsoSolution, net: CorridorNetwork, s: ScheduleDelay) -> DueSolution:
    """Closed-form morning equilibrium; refuses when the slope conditions fail."""
    lo, hi, sd = _due_common(dso, net, s, Direction.MORNING)
    N = net.n_bottlenecks
    mu = np.append(net.capacities, 0.0)
    muh = dso.merged_capacities
    c = net.free_flow_times
    W = dso.windows
    flows = []
    for i in range(N):
        inner = W[i - 1] if i > 0 else None
        body = muh[i] - sd * mu[i + 1]
        q = _restrict_window(body, W[i]) - _restrict_window(body, inner) + _restrict_window((1.0 + sd) * muh[i], inner)
        flows.append(q)
    delays = dso.prices
    ident = _identity(lo, hi)
    sigma, tau = [], []
    acc = PiecewiseLinearFn.zero()
    for i in range(N):
        sg = ident - acc - c[i]
        sigma.append(sg)
        tau.append(sg - delays[i])
        acc = acc + delays[i]
    outflows = tuple(_sum_fns(dso.flows[i:]) for i in range(N))
    return DueSolution(net, s, dso, tuple(flows), tuple(delays), dso.costs.copy(),
                       tuple(sigma), tuple(tau), outflows)


def solve_due_evening(dso: DsoSolution, net: CorridorNetwork, s: ScheduleDelay) -> DueSolution:
    """Closed-form evening equilibrium; refuses when the slope conditions fail."""
    lo, hi, sd = _due_common(dso, net, s, Direction.EVENING)
    N = net.n_bottlenecks
    mu = net.capacities
    muh = dso.merged_capacities
    c = net.free_flow_times
    W = dso.windows
    flows = tuple(_restrict_window((1.0 - sd) * muh[i], W[i]) for i in range(N))
    delays = dso.prices
    ident = _identity(lo, hi)
    sigma, tau = [], []
    acc = PiecewiseLinearFn.zero()
    for i in range(N):
        tau.append(ident + acc + c[i])
        acc = acc + delays[i]
        sigma.append(ident + acc + c[i])
    outflows = []
    for i in range(N):
        x = PiecewiseLinearFn.constant(mu[i], W[i].start, W[i].end)
        if i + 1 < N:
            side = (1.0 - sd) * mu[i + 1]
            x = x + _restrict_window(side, W[i + 1]) - _restrict_window(side, W[i])
        outflows.append(x)
    return DueSolution(net, s, dso, flows, tuple(delays), dso.costs.copy(),
                       tuple(sigma), tuple(tau), tuple(outflows))


def solve_due(dso: DsoSolution, net: CorridorNetwork, s: ScheduleDelay) -> DueSolution:
    if net.direction is Direction.MORNING:
        return solve_due_morning(dso, net, s)
    return solve_due_evening(dso, net, s)


# ----------------------------------------------------------------------
# cumulative curves


def _cumulative(f: PiecewiseLinearFn) -> PiecewiseLinearFn:
    if f.x.size == 1:
        return PiecewiseLinearFn.zero()
    return f.antiderivative()


def build_cumulative_curves(sol: DsoSolution | DueSolution, net: CorridorNetwork | None = None) -> CumulativeCurves:
    """Bottleneck and destination cumulative curves in Eulerian time."""
    net = sol.network if net is None else net
    N = net.n_bottlenecks
    c = net.free_flow_times
    morning = net.direction is Direction.MORNING
    arrival, departure, destination = [], [], []
    if isinstance(sol, DsoSolution):
        for i in range(N):
            Y = _cumulative(_sum_fns(sol.flows[i:]))
            D = Y.shift(c[i]) if not morning else Y.shift(-c[i])
            departure.append(D)
            arrival.append(D)
            cls = _cumulative(sol.flows[i])
            destination.append(cls if morning else cls.shift(c[i]))
    else:
        for i in range(N):
            Y = _cumulative(_sum_fns(sol.flows[i:]))
            departure.append(Y.compose(sol.sigma[i].inverse()))
            arrival.append(Y.compose(sol.tau[i].inverse()))
            cls = _cumulative(sol.flows[i])
            destination.append(cls if morning else cls.compose(sol.sigma[i].inverse()))
    disagg = [departure[i] - departure[i + 1] if i + 1 < N else departure[i] for i in range(N)]
    return CumulativeCurves(net.direction, tuple(arrival), tuple(departure), tuple(disagg), tuple(destination))
