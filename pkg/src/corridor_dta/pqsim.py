"""Event-driven point-queue FIFO simulator used as a model-free oracle.

Cumulative curves are exact piecewise-linear functions, so the only events are
inflow breakpoints and queue-clearing instants; there is no time step.

Morning: class i enters bottleneck i at its origin, then passes bottlenecks
i-1, ..., 0 with free-flow legs c_i - c_{i-1}, ..., c_1 - c_0, and reaches the
destination c_0 after leaving bottleneck 0.
Evening: every class leaves the single origin, travels c_0 to bottleneck 0,
then c_1 - c_0 to bottleneck 1, and so on; class i is done on leaving
bottleneck i.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analytic import DsoSolution, DueSolution
from .core import CorridorNetwork, Direction, ScheduleDelay
from .pwl import PiecewiseLinearFn

_EPS = 1e-12


# ----------------------------------------------------------------------
# single bottleneck


def point_queue(A: PiecewiseLinearFn, mu: float) -> PiecewiseLinearFn:
    """Departure curve of a point queue with capacity ``mu`` fed by ``A``.

    ``A`` must be continuous and nondecreasing; the queue is empty before
    its first breakpoint.
    """
    if not A.is_continuous:
        raise ValueError("inflow curve must be continuous")
    x, y = A.x, A.y
    scale = max(1.0, abs(y[-1]))
    cur_d = float(y[0])
    pts_t = [float(x[0])]
    pts_v = [cur_d]
    qlen = 0.0
    for k in range(x.size - 1):
        a, b = float(x[k]), float(x[k + 1])
        if b <= a:
            continue
        lam = (y[k + 1] - y[k]) / (b - a)
        cur = a
        while cur < b:
            if qlen > _EPS * scale and lam < mu:
                t_clear = cur + qlen / (mu - lam)
                if t_clear < b:
                    cur_d += mu * (t_clear - cur)
                    cur = t_clear
                    qlen = 0.0
                    cur_d = float(A(cur))
                    pts_t.append(cur)
                    pts_v.append(cur_d)
                    continue
                cur_d += mu * (b - cur)
                qlen -= (mu - lam) * (b - cur)
            elif qlen > _EPS * scale or lam > mu:
                cur_d += mu * (b - cur)
                qlen += (lam - mu) * (b - cur)
            else:
                qlen = 0.0
                cur_d = float(y[k + 1])
            cur = b
            pts_t.append(cur)
            pts_v.append(cur_d)
    if qlen > _EPS * scale:
        pts_t.append(pts_t[-1] + qlen / mu)
        pts_v.append(float(y[-1]))
    else:
        pts_v[-1] = float(y[-1])
    t, v = _dedupe(np.array(pts_t), np.array(pts_v))
    v = np.maximum.accumulate(np.minimum(v, y[-1]))
    return PiecewiseLinearFn(t, v, left=y[0], right=y[-1])


def _dedupe(t, v):
    keep = np.ones(t.size, dtype=bool)
    keep[1:] = np.diff(t) > 0
    # keep the last value at a repeated time
    idx = np.flatnonzero(keep)
    last = np.append(idx[1:] - 1, t.size - 1)
    return t[idx], v[last]


def class_split(A: PiecewiseLinearFn, parts, D: PiecewiseLinearFn):
    """FIFO split of the departure curve ``D`` among inflow classes ``parts``."""
    xs = np.unique(np.concatenate([p.x for p in parts] + [A.x]))
    v = A(xs)
    out = []
    for p in parts:
        pv = p(xs)
        vv, keep = np.unique(v, return_index=True)
        F = PiecewiseLinearFn(vv, pv[keep], left=pv[keep][0], right=pv[keep][-1]) if vv.size > 1 else None
        if F is None:
            out.append(PiecewiseLinearFn(D.x[:1], [pv[0]], left=pv[0], right=pv[0]))
            continue
        out.append(F.compose(D))
    return out


# ----------------------------------------------------------------------
# corridor


@dataclass(frozen=True, eq=False)
class InflowProfile:
    """Cumulative entry curve of each origin class in Eulerian time.

    Morning: entry into the class's own bottleneck. Evening: departure from
    the common origin.
    """

    curves: tuple[PiecewiseLinearFn, ...]

    @property
    def totals(self) -> np.ndarray:
        return np.array([c.right for c in self.curves])


@dataclass(frozen=True, eq=False)
class SimulationResult:
    network: CorridorNetwork
    direction: Direction
    inflows: InflowProfile
    arrival: tuple[PiecewiseLinearFn, ...]
    departure: tuple[PiecewiseLinearFn, ...]
    class_departure: dict = field(default_factory=dict)

    def queue_length(self, i: int) -> PiecewiseLinearFn:
        return self.arrival[i] - self.departure[i]

    def exit_time(self, i: int, u):
        """Time a vehicle entering bottleneck ``i`` at ``u`` leaves it (FIFO)."""
        u = np.asarray(u, dtype=float)
        target = self.arrival[i](u)
        out = np.maximum(u, self.departure[i].first_reach(target))
        return float(out) if out.ndim == 0 else out

    def delay(self, i: int, u):
        return self.exit_time(i, u) - np.asarray(u, dtype=float)

    def trace(self, origin: int, u):
        """Destination arrival time of a class-``origin`` commuter entering at ``u``."""
        c = self.network.free_flow_times
        t = np.asarray(u, dtype=float)
        if self.direction is Direction.MORNING:
            for j in range(origin, -1, -1):
                t = self.exit_time(j, t)
                t = t + (c[j] - c[j - 1] if j > 0 else c[0])
        else:
            for j in range(0, origin + 1):
                t = t + (c[j] - c[j - 1] if j > 0 else c[0])
                t = self.exit_time(j, t)
        return t

    def lagrangian_time(self, origin: int, u):
        """Time at which the schedule penalty is charged."""
        if self.direction is Direction.MORNING:
            return self.trace(origin, u)
        return np.asarray(u, dtype=float)

    def cost(self, origin: int, u, s: ScheduleDelay):
        u = np.asarray(u, dtype=float)
        arrive = self.trace(origin, u)
        charge = arrive if self.direction is Direction.MORNING else u
        return np.asarray(s.value(charge)) + (arrive - u)


def simulate(net: CorridorNetwork, inflows: InflowProfile, direction=None) -> SimulationResult:
    """Push the class inflows through the tandem bottlenecks."""
    direction = Direction.parse(direction or net.direction)
    N = net.n_bottlenecks
    mu, c = net.capacities, net.free_flow_times
    if len(inflows.curves) != N:
        raise ValueError("one inflow curve per origin is required")
    arrival = [None] * N
    departure = [None] * N
    class_dep: dict = {}
    if direction is Direction.MORNING:
        carried: dict[int, PiecewiseLinearFn] = {}
        for i in range(N - 1, -1, -1):
            parts = {k: f.shift(c[i + 1] - c[i]) for k, f in carried.items()} if i + 1 < N else {}
            parts[i] = inflows.curves[i]
            keys = sorted(parts)
            A = _sum(parts[k] for k in keys)
            D = point_queue(A, mu[i])
            split = class_split(A, [parts[k] for k in keys], D)
            arrival[i], departure[i] = A, D
            carried = dict(zip(keys, split))
            for k, f in carried.items():
                class_dep[(i, k)] = f
    else:
        carried = {k: f for k, f in enumerate(inflows.curves)}
        for i in range(N):
            lag = c[i] - c[i - 1] if i > 0 else c[0]
            parts = {k: f.shift(lag) for k, f in carried.items()}
            keys = sorted(parts)
            A = _sum(parts[k] for k in keys)
            D = point_queue(A, mu[i])
            split = class_split(A, [parts[k] for k in keys], D)
            arrival[i], departure[i] = A, D
            for k, f in zip(keys, split):
                class_dep[(i, k)] = f
            carried = {k: f for k, f in zip(keys, split) if k > i}
    return SimulationResult(net, direction, inflows, tuple(arrival), tuple(departure), class_dep)


def _sum(fns):
    out = None
    for f in fns:
        out = f if out is None else out + f
    return out


# ----------------------------------------------------------------------
# conversion from closed-form solutions


def _cum(f: PiecewiseLinearFn) -> PiecewiseLinearFn:
    if f.x.size == 1:
        return PiecewiseLinearFn(f.x, [0.0], 0.0, 0.0)
    return f.antiderivative()


def inflows_from_solution(sol: DsoSolution | DueSolution) -> InflowProfile:
    """Eulerian entry curves implied by a closed-form solution."""
    net = sol.network
    c = net.free_flow_times
    curves = []
    for i in range(net.n_bottlenecks):
        Y = _cum(sol.flows[i])
        if net.direction is Direction.EVENING:
            curves.append(Y)
        elif isinstance(sol, DueSolution):
            curves.append(Y.compose(sol.tau[i].inverse()) if Y.x.size > 1 else Y)
        else:
            curves.append(Y.shift(-c[i]))
    return InflowProfile(tuple(curves))


# ----------------------------------------------------------------------
# equilibrium verification


@dataclass(frozen=True)
class OriginCheck:
    origin: int
    min_cost: float
    max_cost: float
    spread: float
    violation: float


@dataclass(frozen=True)
class EquilibriumReport:
    checks: tuple[OriginCheck, ...]
    eps: float

    @property
    def max_spread(self) -> float:
        return max((c.spread for c in self.checks), default=0.0)

    @property
    def max_violation(self) -> float:
        return max((c.violation for c in self.checks), default=0.0)

    @property
    def ok(self) -> bool:
        return self.max_spread <= self.eps and self.max_violation <= self.eps

    def __bool__(self):
        return self.ok


def _support_samples(curve: PiecewiseLinearFn, n: int = 400):
    """Times strictly inside intervals where the class flow rate is positive."""
    x, y = curve.x, curve.y
    pts = []
    for k in range(x.size - 1):
        a, b = x[k], x[k + 1]
        if b > a and y[k + 1] - y[k] > _EPS * max(1.0, abs(y[-1])) * (b - a):
            m = max(3, int(n * (b - a) / max(x[-1] - x[0], _EPS)))
            pts.append(np.linspace(a, b, m + 2)[1:-1])
    return np.concatenate(pts) if pts else np.empty(0)


def verify_equilibrium(result: SimulationResult, s: ScheduleDelay, eps: float | None = None,
                       rel_eps: float = 1e-6, n_samples: int = 400) -> EquilibriumReport:
    """Cost spread on used entry times and cheaper unused entry times, per origin."""
    net = result.network
    T = net.horizon
    lo_s, hi_s = s.domain
    lo, hi = max(0.0, lo_s), min(T, hi_s)
    stats = []
    for i, curve in enumerate(result.inflows.curves):
        u = _support_samples(curve, n_samples)
        if u.size == 0:
            stats.append((i, None, None, None))
            continue
        cost = result.cost(i, u, s)
        if result.direction is Direction.MORNING:
            base = np.linspace(lo - net.free_flow_times[i], hi, 4 * n_samples + 1)
        else:
            base = np.linspace(lo, hi, 4 * n_samples + 1)
        rate = curve.derivative()
        idle = (np.abs(rate(base)) <= _EPS) & (np.abs(rate.left_limit(base)) <= _EPS)
        probe = base[idle]
        t_charge = result.lagrangian_time(i, probe)
        probe = probe[(t_charge >= lo) & (t_charge <= hi)]
        off = result.cost(i, probe, s) if probe.size else np.empty(0)
        stats.append((i, cost, off, None))
    rho_max = max((float(np.max(c)) for _, c, _, _ in stats if c is not None), default=0.0)
    tol = rel_eps * max(rho_max, 1.0) if eps is None else eps
    checks = []
    for i, cost, off, _ in stats:
        if cost is None:
            checks.append(OriginCheck(i, 0.0, 0.0, 0.0, 0.0))
            continue
        cmin, cmax = float(cost.min()), float(cost.max())
        viol = float(max(0.0, cmin - off.min())) if off.size else 0.0
        checks.append(OriginCheck(i, cmin, cmax, cmax - cmin, viol))
    return EquilibriumReport(tuple(checks), tol)
