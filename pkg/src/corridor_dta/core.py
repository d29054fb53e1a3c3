"""Corridor network data model and schedule-delay functions.

Indices are 0-based throughout the API: origin/bottleneck ``0`` is the one
closest to the destination (morning) or to the origin (evening).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import AmbiguityError, DomainError, HorizonError
from .pwl import PiecewiseLinearFn

WINDOW_TOL = 1e-10
DOMAIN_SLACK = 1e-12


class Direction(str, enum.Enum):
    MORNING = "morning"
    EVENING = "evening"

    @classmethod
    def parse(cls, value) -> Direction:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"direction must be 'morning' or 'evening', got {value!r}") from None


def _vec(a, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CorridorNetwork:
    """N tandem bottlenecks; origin ``i`` feeds bottleneck ``i``.

    ``capacities[i]`` is mu_i, ``free_flow_times[i]`` the free-flow time c_i
    between origin ``i`` and the destination, ``demands[i]`` the number of
    commuters at origin ``i``.
    """

    capacities: np.ndarray
    free_flow_times: np.ndarray
    demands: np.ndarray
    horizon: float
    direction: Direction = Direction.MORNING

    def __post_init__(self):
        mu = _vec(self.capacities, "capacities")
        n = mu.size
        if n == 0:
            raise ValueError("network needs at least one bottleneck")
        c = self.free_flow_times
        c = _vec(np.zeros(n) if c is None else c, "free_flow_times")
        Q = _vec(self.demands, "demands")
        if c.size != n or Q.size != n:
            raise ValueError("capacities, free_flow_times and demands must have equal length")
        if np.any(mu <= 0):
            raise ValueError("capacities must be positive")
        if np.any(Q < 0):
            raise ValueError("demands must be nonnegative")
        if np.any(c < 0) or np.any(np.diff(c) < 0):
            raise ValueError("free_flow_times must be nonnegative and nondecreasing upstream")
        T = float(self.horizon)
        if not (T > 0 and math.isfinite(T)):
            raise ValueError("horizon must be positive and finite")
        object.__setattr__(self, "capacities", mu)
        object.__setattr__(self, "free_flow_times", c)
        object.__setattr__(self, "demands", Q)
        object.__setattr__(self, "horizon", T)
        object.__setattr__(self, "direction", Direction.parse(self.direction))

    @property
    def n_bottlenecks(self) -> int:
        return int(self.capacities.size)

    @property
    def merged_capacities(self) -> np.ndarray:
        """mu_i - mu_{i+1}, with the most upstream entry equal to mu_N."""
        mu = self.capacities
        return np.append(mu[:-1] - mu[1:], mu[-1])

    def with_direction(self, direction) -> CorridorNetwork:
        return CorridorNetwork(self.capacities, self.free_flow_times, self.demands,
                               self.horizon, Direction.parse(direction))

    def __eq__(self, other):
        if not isinstance(other, CorridorNetwork):
            return NotImplemented
        return (np.array_equal(self.capacities, other.capacities)
                and np.array_equal(self.free_flow_times, other.free_flow_times)
                and np.array_equal(self.demands, other.demands)
                and self.horizon == other.horizon and self.direction == other.direction)

    __hash__ = None


@dataclass(frozen=True)
class ArrivalWindow:
    start: float
    end: float

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError("window end precedes start")

    @property
    def length(self) -> float:
        return self.end - self.start

    def contains(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return (t >= self.start) & (t < self.end)

    def contains_window(self, other: ArrivalWindow, tol: float = 0.0) -> bool:
        return self.start <= other.start + tol and other.end <= self.end + tol


# ----------------------------------------------------------------------
# schedule-delay functions


class ScheduleDelay:
    """Strictly quasi-convex penalty s(t) with a unique minimiser ``desired_time``."""

    domain: tuple[float, float]
    desired_time: float

    def value(self, t):
        raise NotImplementedError

    def _slope_left(self, t: float) -> float:
        raise NotImplementedError

    def _slope_right(self, t: float) -> float:
        raise NotImplementedError

    def kinks(self) -> np.ndarray:
        """Points where s is not differentiable."""
        return np.array([self.desired_time])

    def _check_domain(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.domain
        # grid times such as K * dk may overshoot an endpoint by round-off
        slack_lo = DOMAIN_SLACK * max(1.0, abs(lo)) if np.isfinite(lo) else 0.0
        slack_hi = DOMAIN_SLACK * max(1.0, abs(hi)) if np.isfinite(hi) else 0.0
        if np.any(t < lo - slack_lo) or np.any(t > hi + slack_hi) or np.any(np.isnan(t)):
            raise DomainError(f"time outside schedule domain [{lo}, {hi}]")

    def __call__(self, t):
        return self.value(t)

    def slope(self, t: float, side: str | None = None) -> float:
        t = float(t)
        self._check_domain(t)
        at_kink = bool(np.any(np.isclose(self.kinks(), t, rtol=0.0, atol=1e-12)))
        if side is None:
            if at_kink:
                raise AmbiguityError(f"slope at kink t={t} needs side='left' or 'right'")
            return self._slope_right(t)
        if side == "left":
            return self._slope_left(t)
        if side == "right":
            return self._slope_right(t)
        raise ValueError("side must be 'left', 'right' or None")

    def minimum(self) -> float:
        return float(self.value(self.desired_time))

    def as_pwl(self, start: float, end: float) -> PiecewiseLinearFn:
        """PWL representation on ``[start, end]``, held constant outside."""
        raise NotImplementedError

    def window(self, length: float, horizon: tuple[float, float] | None = None):
        return _bisect_window(self, length, horizon)


def _bracket(s: ScheduleDelay, length: float, horizon):
    lo_dom, hi_dom = s.domain
    if horizon is not None:
        lo_dom, hi_dom = max(lo_dom, horizon[0]), min(hi_dom, horizon[1])
    return lo_dom, hi_dom


def _bisect_window(s: ScheduleDelay, length: float, horizon):
    lo_dom, hi_dom = _bracket(s, length, horizon)
    td = s.desired_time
    lo = max(td - length, lo_dom)
    hi = min(td, hi_dom - length)
    if lo > hi + WINDOW_TOL:
        raise HorizonError(f"window of length {length:g} does not fit in [{lo_dom:g}, {hi_dom:g}]")
    hi = max(hi, lo)

    def g(a):
        return float(s.value(a)) - float(s.value(a + length))

    if g(lo) < -1e-12 or g(hi) > 1e-12:
        raise HorizonError(f"no balanced window of length {length:g} inside [{lo_dom:g}, {hi_dom:g}]")
    while hi - lo > WINDOW_TOL:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    a = 0.5 * (lo + hi)
    # one secant step: exact when s is linear around both endpoints
    g_lo, g_hi = g(lo), g(hi)
    if g_lo != g_hi:
        cand = lo - g_lo * (hi - lo) / (g_hi - g_lo)
        if lo <= cand <= hi and abs(g(cand)) <= abs(g(a)):
            a = cand
    b = a + length
    return ArrivalWindow(a, b), 0.5 * (float(s.value(a)) + float(s.value(b)))


@dataclass(frozen=True)
class VSchedule(ScheduleDelay):
    """s(t) = max(beta (t_d - t), gamma (t - t_d))."""

    early_slope: float
    late_slope: float
    desired_time: float
    domain: tuple[float, float] = (-math.inf, math.inf)

    def __post_init__(self):
        if not (self.early_slope > 0 and self.late_slope > 0):
            raise ValueError("V schedule slopes must be positive")
        lo, hi = self.domain
        if not lo <= self.desired_time <= hi:
            raise ValueError("desired time must lie inside the domain")
        object.__setattr__(self, "domain", (float(lo), float(hi)))

    def value(self, t):
        self._check_domain(t)
        t = np.asarray(t, dtype=float)
        out = np.maximum(self.early_slope * (self.desired_time - t), self.late_slope * (t - self.desired_time))
        return float(out) if out.ndim == 0 else out

    def _slope_left(self, t):
        return -self.early_slope if t <= self.desired_time else self.late_slope

    def _slope_right(self, t):
        return -self.early_slope if t < self.desired_time else self.late_slope

    def window(self, length: float, horizon=None):
        if length < 0:
            raise ValueError("window length must be nonnegative")
        b, g = self.early_slope, self.late_slope
        start = self.desired_time - g * length / (b + g)
        end = start + length
        lo, hi = _bracket(self, length, horizon)
        if start < lo - WINDOW_TOL or end > hi + WINDOW_TOL:
            raise HorizonError(f"window [{start:g}, {end:g}] exceeds [{lo:g}, {hi:g}]")
        return ArrivalWindow(start, end), b * g * length / (b + g)

    def as_pwl(self, start, end):
        td = self.desired_time
        xs = sorted({start, end} | ({td} if start < td < end else set()))
        ys = np.maximum(self.early_slope * (td - np.array(xs)), self.late_slope * (np.array(xs) - td))
        return PiecewiseLinearFn(xs, ys, left=ys[0], right=ys[-1])


@dataclass(frozen=True, eq=False)
class PiecewiseLinearSchedule(ScheduleDelay):
    """Continuous PWL penalty through ``(breakpoints[k], values[k])``.

    Values must decrease strictly to a single minimum and then increase
    strictly. The domain is the breakpoint span.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        x = _vec(self.breakpoints, "breakpoints")
        y = _vec(self.values, "values")
        if x.size < 2 or x.size != y.size:
            raise ValueError("need at least two breakpoints with matching values")
        if np.any(np.diff(x) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        dy = np.diff(y)
        if np.any(dy == 0):
            raise ValueError("flat segments violate strict quasi-convexity")
        k = int(np.argmin(y))
        if np.any(dy[:k] > 0) or np.any(dy[k:] < 0):
            raise ValueError("values must decrease then increase (strictly quasi-convex)")
        if np.any(y < 0):
            raise ValueError("schedule delay must be nonnegative")
        object.__setattr__(self, "breakpoints", x)
        object.__setattr__(self, "values", y)
        object.__setattr__(self, "_fn", PiecewiseLinearFn(x, y, left=y[0], right=y[-1]))

    @classmethod
    def from_slopes(cls, start: float, start_value: float, breakpoints, slopes) -> PiecewiseLinearSchedule:
        """Build from the value at ``start`` and the slope on each segment."""
        xs = np.concatenate([[start], np.asarray(breakpoints, dtype=float)])
        ys = [float(start_value)]
        for k, m in enumerate(slopes):
            ys.append(ys[-1] + float(m) * (xs[k + 1] - xs[k]))
        return cls(xs, np.array(ys))

    @property
    def domain(self):
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    @property
    def desired_time(self):
        return float(self.breakpoints[int(np.argmin(self.values))])

    def kinks(self):
        return self.breakpoints[1:-1]

    def value(self, t):
        self._check_domain(t)
        return self._fn(t)

    def _segment_slope(self, k: int) -> float:
        x, y = self.breakpoints, self.values
        k = min(max(k, 0), x.size - 2)
        return float((y[k + 1] - y[k]) / (x[k + 1] - x[k]))

    def _slope_left(self, t):
        return self._segment_slope(int(np.searchsorted(self.breakpoints, t, side="left")) - 1)

    def _slope_right(self, t):
        return self._segment_slope(int(np.searchsorted(self.breakpoints, t, side="right")) - 1)

    def as_pwl(self, start, end):
        inner = self.breakpoints[(self.breakpoints > start) & (self.breakpoints < end)]
        xs = np.concatenate([[start], inner, [end]])
        ys = self._fn(xs)
        return PiecewiseLinearFn(xs, ys, left=ys[0], right=ys[-1])


@dataclass(frozen=True, eq=False)
class CallableSchedule(ScheduleDelay):
    """User-supplied s and its derivative; windows use bisection."""

    func: Callable
    derivative: Callable
    desired_time: float
    domain: tuple[float, float] = (-math.inf, math.inf)
    sample_step: float = 0.01
    kink_points: tuple = field(default=())

    def value(self, t):
        self._check_domain(t)
        out = np.asarray(self.func(np.asarray(t, dtype=float)), dtype=float)
        return float(out) if out.ndim == 0 else out

    def kinks(self):
        return np.unique(np.concatenate([[self.desired_time], np.asarray(self.kink_points, dtype=float)]))

    def _slope_left(self, t):
        h = 1e-9 * max(1.0, abs(t))
        return float(self.derivative(t - h))

    def _slope_right(self, t):
        h = 1e-9 * max(1.0, abs(t))
        return float(self.derivative(t + h))

    def as_pwl(self, start, end):
        n = max(2, int(math.ceil((end - start) / self.sample_step)) + 1)
        xs = np.union1d(np.linspace(start, end, n), self.kinks()[(self.kinks() > start) & (self.kinks() < end)])
        ys = np.asarray(self.func(xs), dtype=float)
        return PiecewiseLinearFn(xs, ys, left=ys[0], right=ys[-1])


# ----------------------------------------------------------------------
# module-level operations


def eval_schedule(s: ScheduleDelay, t):
    """s(t); raises DomainError outside the schedule domain."""
    return s.value(t)


def eval_schedule_slope(s: ScheduleDelay, t: float, side: str | None = None) -> float:
    """One-sided derivative of s at ``t``. ``side`` is required at a kink."""
    return s.slope(t, side)


def window_from_length(s: ScheduleDelay, length: float, horizon: tuple[float, float] | None = None):
    """Window ``[a, a + length]`` with s(a) = s(a + length), and that common value."""
    if length < 0:
        raise ValueError("window length must be nonnegative")
    return s.window(float(length), horizon)


def window_by_bisection(s: ScheduleDelay, length: float, horizon=None):
    """Generic bisection path, available for every schedule family."""
    if length < 0:
        raise ValueError("window length must be nonnegative")
    return _bisect_window(s, float(length), horizon)
