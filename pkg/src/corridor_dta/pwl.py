"""Piecewise-linear functions of time with optional jumps.

A :class:`PiecewiseLinearFn` is stored as abscissae ``x`` (nondecreasing) and
ordinates ``y``. Between consecutive distinct abscissae the function is the
straight line through the two points. A repeated abscissa ``x[k] == x[k+1]``
encodes a jump from ``y[k]`` (left limit) to ``y[k+1]`` (value). Outside
``[x[0], x[-1])`` the function takes the constants ``left`` and ``right``.

Evaluation is right-continuous everywhere, including at the last breakpoint.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

JUMP_TOL = 1e-12  # relative size below which a jump counts as round-off

ArrayLike = "float | np.ndarray"


def _as_readonly(a) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PiecewiseLinearFn:
    x: np.ndarray
    y: np.ndarray
    left: float = 0.0
    right: float = 0.0

    def __post_init__(self):
        x = _as_readonly(self.x)
        y = _as_readonly(self.y)
        if x.size == 0 or x.size != y.size:
            raise ValueError("x and y must be non-empty and of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("breakpoints and values must be finite")
        dx = np.diff(x)
        if np.any(dx < 0):
            raise ValueError("breakpoints must be nondecreasing")
        if x.size > 2 and np.any((dx[:-1] == 0) & (dx[1:] == 0)):
            raise ValueError("at most two values may share one breakpoint")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "left", float(self.left))
        object.__setattr__(self, "right", float(self.right))

    # ------------------------------------------------------------------
    # constructors
    @classmethod
    def zero(cls) -> PiecewiseLinearFn:
        return cls([0.0], [0.0])

    @classmethod
    def constant(cls, value: float, start: float, end: float) -> PiecewiseLinearFn:
        """``value`` on ``[start, end)``, zero elsewhere."""
        if end < start:
            raise ValueError("end must not precede start")
        if end == start:
            return cls.zero()
        return cls([start, end], [value, value])

    @classmethod
    def linear(cls, start: float, end: float, y0: float, y1: float, hold: bool = True) -> PiecewiseLinearFn:
        """Straight segment on ``[start, end]``; held constant outside if ``hold``."""
        if hold:
            return cls([start, end], [y0, y1], left=y0, right=y1)
        return cls([start, end], [y0, y1])

    @classmethod
    def from_callable(cls, f: Callable, points: Iterable[float], hold: bool = False) -> PiecewiseLinearFn:
        pts = np.unique(np.asarray(list(points), dtype=float))
        vals = np.asarray(f(pts), dtype=float)
        if hold:
            return cls(pts, vals, left=vals[0], right=vals[-1])
        return cls(pts, vals)

    # ------------------------------------------------------------------
    # evaluation
    @property
    def support(self) -> tuple[float, float]:
        return float(self.x[0]), float(self.x[-1])

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        scalar = t_arr.ndim == 0
        t_arr = np.atleast_1d(t_arr)
        x, y = self.x, self.y
        n = x.size
        idx = np.searchsorted(x, t_arr, side="right") - 1
        out = np.empty_like(t_arr)
        below = idx < 0
        above = idx >= n - 1
        mid = ~(below | above)
        out[below] = self.left
        out[above] = self.right
        if np.any(mid):
            k = idx[mid]
            x0, x1, y0, y1 = x[k], x[k + 1], y[k], y[k + 1]
            out[mid] = y0 + (y1 - y0) * (t_arr[mid] - x0) / (x1 - x0)
        return float(out[0]) if scalar else out

    def left_limit(self, t):
        t_arr = np.asarray(t, dtype=float)
        scalar = t_arr.ndim == 0
        t_arr = np.atleast_1d(t_arr)
        x, y = self.x, self.y
        n = x.size
        idx = np.searchsorted(x, t_arr, side="left") - 1
        out = np.empty_like(t_arr)
        below = idx < 0
        above = idx >= n - 1
        mid = ~(below | above)
        out[below] = self.left
        out[above] = self.right
        if np.any(mid):
            k = idx[mid]
            x0, x1, y0, y1 = x[k], x[k + 1], y[k], y[k + 1]
            out[mid] = y0 + (y1 - y0) * (t_arr[mid] - x0) / (x1 - x0)
        return float(out[0]) if scalar else out

    def _jump_tol(self) -> float:
        return JUMP_TOL * max(1.0, float(np.max(np.abs(self.y))))

    @property
    def is_continuous(self) -> bool:
        """True when no jump exceeds round-off (relative 1e-12 of max |y|)."""
        tol = self._jump_tol()
        dup = np.flatnonzero(np.diff(self.x) == 0)
        if np.any(np.abs(self.y[dup + 1] - self.y[dup]) > tol):
            return False
        return abs(self.left - self.y[0]) <= tol and abs(self.right - self.y[-1]) <= tol

    # ------------------------------------------------------------------
    # arithmetic
    def _combine(self, other: PiecewiseLinearFn, op) -> PiecewiseLinearFn:
        xs = np.union1d(self.x, other.x)
        lo = op(self.left_limit(xs), other.left_limit(xs))
        hi = op(self(xs), other(xs))
        left = op(np.float64(self.left), np.float64(other.left))
        right = op(np.float64(self.right), np.float64(other.right))
        return _assemble(xs, lo, hi, float(left), float(right))

    def __add__(self, other):
        if isinstance(other, PiecewiseLinearFn):
            return self._combine(other, np.add)
        c = float(other)
        return PiecewiseLinearFn(self.x, self.y + c, self.left + c, self.right + c)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, PiecewiseLinearFn):
            return self._combine(other, np.subtract)
        return self + (-float(other))

    def __rsub__(self, other):
        return (-self) + float(other)

    def __neg__(self):
        return PiecewiseLinearFn(self.x, -self.y, -self.left, -self.right)

    def __mul__(self, other):
        if isinstance(other, PiecewiseLinearFn):
            return NotImplemented
        c = float(other)
        return PiecewiseLinearFn(self.x, self.y * c, self.left * c, self.right * c)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1.0 / float(other))

    def clip_min(self, floor: float = 0.0) -> PiecewiseLinearFn:
        """Pointwise ``max(f, floor)``, inserting the crossing points."""
        xs, ys = [], []
        x, y = self.x, self.y
        for k in range(x.size):
            if k > 0 and x[k] > x[k - 1]:
                a, b = y[k - 1] - floor, y[k] - floor
                if a * b < 0:
                    xc = x[k - 1] + (x[k] - x[k - 1]) * a / (a - b)
                    if x[k - 1] < xc < x[k]:
                        xs.append(xc)
                        ys.append(floor)
            xs.append(x[k])
            ys.append(max(y[k], floor))
        return _simplify(PiecewiseLinearFn(xs, ys, max(self.left, floor), max(self.right, floor)))

    def maximum(self, other: PiecewiseLinearFn) -> PiecewiseLinearFn:
        return other + (self - other).clip_min(0.0)

    def restrict(self, start: float, end: float) -> PiecewiseLinearFn:
        """Equal to ``f`` on ``[start, end)`` and zero elsewhere."""
        if end <= start:
            return PiecewiseLinearFn.zero()
        inner = np.unique(self.x[(self.x > start) & (self.x < end)])
        xs = np.concatenate([[start], inner, [end]])
        lo = self.left_limit(xs)
        hi = self(xs)
        lo[0] = 0.0
        hi[-1] = 0.0
        return _assemble(xs, lo, hi, 0.0, 0.0)

    def shift(self, dt: float) -> PiecewiseLinearFn:
        """``g(t) = f(t - dt)``."""
        return PiecewiseLinearFn(self.x + dt, self.y, self.left, self.right)

    # ------------------------------------------------------------------
    # calculus
    def integral(self, start: float | None = None, end: float | None = None) -> float:
        a = self.x[0] if start is None else float(start)
        b = self.x[-1] if end is None else float(end)
        if b < a:
            return -self.integral(b, a)
        if b == a:
            return 0.0
        if (a < self.x[0] and self.left != 0.0 and not np.isfinite(a)) or (
            b > self.x[-1] and self.right != 0.0 and not np.isfinite(b)
        ):
            raise ValueError("integral diverges")
        inner = np.unique(self.x[(self.x > a) & (self.x < b)])
        xs = np.concatenate([[a], inner, [b]])
        v0 = self(xs[:-1])
        v1 = self.left_limit(xs[1:])
        return float(np.sum(0.5 * (v0 + v1) * np.diff(xs)))

    def derivative(self) -> PiecewiseLinearFn:
        """Right derivative, piecewise constant with jumps at breakpoints."""
        x, y = self.x, self.y
        xs, ys = [], []
        for k in range(x.size - 1):
            if x[k + 1] == x[k]:
                continue
            slope = (y[k + 1] - y[k]) / (x[k + 1] - x[k])
            xs.extend([x[k], x[k + 1]])
            ys.extend([slope, slope])
        if not xs:
            return PiecewiseLinearFn.zero()
        return _simplify(_dedupe_jumps(np.array(xs), np.array(ys), 0.0, 0.0))

    def antiderivative(self) -> PiecewiseLinearFn:
        """Running integral from the left; exact for piecewise-constant input."""
        if self.left != 0.0 or self.right != 0.0:
            raise ValueError("antiderivative requires zero extrapolation")
        x, y = self.x, self.y
        xs = [x[0]]
        acc = [0.0]
        total = 0.0
        for k in range(x.size - 1):
            h = x[k + 1] - x[k]
            if h == 0:
                continue
            if not np.isclose(y[k], y[k + 1], rtol=1e-12, atol=1e-12):
                raise ValueError("antiderivative requires piecewise-constant segments")
            total += y[k] * h
            xs.append(x[k + 1])
            acc.append(total)
        return PiecewiseLinearFn(xs, acc, 0.0, total)

    # ------------------------------------------------------------------
    # composition and inversion (continuous monotone maps)
    def compose(self, inner: PiecewiseLinearFn) -> PiecewiseLinearFn:
        """``t -> self(inner(t))`` for continuous ``self`` and nondecreasing continuous ``inner``."""
        if not (self.is_continuous and inner.is_continuous):
            raise ValueError("compose requires continuous functions")
        if np.any(np.diff(inner.y) < 0):
            raise ValueError("inner map must be nondecreasing")
        extra = []
        for v in self.x:
            if inner.y[0] < v < inner.y[-1]:
                extra.append(inner.first_reach(v))
        ts = np.union1d(inner.x, np.asarray(extra, dtype=float))
        vals = self(inner(ts))
        return _simplify(PiecewiseLinearFn(ts, vals, self(inner.left), self(inner.right)))

    def inverse(self) -> PiecewiseLinearFn:
        """Inverse of a continuous, strictly increasing function."""
        if not self.is_continuous:
            raise ValueError("inverse requires a continuous strictly increasing function")
        keep = np.append(np.diff(self.x) > 0, True)
        x, y = self.x[keep], self.y[keep]
        if np.any(np.diff(y) <= 0):
            raise ValueError("inverse requires a continuous strictly increasing function")
        return PiecewiseLinearFn(y, x, x[0], x[-1])

    def first_reach(self, v):
        """Smallest ``t`` with ``f(t) >= v`` for continuous nondecreasing ``f``.

        Returns ``x[0]`` when ``v <= f(x[0])`` and ``inf`` when ``v`` is never reached.
        """
        v_arr = np.atleast_1d(np.asarray(v, dtype=float))
        x, y = self.x, self.y
        out = np.empty_like(v_arr)
        idx = np.searchsorted(y, v_arr, side="left")
        low = idx == 0
        high = idx >= y.size
        mid = ~(low | high)
        out[low] = x[0]
        out[high] = np.inf
        if np.any(mid):
            k = idx[mid]
            y0, y1, x0, x1 = y[k - 1], y[k], x[k - 1], x[k]
            out[mid] = x0 + (v_arr[mid] - y0) * (x1 - x0) / (y1 - y0)
        return float(out[0]) if np.ndim(v) == 0 else out

    # ------------------------------------------------------------------
    def sample(self, t) -> np.ndarray:
        return np.asarray(self(np.asarray(t, dtype=float)))

    def __repr__(self) -> str:
        return f"PiecewiseLinearFn(n={self.x.size}, support=[{self.x[0]:.6g}, {self.x[-1]:.6g}])"


def _assemble(xs, lo, hi, left, right) -> PiecewiseLinearFn:
    """Build a function from left limits ``lo`` and values ``hi`` at ``xs``."""
    X, Y = [], []
    last = xs.size - 1
    for k in range(xs.size):
        if k == 0:
            X.append(xs[0])
            Y.append(hi[0] if last > 0 else right)
            continue
        X.append(xs[k])
        Y.append(lo[k])
        if k < last and hi[k] != lo[k]:
            X.append(xs[k])
            Y.append(hi[k])
    return _simplify(PiecewiseLinearFn(X, Y, left, right))


def _dedupe_jumps(xs, ys, left, right) -> PiecewiseLinearFn:
    X, Y = [xs[0]], [ys[0]]
    for k in range(1, xs.size):
        if xs[k] == X[-1] and ys[k] == Y[-1]:
            continue
        if len(X) >= 2 and xs[k] == X[-1] == X[-2]:
            Y[-1] = ys[k]
            continue
        X.append(xs[k])
        Y.append(ys[k])
    return PiecewiseLinearFn(X, Y, left, right)


def _simplify(f: PiecewiseLinearFn) -> PiecewiseLinearFn:
    """Drop interior points that lie on the line through their neighbours."""
    x, y = f.x, f.y
    if x.size <= 2:
        return f
    keep = np.ones(x.size, dtype=bool)
    for k in range(1, x.size - 1):
        x0, x1, x2 = x[k - 1], x[k], x[k + 1]
        if x0 == x1 or x1 == x2:
            continue
        if not keep[k - 1]:
            j = k - 1
            while not keep[j]:
                j -= 1
            x0, y0 = x[j], y[j]
        else:
            y0 = y[k - 1]
        pred = y0 + (y[k + 1] - y0) * (x1 - x0) / (x2 - x0)
        if abs(pred - y[k]) <= 1e-13 * (1.0 + abs(y[k])):
            keep[k] = False
    return PiecewiseLinearFn(x[keep], y[keep], f.left, f.right)


def step_profile(windows, values) -> PiecewiseLinearFn:
    """Sum of constant blocks ``values[k]`` on ``windows[k] = (start, end)``."""
    out = PiecewiseLinearFn.zero()
    for (a, b), v in zip(windows, values):
        out = out + PiecewiseLinearFn.constant(v, a, b)
    return out
