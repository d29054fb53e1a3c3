import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corridor_dta import PiecewiseLinearFn


def random_pwl(rng, n=None, jumps=False):
    n = n or int(rng.integers(2, 12))
    x = np.sort(rng.uniform(-10, 10, n))
    x = np.unique(x)
    y = rng.normal(size=x.size)
    if jumps and x.size > 3:
        k = int(rng.integers(1, x.size - 1))
        x = np.insert(x, k, x[k])
        y = np.insert(y, k, y[k] + 1.0)
    return PiecewiseLinearFn(x, y, left=y[0], right=y[-1])


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=50, deadline=None)
def test_addition_matches_pointwise(seed):
    rng = np.random.default_rng(seed)
    f, g = random_pwl(rng, jumps=True), random_pwl(rng, jumps=True)
    t = rng.uniform(-12, 12, 1000)
    assert np.allclose((f + g)(t), f(t) + g(t), atol=1e-12)
    assert np.allclose((f - g)(t), f(t) - g(t), atol=1e-12)
    assert np.allclose((3.0 * f)(t), 3.0 * f(t), atol=1e-12)


def test_right_continuity_at_jump():
    f = PiecewiseLinearFn([0, 1, 1, 2], [0, 1, 3, 3], 0, 3)
    assert f(1.0) == 3.0
    assert f.left_limit(1.0) == 1.0
    assert not f.is_continuous


def test_constant_and_restrict():
    f = PiecewiseLinearFn.constant(2.0, 1.0, 3.0)
    assert f(0.5) == 0 and f(1.0) == 2.0 and f(2.999) == 2.0 and f(3.0) == 0.0
    assert f.integral() == pytest.approx(4.0)
    g = PiecewiseLinearFn.linear(0, 4, 0, 4).restrict(1, 2)
    assert g(1.5) == pytest.approx(1.5) and g(2.5) == 0.0


def test_integral_and_antiderivative():
    rng = np.random.default_rng(1)
    f = random_pwl(rng, 8)
    dense = np.linspace(f.x[0], f.x[-1], 200001)
    assert f.integral(f.x[0], f.x[-1]) == pytest.approx(float(np.sum(0.5 * (f(dense)[1:] + f(dense)[:-1]) * np.diff(dense))), abs=1e-6)
    step = PiecewiseLinearFn([0, 1, 1, 3], [2, 2, 5, 5], 0, 0)
    F = step.antiderivative()
    assert F(3.0) == pytest.approx(12.0)
    assert F(1.0) == pytest.approx(2.0)


def test_derivative_of_linear_pieces():
    f = PiecewiseLinearFn([0, 1, 3], [0, 2, 3], 0, 3)
    d = f.derivative()
    assert d(0.5) == pytest.approx(2.0)
    assert d(2.0) == pytest.approx(0.5)


def test_compose_inverse_roundtrip():
    f = PiecewiseLinearFn([0, 1, 4], [1, 2, 8], 1, 8)
    inv = f.inverse()
    t = np.linspace(0, 4, 101)
    assert np.allclose(inv(f(t)), t)
    assert np.allclose(f.compose(inv)(np.linspace(1, 8, 50)), np.linspace(1, 8, 50))


def test_inverse_rejects_jumps():
    with pytest.raises(ValueError):
        PiecewiseLinearFn([0, 1, 1, 2], [0, 1, 2, 3], 0, 3).inverse()


def test_first_reach():
    f = PiecewiseLinearFn([0, 1, 2, 3], [0, 1, 1, 2], 0, 2)
    assert f.first_reach(1.0) == pytest.approx(1.0)
    assert f.first_reach(1.5) == pytest.approx(2.5)
    assert f.first_reach(5.0) == np.inf


def test_clip_and_maximum():
    f = PiecewiseLinearFn([0, 2], [-1, 1], -1, 1)
    g = f.clip_min(0.0)
    assert g(0.5) == 0.0 and g(1.5) == pytest.approx(0.5)
    h = f.maximum(PiecewiseLinearFn([0, 2], [0.5, 0.5], 0.5, 0.5))
    assert h(0.0) == 0.5 and h(2.0) == 1.0


def test_shift():
    f = PiecewiseLinearFn([0, 1], [0, 1], 0, 1).shift(2.0)
    assert f(2.5) == pytest.approx(0.5)
