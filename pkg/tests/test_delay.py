import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from delaylift.delay import (
    DelayMeasure,
    HistorySegment,
    delay_functional,
    e_lambda,
    grid_steps,
    history_cocycle_check,
    phi_shift,
    shift_apply,
    shift_observation_gamma,
)
from delaylift.errors import BadSpec, GridMismatch, NegativeTime, OffGridTime


def test_shift_of_constant():
    g = HistorySegment(1.0, 4, np.ones(5))
    out = shift_apply(g, 0.25).values.ravel()
    theta = g.theta
    assert out[np.isclose(theta, -0.5)][0] == 1.0
    assert np.all(out[theta >= -0.25] == 0.0)
    assert shift_apply(g, 0.0) is g
    assert not np.any(shift_apply(g, 1.0).values)


def test_shift_rejects_bad_times():
    g = HistorySegment(1.0, 4, np.ones(5))
    with pytest.raises(OffGridTime):
        shift_apply(g, 0.3)
    with pytest.raises(NegativeTime):
        shift_apply(g, -0.25)


def test_delay_functional_examples():
    g = HistorySegment(1.0, 8, np.full(9, 2.5))
    assert delay_functional(DelayMeasure.dirac(-1.0, 1.0), g)[0] == 2.5
    g = HistorySegment.from_function(lambda th: np.sin(th), 1.0, 8)
    assert delay_functional(DelayMeasure.zero_delay(1.0), g)[0] == g.values[-1, 0]
    g = HistorySegment.from_function(lambda th: th, 1.0, 8)
    assert abs(delay_functional(DelayMeasure.uniform(1.0), g)[0] + 0.5) <= (1 / 8) ** 2


def test_measure_validation():
    with pytest.raises(BadSpec):
        DelayMeasure(1.0, ((0.0, 1.0),))
    with pytest.raises(BadSpec):
        DelayMeasure(1.0, ((-1.5, 1.0),))
    with pytest.raises(GridMismatch):
        DelayMeasure.dirac(-0.3, 1.0).snap(1)
    assert DelayMeasure.dirac(-1.0, 1.0, 2.0).total_variation() == pytest.approx(2.0)
    assert DelayMeasure.uniform(1.0).total_variation() == pytest.approx(1.0)


def test_phi_shift_examples():
    u = np.arange(5) / 8
    out = phi_shift(0.5, u, 1.0, 8)
    th = out.theta
    assert out.values[np.isclose(th, -0.25), 0][0] == pytest.approx(0.25)
    assert out.values[np.isclose(th, -0.75), 0][0] == 0.0
    assert not np.any(phi_shift(0.5, np.zeros(5), 1.0, 8).values)
    assert np.all(phi_shift(1.0, np.ones(9), 1.0, 8).values == 1.0)
    assert not np.any(phi_shift(0.0, np.ones(1), 1.0, 8).values)


def test_e_lambda():
    assert e_lambda(1.0, 1.0, 1.0, 8).values[0, 0] == pytest.approx(np.exp(-1))
    assert np.all(e_lambda(0.0, 3.0, 1.0, 8).values == 3.0)
    assert not np.any(e_lambda(2.0, 0.0, 1.0, 8).values)


def test_cocycle_examples():
    s = np.arange(49) / 16
    u = np.sin(5 * s)
    assert history_cocycle_check(u, 0.25, 0.5, 1.0, 16)
    assert history_cocycle_check(u, 0.25, 0.0, 1.0, 16)


@given(st.integers(0, 40), st.integers(0, 40), st.integers(0, 2**31))
def test_cocycle_random(kt, ks, seed):
    m = 16
    u = np.random.default_rng(seed).standard_normal(kt + ks + 1)
    assert history_cocycle_check(u, kt / m, ks / m, 1.0, m)


@given(st.integers(0, 20), st.integers(0, 20), st.integers(0, 2**31))
def test_shift_semigroup_property(kt, ks, seed):
    m = 8
    g = HistorySegment(1.0, m, np.random.default_rng(seed).standard_normal(m + 1))
    a = shift_apply(shift_apply(g, kt / m), ks / m).values
    b = shift_apply(g, (kt + ks) / m).values
    assert np.array_equal(a, b)


@given(st.integers(0, 2**31), st.floats(-3, 3), st.floats(-3, 3))
def test_delay_functional_linear(seed, a, b):
    rng = np.random.default_rng(seed)
    nu = DelayMeasure(1.0, ((-0.5, 0.7), (-1.0, -1.2)), density=lambda th: np.cos(th))
    g1 = HistorySegment(1.0, 8, rng.standard_normal(9))
    g2 = HistorySegment(1.0, 8, rng.standard_normal(9))
    lhs = delay_functional(nu, a * g1 + b * g2)
    rhs = a * delay_functional(nu, g1) + b * delay_functional(nu, g2)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_grid_steps():
    assert grid_steps(0.5, 1.0, 8) == 4
    with pytest.raises(OffGridTime):
        grid_steps(0.51, 1.0, 8)


def test_shift_observation_gamma_end_atom():
    # g -> g(t - r) over t in [0, alpha] sees the history once: gamma^2 = 2 on the
    # trapezoid grid because the end node carries half weight.
    for m in (8, 32):
        assert shift_observation_gamma(DelayMeasure.dirac(-1.0, 1.0), m, 2.0) == pytest.approx(np.sqrt(2))
