import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from delaylift.boundary import control_map_phi, dirichlet_map
from delaylift.delay import DelayMeasure, HistorySegment, e_lambda
from delaylift.lift import (
    LiftedState,
    LiftedSystem,
    block_law_defect,
    lifted_control_map,
    lifted_dirichlet,
    lifted_observe,
    lifted_semigroup_apply,
    resolvent_block_defect,
)
from delaylift.noise import NoiseOp
from delaylift.semigroup import weighted_norm
from delaylift.systems import SystemSpec, heat_triple, make_system


def nodelay(ls):
    return LiftedSystem(ls.bt, DelayMeasure.zero_delay(ls.r), ls.noise, ls.m, ls.lam_ref, ls.name)


def test_semigroup_trivial_cases(heat):
    x = np.cos(np.pi * heat.bt.geometry["nodes"])
    z = LiftedState(x, HistorySegment.zeros(1.0, heat.m))
    out = lifted_semigroup_apply(heat, 0.5, z)
    np.testing.assert_allclose(out.x, heat.bt.restricted.propagator(0.5) @ x, atol=1e-12)
    assert not np.any(out.h.values)
    assert lifted_semigroup_apply(heat, 0.0, z) is z


@pytest.mark.parametrize("t,s", [(0.25, 0.5), (0.5, 0.75), (1.0, 0.5), (0.03125, 1.5)])
def test_block_semigroup_law(heat, t, s):
    assert block_law_defect(heat, t, s) <= 1e-6


def test_full_semigroup_law(heat, rng):
    z = LiftedState(rng.standard_normal(heat.n), HistorySegment(1.0, heat.m, rng.standard_normal(heat.m + 1)))
    a = lifted_semigroup_apply(heat, 0.375, lifted_semigroup_apply(heat, 0.75, z))
    b = lifted_semigroup_apply(heat, 1.125, z)
    assert weighted_norm(heat.weights, a.x - b.x) <= 1e-10 * weighted_norm(heat.weights, b.x)
    assert np.array_equal(a.h.values, b.h.values)


def test_upper_triangular(heat, rng):
    h = HistorySegment(1.0, heat.m, rng.standard_normal(heat.m + 1))
    a = lifted_semigroup_apply(heat, 0.5, LiftedState(rng.standard_normal(heat.n), h))
    b = lifted_semigroup_apply(heat, 0.5, LiftedState(rng.standard_normal(heat.n), h))
    assert np.array_equal(a.h.values, b.h.values)


def test_strong_continuity_order():
    errs, dts = [], []
    for m in (128, 256, 512, 1024):
        ls = make_system(SystemSpec("heat", m=m))
        x = np.cos(np.pi * ls.bt.geometry["nodes"])
        h = HistorySegment.from_function(lambda th: np.sin(np.pi * th), 1.0, m)
        out = lifted_semigroup_apply(ls, ls.dt, LiftedState(x, h))
        errs.append(weighted_norm(ls.weights, out.x - x))
        dts.append(ls.dt)
    assert np.polyfit(np.log(dts), np.log(errs), 1)[0] >= 0.95


@pytest.mark.parametrize("family", ["heat", "schrodinger", "toy"])
def test_resolvent_block_formula(family):
    ls = make_system(SystemSpec(family))
    assert resolvent_block_defect(ls, n_vectors=32) <= 1e-6


def test_lifted_dirichlet(heat):
    z = lifted_dirichlet(heat, 1.0, 0.0)
    assert not np.any(z.x) and not np.any(z.h.values)
    z, res = lifted_dirichlet(heat, 1.0, 1.0, with_residuals=True)
    assert res["coupling"] <= 1e-9 and res["trace"] <= 1e-12
    s = heat.bt.geometry["nodes"]
    assert np.abs(z.x - np.exp(-1) * np.cosh(s) / np.sinh(1)).max() <= 1e-3
    nd = nodelay(heat)
    z = lifted_dirichlet(nd, 2.0, 0.7)
    np.testing.assert_allclose(z.x, dirichlet_map(heat.bt, 2.0).h_part[:, 0] * 0.7, atol=1e-12)
    np.testing.assert_allclose(z.h.values, e_lambda(2.0, 0.7, 1.0, heat.m).values, atol=0)


def test_lifted_control_map(heat):
    k = 48
    t = k * heat.dt
    z = lifted_control_map(heat, t, np.zeros(k + 1))
    assert not np.any(z.x) and not np.any(z.h.values)
    u = np.sin(3 * np.arange(k + 1) * heat.dt)
    nd = nodelay(heat)
    np.testing.assert_allclose(lifted_control_map(nd, t, u).x, control_map_phi(heat.bt, 1.0, t, u, heat.dt), atol=1e-12)
    k = 20
    z = lifted_control_map(heat, k * heat.dt, np.ones(k + 1))
    assert not np.any(z.x)
    assert np.all(z.h.values[heat.m - k:] == 1.0) and not np.any(z.h.values[:heat.m - k])


@given(st.integers(0, 2**31), st.floats(-2, 2), st.floats(-2, 2))
def test_lifted_control_map_linear(seed, a, b):
    ls = make_system(SystemSpec("heat", N=16, m=8))
    rng = np.random.default_rng(seed)
    u1, u2 = rng.standard_normal((2, 13))
    t = 12 * ls.dt
    lhs = lifted_control_map(ls, t, a * u1 + b * u2)
    z1, z2 = lifted_control_map(ls, t, u1), lifted_control_map(ls, t, u2)
    scale = 1 + np.abs(z1.x).max() + np.abs(z2.x).max()
    assert np.abs(lhs.x - (a * z1.x + b * z2.x)).max() <= 1e-9 * scale
    assert np.abs(lhs.h.values - (a * z1.h.values + b * z2.h.values)).max() <= 1e-12 * (1 + abs(a) + abs(b)) * 4


def test_lifted_observe(heat, rng):
    zero = LiftedState(np.zeros(heat.n), HistorySegment.zeros(1.0, heat.m))
    assert lifted_observe(heat, zero)[0] == 0.0
    x = np.cos(np.pi * heat.bt.geometry["nodes"])
    y = lifted_observe(heat, LiftedState(x, HistorySegment(1.0, heat.m, rng.standard_normal(heat.m + 1))))
    assert abs(y[0] - (heat.bt.C @ x)[0]) <= 1e-5 * abs(y[0])
    y2 = lifted_observe(heat, LiftedState(x, HistorySegment(1.0, heat.m, rng.standard_normal(heat.m + 1))))
    assert y[0] == y2[0]


def test_system_invariants():
    bt = heat_triple(16)
    with pytest.raises(Exception):
        LiftedSystem(bt, DelayMeasure.dirac(-1.0, 1.0, u_dim=2), NoiseOp.zero(bt.n), 8)
