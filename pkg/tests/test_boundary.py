import numpy as np
import pytest

from delaylift.boundary import (
    BoundaryTriple,
    Divergent,
    EstimateReport,
    control_map_phi,
    control_map_phi_ibp,
    dirichlet_map,
    f_operator,
    observation_map_psi,
    probe_control_admissibility,
    probe_observation_admissibility,
    regularity_limit,
    transfer_decay,
    yosida_apply,
)
from delaylift.errors import GridMismatch, SingularBoundarySystem, SpectrumHit
from delaylift.semigroup import weighted_norm
from delaylift.systems import heat_triple, schrodinger_triple, toy_triple


def dirichlet_laplacian_triple(N):
    """Free nodes 1..N-1, homogeneous Dirichlet at 0, boundary unknown u_N."""
    h = 1.0 / N
    n = N - 1
    a = np.zeros((n, n + 1))
    for j in range(n):
        if j > 0:
            a[j, j - 1] = 1.0
        a[j, j] = -2.0
        a[j, j + 1] = 1.0
    a /= h * h
    g = np.zeros((1, n + 1))
    g[0, n] = 1.0
    return BoundaryTriple(a, g, np.zeros((1, n + 1)), np.full(n, h), {"N": N, "nodes": np.arange(1, N) * h})


def test_dirichlet_map_linear_profile():
    bt = dirichlet_laplacian_triple(64)
    d = dirichlet_map(bt, 0.0)
    np.testing.assert_allclose(d.h_part[:, 0], bt.geometry["nodes"], atol=1e-10)
    assert abs(bt.trace @ d(1.0) - 1.0).max() <= 1e-10


@pytest.mark.parametrize("make", [lambda: heat_triple(32), lambda: schrodinger_triple(32), toy_triple])
def test_dirichlet_map_defining_conditions(make):
    bt = make()
    for lam in (0.5, 3.0, 40.0):
        r1, r2 = dirichlet_map(bt, lam).residuals(bt)
        assert r1 <= 1e-9 * max(1, lam) and r2 <= 1e-10


def test_heat_dirichlet_cosh():
    bt = heat_triple(64)
    s = bt.geometry["nodes"]
    err = np.abs(dirichlet_map(bt, 1.0).h_part[:, 0] - np.cosh(s) / np.sinh(1.0)).max()
    assert err <= 1e-3


def test_dirichlet_rejects_spectrum():
    bt = heat_triple(16)
    with pytest.raises(SpectrumHit):
        dirichlet_map(bt, 0.0)


def test_construction_residual_and_surjectivity():
    for bt in (heat_triple(32), schrodinger_triple(32), toy_triple()):
        assert bt.construction_residual() <= 1e-10
    with pytest.raises(SingularBoundarySystem):
        BoundaryTriple(np.array([[-1.0, 1.0]]), np.array([[1.0, 0.0]]), np.zeros((1, 2)), np.ones(1))


def test_control_map_examples():
    bt = toy_triple()
    dt = 1 / 64
    assert not np.any(control_map_phi(bt, 1.0, 1.0, np.zeros(65), dt))
    assert control_map_phi(bt, 1.0, 1.0, np.ones(65), dt)[0] == pytest.approx(1 - np.exp(-1), abs=1e-12)
    with pytest.raises(GridMismatch):
        control_map_phi(bt, 1.0, 1.0, np.ones(60), dt)


def test_control_map_two_routes_heat():
    bt = heat_triple(64)
    dt, t = 1 / 512, 0.5
    s = np.arange(257) * dt
    u = s**2
    direct = control_map_phi(bt, 1.0, t, u, dt, hold="foh")
    ibp = control_map_phi_ibp(bt, 1.0, t, u, dt, udot=2 * s)
    assert weighted_norm(bt.weights, direct - ibp) / weighted_norm(bt.weights, ibp) <= 1e-3
    # the simulator's zero-order hold is only first order in dt
    zoh = control_map_phi(bt, 1.0, t, u, dt)
    zoh2 = control_map_phi(bt, 1.0, t, (np.arange(513) / 1024) ** 2, dt / 2)
    e1 = weighted_norm(bt.weights, zoh - ibp)
    e2 = weighted_norm(bt.weights, zoh2 - ibp)
    assert 1.7 < e1 / e2 < 2.3


def test_observation_map():
    bt = toy_triple()
    assert not np.any(observation_map_psi(bt, [0.0], 1.0, 0.125))
    np.testing.assert_allclose(observation_map_psi(bt, [1.0], 1.0, 0.125)[:, 0], np.exp(-np.arange(9) / 8), atol=1e-12)
    heat = heat_triple(64)
    x0 = np.cos(np.pi * heat.geometry["nodes"])
    coarse = observation_map_psi(heat, x0, 1.0, 1 / 64)[:, 0]
    fine = observation_map_psi(heat, x0, 1.0, 1 / 128)[::2, 0]
    np.testing.assert_allclose(coarse, fine, atol=1e-10)
    assert np.max(np.abs(np.diff(fine))) < 0.2
    assert np.isfinite(np.sqrt(np.sum(coarse**2) / 64))


def test_yosida():
    bt = toy_triple()
    assert yosida_apply(bt, [1.0])[0] == pytest.approx(1.0, abs=1e-10)
    assert yosida_apply(bt, [0.0])[0] == 0.0
    heat = heat_triple(64)
    z = np.cos(np.pi * heat.geometry["nodes"])
    got = yosida_apply(heat, z)
    assert abs(got[0] - (heat.C @ z)[0]) <= 1e-6 * abs(got[0])
    div = yosida_apply(heat, np.random.default_rng(0).standard_normal(64), lambdas=[10.0, 20.0])
    assert isinstance(div, Divergent) and not div


def test_f_operator():
    bt = toy_triple()
    vals, gaps = f_operator(bt, 1.0, np.zeros(65), 1.0, 1 / 64)
    assert not np.any(vals) and not gaps.any()
    vals, _ = f_operator(bt, 1.0, np.ones(65), 1.0, 1 / 64)
    np.testing.assert_allclose(vals[:, 0], 1 - np.exp(-np.arange(65) / 64), atol=1e-10)


def test_observation_probes():
    fam = [heat_triple(n) for n in (32, 64, 128)]
    rep = probe_observation_admissibility(fam, 2.0)
    assert rep.verdict == "bounded" and max(rep.ratios) <= 1.2
    neg = probe_observation_admissibility([heat_triple(n, observation="gradient") for n in (32, 64, 128)], 2.0)
    assert neg.verdict == "unbounded" and min(neg.ratios) > 1.35


def test_bounded_observation_probe():
    fam = []
    for n in (32, 64, 128):
        h = heat_triple(n)
        obs = np.zeros((1, n + 1))
        obs[0, :n] = h.weights
        fam.append(BoundaryTriple(h.full_op, h.trace, obs, h.weights, h.geometry))
    rep = probe_observation_admissibility(fam, 2.0)
    assert rep.verdict == "bounded"
    assert max(rep.values) <= np.sqrt(2.0) * (1 + 1e-9)


def test_control_probes():
    rep = probe_control_admissibility([heat_triple(n) for n in (32, 64, 128)], 1.0)
    assert rep.verdict == "bounded"
    toy = probe_control_admissibility([toy_triple()], 0.7)
    assert toy.values[0] == pytest.approx(np.sqrt((1 - np.exp(-1.4)) / 2), rel=1e-10)


def test_transfer_decay():
    lams = [10.0 * 2**k for k in range(6)]
    rep = transfer_decay(toy_triple(), lams)
    np.testing.assert_allclose(rep.values, 1 / (np.array(lams) + 1), rtol=1e-12)
    assert rep.verdict == "decaying"
    assert transfer_decay(toy_triple(), [10.0]).verdict == "inconclusive"
    assert transfer_decay(heat_triple(64), [10.0 * 2**k for k in range(11)]).verdict == "decaying"


def test_regularity_limit():
    rep = regularity_limit(toy_triple(), 1.0, 0.0)
    assert rep.verdict == "regular" and not any(rep.values)
    tl = [2.0**-k for k in range(1, 11)]
    rep = regularity_limit(toy_triple(), 1.0, 1.0, tl)
    exact = [1 - (1 - np.exp(-t)) / t for t in tl]
    np.testing.assert_allclose(rep.values, exact, rtol=2e-3)
    assert rep.verdict == "regular"
    heat = regularity_limit(heat_triple(64), 1.0, 1.0)
    assert heat.verdict == "regular"
    assert np.polyfit(np.log(tl), np.log(heat.values), 1)[0] > 0


def test_estimate_report_csv():
    rep = EstimateReport("q", [(32, 2.0, 1.5)], 2.0, "inconclusive")
    lines = rep.to_csv().splitlines()
    assert lines[0] == "quantity,mesh,param,value,verdict"
    assert lines[1] == "q,32,2.0,1.5,inconclusive"
    with pytest.raises(ValueError):
        EstimateReport("q", [(1, None, -1.0)])
