import numpy as np
import pytest

from delaylift.sde import brownian_path
from delaylift.systems import SystemSpec, make_system
from delaylift.verify import (
    boundary_signal,
    heat_exponent_check,
    method_of_steps_oracle,
    oracle_equivalence,
    random_unit_triples,
    regularity_suite,
    wellposedness_estimate,
)


def _run(ls, k, seed=0):
    t = np.arange(k + 1) * ls.dt
    u = np.sin(2 * np.pi * t)
    phi = np.zeros(ls.m + 1)
    xi = np.cos(np.pi * ls.bt.geometry["nodes"]) if "nodes" in ls.bt.geometry else np.ones(ls.n)
    return ls, xi, phi, u, brownian_path(k, ls.dt, seed)


def test_boundary_signal_dirac(heat):
    k = 48
    u = np.arange(k + 1, dtype=float) * heat.dt
    phi = np.linspace(-1, 0, heat.m + 1)
    phi[-1] = 0.0
    b = boundary_signal(heat, phi, u)
    np.testing.assert_allclose(b[:, 0], np.concatenate([phi[:-1], u])[: k + 1], atol=1e-15)


def test_oracle_equivalence_noise_free_toy():
    ls = make_system(SystemSpec("toy", sigma=0.0))
    res = oracle_equivalence(*_run(ls, 64))
    assert res.passed and res.measured["discrepancy"] <= 1e-12


def test_oracle_equivalence_heat_refined():
    coarse = make_system(SystemSpec("heat", N=32, m=16))
    fine = make_system(SystemSpec("heat", N=32, m=32))
    res = oracle_equivalence(*_run(coarse, 32), refined=_run(fine, 64))
    assert res.passed
    assert "roundoff" in res.measured
    assert res.line().startswith("PASS oracle_equivalence")


def test_oracle_trajectory_history(heat):
    tr = method_of_steps_oracle(*_run(heat, 8), observe=False)
    assert tr.h.shape == (9, heat.m + 1, 1) and np.isnan(tr.outputs).all()


def test_random_triples_unit_norm(heat):
    xi, phi, u = random_unit_triples(heat, 0.5, 5, seed=3)
    assert xi.shape == (heat.n, 5) and phi.shape == (heat.m + 1, 1, 5) and u.shape == (17, 1, 5)
    np.testing.assert_array_equal(u[0], phi[-1])
    a, b, c = random_unit_triples(heat, 0.5, 5, seed=3)
    assert np.array_equal(xi, a)


def _toy_exact_c(ls, alpha, n_samples, seed):
    # exact second-moment recursion of the discrete scheme
    xi, phi, u = random_unit_triples(ls, alpha, n_samples, seed)
    t, p0, tm = (s[0, 0] for s in ls.steps)
    var = (tm / t) ** 2 * ls.dt
    c = ls.bt.C[0, 0]
    k = u.shape[0] - 1
    out = []
    for s in range(n_samples):
        b = boundary_signal(ls, phi[:, :, s], u[:, :, s])[:, 0]
        ex, ex2, energy = xi[0, s], xi[0, s] ** 2, 0.0
        for j in range(k):
            energy += ls.dt * c * c * ex2
            ex2, ex = t * t * (1 + var) * ex2 + 2 * t * p0 * b[j] * ex + (p0 * b[j]) ** 2, t * ex + p0 * b[j]
        out.append(np.sqrt(energy))
    return max(out)


def test_toy_c_alpha_matches_exact_recursion():
    ls = make_system(SystemSpec("toy", m=16))
    rep = wellposedness_estimate(ls, 1.0, n_samples=20, seed=4, n_paths=256)
    exact = _toy_exact_c(ls, 1.0, 20, 4)
    assert abs(rep.values[0] / exact - 1) <= 0.1
    assert rep.verdict == "inconclusive" and rep.gap_counts == [0]


def test_heat_exponent_check():
    ls = make_system(SystemSpec("heat", N=32))
    with pytest.raises(ValueError):
        heat_exponent_check(ls, [0.5, 0.25])
    res = heat_exponent_check(ls, [2.0 ** -k for k in range(2, 6)], n_sub=16)
    assert res.passed
    assert 0 < res.measured["phi_slope"] < 1


def test_regularity_heat(heat):
    res = regularity_suite(heat)
    assert res.passed
    assert res.measured["cesaro_ratio"] < 0.05
    reg, dec = res.reports
    assert reg.verdict == "regular" and dec.verdict == "decaying"


def test_regularity_schrodinger(schrodinger):
    res = regularity_suite(schrodinger)
    assert res.passed and res.measured["collocated"]
    assert res.measured["collocation_defect"] > 0
