"""Cross-checks of the lifted system against independent computations.

The method-of-steps oracle never forms the lifted state: it evaluates the
delayed boundary signal from the stored input record and integrates the
undelayed boundary-controlled system.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .boundary import (
    EstimateReport,
    control_map_norm,
    f_operator_norm,
    regularity_limit,
    transfer_decay,
    yosida_batch,
)
from .errors import DegenerateSample, GridMismatch
from .sde import MildTrajectory, _history_values, _signal, brownian_path, mild_steps, simulate_mild
from .semigroup import weighted_norm

__all__ = [
    "VerificationResult",
    "boundary_signal",
    "method_of_steps_oracle",
    "oracle_discrepancy",
    "oracle_equivalence",
    "random_unit_triples",
    "wellposedness_estimate",
    "heat_exponent_check",
    "regularity_suite",
    "loglog_slope",
]

ROUNDOFF_FLOOR = 1e-10


@dataclass
class VerificationResult:
    name: str
    passed: bool
    measured: dict
    threshold: dict
    artifacts: list = field(default_factory=list)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        meas = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"{status} {self.name}: {meas}"


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{v:.4g}"
    return str(v)


def boundary_signal(ls, phi, u):
    """``b(t_k) = int dnu(theta) U(t_k + theta)`` over the record ``phi`` then ``u[1:]``."""
    hvals = _history_values(ls, phi)
    u = _signal(u, ls.u_dim)
    record = np.concatenate([hvals, u[1:]], axis=0)
    k = u.shape[0] - 1
    kw = ls.kernel
    return np.array([np.einsum("jab,jb->a", kw, record[i:i + ls.m + 1]) for i in range(k + 1)])


def method_of_steps_oracle(ls, xi, phi, u, path, observe=True):
    """Unlifted simulation ``dX = A_m X dt + M X dW, G X = b(t)`` on the same path."""
    hvals = _history_values(ls, phi)
    u = _signal(u, ls.u_dim)
    k = u.shape[0] - 1
    if path.n_steps != k or not np.isclose(path.dt, ls.dt, rtol=1e-12, atol=0):
        raise GridMismatch("path does not match the input grid")
    b = boundary_signal(ls, hvals, u)
    t_step, p0, _ = ls.bt.step_matrices(ls.dt)
    noise = ls.noise.matrix
    x = np.asarray(xi)
    xs = np.empty((k + 1, ls.n), dtype=np.result_type(t_step, p0, x, b))
    xs[0] = x
    for i in range(k):
        x = t_step @ (x + noise @ x * path.increments[i]) + p0 @ b[i]
        xs[i + 1] = x
    record = np.concatenate([hvals, u[1:]], axis=0)
    hs = np.stack([record[i:i + ls.m + 1] for i in range(k + 1)])
    if observe:
        vals, conv, _ = yosida_batch(ls.bt, xs.T)
        outputs, gaps = vals.T, ~conv
    else:
        outputs, gaps = np.full((k + 1, ls.bt.y_dim), np.nan), np.zeros(k + 1, dtype=bool)
    return MildTrajectory(np.arange(k + 1) * ls.dt, xs, hs, outputs, gaps, path, (xi, phi, u), ls.r)


def oracle_discrepancy(ls, xi, phi, u, path):
    """Relative L^2-in-time distance between lifted and oracle H-components."""
    lifted = simulate_mild(ls, xi, phi, u, path, observe=False)
    oracle = method_of_steps_oracle(ls, xi, phi, u, path, observe=False)
    w = ls.weights
    num = np.sum(weighted_norm(w, (lifted.x - oracle.x).T) ** 2)
    den = np.sum(weighted_norm(w, oracle.x.T) ** 2)
    return float(np.sqrt(num / den)) if den > 0 else float(np.sqrt(num))


def oracle_equivalence(ls, xi, phi, u, path, refined=None, tol=5e-3, ratio_min=1.5):
    """Lift against method of steps, optionally with a refinement run.

    ``refined`` is ``(ls, xi, phi, u, path)`` on the doubled mesh.  The
    refinement clause passes when the discrepancy shrinks by ``ratio_min`` or
    when both runs already agree to round-off.
    """
    d = oracle_discrepancy(ls, xi, phi, u, path)
    measured = {"discrepancy": d}
    threshold = {"discrepancy": tol}
    passed = d <= tol
    if refined is not None:
        d2 = oracle_discrepancy(*refined)
        ratio = d / d2 if d2 > 0 else np.inf
        at_floor = max(d, d2) <= ROUNDOFF_FLOOR
        measured.update({"discrepancy_refined": d2, "ratio": ratio, "roundoff": at_floor})
        threshold.update({"ratio": ratio_min, "roundoff_floor": ROUNDOFF_FLOOR})
        passed = passed and (ratio >= ratio_min or at_floor)
    return VerificationResult("oracle_equivalence", bool(passed), measured, threshold)


def _state_basis(ls, n_modes):
    bt = ls.bt
    nodes = bt.geometry.get("nodes")
    if nodes is None:
        return np.ones((bt.n, 1))
    if ls.name == "schrodinger":
        return np.stack([np.sin((j + 1) * np.pi * nodes) for j in range(n_modes)], axis=1)
    return np.stack([np.cos(j * np.pi * nodes) for j in range(n_modes)], axis=1)


def random_unit_triples(ls, alpha, n_samples, seed, n_modes=4):
    """Seeded smooth triples ``(xi, phi, U)`` with ``|xi| + |phi| + |U| = 1``.

    Coefficients are drawn on fixed smooth bases, so the same seed gives the
    same continuum triples on every mesh.  ``U(0)`` is matched to ``phi(0)``.
    Returns arrays ``xi (n, S)``, ``phi (m+1, 1, S)``, ``u (K+1, 1, S)``.
    """
    if ls.u_dim != 1:
        raise ValueError("random triples are defined for scalar inputs")
    k = int(round(alpha / ls.dt))
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n_modes, n_samples))
    bcoef = rng.standard_normal((n_modes, n_samples))
    ccoef = rng.standard_normal((n_modes, n_samples))
    basis = _state_basis(ls, n_modes)
    xi = basis @ a[:basis.shape[1]]
    theta = -ls.r + np.arange(ls.m + 1) * ls.dt
    tgrid = np.arange(k + 1) * ls.dt
    modes = np.arange(n_modes)[:, None]
    phi = np.cos(modes * np.pi * theta[None, :] / ls.r).T @ bcoef
    u = np.cos(modes * np.pi * tgrid[None, :] / alpha).T @ ccoef
    u = u - u[:1] + phi[-1:]
    trap_phi = np.full(ls.m + 1, ls.dt)
    trap_phi[[0, -1]] *= 0.5
    trap_u = np.full(k + 1, ls.dt)
    trap_u[[0, -1]] *= 0.5
    total = (
        weighted_norm(ls.weights, xi)
        + np.sqrt(trap_phi @ np.abs(phi) ** 2)
        + np.sqrt(trap_u @ np.abs(u) ** 2)
    )
    return xi / total, (phi / total)[:, None, :], (u / total)[:, None, :]


def _output_energy(ls, xi, phi, u, dws):
    """Per triple: mean over paths of ``sum_k |y_k|^2 dt`` and the gap-free path count."""
    k = u.shape[0] - 1
    x0 = np.repeat(xi[:, :, None], dws.shape[1], axis=2)
    h0 = phi[..., None]
    uu = u[..., None]
    energy = np.zeros(x0.shape[1:])
    good = np.ones(x0.shape[1:], dtype=bool)
    for j, x, _ in mild_steps(ls, x0, h0, uu, dws):
        if j == k:
            break
        vals, conv, _ = yosida_batch(ls.bt, x)
        energy += ls.dt * np.sum(np.abs(vals) ** 2, axis=0)
        good &= conv
    n_good = good.sum(axis=1)
    energy = np.where(good, energy, 0.0).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return energy / n_good, n_good


def _c_hat(ls, alpha, n_samples, seed, dws):
    xi, phi, u = random_unit_triples(ls, alpha, n_samples, seed)
    energy, n_good = _output_energy(ls, xi, phi, u, dws)
    if not np.any(n_good):
        raise DegenerateSample("every output sample was a Yosida gap")
    ratios = np.sqrt(energy[n_good > 0])
    return float(ratios.max()), int((dws.shape[1] * len(n_good)) - n_good.sum()), ratios


def wellposedness_estimate(ls, alpha, n_samples=200, seed=0, n_paths=64, refined=None, threshold=1.2):
    """Estimate ``c(alpha)`` in ``|C_Lambda X|_{L^2(0,alpha)} <= c(alpha) |(xi, phi, U)|``.

    ``refined`` is an optional system on the doubled mesh (``m`` doubled);
    both meshes use the same triples and the same Brownian motions.
    """
    systems = [ls] if refined is None else [ls, refined]
    k_fine = int(round(alpha / systems[-1].dt))
    paths = [brownian_path(k_fine, systems[-1].dt, seed, p) for p in range(n_paths)]
    rows = []
    gaps = []
    for i, sys_ in enumerate(systems):
        factor = 2 ** (len(systems) - 1 - i)
        dws = np.stack([p.coarsen(factor).increments if factor > 1 else p.increments for p in paths], axis=1)
        c, n_gap, _ = _c_hat(sys_, alpha, n_samples, seed, dws)
        rows.append((sys_.bt.geometry.get("N", sys_.n), alpha, c))
        gaps.append(n_gap)
    values = [v for *_, v in rows]
    if len(values) < 2:
        verdict, ratios = "inconclusive", []
    else:
        ratios = [b / a if a > 0 else np.inf for a, b in zip(values, values[1:])]
        verdict = "bounded" if all(max(q, 1 / q) <= threshold for q in ratios) else "unbounded"
    rep = EstimateReport("c_alpha", rows, alpha, verdict, threshold, ratios)
    rep.gap_counts = gaps
    return rep


def loglog_slope(t, v):
    return float(np.polyfit(np.log(t), np.log(v), 1)[0])


def heat_exponent_check(ls, t_list=None, n_sub=64):
    """Log-log slopes of ``|Phi_t|`` and ``|F|_{L^2[0,t]}`` as ``t -> 0``."""
    if t_list is None:
        t_list = [2.0 ** -k for k in range(1, 9)]
    t_list = list(t_list)
    if len(t_list) < 3:
        raise ValueError("need at least three times for a slope")
    phi_norms = [control_map_norm(ls.bt, t) for t in t_list]
    f_norms = [f_operator_norm(ls.bt, t, n_sub, ls.lam_ref) for t in t_list]
    sp = loglog_slope(t_list, phi_norms)
    sf = loglog_slope(t_list, f_norms)
    passed = 0 < sp < 1 and sf > 0
    return VerificationResult(
        "heat_exponents",
        bool(passed),
        {"phi_slope": sp, "f_slope": sf, "phi_norms": phi_norms, "f_norms": f_norms},
        {"phi_slope": (0.0, 1.0), "f_slope": 0.0},
    )


def regularity_suite(ls, v0=None, lam_list=None, t_list=None):
    """Cesàro-mean limit of the step response plus decay of ``C D_lam``.

    The Schrödinger analogue's mean decays only like ``t^(1/2)``, so its
    default times run down to ``2^-12`` instead of ``2^-10``.
    """
    bt = ls.bt
    if t_list is None:
        k_max = 12 if ls.name == "schrodinger" else 10
        t_list = [2.0 ** -k for k in range(1, k_max + 1)]
    v0 = np.ones(bt.u_dim) if v0 is None else np.atleast_1d(v0)
    lam_list = [10.0 * 2**k for k in range(11)] if lam_list is None else lam_list
    reg = regularity_limit(bt, ls.lam_ref, v0, t_list)
    dec = transfer_decay(bt, lam_list)
    measured = {
        "regularity_verdict": reg.verdict,
        "cesaro_ratio": reg.values[-1] / reg.values[0] if reg.values[0] else 0.0,
        "transfer_verdict": dec.verdict,
        "transfer_last": dec.values[-1],
    }
    if ls.name == "schrodinger":
        b_star = bt.B.conj().T @ bt.restricted.gram
        measured["collocated"] = True
        measured["collocation_defect"] = float(np.linalg.norm((bt.C - b_star) @ np.linalg.inv(bt.restricted.factor), 2))
    passed = reg.verdict == "regular" and dec.verdict == "decaying"
    res = VerificationResult("regularity", bool(passed), measured, {"cesaro_ratio": 0.05, "transfer": 0.1})
    res.reports = (reg, dec)
    return res
