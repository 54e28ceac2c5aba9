"""Boundary triples, Dirichlet maps, input/output maps and admissibility probes.

A discrete boundary system keeps the state on the *free* nodes (the space H)
and carries ``u_dim`` extra boundary unknowns.  The extended vector
``z = (x, b)`` is what the maximal operator ``A_m``, the trace ``G`` and the
observation ``Cm`` act on:

    A_m z = A_xx x + A_xb b        (values on the free nodes)
    G z   = G_x x + G_b b          (boundary data, G_b invertible)

Restricting to ``ker G`` eliminates ``b`` and gives the generator
``A = A_xx - A_xb G_b^{-1} G_x``; the control operator is ``B = A_xb G_b^{-1}``,
which is the discrete form of ``(lam - A_{-1}) D_lam`` for every ``lam``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DelayLiftError, GridMismatch, SingularBoundarySystem, SpectrumHit
from .semigroup import (
    Generator,
    OperatorMatrix,
    _check_resolvent_point,
    controllability_gramian,
    input_blocks,
    observability_gramian,
)

__all__ = [
    "BoundaryTriple",
    "DirichletMap",
    "EstimateReport",
    "Divergent",
    "FOperatorGaps",
    "dirichlet_map",
    "control_map_phi",
    "control_map_phi_ibp",
    "observation_map_psi",
    "yosida_apply",
    "yosida_batch",
    "f_operator",
    "f_operator_norm",
    "control_map_norm",
    "probe_observation_admissibility",
    "probe_control_admissibility",
    "transfer_decay",
    "regularity_limit",
    "DEFAULT_LAMBDA",
]

DEFAULT_LAMBDA = 1.0
YOSIDA_LAMBDAS = 10.0 * 2.0 ** np.arange(48)


@dataclass(frozen=True, eq=False)
class BoundaryTriple:
    full_op: np.ndarray
    trace: np.ndarray
    obs: np.ndarray
    weights: np.ndarray
    geometry: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.full_op))
        g = np.atleast_2d(np.asarray(self.trace))
        c = np.atleast_2d(np.asarray(self.obs))
        n, ext = a.shape
        du = ext - n
        if du < 1:
            raise ValueError("full_op must have more columns than rows (boundary unknowns)")
        if g.shape != (du, ext) or c.shape[1] != ext:
            raise ValueError("trace/obs shapes inconsistent with full_op")
        if np.linalg.matrix_rank(g) < du:
            raise SingularBoundarySystem("trace is not surjective")
        gb = g[:, n:]
        if np.linalg.matrix_rank(gb) < du:
            raise SingularBoundarySystem("trace does not determine the boundary unknowns")
        for name, val in (("full_op", a), ("trace", g), ("obs", c)):
            val = val.copy()
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n(self):
        return self.full_op.shape[0]

    @property
    def u_dim(self):
        return self.full_op.shape[1] - self.n

    @property
    def y_dim(self):
        return self.obs.shape[0]

    @cached_property
    def _gb_inv(self):
        return np.linalg.inv(self.trace[:, self.n:])

    @cached_property
    def restricted(self):
        n = self.n
        a = self.full_op[:, :n] - self.full_op[:, n:] @ self._gb_inv @ self.trace[:, :n]
        return Generator(a, self.weights, self.label)

    @cached_property
    def B(self):
        return self.full_op[:, self.n:] @ self._gb_inv

    @cached_property
    def C(self):
        """The observation restricted to ker G, as a map on H."""
        n = self.n
        return self.obs[:, :n] - self.obs[:, n:] @ self._gb_inv @ self.trace[:, :n]

    def extend(self, x, v=None):
        """The extended vector ``(x, b)`` with ``G(x, b) = v`` (default 0)."""
        x = np.asarray(x)
        rhs = -self.trace[:, :self.n] @ x
        if v is not None:
            rhs = rhs + np.asarray(v)
        return np.concatenate([x, self._gb_inv @ rhs])

    def construction_residual(self):
        """``|A_m (x, b(x)) - A x|`` over a basis of H (should be round-off)."""
        n = self.n
        basis = np.eye(n)
        ext = np.vstack([basis, -self._gb_inv @ self.trace[:, :n]])
        return float(np.abs(self.full_op @ ext - self.restricted.matrix).max())

    @cached_property
    def _steps(self):
        return {}

    def step_matrices(self, dt):
        """``(T(dt), P0 B, P1 B)`` for exact-in-time input integration."""
        dt = float(dt)
        if dt not in self._steps:
            t, p0, p1 = input_blocks(self.restricted.matrix, self.B, dt)
            if not np.iscomplexobj(self.restricted.matrix) and not np.iscomplexobj(self.B):
                t, p0, p1 = t.real, p0.real, p1.real
            self._steps[dt] = (t, p0, p1)
        return self._steps[dt]

    @cached_property
    def _yosida_data(self):
        g = self.restricted
        mu, v, normal = g.spectral
        r = g.factor
        left = self.C @ np.linalg.solve(r, v)
        right = v.conj().T @ r if normal else np.linalg.solve(v, r)
        return mu, left, right


@dataclass(frozen=True, eq=False)
class DirichletMap:
    lam: complex
    map: OperatorMatrix
    n: int

    @property
    def h_part(self):
        """Component in H (free nodes)."""
        return self.map.entries[:self.n]

    def __call__(self, v):
        return self.map.entries @ np.atleast_1d(v)

    def residuals(self, bt):
        e = self.map.entries
        r1 = np.abs(self.lam * e[:self.n] - bt.full_op @ e).max()
        r2 = np.abs(bt.trace @ e - np.eye(bt.u_dim)).max()
        return float(r1), float(r2)


def dirichlet_map(bt, lam=DEFAULT_LAMBDA):
    """Solve ``(lam - A_m) z = 0, G z = v`` for each boundary basis vector ``v``."""
    _check_resolvent_point(bt.restricted, lam)
    n, du = bt.n, bt.u_dim
    top = np.hstack([lam * np.eye(n), np.zeros((n, du))]) - bt.full_op
    system = np.vstack([top, bt.trace])
    rhs = np.vstack([np.zeros((n, du)), np.eye(du)])
    if np.linalg.matrix_rank(system) < n + du:
        raise SingularBoundarySystem(f"boundary system singular at lambda={lam}")
    sol = np.linalg.solve(system, rhs)
    return DirichletMap(lam, OperatorMatrix(sol), n)


def _grid_count(t, dt):
    k = int(round(t / dt))
    if k < 0 or abs(k * dt - t) > 1e-9 * max(1.0, t):
        raise GridMismatch(f"t={t} is not on the grid of step {dt}")
    return k


def _as_signal(u, k, du):
    u = np.asarray(u)
    if u.ndim == 1:
        u = u[:, None]
    if u.shape[0] != k + 1 or u.shape[1] != du:
        raise GridMismatch(f"signal must have shape ({k + 1}, {du}, ...), got {u.shape}")
    return u


def _phi_trajectory(bt, u, dt, hold):
    """States ``Phi_{t_k} u`` for k = 0..K (columns batched in trailing axes)."""
    t, p0, p1 = bt.step_matrices(dt)
    k = u.shape[0] - 1
    batch = u.shape[2:]
    dtype = np.result_type(t, p0, u)
    x = np.zeros((bt.n,) + batch, dtype=dtype)
    out = np.empty((k + 1, bt.n) + batch, dtype=dtype)
    out[0] = x
    for j in range(k):
        x = np.tensordot(t, x, 1) + np.tensordot(p0, u[j], 1)
        if hold == "foh":
            x = x + np.tensordot(p1, u[j + 1] - u[j], 1)
        out[j + 1] = x
    return out


def control_map_phi(bt, lam, t, u, dt, hold="zoh"):
    """``Phi_t u = int_0^t T(t-s) B u(s) ds`` by exponential integration.

    ``u`` holds samples at ``0, dt, ..., t``.  ``hold="zoh"`` keeps each
    sample on the following step (the exponential Euler rule used by the
    simulators); ``"foh"`` interpolates linearly.  ``lam`` only selects the
    Dirichlet map behind ``B``; the discrete ``B`` is the same for all lam.
    """
    if hold not in ("zoh", "foh"):
        raise ValueError("hold must be 'zoh' or 'foh'")
    _check_resolvent_point(bt.restricted, lam)
    k = _grid_count(t, dt)
    u = _as_signal(u, k, bt.u_dim)
    return _phi_trajectory(bt, u, dt, hold)[-1]


def control_map_phi_ibp(bt, lam, t, u, dt, udot=None):
    """Integration-by-parts form of ``Phi_t u``.

    ``Phi_t u = D u(t) - T(t) D u(0) + int_0^t T(t-s) D (lam u - u')(s) ds``
    with ``D`` the H-part of the Dirichlet map at ``lam``; the integral uses a
    first-order hold and ``u'`` defaults to second-order finite differences.
    """
    k = _grid_count(t, dt)
    u = _as_signal(u, k, bt.u_dim)
    if udot is None:
        udot = np.gradient(u, dt, axis=0, edge_order=2) if k >= 2 else np.zeros_like(u)
    else:
        udot = _as_signal(udot, k, bt.u_dim)
    d = dirichlet_map(bt, lam).h_part
    a = bt.restricted.matrix
    tt, p0, p1 = input_blocks(a, d, dt)
    w = lam * u - udot
    acc = np.zeros(bt.n, dtype=np.result_type(tt, w))
    for j in range(k):
        acc = tt @ acc + p0 @ w[j] + p1 @ (w[j + 1] - w[j])
    return d @ u[-1] - bt.restricted.propagator(t) @ (d @ u[0]) + acc


def observation_map_psi(bt, x0, alpha, dt):
    """Samples of ``C T(t) x0`` at ``t = 0, dt, ..., alpha``."""
    k = _grid_count(alpha, dt)
    t = bt.restricted.propagator(dt)
    x = np.asarray(x0)
    out = []
    for _ in range(k + 1):
        out.append(bt.C @ x)
        x = t @ x
    return np.array(out)


@dataclass(frozen=True)
class Divergent:
    """Marker returned when the Yosida sequence did not settle on the schedule."""

    last_value: np.ndarray
    lam: float
    last_diff: float

    def __bool__(self):
        return False


def yosida_batch(bt, z, lambdas=None, tol=1e-6):
    """Yosida approximants ``C lam R(lam, A) z`` for columns of ``z``.

    Returns ``(values, converged, lam_used)``.  A column converges at the
    first lam where two successive approximants differ by at most
    ``tol * max(|value|, 1e-8 |C| |z|)``; the floor only matters for outputs
    that are round-off relative to the state.
    """
    lambdas = YOSIDA_LAMBDAS if lambdas is None else np.asarray(lambdas, dtype=float)
    if np.any(np.diff(lambdas) <= 0):
        raise ValueError("lambda schedule must be increasing")
    z = np.asarray(z)
    single = z.ndim == 1
    z2 = z[:, None] if single else z.reshape(z.shape[0], -1)
    mu, left, right = bt._yosida_data
    if np.any(np.abs(lambdas[:, None] - mu[None, :]) < 1e-12 * np.maximum(1, np.abs(mu))):
        raise SpectrumHit("Yosida schedule hits the spectrum")
    coords = right @ z2
    facs = lambdas[:, None] / (lambdas[:, None] - mu[None, :])
    # ys[k] = left @ diag(facs[k]) @ coords
    ys = (left[None, :, :] * facs[:, None, :]) @ coords
    if not (np.iscomplexobj(bt.C) or np.iscomplexobj(bt.restricted.matrix) or np.iscomplexobj(z)):
        ys = ys.real
    floor = 1e-8 * np.linalg.norm(bt.C, 2) * np.linalg.norm(z2, axis=0)
    mag = np.linalg.norm(ys, axis=1)
    diffs = np.linalg.norm(np.diff(ys, axis=0), axis=1)
    ok = diffs <= tol * np.maximum(mag[1:], floor[None, :])
    converged = ok.any(axis=0)
    first = np.where(converged, ok.argmax(axis=0) + 1, len(lambdas) - 1)
    cols = np.arange(z2.shape[1])
    # y(lam) = Cz + O(1/lam); one Richardson step on the doubling schedule removes the leading term
    ratio = (lambdas[first] / lambdas[first - 1])[:, None]
    values = ((ratio * ys[first, :, cols] - ys[first - 1, :, cols]) / (ratio - 1)).T
    lam_used = lambdas[first]
    if single:
        if not converged[0]:
            return Divergent(values[:, 0], float(lambdas[-1]), float(diffs[-1, 0])), False, lam_used[0]
        return values[:, 0], True, lam_used[0]
    shape = z.shape[1:]
    return (values.reshape((bt.y_dim,) + shape), converged.reshape(shape), lam_used.reshape(shape))


def yosida_apply(bt, z, lambdas=None, tol=1e-6):
    """``lim C lam R(lam, A) z`` along a geometric schedule, or a Divergent marker."""
    value, _, _ = yosida_batch(bt, np.asarray(z).reshape(-1), lambdas, tol)
    return value


class FOperatorGaps(DelayLiftError):
    """More than 1% of the output samples failed to converge."""


def f_operator(bt, lam, u, alpha, dt, hold="zoh", tol=1e-6, max_gap_fraction=0.01):
    """Input-output map ``t -> C_Lambda Phi_t u`` sampled at ``0, dt, ..., alpha``.

    ``u`` may carry trailing batch axes.  Returns ``(values, gaps)`` where
    ``values`` has shape ``(K+1, y_dim, ...)`` and ``gaps`` flags samples
    whose Yosida sequence did not converge (their values are the last
    approximant).
    """
    _check_resolvent_point(bt.restricted, lam)
    k = _grid_count(alpha, dt)
    u = np.asarray(u)
    if u.ndim == 1:
        u = u[:, None]
    if u.shape[0] != k + 1 or u.shape[1] != bt.u_dim:
        raise GridMismatch(f"signal must have shape ({k + 1}, {bt.u_dim}, ...)")
    states = _phi_trajectory(bt, u, dt, hold)
    batch = u.shape[2:]
    flat = np.moveaxis(states, 1, 0).reshape(bt.n, -1)
    vals, conv, _ = yosida_batch(bt, flat, tol=tol)
    vals = np.moveaxis(vals.reshape((bt.y_dim, k + 1) + batch), 0, 1)
    gaps = ~conv.reshape((k + 1,) + batch)
    if gaps.mean() > max_gap_fraction:
        raise FOperatorGaps(f"{gaps.sum()} of {gaps.size} samples did not converge")
    return vals, gaps


def f_operator_norm(bt, t, n_sub=64, lam=DEFAULT_LAMBDA):
    """``||F||`` on L^2[0, t] over the ZOH pulse basis with ``n_sub`` steps."""
    dt = t / n_sub
    du = bt.u_dim
    u = np.zeros((n_sub + 1, du, n_sub * du))
    for j in range(n_sub):
        u[j, :, j * du:(j + 1) * du] = np.eye(du)
    vals, _ = f_operator(bt, lam, u, t, dt)
    # rows: samples 1..K (output on (t_{k-1}, t_k]); the dt factors cancel
    fm = vals[1:].reshape(n_sub * bt.y_dim, n_sub * du)
    return float(np.linalg.norm(fm, 2))


def control_map_norm(bt, t):
    """``||Phi_t||`` from L^2([0,t], U) to H, via the controllability Gramian."""
    w = controllability_gramian(bt.restricted, bt.B, t)
    return float(np.sqrt(max(np.linalg.eigvalsh((w + w.conj().T) / 2)[-1], 0.0)))


@dataclass
class EstimateReport:
    quantity_name: str
    per_mesh: list
    horizon: float | None = None
    verdict: str = "inconclusive"
    threshold: float | None = None
    ratios: list = field(default_factory=list)

    def __post_init__(self):
        if not self.per_mesh:
            raise ValueError("per_mesh must be nonempty")
        for _, _, value in self.per_mesh:
            if value < 0:
                raise ValueError("estimate constants must be nonnegative")

    @property
    def values(self):
        return [v for _, _, v in self.per_mesh]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["quantity", "mesh", "param", "value", "verdict"])
        for mesh, param, value in self.per_mesh:
            w.writerow([self.quantity_name, mesh, "" if param is None else repr(param), repr(float(value)), self.verdict])
        return buf.getvalue()


def _mesh_of(bt):
    return bt.geometry.get("N", bt.n)


def _probe_vectors(g, n_eig, n_random, seed):
    mu, v, _ = g.spectral
    order = np.argsort(np.abs(mu), kind="stable")
    probes = [v[:, i] for i in order[:n_eig]]
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        p = rng.standard_normal(g.dim)
        if np.iscomplexobj(g.matrix):
            p = p + 1j * rng.standard_normal(g.dim)
        probes.append(p / np.linalg.norm(p))
    return probes


def _gramian_probe(gram, g, n_eig, n_random, seed):
    gram = (gram + gram.conj().T) / 2
    probes = _probe_vectors(g, n_eig, n_random, seed)
    evals, evecs = np.linalg.eigh(gram)
    probes.append(evecs[:, -1])
    best = 0.0
    for p in probes:
        q = np.real(p.conj() @ gram @ p) / np.real(p.conj() @ p)
        best = max(best, q)
    return float(np.sqrt(max(best, 0.0)))


def _refinement_verdict(values, threshold):
    ratios = [b / a if a > 0 else (np.inf if b > 0 else 1.0) for a, b in zip(values, values[1:])]
    if not ratios:
        return "inconclusive", ratios
    return ("bounded" if all(r <= threshold for r in ratios) else "unbounded"), ratios


def probe_observation_admissibility(bt_family, alpha, n_eig=8, n_random=8, seed=0, threshold=1.2):
    """Per mesh, ``gamma = max_probe ||C T(.) x||_{L^2[0,alpha]} / ||x||``.

    The probe set is the first ``n_eig`` eigenvectors, ``n_random`` seeded
    random unit vectors and the dominant direction of the observability
    Gramian, so the maximum equals the discrete operator norm.
    """
    fam = sorted(bt_family, key=_mesh_of)
    rows = []
    for bt in fam:
        gram = observability_gramian(bt.restricted, bt.C, alpha)
        rows.append((_mesh_of(bt), alpha, _gramian_probe(gram, bt.restricted, n_eig, n_random, seed)))
    verdict, ratios = _refinement_verdict([v for *_, v in rows], threshold)
    return EstimateReport("gamma_observation", rows, alpha, verdict, threshold, ratios)


def probe_control_admissibility(bt_family, tau, n_eig=8, n_random=8, seed=0, threshold=1.2):
    """Per mesh, ``||Phi_tau||`` probed through its adjoint ``x -> B^* T(tau - .)^* x``."""
    fam = sorted(bt_family, key=_mesh_of)
    rows = []
    for bt in fam:
        gram = controllability_gramian(bt.restricted, bt.B, tau)
        rows.append((_mesh_of(bt), tau, _gramian_probe(gram, bt.restricted, n_eig, n_random, seed)))
    verdict, ratios = _refinement_verdict([v for *_, v in rows], threshold)
    return EstimateReport("norm_control_map", rows, tau, verdict, threshold, ratios)


def transfer_decay(bt, lam_list):
    """``||C D_lam||`` along increasing lam; "decaying" if it goes to zero convincingly."""
    lam_list = list(lam_list)
    if any(b <= a for a, b in zip(lam_list, lam_list[1:])):
        raise ValueError("lam_list must be increasing")
    rows = []
    for lam in lam_list:
        d = dirichlet_map(bt, lam).h_part
        rows.append((_mesh_of(bt), float(lam), float(np.linalg.norm(bt.C @ d, 2))))
    vals = [v for *_, v in rows]
    if len(vals) < 2:
        verdict = "inconclusive"
    else:
        tail = vals[-5:]
        dec = all(b < a for a, b in zip(tail, tail[1:]))
        verdict = "decaying" if dec and vals[-1] < 0.1 * vals[0] else "not_decaying"
    return EstimateReport("transfer_C_D_lambda", rows, None, verdict, 0.1)


def regularity_limit(bt, lam, v0, t_list=None, n_sub=64):
    """``|(1/t) int_0^t (F 1 v0)(s) ds|`` as ``t -> 0``; "regular" if it collapses."""
    if t_list is None:
        t_list = [2.0 ** -k for k in range(1, 11)]
    v0 = np.atleast_1d(np.asarray(v0))
    rows = []
    for t in t_list:
        dt = t / n_sub
        u = np.tile(v0, (n_sub + 1, 1))
        vals, _ = f_operator(bt, lam, u, t, dt)
        avg = np.trapezoid(vals, dx=dt, axis=0) / t
        rows.append((_mesh_of(bt), float(t), float(np.linalg.norm(avg))))
    vals = [v for *_, v in rows]
    ref = next((v for (_, t, v) in rows if np.isclose(t, 0.5)), vals[0])
    if ref == 0:
        verdict = "regular" if all(v == 0 for v in vals) else "not_regular"
    else:
        verdict = "regular" if vals[-1] < 0.05 * ref else "not_regular"
    return EstimateReport("regularity_cesaro_mean", rows, None, verdict, 0.05)
