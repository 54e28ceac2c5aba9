"""Product-space lift of an input-delay boundary system.

The lifted state is ``(x, h)`` with ``h`` the last ``r`` time units of the
input.  One grid step of the lifted semigroup is

    x <- T(dt) x + P0B L(h)        h <- S(dt) h

i.e. the boundary signal on ``(t_k, t_k + dt]`` is held at its left-point
value ``L(h_k)``.  With ``dt = r/m`` the history part is an index shift and
the pair advances in one pass without ever assembling ``R(t)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .boundary import control_map_phi, dirichlet_map, yosida_apply
from .delay import (
    DelayMeasure,
    HistorySegment,
    delay_weights,
    e_lambda,
    grid_steps,
    phi_shift,
)
from .errors import GridMismatch
from .noise import NoiseOp
from .semigroup import _check_resolvent_point, resolvent, weighted_norm

__all__ = [
    "LiftedState",
    "LiftedSystem",
    "lifted_semigroup_apply",
    "lifted_dirichlet",
    "lifted_control_map",
    "lifted_observe",
    "block_law_defect",
    "resolvent_block_defect",
    "coupling_residual",
]


@dataclass(frozen=True, eq=False)
class LiftedState:
    x: np.ndarray
    h: HistorySegment

    def norm(self, weights):
        return float(weighted_norm(weights, self.x)) + self.h.norm()


@dataclass(frozen=True, eq=False)
class LiftedSystem:
    bt: object
    nu: DelayMeasure
    noise: NoiseOp
    m: int
    lam_ref: float = 1.0
    name: str = ""

    def __post_init__(self):
        if self.nu.u_dim != self.bt.u_dim:
            raise GridMismatch("delay measure and trace disagree on the boundary dimension")
        if self.noise.matrix.shape != (self.bt.n, self.bt.n):
            raise GridMismatch("noise operator does not act on the state space")
        # raises GridMismatch when an atom cannot be represented on the grid
        self.nu.snap(self.m)

    @property
    def r(self):
        return self.nu.r

    @property
    def dt(self):
        return self.r / self.m

    @property
    def n(self):
        return self.bt.n

    @property
    def u_dim(self):
        return self.bt.u_dim

    @property
    def weights(self):
        return self.bt.weights

    @cached_property
    def kernel(self):
        """Node weights of ``L`` on the delay grid, shape (m+1, u, u)."""
        return delay_weights(self.nu, self.m)

    @cached_property
    def steps(self):
        """``(T(dt), P0B, T(dt) M)``: one-step drift, input and noise matrices."""
        t, p0, _ = self.bt.step_matrices(self.dt)
        return t, p0, t @ self.noise.matrix

    def L(self, hvals):
        """Delay functional on raw node values, shape (m+1, u, ...)."""
        return np.tensordot(self.kernel, hvals, axes=([0, 2], [0, 1]))

    def zero_state(self, dtype=float):
        return LiftedState(np.zeros(self.n, dtype=dtype), HistorySegment.zeros(self.r, self.m, self.u_dim, dtype))

    def history(self, values):
        return HistorySegment(self.r, self.m, values)

    def advance(self, x, hvals, steps=1):
        """Deterministic lifted steps on raw arrays (trailing batch axes allowed)."""
        t, p0, _ = self.steps
        for _ in range(steps):
            x = np.tensordot(t, x, 1) + np.tensordot(p0, self.L(hvals), 1)
            hvals = _shift_values(hvals, 1)
        return x, hvals


def _shift_values(hvals, k):
    out = np.zeros_like(hvals)
    m = hvals.shape[0] - 1
    if k == 0:
        return hvals.copy()
    if k < m:
        out[:m - k] = hvals[k:m]
    return out


def lifted_semigroup_apply(ls, t, z):
    """``(T(t)x + R(t)h, S(t)h)`` on the grid."""
    k = grid_steps(t, ls.r, ls.m)
    if k == 0:
        return z
    x, h = ls.advance(np.asarray(z.x), z.h.values, k)
    return LiftedState(x, ls.history(h))


def coupling_residual(ls, x_ext, h):
    """``|G z - L h|`` for an extended H-vector ``z`` and a history segment."""
    return float(np.abs(ls.bt.trace @ np.asarray(x_ext) - ls.L(h.values)).max())


def lifted_dirichlet(ls, lam, v, with_residuals=False):
    """``(D_lam L e_lam v, e_lam v)``."""
    _check_resolvent_point(ls.bt.restricted, lam)
    v = np.atleast_1d(np.asarray(v))
    e = e_lambda(lam, v, ls.r, ls.m)
    d = dirichlet_map(ls.bt, lam)
    ext = d(ls.L(e.values))
    z = LiftedState(ext[:ls.n], e)
    if with_residuals:
        return z, {"coupling": coupling_residual(ls, ext, e), "trace": float(np.abs(e.values[-1] - v).max())}
    return z


def _filtered_signal(ls, u):
    """``s -> L(U_s)`` at the grid times for zero initial history."""
    k = u.shape[0] - 1
    m = ls.m
    out = np.zeros((k + 1, ls.u_dim), dtype=np.result_type(ls.kernel, u))
    for j in range(k + 1):
        # U_{t_j} node i holds u[j - m + i] when that index is >= 0
        lo = max(0, m - j)
        out[j] = np.einsum("iab,ib->a", ls.kernel[lo:], u[j - m + lo:j + 1])
    return out


def lifted_control_map(ls, t, u):
    """``(Phi^{A,B}_t (F^L U), Phi^Q_t U)`` with zero initial history."""
    k = grid_steps(t, ls.r, ls.m)
    u = np.asarray(u)
    if u.ndim == 1:
        u = u[:, None]
    if u.shape[0] < k + 1:
        raise GridMismatch(f"need {k + 1} input samples, got {u.shape[0]}")
    u = u[:k + 1]
    h = phi_shift(t, u, ls.r, ls.m)
    if k == 0:
        return LiftedState(np.zeros(ls.n, dtype=np.result_type(ls.steps[0], u)), h)
    x = control_map_phi(ls.bt, ls.lam_ref, t, _filtered_signal(ls, u), ls.dt)
    return LiftedState(x, h)


def lifted_observe(ls, z):
    """Output of the lifted state; only the H-component is observed."""
    return yosida_apply(ls.bt, z.x)


def _random_state(ls, rng):
    x = rng.standard_normal(ls.n)
    h = rng.standard_normal((ls.m + 1, ls.u_dim))
    if np.iscomplexobj(ls.bt.restricted.matrix):
        x = x + 1j * rng.standard_normal(ls.n)
    return x, h


def block_law_defect(ls, t, s, n_random=8, seed=0):
    """Max relative defect of ``T(t)R(s)h + R(t)S(s)h = R(t+s)h`` over random ``h``."""
    kt = grid_steps(t, ls.r, ls.m)
    ks = grid_steps(s, ls.r, ls.m)
    rng = np.random.default_rng(seed)
    tt = ls.bt.restricted.propagator(t)
    worst = 0.0
    for _ in range(n_random):
        _, h = _random_state(ls, rng)
        x0 = np.zeros(ls.n)
        rs, _ = ls.advance(x0, h, ks)
        rt_s, _ = ls.advance(x0, _shift_values(h, ks), kt)
        rts, _ = ls.advance(x0, h, kt + ks)
        lhs = tt @ rs + rt_s
        scale = max(weighted_norm(ls.weights, rts), 1e-300)
        worst = max(worst, float(weighted_norm(ls.weights, lhs - rts)) / scale)
    return worst


def _laplace_x(ls, lam, x, hvals):
    """Exact Laplace transform of the x-component of the discrete lifted flow."""
    a = ls.bt.restricted.matrix
    b = ls.bt.B
    n, du = ls.n, ls.u_dim
    dt = ls.dt
    aug = np.zeros((2 * n + du, 2 * n + du), dtype=np.result_type(a, b, complex))
    aug[:n, :n] = a - lam * np.eye(n)
    aug[:n, n:n + du] = b
    aug[n:n + du, n:n + du] = -lam * np.eye(du)
    aug[n + du:, :n] = np.eye(n)
    e = sla.expm(dt * aug)
    t_step, p0, _ = ls.steps
    total = np.zeros(n, dtype=complex)
    for j in range(ls.m):
        bj = ls.L(hvals)
        seg = e[n + du:, :n] @ x + e[n + du:, n:n + du] @ bj
        total += np.exp(-lam * j * dt) * seg
        x = t_step @ x + p0 @ bj
        hvals = _shift_values(hvals, 1)
    tail = np.exp(-lam * ls.r) * np.linalg.solve(lam * np.eye(n) - a, x)
    return total + tail


def _laplace_shift(ls, lam, hvals):
    """``R(lam, Q) h`` for the piecewise-constant discrete shift."""
    dt = ls.dt
    w = (1 - np.exp(-lam * dt)) / lam
    acc = np.zeros_like(hvals, dtype=complex)
    for j in range(ls.m):
        acc += np.exp(-lam * j * dt) * w * _shift_values(hvals, j)
    return acc


def resolvent_block_defect(ls, lam=None, n_vectors=32, seed=0):
    """Max relative defect of the block resolvent formula on random lifted vectors.

    One side Laplace-transforms the discrete lifted flow exactly, the other
    evaluates ``R(lam, A) x + D_lam L R(lam, Q) h``.
    """
    lam = ls.lam_ref if lam is None else lam
    rng = np.random.default_rng(seed)
    res = resolvent(ls.bt.restricted, lam).entries
    d = dirichlet_map(ls.bt, lam).h_part
    worst = 0.0
    for _ in range(n_vectors):
        x, h = _random_state(ls, rng)
        lhs = _laplace_x(ls, lam, x.astype(complex), h)
        rhs = res @ x + d @ ls.L(_laplace_shift(ls, lam, h))
        scale = max(weighted_norm(ls.weights, rhs), 1e-300)
        worst = max(worst, float(weighted_norm(ls.weights, lhs - rhs)) / scale)
    return worst
