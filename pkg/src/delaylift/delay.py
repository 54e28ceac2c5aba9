"""Delay line: the left shift on histories over [-r, 0] and the delay functional.

Histories are stored as node values at theta_j = -r + j r/m, j = 0..m.  With
the time step locked to r/m the shift is an index move, so everything here is
exact on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BadSpec, GridMismatch, NegativeTime, OffGridTime

__all__ = [
    "HistorySegment",
    "DelayMeasure",
    "grid_steps",
    "shift_apply",
    "delay_functional",
    "delay_weights",
    "phi_shift",
    "e_lambda",
    "history_cocycle_check",
    "shift_observation_gamma",
]

GRID_RTOL = 1e-9


def grid_steps(t, r, m):
    """Number of delay-line steps in ``t``; raises OffGridTime if ``t`` is off grid."""
    if t < 0:
        raise NegativeTime(f"t={t} < 0")
    dt = r / m
    k = int(round(t / dt))
    if abs(k * dt - t) > GRID_RTOL * max(1.0, abs(t)):
        raise OffGridTime(f"t={t} is not a multiple of r/m={dt}")
    return k


@dataclass(frozen=True, eq=False)
class HistorySegment:
    r: float
    m: int
    values: np.ndarray

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("horizon r must be positive")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("m must be a positive integer")
        v = np.asarray(self.values)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.m + 1:
            raise GridMismatch(f"expected {self.m + 1} samples, got {v.shape[0]}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "m", int(self.m))

    @classmethod
    def zeros(cls, r, m, u_dim=1, dtype=float):
        return cls(r, m, np.zeros((m + 1, u_dim), dtype=dtype))

    @classmethod
    def from_function(cls, f, r, m):
        theta = -r + np.arange(m + 1) * (r / m)
        return cls(r, m, np.array([np.atleast_1d(f(th)) for th in theta]))

    @property
    def u_dim(self):
        return self.values.shape[1]

    @property
    def dt(self):
        return self.r / self.m

    @property
    def theta(self):
        return -self.r + np.arange(self.m + 1) * self.dt

    def norm(self):
        """L^2([-r,0]) norm by the trapezoid rule."""
        w = np.full(self.m + 1, self.dt)
        w[[0, -1]] *= 0.5
        return float(np.sqrt(np.sum(w[:, None] * np.abs(self.values) ** 2)))

    def __add__(self, other):
        _check_compatible(self, other)
        return HistorySegment(self.r, self.m, self.values + other.values)

    def __sub__(self, other):
        _check_compatible(self, other)
        return HistorySegment(self.r, self.m, self.values - other.values)

    def __mul__(self, a):
        return HistorySegment(self.r, self.m, a * self.values)

    __rmul__ = __mul__


def _check_compatible(a, b):
    if a.m != b.m or not np.isclose(a.r, b.r) or a.u_dim != b.u_dim:
        raise GridMismatch("history segments live on different grids")


@dataclass(frozen=True, eq=False)
class DelayMeasure:
    """Stieltjes measure on [-r, 0]: weighted atoms plus an optional density.

    ``density`` maps theta to a ``u_dim x u_dim`` matrix (or scalar).  An atom
    at theta = 0 is only allowed for the explicit no-delay measure, which keeps
    ``|nu|([-a, 0]) -> 0`` as ``a -> 0``.
    """

    r: float
    atoms: tuple = ()
    density: Callable | None = None
    no_delay: bool = False
    u_dim: int = 1
    label: str = ""

    def __post_init__(self):
        if not self.r > 0:
            raise BadSpec("delay horizon r must be positive")
        atoms = []
        for theta, weight in self.atoms:
            theta = float(theta)
            w = np.atleast_2d(np.asarray(weight, dtype=complex if np.iscomplexobj(weight) else float))
            if w.shape != (self.u_dim, self.u_dim):
                raise BadSpec(f"atom weight must be {self.u_dim}x{self.u_dim}")
            if theta < -self.r - GRID_RTOL * self.r or theta > 0:
                raise BadSpec(f"atom at theta={theta} outside [-r, 0]")
            if theta == 0 and not self.no_delay:
                raise BadSpec("atom at theta=0 requires the no-delay flag")
            atoms.append((max(theta, -self.r), w))
        object.__setattr__(self, "atoms", tuple(atoms))

    @classmethod
    def dirac(cls, theta, r, weight=1.0, u_dim=1):
        w = np.eye(u_dim) * weight if np.ndim(weight) == 0 else weight
        return cls(r, ((theta, w),), u_dim=u_dim, no_delay=(theta == 0), label=f"dirac({theta})")

    @classmethod
    def zero_delay(cls, r, u_dim=1):
        return cls.dirac(0.0, r, u_dim=u_dim)

    @classmethod
    def uniform(cls, r, value=1.0, u_dim=1):
        return cls(r, density=lambda th: value * np.eye(u_dim), u_dim=u_dim, label="const")

    def _density_at(self, theta):
        d = self.density(theta)
        return np.eye(self.u_dim) * d if np.ndim(d) == 0 else np.atleast_2d(d)

    def total_variation(self, n_quad=4097):
        tv = sum(np.linalg.norm(w, 2) for _, w in self.atoms)
        if self.density is not None:
            th = np.linspace(-self.r, 0.0, n_quad)
            vals = np.array([np.linalg.norm(self._density_at(t), 2) for t in th])
            tv += np.trapezoid(vals, th)
        return float(tv)

    def snap(self, m):
        """Grid indices of the atoms and the distance each one was moved.

        Atoms go to the nearest node.  A delayed atom that would land on
        theta = 0 is refused, since that turns a delay into feedthrough.
        """
        dt = self.r / m
        out = []
        for theta, w in self.atoms:
            j = int(round((theta + self.r) / dt))
            dist = abs(-self.r + j * dt - theta)
            if dist > 0.5 * dt * (1 + 1e-9):
                raise GridMismatch(f"atom at {theta} is {dist} from the grid (> dt/2)")
            if j == m and theta < 0 and not self.no_delay:
                # snapping onto theta = 0 would silently remove the delay
                raise GridMismatch(f"atom at {theta} snaps to theta=0 on a grid with dt={dt}")
            out.append((j, dist, w))
        return out


def delay_weights(nu, m):
    """Node weights ``K`` with ``L g = sum_j K[j] @ g[j]``; shape (m+1, u, u)."""
    du = nu.u_dim
    dt = nu.r / m
    kw = np.zeros((m + 1, du, du), dtype=complex if any(np.iscomplexobj(w) for _, w in nu.atoms) else float)
    for j, _, w in nu.snap(m):
        kw[j] += w
    if nu.density is not None:
        theta = -nu.r + np.arange(m + 1) * dt
        trap = np.full(m + 1, dt)
        trap[[0, -1]] *= 0.5
        for j, th in enumerate(theta):
            kw[j] = kw[j] + trap[j] * nu._density_at(th)
    return kw


def delay_functional(nu, g):
    """``L g``: atoms evaluated at snapped nodes plus trapezoid quadrature of the density."""
    if not np.isclose(nu.r, g.r) or nu.u_dim != g.u_dim:
        raise GridMismatch("measure and history segment disagree on r or u_dim")
    kw = delay_weights(nu, g.m)
    return np.einsum("jab,jb->a", kw, g.values)


def shift_apply(g, t):
    """Left shift: ``(S(t)g)(theta) = g(t+theta)`` for theta < -t, zero on [-t, 0]."""
    k = grid_steps(t, g.r, g.m)
    if k == 0:
        return g
    out = np.zeros_like(g.values)
    if k < g.m:
        out[:g.m - k] = g.values[k:g.m]
    return HistorySegment(g.r, g.m, out)


def _signal(u, u_dim=None):
    u = np.asarray(u)
    if u.ndim == 1:
        u = u[:, None]
    return u


def phi_shift(t, u, r, m):
    """Input map of the delay line: ``u(t+theta)`` on [-min(t,r), 0], zero before.

    ``u`` holds samples at ``0, dt, ..., t`` (at least ``t/dt + 1`` of them).
    At ``t = 0`` the map is zero.
    """
    k = grid_steps(t, r, m)
    u = _signal(u)
    if u.shape[0] < k + 1:
        raise GridMismatch(f"need {k + 1} input samples, got {u.shape[0]}")
    out = np.zeros((m + 1, u.shape[1]), dtype=u.dtype)
    if k == 0:
        return HistorySegment(r, m, out)
    j0 = max(m - k, 0)
    out[j0:] = u[k - m + j0:k + 1]
    return HistorySegment(r, m, out)


def e_lambda(lam, v, r, m):
    theta = -r + np.arange(m + 1) * (r / m)
    v = np.atleast_1d(np.asarray(v))
    return HistorySegment(r, m, np.exp(lam * theta)[:, None] * v[None, :])


def history_cocycle_check(u, t, s, r, m, atol=0.0):
    """Build ``U_{t+s}`` directly and by shifting ``U_t`` then feeding ``u`` on (t, t+s]."""
    kt = grid_steps(t, r, m)
    grid_steps(s, r, m)
    u = _signal(u)
    direct = phi_shift(t + s, u, r, m)
    propagated = shift_apply(phi_shift(t, u, r, m), s) + phi_shift(s, u[kt:], r, m)
    return bool(np.max(np.abs(direct.values - propagated.values), initial=0.0) <= atol)


def shift_observation_gamma(nu, m, alpha, n_random=8, seed=0):
    """Admissibility constant of ``L`` for the shift on the grid.

    Exact discrete operator norm of ``g -> (L S(t_k) g)_k`` from trapezoid
    L^2([-r,0]) into left-rectangle L^2([0,alpha]).
    """
    r = nu.r
    dt = r / m
    n_t = grid_steps(alpha, r, m)
    kw = delay_weights(nu, m)
    du = nu.u_dim
    rows = []
    for k in range(n_t):
        # L S(t_k) g = sum_{j < m-k} K[j] g[j+k]
        row = np.zeros((du, m + 1, du), dtype=kw.dtype)
        if k == 0:
            row[:] = np.transpose(kw, (1, 0, 2))
        elif k < m:
            row[:, k:m, :] = np.transpose(kw[:m - k], (1, 0, 2))
        rows.append(row.reshape(du, -1))
    obs = np.vstack(rows) * np.sqrt(dt)
    trap = np.full(m + 1, dt)
    trap[[0, -1]] *= 0.5
    scale = np.repeat(1 / np.sqrt(trap), du)
    return float(np.linalg.norm(obs * scale[None, :], 2))
