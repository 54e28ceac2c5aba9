"""Finite-dimensional generators, resolvents and semigroups.

Every state space carries an explicit inner product, given either by
per-node quadrature weights (``||x||^2 = sum w_i |x_i|^2``) or by a full
Hermitian positive definite Gram matrix (used for energy-type norms such as
a discrete H^{-1}).  Norms, operator norms and Gramians are always taken in
those inner products so that constants can be compared across meshes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .errors import NegativeTime, SpectrumHit

__all__ = [
    "Generator",
    "OperatorMatrix",
    "resolvent",
    "semigroup_apply",
    "growth_bound",
    "dual_norm",
    "gram_matrix",
    "gram_factor",
    "weighted_norm",
    "input_blocks",
    "observability_gramian",
    "controllability_gramian",
]

SPECTRUM_RTOL = 1e-12


def _as_weights(weights, dim):
    w = np.asarray(weights)
    if w.ndim == 1:
        w = w.astype(float)
        if w.shape != (dim,):
            raise ValueError(f"expected {dim} weights, got {w.shape}")
        if not np.all(w > 0):
            raise ValueError("weights must be strictly positive")
    elif w.ndim == 2:
        if w.shape != (dim, dim):
            raise ValueError(f"Gram matrix must be {dim}x{dim}, got {w.shape}")
        if not np.allclose(w, w.conj().T, rtol=1e-12, atol=1e-14 * np.abs(w).max()):
            raise ValueError("Gram matrix must be Hermitian")
        # raises LinAlgError unless positive definite
        np.linalg.cholesky(w)
    else:
        raise ValueError("weights must be a vector or a square matrix")
    return w


def gram_matrix(weights):
    w = np.asarray(weights)
    return np.diag(w) if w.ndim == 1 else w


def gram_factor(weights):
    """Upper-triangular R with Gram = R^H R."""
    w = np.asarray(weights)
    if w.ndim == 1:
        return np.diag(np.sqrt(w))
    return np.linalg.cholesky(w).conj().T


def weighted_norm(weights, x):
    """Norm of ``x`` (vector, or columns of a matrix) in the given inner product."""
    x = np.asarray(x)
    w = np.asarray(weights)
    if w.ndim == 1:
        wx = w if x.ndim == 1 else w[:, None]
        return np.sqrt(np.sum(wx * np.abs(x) ** 2, axis=0))
    q = np.einsum("i...,ij,j...->...", x.conj(), w, x)
    return np.sqrt(np.maximum(q.real, 0.0))


@dataclass(frozen=True, eq=False)
class Generator:
    """A discrete generator ``A`` acting on a weighted state space."""

    matrix: np.ndarray
    weights: np.ndarray
    label: str = ""

    def __post_init__(self):
        a = np.asarray(self.matrix)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise ValueError(f"generator matrix must be square, got {a.shape}")
        if not np.iscomplexobj(a):
            a = a.astype(float)
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)
        w = _as_weights(self.weights, a.shape[0]).copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self):
        return self.matrix.shape[0]

    @cached_property
    def factor(self):
        return gram_factor(self.weights)

    @cached_property
    def gram(self):
        return gram_matrix(self.weights)

    @cached_property
    def norm(self):
        return float(np.linalg.norm(self.matrix, 2))

    @cached_property
    def orthonormal_matrix(self):
        """``R A R^{-1}``: the generator in coordinates where the norm is Euclidean."""
        r = self.factor
        return r @ self.matrix @ np.linalg.inv(r)

    @cached_property
    def spectral(self):
        """Eigen-data ``(mu, V)`` of the orthonormal-coordinate matrix.

        ``V`` is unitary whenever the generator is normal in its inner
        product (self- or skew-adjoint systems); ``normal`` records which.
        """
        s = self.orthonormal_matrix
        scale = max(1.0, np.abs(s).max())
        tol = 1e-10 * scale
        if np.abs(s - s.conj().T).max() <= tol:
            mu, v = np.linalg.eigh((s + s.conj().T) / 2)
            return mu.astype(complex), v.astype(complex), True
        if np.abs(s + s.conj().T).max() <= tol:
            h = -1j * s
            mu, v = np.linalg.eigh((h + h.conj().T) / 2)
            return 1j * mu, v, True
        mu, v = np.linalg.eig(s)
        return mu, v, False

    @cached_property
    def _expm_cache(self):
        return {}

    def propagator(self, t):
        """``e^{tA}`` as a matrix (cached per ``t``)."""
        t = float(t)
        if t < 0:
            raise NegativeTime(f"t={t} < 0")
        cache = self._expm_cache
        if t not in cache:
            if t == 0.0:
                m = np.eye(self.dim, dtype=self.matrix.dtype)
            else:
                mu, v, normal = self.spectral
                if normal:
                    r = self.factor
                    ortho = (v * np.exp(t * mu)) @ v.conj().T
                    m = np.linalg.solve(r, ortho @ r)
                    if not np.iscomplexobj(self.matrix):
                        m = m.real
                else:
                    m = sla.expm(t * self.matrix)
            m.setflags(write=False)
            cache[t] = m
        return cache[t]


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """A bounded map between two weighted spaces (``None`` weights = Euclidean)."""

    entries: np.ndarray
    domain_weights: np.ndarray | None = None
    codomain_weights: np.ndarray | None = None

    def __post_init__(self):
        e = np.atleast_2d(np.asarray(self.entries))
        object.__setattr__(self, "entries", e)

    @property
    def rows(self):
        return self.entries.shape[0]

    @property
    def cols(self):
        return self.entries.shape[1]

    def __matmul__(self, x):
        return self.entries @ x

    def norm(self):
        """Operator norm with respect to the domain and codomain inner products."""
        m = self.entries
        if self.codomain_weights is not None:
            m = gram_factor(self.codomain_weights) @ m
        if self.domain_weights is not None:
            m = m @ np.linalg.inv(gram_factor(self.domain_weights))
        return float(np.linalg.norm(m, 2))


def _check_resolvent_point(g, lam):
    m = lam * np.eye(g.dim) - g.matrix
    smin = np.linalg.svd(m, compute_uv=False)[-1]
    if smin < SPECTRUM_RTOL * max(1.0, g.norm):
        raise SpectrumHit(f"lambda={lam} lies in the spectrum (sigma_min={smin:.3e})")
    return m


def resolvent(g, lam):
    """``R(lam, A) = (lam I - A)^{-1}``."""
    m = _check_resolvent_point(g, lam)
    r = np.linalg.inv(m)
    return OperatorMatrix(r, g.weights, g.weights)


def semigroup_apply(g, t, x):
    if t < 0:
        raise NegativeTime(f"t={t} < 0")
    x = np.asarray(x)
    if t == 0:
        return x.copy()
    return g.propagator(t) @ x


def growth_bound(g):
    """Largest real part of the spectrum: the discrete growth bound."""
    return float(np.max(np.linalg.eigvals(g.matrix).real))


def dual_norm(g, lam, x):
    """``||R(lam, A) x||``, the discrete stand-in for the extrapolation norm."""
    m = _check_resolvent_point(g, lam)
    return float(weighted_norm(g.weights, np.linalg.solve(m, np.asarray(x))))


def input_blocks(a, b, tau):
    """Exact one-step input matrices for ``x' = A x + B u``.

    Returns ``(T, P0, P1)`` with ``T = e^{tau A}``,
    ``P0 = int_0^tau e^{sA} ds B`` (zero-order hold) and
    ``P1 = int_0^tau e^{(tau-s)A} B (s/tau) ds`` (ramp part of a first-order hold).
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if b.ndim == 1:
        b = b[:, None]
    n, k = b.shape
    dtype = np.result_type(a, b, float)
    aug = np.zeros((n + 2 * k, n + 2 * k), dtype=dtype)
    aug[:n, :n] = a
    aug[:n, n:n + k] = b
    aug[n:n + k, n + k:] = np.eye(k)
    e = sla.expm(tau * aug)
    return e[:n, :n], e[:n, n:n + k], e[:n, n + k:] / tau


def _gram_integral(mu, v, q, horizon):
    """``int_0^h e^{F^H s} Q e^{F s} ds`` for ``F = V diag(mu) V^H`` with unitary V."""
    qt = v.conj().T @ q @ v
    s = np.conj(mu)[:, None] + mu[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        kern = np.where(np.abs(s) * horizon < 1e-12, horizon, np.expm1(s * horizon) / s)
    return v @ (qt * kern) @ v.conj().T


def observability_gramian(g, c, horizon):
    """``int_0^h T(s)^* C^* C T(s) ds`` in orthonormal state coordinates."""
    mu, v, normal = g.spectral
    ct = np.atleast_2d(c) @ np.linalg.inv(g.factor)
    q = ct.conj().T @ ct
    if normal:
        return _gram_integral(mu, v, q, horizon)
    return _van_loan(g.orthonormal_matrix, q, horizon)


def controllability_gramian(g, b, horizon):
    """``int_0^h T(s) B B^* T(s)^* ds`` in orthonormal state coordinates."""
    mu, v, normal = g.spectral
    b = np.asarray(b)
    if b.ndim == 1:
        b = b[:, None]
    bt = g.factor @ b
    q = bt @ bt.conj().T
    if normal:
        # F = A^H has eigenvalues conj(mu) with the same eigenvectors
        return _gram_integral(np.conj(mu), v, q, horizon)
    return _van_loan(g.orthonormal_matrix.conj().T, q, horizon)


def _van_loan(f, q, horizon):
    n = f.shape[0]
    big = np.zeros((2 * n, 2 * n), dtype=np.result_type(f, q, float))
    big[:n, :n] = -f.conj().T
    big[:n, n:] = q
    big[n:, n:] = f
    e = sla.expm(horizon * big)
    return e[n:, n:].conj().T @ e[:n, n:]
