"""Brownian paths, the exponential-Euler mild solution and Monte Carlo.

Increments come from a counter-based generator keyed by ``(seed, path_index)``:
draw ``k`` is the ``k``-th Philox output mapped through the inverse normal
CDF, so any prefix of a path is independent of how much of it is generated.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .boundary import yosida_batch
from .delay import HistorySegment
from .errors import GridMismatch, NoConvergence
from .lift import LiftedState

__all__ = [
    "BrownianPath",
    "brownian_path",
    "MildTrajectory",
    "simulate_mild",
    "mild_steps",
    "PicardResult",
    "phi_W",
    "mc_estimate",
    "worker_count",
]


@dataclass(frozen=True, eq=False)
class BrownianPath:
    n_steps: int
    dt: float
    increments: np.ndarray
    seed: int
    path_index: int

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=float)
        if inc.shape != (self.n_steps,):
            raise ValueError(f"expected {self.n_steps} increments, got {inc.shape}")
        inc = inc.copy()
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)

    @property
    def W(self):
        return np.concatenate([[0.0], np.cumsum(self.increments)])

    def coarsen(self, factor):
        """The same Brownian path sampled on a grid ``factor`` times coarser."""
        if self.n_steps % factor:
            raise GridMismatch(f"{self.n_steps} steps not divisible by {factor}")
        inc = self.increments.reshape(-1, factor).sum(axis=1)
        return BrownianPath(self.n_steps // factor, self.dt * factor, inc, self.seed, self.path_index)

    def with_increments(self, increments):
        return BrownianPath(self.n_steps, self.dt, increments, self.seed, self.path_index)


def _uniforms(seed, path_index, n):
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, path_index & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    raw = np.random.Philox(key=key).random_raw(n)
    # 53-bit midpoint uniforms in (0, 1)
    return (raw >> np.uint64(11)).astype(float) * 2.0**-53 + 2.0**-54


def brownian_path(n_steps, dt, seed, path_index=0):
    if int(n_steps) != n_steps or n_steps < 1:
        raise ValueError("n_steps must be a positive integer")
    if not dt > 0:
        raise ValueError("dt must be positive")
    inc = ndtri(_uniforms(int(seed), int(path_index), int(n_steps))) * math.sqrt(dt)
    return BrownianPath(int(n_steps), float(dt), inc, int(seed), int(path_index))


@dataclass(frozen=True, eq=False)
class MildTrajectory:
    times: np.ndarray
    x: np.ndarray
    h: np.ndarray
    outputs: np.ndarray
    gaps: np.ndarray
    path: BrownianPath | None
    inputs: tuple = field(default=(), repr=False)
    r: float = 1.0

    def __len__(self):
        return len(self.times)

    @property
    def states(self):
        m = self.h.shape[1] - 1
        return [LiftedState(self.x[k], HistorySegment(self.r, m, self.h[k])) for k in range(len(self))]


def _history_values(ls, phi):
    if isinstance(phi, HistorySegment):
        if phi.m != ls.m or not np.isclose(phi.r, ls.r):
            raise GridMismatch("initial history lives on a different grid")
        return phi.values
    v = np.asarray(phi)
    if v.ndim == 1:
        v = v[:, None]
    if v.shape[0] != ls.m + 1:
        raise GridMismatch(f"initial history needs {ls.m + 1} samples")
    return v


def _signal(u, du):
    u = np.asarray(u)
    if u.ndim == 1:
        u = u[:, None]
    if u.shape[1] != du:
        raise GridMismatch(f"input must have {du} channels")
    return u


def mild_steps(ls, x0, h0, u, dw):
    """Yield ``(k, x_k, h_k)`` for the lifted exponential-Euler scheme.

    ``x0`` is (n, *bx), ``h0`` is (m+1, u, *bh), ``u`` is (K+1, u, *bh) and
    ``dw`` is (K, *bw); batch shapes broadcast as ``bx = bh x bw``.
    The history never depends on the path, so it is carried unbatched.
    """
    t, p0, tm = ls.steps
    m = ls.m
    x = np.asarray(x0)
    h = np.array(h0, copy=True)
    yield 0, x, h
    for k in range(u.shape[0] - 1):
        drift = np.tensordot(p0, ls.L(h), 1)
        drift = drift.reshape(drift.shape + (1,) * (x.ndim - drift.ndim))
        x = np.tensordot(t, x, 1) + drift + np.tensordot(tm, x, 1) * dw[k]
        h_new = np.empty_like(h)
        h_new[:m - 1] = h[1:m]
        h_new[m - 1] = u[k]
        h_new[m] = u[k + 1]
        h = h_new
        yield k + 1, x, h


def simulate_mild(ls, xi, phi, u, path, observe=True):
    """Mild solution of the lifted system on one Brownian path.

    ``u`` holds input samples at ``0, dt, ..., K dt`` with ``dt = r/m``; since
    the input before time 0 is ``phi``, ``u[0]`` must equal ``phi(0)``.
    """
    hvals = _history_values(ls, phi)
    u = _signal(u, ls.u_dim)
    k = u.shape[0] - 1
    if path.n_steps != k:
        raise GridMismatch(f"path has {path.n_steps} steps, input has {k}")
    if not np.isclose(path.dt, ls.dt, rtol=1e-12, atol=0):
        raise GridMismatch(f"path dt={path.dt} but the delay grid needs {ls.dt}")
    if not np.allclose(u[0], hvals[-1], rtol=0, atol=1e-12):
        raise ValueError("input at t=0 must match the initial history at theta=0")
    xi = np.asarray(xi)
    if xi.ndim == 0:
        xi = np.full(ls.n, xi)
    if xi.shape != (ls.n,):
        raise GridMismatch(f"initial state needs {ls.n} entries, got {xi.shape}")
    dtype = np.result_type(ls.steps[0], ls.steps[1], xi, hvals, u)
    xs = np.empty((k + 1, ls.n), dtype=dtype)
    hs = np.empty((k + 1, ls.m + 1, ls.u_dim), dtype=np.result_type(hvals, u))
    for j, x, h in mild_steps(ls, np.asarray(xi, dtype=dtype), hvals, u, path.increments):
        xs[j] = x
        hs[j] = h
    outputs, gaps = _observe(ls, xs, observe)
    times = np.arange(k + 1) * ls.dt
    return MildTrajectory(times, xs, hs, outputs, gaps, path, (xi, phi, u), ls.r)


def _observe(ls, xs, observe):
    if not observe:
        return np.full((len(xs), ls.bt.y_dim), np.nan), np.zeros(len(xs), dtype=bool)
    vals, conv, _ = yosida_batch(ls.bt, xs.T)
    return vals.T, ~conv


@dataclass(frozen=True)
class PicardResult:
    state: LiftedState
    x: np.ndarray
    iterations: int
    diffs: tuple
    ratio: float


def phi_W(ls, t, u, path, max_iter=50, tol=1e-8):
    """Stochastic control map by Picard iteration over whole trajectories.

    The zeroth iterate is the deterministic lifted control map; each sweep
    adds the Itô convolution of the previous iterate.  Stops once two sweeps
    differ by at most ``tol`` in sup norm.
    """
    u = _signal(u, ls.u_dim)
    k = int(round(t / ls.dt))
    if abs(k * ls.dt - t) > 1e-9 * max(1.0, t):
        raise GridMismatch(f"t={t} is off the delay grid")
    if u.shape[0] < k + 1 or path.n_steps < k:
        raise GridMismatch("input or path shorter than t")
    u = u[:k + 1]
    dw = path.increments[:k]
    zero_h = np.zeros((ls.m + 1, ls.u_dim), dtype=u.dtype)
    base = np.empty((k + 1, ls.n), dtype=np.result_type(ls.steps[0], ls.steps[1], u))
    hs = None
    for j, x, h in mild_steps(ls, np.zeros(ls.n, dtype=base.dtype), zero_h, u, np.zeros(k)):
        base[j] = x
        hs = h
    hs_final = hs
    t_step, _, tm = ls.steps
    current = base
    diffs = []
    for it in range(1, max_iter + 1):
        new = np.empty_like(base)
        acc = np.zeros(ls.n, dtype=np.result_type(base, tm))
        new[0] = base[0]
        for i in range(k):
            acc = t_step @ acc + tm @ current[i] * dw[i]
            new[i + 1] = base[i + 1] + acc
        diff = float(np.abs(new - current).max()) if k else 0.0
        diffs.append(diff)
        current = new
        if diff <= tol:
            ratios = [b / a for a, b in zip(diffs, diffs[1:]) if a > 0]
            ratio = max(ratios) if ratios else 0.0
            state = LiftedState(current[-1], HistorySegment(ls.r, ls.m, hs_final))
            return PicardResult(state, current, it, tuple(diffs), ratio)
    ratios = [b / a for a, b in zip(diffs, diffs[1:]) if a > 0]
    raise NoConvergence(
        f"Picard iteration did not reach tol={tol} in {max_iter} sweeps",
        {"diffs": diffs, "ratios": ratios},
    )


def worker_count():
    """Worker cap from ``DELAYLIFT_THREADS`` (default 1)."""
    raw = os.environ.get("DELAYLIFT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def mc_estimate(functional, ls, inputs, n_paths, seed, n_steps=None):
    """Mean and 95% half-width of a path functional over paths ``0..n_paths-1``.

    With ``inputs = (xi, phi, u)`` the functional receives the MildTrajectory;
    with ``inputs = None`` it receives the BrownianPath (of ``n_steps`` steps).
    Per-path seeding and an index-ordered reduction make the result
    independent of the worker count.
    """
    if n_paths < 2:
        raise ValueError("n_paths must be >= 2")
    if inputs is None:
        if n_steps is None:
            raise ValueError("n_steps is required when inputs is None")
    else:
        n_steps = _signal(inputs[2], ls.u_dim).shape[0] - 1

    def one(p):
        path = brownian_path(n_steps, ls.dt, seed, p)
        if inputs is None:
            return float(functional(path))
        return float(functional(simulate_mild(ls, *inputs, path)))

    workers = min(worker_count(), n_paths)
    if workers == 1:
        values = [one(p) for p in range(n_paths)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(one, range(n_paths)))
    mean = math.fsum(values) / n_paths
    var = math.fsum((v - mean) ** 2 for v in values) / (n_paths - 1)
    return mean, 1.959963984540054 * math.sqrt(var / n_paths)
