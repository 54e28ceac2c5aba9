"""Concrete systems: a Neumann-controlled heat rod, a Dirichlet-controlled
Schrödinger analogue with collocated output, and a scalar toy system.

Both PDE examples are one-dimensional on [0, 1] with the control acting at
x = 1.  They exist to exercise the trace/Dirichlet/collocation structure,
not domain geometry.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from .boundary import BoundaryTriple
from .delay import DelayMeasure
from .errors import BadSpec
from .lift import LiftedSystem
from .noise import NoiseOp

__all__ = [
    "SystemSpec",
    "heat_triple",
    "schrodinger_triple",
    "toy_triple",
    "make_heat",
    "make_schrodinger",
    "make_toy",
    "make_system",
    "delay_from_spec",
    "heat_kernel",
    "schrodinger_potential",
]

FAMILIES = ("heat", "schrodinger", "toy")


def heat_kernel(x, y):
    return np.exp(-(x - y) ** 2)


def schrodinger_potential(x):
    return 0.5 * (1 + x)


@dataclass
class SystemSpec:
    family: str
    N: int = 64
    r: float = 1.0
    m: int = 32
    control_boundary: str = "right"
    observation: str = "trace"
    c: float = 1.0
    noise: dict | None = None
    delay: dict | None = None
    lam_ref: float = 1.0
    a: float = 1.0
    b: float = 1.0
    sigma: float = 0.3

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise BadSpec(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.family != "toy" and self.N < 8:
            raise BadSpec(f"N must be >= 8, got {self.N}")
        if self.control_boundary != "right":
            raise BadSpec("only control at x=1 ('right') is supported")
        allowed = {"heat": ("trace", "gradient"), "schrodinger": ("collocated",), "toy": ("trace",)}
        if self.family == "schrodinger" and self.observation == "trace":
            self.observation = "collocated"
        if self.observation not in allowed[self.family]:
            raise BadSpec(f"observation {self.observation!r} not valid for {self.family}")
        if not self.r > 0 or int(self.m) != self.m or self.m < 1:
            raise BadSpec("need r > 0 and a positive integer m")
        if self.family == "toy" and not self.a > 0:
            raise BadSpec("toy system needs a > 0")

    def digest(self):
        blob = json.dumps(asdict(self), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


DENSITIES = ("const", "exp", "table")


def _density(d, r):
    name = d.get("density", "const")
    value = float(d.get("value", 1.0))
    if name == "const":
        return lambda th: value / r
    if name == "exp":
        rate = float(d.get("rate", 1.0))
        return lambda th: value * np.exp(rate * th)
    if name == "table":
        table = np.asarray(d.get("table", ()), dtype=float)
        if table.ndim != 2 or table.shape[1] != 2 or len(table) < 2:
            raise BadSpec("density table needs at least two [theta, value] rows")
        if np.any(np.diff(table[:, 0]) <= 0):
            raise BadSpec("density table thetas must increase")
        return lambda th: float(np.interp(th, table[:, 0], table[:, 1]))
    raise BadSpec(f"unknown density {name!r}; choose from {DENSITIES}")


def delay_from_spec(d, r, u_dim=1):
    """DelayMeasure from a small dict.

    Kinds: ``none``, ``dirac`` (``theta``, ``weight``), ``uniform`` (total mass
    ``value``), ``atoms`` (``[[theta, weight], ...]``) and ``density``, whose
    ``density`` is one of ``const`` (``value / r``), ``exp``
    (``value * exp(rate * theta)``) or ``table`` (piecewise linear through
    ``[[theta, value], ...]``), optionally plus ``atoms``.
    """
    d = d or {"kind": "dirac"}
    kind = d.get("kind")
    if kind == "none":
        return DelayMeasure.zero_delay(r, u_dim)
    if kind == "dirac":
        return DelayMeasure.dirac(float(d.get("theta", -r)), r, float(d.get("weight", 1.0)), u_dim)
    if kind == "uniform":
        return DelayMeasure.uniform(r, float(d.get("value", 1.0) / r), u_dim)
    atoms = tuple((float(t), np.eye(u_dim) * float(w)) for t, w in d.get("atoms", ()))
    if kind == "atoms":
        return DelayMeasure(r, atoms, u_dim=u_dim, label="atoms")
    if kind == "density":
        return DelayMeasure(r, atoms, density=_density(d, r), u_dim=u_dim, label=d.get("density", "const"))
    raise BadSpec(f"unknown delay kind {kind!r}")


def heat_triple(N, c=1.0, observation="trace"):
    """Heat rod on [0,1]: Neumann control at x=1, insulated at x=0.

    Free nodes ``s_j = j/N`` for ``j < N``; the boundary unknown is ``u_N``.
    The weights make the restricted Laplacian self-adjoint and conservative.
    """
    h = 1.0 / N
    n = N
    a = np.zeros((n, n + 1))
    a[0, 0], a[0, 1] = -2.0, 2.0
    for j in range(1, n):
        a[j, j - 1:j + 2] = (1.0, -2.0, 1.0)
    a /= h * h
    g = np.zeros((1, n + 1))
    g[0, [n - 2, n - 1, n]] = np.array([1.0, -4.0, 3.0]) / (2 * h)
    obs = np.zeros((1, n + 1))
    if observation == "trace":
        obs[0, n] = c
    elif observation == "gradient":
        mid = N // 2
        obs[0, [mid - 1, mid + 1]] = np.array([-1.0, 1.0]) / (2 * h)
    else:
        raise BadSpec(f"unknown heat observation {observation!r}")
    w = np.full(n, h)
    w[0] = h / 2
    w[-1] = 1.5 * h
    geo = {"N": N, "nodes": np.arange(n) * h, "quad": w}
    return BoundaryTriple(a, g, obs, w, geo, f"heat[N={N},{observation}]")


def _inverse_laplacian_gram(N):
    h = 1.0 / N
    k = (np.diag(np.full(N - 1, 2.0)) - np.diag(np.ones(N - 2), 1) - np.diag(np.ones(N - 2), -1)) / h**2
    return k, h * np.linalg.inv(k)


def schrodinger_triple(N):
    """``i(-Laplacian)`` with Dirichlet control at x=1 and zero data at x=0.

    The state space carries the discrete H^{-1} inner product, and the
    output is ``i d/dnu`` of the discrete inverse Laplacian at x=1.
    """
    h = 1.0 / N
    n = N - 1
    k, gram = _inverse_laplacian_gram(N)
    a = np.zeros((n, n + 1), dtype=complex)
    a[:, :n] = 1j * k
    a[n - 1, n] = -1j / h**2
    g = np.zeros((1, n + 1))
    g[0, n] = 1.0
    # w = Lap^{-1} x = -K^{-1} x on nodes 1..N-1, w_0 = w_N = 0
    kinv = np.linalg.inv(k)
    deriv = np.zeros(n)
    deriv[n - 1] = -4.0
    deriv[n - 2] = 1.0
    obs = np.zeros((1, n + 1), dtype=complex)
    obs[0, :n] = 1j * (deriv @ (-kinv)) / (2 * h)
    geo = {"N": N, "nodes": np.arange(1, N) * h, "quad": np.full(n, h)}
    return BoundaryTriple(a, g, obs, gram, geo, f"schrodinger[N={N}]")


def toy_triple(a=1.0, b=1.0, c=1.0):
    """Scalar system ``x' = -a x + b beta`` with boundary unknown ``beta = G z``."""
    return BoundaryTriple(
        np.array([[-a, b]]), np.array([[0.0, 1.0]]), np.array([[c, 0.0]]), np.ones(1), {"N": 1}, "toy"
    )


def _noise(spec, bt, default):
    d = dict(default if spec.noise is None else spec.noise)
    kind = d.pop("kind")
    scale = float(d.pop("scale", 1.0))
    if d:
        raise BadSpec(f"unknown noise keys {sorted(d)}")
    n = bt.n
    if kind == "zero" or scale == 0:
        return NoiseOp.zero(n)
    geo = bt.geometry
    if kind == "kernel":
        return NoiseOp.kernel(lambda x, y: scale * heat_kernel(x, y), geo["nodes"], geo["quad"], bt.weights)
    if kind == "multiplication":
        if spec.family == "toy":
            q = np.array([scale])
        elif spec.family == "schrodinger":
            q = scale * schrodinger_potential(geo["nodes"])
        else:
            q = np.full(n, scale)
        return NoiseOp.multiplication(q, bt.weights)
    raise BadSpec(f"unknown noise kind {kind!r}")


def make_heat(spec):
    if spec.family != "heat":
        raise BadSpec("make_heat needs family='heat'")
    bt = heat_triple(spec.N, spec.c, spec.observation)
    noise = _noise(spec, bt, {"kind": "kernel"})
    nu = delay_from_spec(spec.delay or {"kind": "dirac", "theta": -spec.r}, spec.r)
    return LiftedSystem(bt, nu, noise, spec.m, spec.lam_ref, "heat")


def make_schrodinger(spec):
    if spec.family != "schrodinger":
        raise BadSpec("make_schrodinger needs family='schrodinger'")
    bt = schrodinger_triple(spec.N)
    noise = _noise(spec, bt, {"kind": "multiplication"})
    nu = delay_from_spec(spec.delay or {"kind": "dirac", "theta": -spec.r}, spec.r)
    return LiftedSystem(bt, nu, noise, spec.m, spec.lam_ref, "schrodinger")


def make_toy(spec):
    if spec.family != "toy":
        raise BadSpec("make_toy needs family='toy'")
    bt = toy_triple(spec.a, spec.b, spec.c)
    noise = _noise(spec, bt, {"kind": "multiplication", "scale": spec.sigma})
    nu = delay_from_spec(spec.delay or {"kind": "none"}, spec.r)
    return LiftedSystem(bt, nu, noise, spec.m, spec.lam_ref, "toy")


def make_system(spec):
    return {"heat": make_heat, "schrodinger": make_schrodinger, "toy": make_toy}[spec.family](spec)
