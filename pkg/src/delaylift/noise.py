"""Bounded noise operators ``M`` on the state space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .semigroup import gram_factor

__all__ = ["NoiseOp"]


@dataclass(frozen=True, eq=False)
class NoiseOp:
    kind: str
    matrix: np.ndarray
    bound: float
    kernel_l2: float | None = None

    def __post_init__(self):
        if self.kind not in ("multiplication", "kernel-integral", "zero"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        m = np.atleast_2d(np.asarray(self.matrix)).copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if not np.isfinite(self.bound):
            raise ValueError("noise bound must be finite")

    @staticmethod
    def _op_norm(matrix, weights):
        r = gram_factor(weights)
        return float(np.linalg.norm(r @ matrix @ np.linalg.inv(r), 2))

    @classmethod
    def zero(cls, n):
        return cls("zero", np.zeros((n, n)), 0.0)

    @classmethod
    def multiplication(cls, q, weights):
        """Pointwise multiplication by node values ``q``."""
        m = np.diag(np.asarray(q))
        return cls("multiplication", m, cls._op_norm(m, weights))

    @classmethod
    def kernel(cls, k, nodes, quad, weights):
        """``(Mf)(x_i) = sum_j k(x_i, x_j) f(x_j) quad_j``."""
        nodes = np.asarray(nodes)
        quad = np.asarray(quad)
        kk = k(nodes[:, None], nodes[None, :])
        m = kk * quad[None, :]
        l2 = float(np.sqrt(np.sum(quad[:, None] * quad[None, :] * np.abs(kk) ** 2)))
        return cls("kernel-integral", m, cls._op_norm(m, weights), l2)

    @property
    def is_zero(self):
        return self.kind == "zero" or not np.any(self.matrix)

    def __call__(self, x):
        return self.matrix @ x
