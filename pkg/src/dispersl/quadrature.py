"""Gauss-Legendre rules computed by Newton iteration on P_n."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidInputError


def _legendre_and_derivative(n: int, x: np.ndarray):
    p0 = np.ones_like(x)
    p1 = x.copy()
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


def legendre_gauss(n: int, tol: float = 1e-15, max_iter: int = 100):
    """Nodes (ascending) and weights of the n-point rule on [-1, 1]."""
    if n < 1:
        raise InvalidInputError("need at least one node")
    i = np.arange(1, n + 1)
    x = np.cos(np.pi * (i - 0.25) / (n + 0.5))
    for _ in range(max_iter):
        p, dp = _legendre_and_derivative(n, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < tol:
            break
    _, dp = _legendre_and_derivative(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    return x[order], w[order]


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def degree(self) -> int:
        return 2 * len(self.nodes) - 1

    def check_exactness(self, tol: float = 1e-12) -> float:
        """Max error integrating x^0..x^degree over [-1, 1]."""
        worst = 0.0
        for m in range(self.degree + 1):
            exact = 0.0 if m % 2 else 2.0 / (m + 1)
            approx = float(np.dot(self.weights, self.nodes**m))
            worst = max(worst, abs(approx - exact))
        if worst > tol:
            raise InvalidInputError(f"quadrature not exact to degree {self.degree}: {worst}")
        return worst


@lru_cache(maxsize=None)
def gauss_rule(n: int = 7) -> QuadratureRule:
    x, w = legendre_gauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    rule = QuadratureRule(x, w)
    if abs(w.sum() - 2.0) > 1e-14:
        raise InvalidInputError("weights do not sum to 2")
    rule.check_exactness()
    return rule


def cell_points(nx: int, rule: QuadratureRule | None = None):
    """Quadrature abscissae on each cell [j/nx, (j+1)/nx] and matching weights.

    Returns ``(x, w)`` of shape (nx, n); ``sum(w * g(x))`` integrates g over
    the torus. Also returns the local coordinate ``xi`` in [0, 1] for each point.
    """
    rule = rule or gauss_rule()
    h = 1.0 / nx
    xi = 0.5 * (rule.nodes + 1.0)
    left = np.arange(nx, dtype=float)[:, None] * h
    x = left + h * xi[None, :]
    w = np.broadcast_to(0.5 * h * rule.weights, x.shape)
    return x, w, xi
