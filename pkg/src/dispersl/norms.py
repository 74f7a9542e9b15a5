"""L2, Sobolev seminorm and weighted norms by composite 7-point Gauss-Legendre."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import InvalidInputError, UnsupportedOperationError
from .grid import TorusGrid, _evaluate
from .interpolation import PiecewiseCubic
from .quadrature import cell_points


def _quadrature_values(fn: Callable, grid: TorusGrid):
    x, w, _ = cell_points(grid.nx)
    vals = _evaluate(fn, x.ravel()).reshape(x.shape)
    bad = np.argwhere(~np.isfinite(vals))
    if bad.size:
        raise InvalidInputError(f"non-finite function value in cell {bad[0][0]}")
    return vals, w


def l2_norm(fn: Callable, grid: TorusGrid) -> float:
    vals, w = _quadrature_values(fn, grid)
    return math.sqrt(float(np.sum(w * vals**2)))


def hs_seminorm(pc: PiecewiseCubic, s: int) -> float:
    """||d^s pc / dx^s||_{L2}; exact, since the integrand has degree <= 4 per cell."""
    if s not in (1, 2):
        raise UnsupportedOperationError(f"seminorm order {s} is not supported")
    x, w, xi = cell_points(pc.grid.nx)
    d = pc.eval_cells(xi, s)
    return math.sqrt(float(np.sum(w * d**2)))


def star_norm(v_l2: float, v_seminorm: float) -> float:
    """(||v||^2 + |v|_s^2)^(1/2)."""
    return math.hypot(v_l2, v_seminorm)


def weighted_norm(v_l2: float, v_seminorm: float, s: int, h: float, dt: float) -> float:
    """(||v||^2 + h^(2s)/dt * |v|_s^2)^(1/2); tends to the L2 norm as h -> 0."""
    if min(v_l2, v_seminorm) < 0.0:
        raise InvalidInputError("norm inputs must be nonnegative")
    weight = h ** (2 * s) / dt
    return math.sqrt(v_l2**2 + weight * v_seminorm**2)


def relative_l2_error(numeric: Callable, exact: Callable, grid: TorusGrid) -> float:
    """||exact - numeric|| / ||exact|| on the grid's cells."""
    num, w = _quadrature_values(numeric, grid)
    ex, _ = _quadrature_values(exact, grid)
    denom = math.sqrt(float(np.sum(w * ex**2)))
    if denom < 1e-300:
        raise ZeroDivisionError("exact solution has zero L2 norm")
    return math.sqrt(float(np.sum(w * (ex - num) ** 2))) / denom


def error_norms(numeric: PiecewiseCubic, exact: Callable, dt: float, s: int = 2):
    """(relative L2, ||e||_{s,2,*}, ||e||_{s,2,Delta}) for e = exact - numeric.

    ``exact(x, order)`` must provide x-derivatives up to ``s``.
    """
    grid = numeric.grid
    x, w, xi = cell_points(grid.nx)
    ex = exact(x, 0)
    e0 = ex - numeric.eval_cells(xi, 0)
    es = exact(x, s) - numeric.eval_cells(xi, s)
    l2 = math.sqrt(float(np.sum(w * e0**2)))
    semi = math.sqrt(float(np.sum(w * es**2)))
    rel = l2 / math.sqrt(float(np.sum(w * ex**2)))
    return rel, star_norm(l2, semi), weighted_norm(l2, semi, s, grid.h, dt)
