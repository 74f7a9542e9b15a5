"""Periodic cubic spline and cubic Hermite interpolation on the torus.

Both builders produce a :class:`PiecewiseCubic`: one cubic per cell
[x_j, x_{j+1}) stored as monomial coefficients in the local coordinate
xi = (x - x_j) / h. Points are assigned to cells with the left-closed
convention j = floor(wrap(x) * nx).

Smooth functions passed to the diagnostic routines are callables
``v(x, order)`` returning the ``order``-th derivative at ``x``
(see :class:`dispersl.fourier.TrigPolynomial`).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from .errors import ConstructionError, InvalidInputError, UnsupportedOperationError
from .grid import GridFunction, TorusGrid
from .quadrature import cell_points

SmoothFunction = Callable[..., np.ndarray]


class Smoothness(str, Enum):
    C2_SPLINE = "C2_spline"
    C1_HERMITE = "C1_hermite"


class Builder(str, Enum):
    SPLINE = "spline"
    HERMITE = "hermite"


# d^m/dxi^m of xi^p, for p = 0..3, as coefficient multipliers
_DERIV_FACTORS = np.array(
    [
        [1.0, 1.0, 1.0, 1.0],
        [0.0, 1.0, 2.0, 3.0],
        [0.0, 0.0, 2.0, 6.0],
        [0.0, 0.0, 0.0, 6.0],
    ]
)


@dataclass(frozen=True)
class PiecewiseCubic:
    grid: TorusGrid
    coeffs: np.ndarray  # shape (nx, 4), c0 + c1 xi + c2 xi^2 + c3 xi^3
    smoothness_class: Smoothness

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (self.grid.nx, 4):
            raise InvalidInputError(f"coeffs must have shape ({self.grid.nx}, 4)")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    def locate(self, x):
        """Cell index and local coordinate for (array) x."""
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise InvalidInputError("evaluation point is not finite")
        nx = self.grid.nx
        s = (x - np.floor(x)) * nx
        j = np.floor(s).astype(np.intp)
        xi = s - j
        # x - floor(x) may round to 1.0, landing in a phantom cell nx
        over = j >= nx
        if np.any(over):
            j = np.where(over, 0, j)
            xi = np.where(over, 0.0, xi)
        return j, xi

    def __call__(self, x, order: int = 0):
        return evaluate(self, x, order)

    def eval_cells(self, xi, order: int = 0) -> np.ndarray:
        """Evaluate every cell polynomial at local coordinates ``xi``.

        Returns shape (nx, len(xi)). Bypasses point location, so cell
        endpoints are evaluated from the inside.
        """
        xi = np.asarray(xi, dtype=float)
        c = self.coeffs * _DERIV_FACTORS[order]
        powers = np.stack([xi ** max(p - order, 0) * (p >= order) for p in range(4)])
        return (c @ powers) * self.grid.nx**order


def evaluate(pc: PiecewiseCubic, x, order: int = 0):
    """Value (order 0) or x-derivative of order 1..3 at arbitrary torus points."""
    if order not in (0, 1, 2, 3):
        raise InvalidInputError(f"derivative order must be 0..3, got {order}")
    j, xi = pc.locate(x)
    c = pc.coeffs[j]
    if order == 0:
        out = c[..., 0] + xi * (c[..., 1] + xi * (c[..., 2] + xi * c[..., 3]))
    elif order == 1:
        out = c[..., 1] + xi * (2.0 * c[..., 2] + 3.0 * xi * c[..., 3])
    elif order == 2:
        out = 2.0 * c[..., 2] + 6.0 * xi * c[..., 3]
    else:
        out = 6.0 * c[..., 3]
    out = out * pc.grid.nx**order
    if np.ndim(out) == 0:
        return float(out)
    return out


def _solve_cyclic(rhs: np.ndarray) -> np.ndarray:
    """Solve M_{j-1} + 4 M_j + M_{j+1} = rhs_j with periodic wrap-around.

    Sherman-Morrison correction of a banded tridiagonal solve.
    """
    n = rhs.size
    gamma = -4.0
    diag = np.full(n, 4.0)
    diag[0] -= gamma
    diag[-1] -= 1.0 / gamma
    ab = np.zeros((3, n))
    ab[0, 1:] = 1.0
    ab[1] = diag
    ab[2, :-1] = 1.0
    u = np.zeros(n)
    u[0] = gamma
    u[-1] = 1.0
    try:
        sol = solve_banded((1, 1), ab, np.column_stack([rhs, u]), check_finite=True)
    except (LinAlgError, ValueError) as exc:
        raise ConstructionError(f"cyclic spline system failed: {exc}") from exc
    y, z = sol[:, 0], sol[:, 1]
    denom = 1.0 + z[0] + z[-1] / gamma
    if not np.isfinite(denom) or abs(denom) < 1e-14:
        raise ConstructionError("cyclic spline system is singular")
    m = y - ((y[0] + y[-1] / gamma) / denom) * z
    if not np.all(np.isfinite(m)):
        raise ConstructionError("cyclic spline system produced non-finite moments")
    return m


def build_periodic_cubic_spline(gf: GridFunction, degree: int = 3) -> PiecewiseCubic:
    """The unique periodic C^2 cubic spline through the nodal data."""
    if degree != 3:
        raise UnsupportedOperationError("only cubic splines are implemented")
    u = np.asarray(gf.values)
    u_next = np.roll(u, -1)
    second_diff = u_next - 2.0 * u + np.roll(u, 1)
    # moments in xi units: h^2 * u''(x_j)
    m = _solve_cyclic(6.0 * second_diff)
    m_next = np.roll(m, -1)
    coeffs = np.column_stack(
        [
            u,
            (u_next - u) - (2.0 * m + m_next) / 6.0,
            0.5 * m,
            (m_next - m) / 6.0,
        ]
    )
    return PiecewiseCubic(gf.grid, coeffs, Smoothness.C2_SPLINE)


@dataclass(frozen=True)
class HermiteData:
    grid: TorusGrid
    values: np.ndarray
    derivs: np.ndarray

    def __post_init__(self):
        for name in ("values", "derivs"):
            a = np.array(getattr(self, name), dtype=float)
            if a.shape != (self.grid.nx,):
                raise InvalidInputError(f"{name} must have length {self.grid.nx}")
            bad = np.flatnonzero(~np.isfinite(a))
            if bad.size:
                raise InvalidInputError(f"non-finite {name} entry at node {bad[0]}")
            a.flags.writeable = False
            object.__setattr__(self, name, a)


def build_cubic_hermite(hd: HermiteData, degree: int = 3) -> PiecewiseCubic:
    """Cell-wise cubic matching values and first derivatives at both ends."""
    if degree != 3:
        raise UnsupportedOperationError("only cubic Hermite interpolation is implemented")
    h = hd.grid.h
    u0 = hd.values
    u1 = np.roll(u0, -1)
    d0 = h * hd.derivs
    d1 = np.roll(d0, -1)
    coeffs = np.column_stack(
        [u0, d0, 3.0 * (u1 - u0) - 2.0 * d0 - d1, 2.0 * (u0 - u1) + d0 + d1]
    )
    return PiecewiseCubic(hd.grid, coeffs, Smoothness.C1_HERMITE)


def interpolate(v: SmoothFunction, grid: TorusGrid, builder: str | Builder) -> PiecewiseCubic:
    """I_h v: interpolate a smooth function with the chosen builder."""
    builder = Builder(builder)
    x = np.asarray(grid.nodes)
    if builder is Builder.SPLINE:
        return build_periodic_cubic_spline(GridFunction(grid, v(x, 0)))
    return build_cubic_hermite(HermiteData(grid, v(x, 0), v(x, 1)))


def p1_orthogonality_residual(
    v: SmoothFunction, w: SmoothFunction, grid: TorusGrid, builder: str | Builder
) -> float:
    """Integral over the torus of (v - I_h v)'' * (I_h w)''.

    The interpolant factors are cell polynomials; the v'' factor is
    integrated with the 7-point Gauss-Legendre rule on each cell.
    """
    iv = interpolate(v, grid, builder)
    iw = interpolate(w, grid, builder)
    x, wq, xi = cell_points(grid.nx)
    err2 = v(x, 2) - iv.eval_cells(xi, 2)
    return float(np.sum(wq * err2 * iw.eval_cells(xi, 2)))


def interpolation_error_norms(
    v: SmoothFunction, grid: TorusGrid, builder: str | Builder
) -> tuple[float, float]:
    """(||v - I_h v||_{L2}, |v - I_h v|_{2,2}) by composite 7-point Gauss-Legendre."""
    iv = interpolate(v, grid, builder)
    x, wq, xi = cell_points(grid.nx)
    e0 = v(x, 0) - iv.eval_cells(xi, 0)
    e2 = v(x, 2) - iv.eval_cells(xi, 2)
    return float(np.sqrt(np.sum(wq * e0**2))), float(np.sqrt(np.sum(wq * e2**2)))
