"""Implicit semi-Lagrangian time stepping for u_t + f(u) u_x + nu u_xxx = 0.

Each step solves, independently at every node x_j,

    u_j = sum_i gamma_i * P(x_j - f(u_j) dt + lambda_i delta)

by successive substitution, where P is the interpolant of the previous
level. All nodes are iterated together as numpy arrays; a node stops
updating as soon as it meets the tolerance, so every node follows exactly
the iteration it would follow if solved on its own.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dispersive import LambdaSet, Shift
from .errors import (
    DerivativeSingularityError,
    InvalidInputError,
    NonConvergenceError,
    NumericalFailure,
    NumericBlowupError,
)
from .grid import GridFunction, TorusGrid, sample, wrap
from .interpolation import (
    Builder,
    HermiteData,
    PiecewiseCubic,
    build_cubic_hermite,
    build_periodic_cubic_spline,
    evaluate,
)
from .quadrature import cell_points

DENOMINATOR_GUARD = 1e-12


@dataclass(frozen=True)
class FluxSpec:
    """Characteristic speed f(u) = sum_k c_k u^k (f = F')."""

    kind: str
    coefficients: tuple[float, ...] = ()

    def __post_init__(self):
        kind = self.kind.lower()
        if kind == "kdv":
            coeffs = (0.0, 1.0)
        elif kind == "zero":
            coeffs = ()
        elif kind == "polynomial":
            coeffs = tuple(float(c) for c in self.coefficients)
        else:
            raise InvalidInputError(f"unknown flux kind {self.kind!r}")
        if not all(math.isfinite(c) for c in coeffs):
            raise InvalidInputError("flux coefficients must be finite")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def kdv(cls) -> "FluxSpec":
        return cls("kdv")

    @classmethod
    def zero(cls) -> "FluxSpec":
        return cls("zero")

    @classmethod
    def polynomial(cls, coefficients: Sequence[float]) -> "FluxSpec":
        return cls("polynomial", tuple(coefficients))

    @property
    def is_zero(self) -> bool:
        return not any(self.coefficients)

    def _poly(self, u, deriv: int):
        c = np.polynomial.polynomial.polyder(np.asarray(self.coefficients or (0.0,)), deriv)
        out = np.polynomial.polynomial.polyval(u, c) if c.size else np.zeros_like(u)
        return out

    def f(self, u):
        return self._poly(u, 0)

    def fprime(self, u):
        return self._poly(u, 1)

    def fsecond(self, u):
        return self._poly(u, 2)


@dataclass(frozen=True)
class SchemeConfig:
    nu: float
    flux: FluxSpec
    lambda_set: LambdaSet
    interpolation: Builder
    dt: float
    t_end: float
    fp_tol: float = 1e-13
    fp_max_iter: int = 100

    def __post_init__(self):
        object.__setattr__(self, "interpolation", Builder(self.interpolation))
        if not self.nu > 0.0:
            raise InvalidInputError("nu must be positive")
        if not 0.0 < self.dt < 1.0:
            raise InvalidInputError("dt must lie in (0, 1)")
        if not self.t_end > 0.0:
            raise InvalidInputError("t_end must be positive")
        if self.dt > self.t_end:
            raise InvalidInputError("dt must not exceed t_end")
        if not self.fp_tol >= 1e-15:
            raise InvalidInputError("fp_tol must be >= 1e-15")
        if int(self.fp_max_iter) != self.fp_max_iter or self.fp_max_iter < 1:
            raise InvalidInputError("fp_max_iter must be a positive integer")

    @property
    def shift(self) -> Shift:
        return Shift.from_nu_dt(self.nu, self.dt)

    @property
    def n_steps(self) -> int:
        return num_steps(self.t_end, self.dt)


def num_steps(t_end: float, dt: float) -> int:
    """round(T/dt) when T/dt is an integer up to rounding, else floor(T/dt)."""
    ratio = t_end / dt
    nearest = round(ratio)
    if abs(ratio - nearest) <= 1e-9 * max(ratio, 1.0):
        return int(nearest)
    return int(math.floor(ratio))


@dataclass(frozen=True)
class SchemeState:
    step_index: int
    values: GridFunction
    derivs: GridFunction | None = None

    @property
    def grid(self) -> TorusGrid:
        return self.values.grid


@dataclass(frozen=True)
class StepStats:
    iterations: np.ndarray
    residuals: np.ndarray

    @property
    def total(self) -> int:
        return int(self.iterations.sum())

    @property
    def max(self) -> int:
        return int(self.iterations.max())


def _feet_sum(pc: PiecewiseCubic, x: np.ndarray, u: np.ndarray, cfg: SchemeConfig, order: int = 0):
    """sum_i gamma_i * d^order P(x - f(u) dt + lambda_i delta), Kahan-summed over i."""
    ls = cfg.lambda_set
    delta = cfg.shift.delta
    base = x - cfg.flux.f(u) * cfg.dt
    total = np.zeros_like(base)
    comp = np.zeros_like(base)
    for g, lam in ls.pairs:
        term = g * evaluate(pc, wrap(base + lam * delta), order)
        y = term - comp
        s = total + y
        comp = (s - total) - y
        total = s
    return total


def _wellposedness_violated(pc: PiecewiseCubic, u: np.ndarray, cfg: SchemeConfig) -> bool:
    x = np.asarray(pc.grid.nodes)
    slope = np.max(np.abs(_feet_sum(pc, x, np.zeros_like(x), _no_flux(cfg), order=1)))
    fmax = np.max(np.abs(cfg.flux.fprime(u)))
    return bool(3.0 * cfg.dt * fmax * slope > 1.0)


def _no_flux(cfg: SchemeConfig) -> SchemeConfig:
    return SchemeConfig(
        cfg.nu, FluxSpec.zero(), cfg.lambda_set, cfg.interpolation, cfg.dt, cfg.t_end,
        cfg.fp_tol, cfg.fp_max_iter,
    )


def solve_nodes(pc: PiecewiseCubic, x: np.ndarray, cfg: SchemeConfig, u_init: np.ndarray,
                node_ids: np.ndarray | None = None):
    """Fixed-point solve at many nodes at once; returns (u, iterations, residuals)."""
    x = np.asarray(x, dtype=float)
    u = np.array(u_init, dtype=float)
    ids = np.arange(x.size) if node_ids is None else np.asarray(node_ids)
    iters = np.zeros(x.size, dtype=np.int64)
    resid = np.zeros(x.size)

    if cfg.flux.is_zero:
        u = _feet_sum(pc, x, u, cfg)
        bad = np.flatnonzero(~np.isfinite(u))
        if bad.size:
            raise NumericBlowupError(int(ids[bad[0]]))
        iters[:] = 1
        return u, iters, resid

    active = np.arange(x.size)
    for it in range(1, cfg.fp_max_iter + 1):
        ua = u[active]
        g = _feet_sum(pc, x[active], ua, cfg)
        bad = np.flatnonzero(~np.isfinite(g))
        if bad.size:
            raise NumericBlowupError(int(ids[active[bad[0]]]))
        diff = np.abs(g - ua)
        u[active] = g
        iters[active] = it
        resid[active] = diff
        done = diff <= cfg.fp_tol * (1.0 + np.abs(g))
        active = active[~done]
        if active.size == 0:
            return u, iters, resid
    first = active[0]
    raise NonConvergenceError(
        int(ids[first]), float(resid[first]), _wellposedness_violated(pc, u, cfg)
    )


def solve_node(interpolant: PiecewiseCubic, x_j: float, cfg: SchemeConfig, u_init: float):
    """Solve u = sum gamma P(x_j - f(u) dt + lambda delta) at one point.

    Returns ``(u, iterations)``.
    """
    if not math.isfinite(u_init):
        raise InvalidInputError("initial guess must be finite")
    u, iters, _ = solve_nodes(interpolant, np.array([x_j]), cfg, np.array([u_init]))
    return float(u[0]), int(iters[0])


def _order(nx: int, node_order) -> np.ndarray:
    if node_order is None:
        return np.arange(nx)
    order = np.asarray(node_order, dtype=np.intp)
    if sorted(order.tolist()) != list(range(nx)):
        raise InvalidInputError("node_order must be a permutation of the node indices")
    return order


def _advance(state: SchemeState, cfg: SchemeConfig, node_order=None):
    grid = state.grid
    x_all = np.asarray(grid.nodes)
    order = _order(grid.nx, node_order)
    if cfg.interpolation is Builder.SPLINE:
        pc = build_periodic_cubic_spline(state.values)
    else:
        if state.derivs is None:
            raise InvalidInputError("Hermite stepping needs nodal derivatives")
        pc = build_cubic_hermite(HermiteData(grid, state.values.values, state.derivs.values))

    x = x_all[order]
    u_sub, it_sub, res_sub = solve_nodes(pc, x, cfg, state.values.values[order], order)
    u = np.empty(grid.nx)
    iters = np.empty(grid.nx, dtype=np.int64)
    resid = np.empty(grid.nx)
    u[order], iters[order], resid[order] = u_sub, it_sub, res_sub

    derivs = None
    if cfg.interpolation is Builder.HERMITE:
        w_sub = _feet_sum(pc, x, u_sub, cfg, order=1)
        denom = 1.0 + w_sub * cfg.flux.fprime(u_sub) * cfg.dt
        small = np.flatnonzero(np.abs(denom) < DENOMINATOR_GUARD)
        if small.size:
            raise DerivativeSingularityError(int(order[small[0]]), float(denom[small[0]]))
        v = np.empty(grid.nx)
        v[order] = w_sub / denom
        if not np.all(np.isfinite(v)):
            raise NumericBlowupError(int(np.flatnonzero(~np.isfinite(v))[0]))
        derivs = GridFunction(grid, v)

    new_state = SchemeState(state.step_index + 1, GridFunction(grid, u), derivs)
    return new_state, StepStats(iters, resid)


def step_spline(state: SchemeState, cfg: SchemeConfig, node_order=None) -> SchemeState:
    """One step with the periodic cubic spline of the current nodal values."""
    if cfg.interpolation is not Builder.SPLINE:
        raise InvalidInputError("configuration does not use spline interpolation")
    return _advance(state, cfg, node_order)[0]


def step_hermite(state: SchemeState, cfg: SchemeConfig, node_order=None) -> SchemeState:
    """One step with the cubic Hermite interpolant, updating values and slopes.

    New slopes: v_j = w_j / (1 + w_j f'(u_j) dt), where w_j is the weighted
    sum of interpolant slopes at the feet of node j.
    """
    if cfg.interpolation is not Builder.HERMITE:
        raise InvalidInputError("configuration does not use Hermite interpolation")
    return _advance(state, cfg, node_order)[0]


def step(state: SchemeState, cfg: SchemeConfig, node_order=None) -> SchemeState:
    return _advance(state, cfg, node_order)[0]


def initial_state(cfg: SchemeConfig, grid: TorusGrid, u0: Callable,
                  u0_deriv: Callable | None = None) -> SchemeState:
    values = sample(u0, grid)
    derivs = None
    if cfg.interpolation is Builder.HERMITE:
        if u0_deriv is None:
            raise InvalidInputError("Hermite runs need the derivative of the initial data")
        derivs = sample(u0_deriv, grid)
    return SchemeState(0, values, derivs)


@dataclass
class RunResult:
    state: SchemeState
    n_steps: int
    final_time: float
    total_iterations: int
    max_iterations: int
    median_iterations: float
    max_residual: float
    wall_seconds: float
    iteration_history: list[int] = field(default_factory=list, repr=False)


def _histogram_median(hist: np.ndarray) -> float:
    cum = np.cumsum(hist)
    n = cum[-1]
    lo = int(np.searchsorted(cum, (n - 1) // 2 + 1))
    hi = int(np.searchsorted(cum, n // 2 + 1))
    return 0.5 * (lo + hi)


def run(cfg: SchemeConfig, grid: TorusGrid, u0: Callable, u0_deriv: Callable | None = None,
        callback: Callable[[SchemeState], None] | None = None) -> RunResult:
    """Sample the initial data and advance ``cfg.n_steps`` steps.

    Errors raised by a step carry the 1-based index of the failing step.
    """
    start = time.perf_counter()
    state = initial_state(cfg, grid, u0, u0_deriv)
    n = cfg.n_steps
    if n < 1:
        raise InvalidInputError("t_end / dt gives no time steps")
    total = 0
    max_it = 0
    max_res = 0.0
    per_step_max = []
    hist = np.zeros(cfg.fp_max_iter + 1, dtype=np.int64)
    for k in range(n):
        try:
            state, stats = _advance(state, cfg)
        except NumericalFailure as exc:
            exc.step = k + 1
            exc.args = (f"{exc.args[0]} in step {k + 1}",)
            raise
        total += stats.total
        max_it = max(max_it, stats.max)
        max_res = max(max_res, float(stats.residuals.max()))
        per_step_max.append(stats.max)
        hist += np.bincount(stats.iterations, minlength=hist.size)
        if callback is not None:
            callback(state)
    return RunResult(
        state=state,
        n_steps=n,
        final_time=n * cfg.dt,
        total_iterations=total,
        max_iterations=max_it,
        median_iterations=_histogram_median(hist),
        max_residual=max_res,
        wall_seconds=time.perf_counter() - start,
        iteration_history=per_step_max,
    )


def numerical_solution(state: SchemeState, cfg: SchemeConfig) -> PiecewiseCubic:
    """The interpolant u_h^n represented by a state."""
    if cfg.interpolation is Builder.SPLINE:
        return build_periodic_cubic_spline(state.values)
    return build_cubic_hermite(HermiteData(state.grid, state.values.values, state.derivs.values))


def consistency_error(exact, t_n: float, cfg: SchemeConfig, grid: TorusGrid):
    """Norms of the semi-discrete truncation error at level n.

    tau(x) = (u^n(x) - sum gamma u^{n-1}(x - f(u^n(x)) dt + lambda delta)) / dt,
    evaluated with the exact solution (no interpolation). ``exact(x, t, order)``
    must return x-derivatives up to order 2. Returns ``(||tau||_{L2},
    ||tau||_{2,2,*})``, the second using the chain-rule second derivative.
    """
    dt = cfg.dt
    delta = cfg.shift.delta
    t_prev = t_n - dt
    x, w, _ = cell_points(grid.nx)
    un = exact(x, t_n, 0)
    un_x = exact(x, t_n, 1)
    un_xx = exact(x, t_n, 2)
    fu = cfg.flux.f(un)
    fp = cfg.flux.fprime(un)
    g1 = 1.0 - fp * un_x * dt
    g2 = -(cfg.flux.fsecond(un) * un_x**2 + fp * un_xx) * dt
    val = np.zeros_like(x)
    val_xx = np.zeros_like(x)
    for gam, lam in cfg.lambda_set.pairs:
        feet = x - fu * dt + lam * delta
        val = val + gam * exact(feet, t_prev, 0)
        val_xx = val_xx + gam * (exact(feet, t_prev, 2) * g1**2 + exact(feet, t_prev, 1) * g2)
    tau = (un - val) / dt
    tau_xx = (un_xx - val_xx) / dt
    l2 = math.sqrt(float(np.sum(w * tau**2)))
    semi = math.sqrt(float(np.sum(w * tau_xx**2)))
    return l2, math.hypot(l2, semi)
