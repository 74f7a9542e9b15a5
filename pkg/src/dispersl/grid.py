"""Uniform periodic mesh on the unit torus R/Z."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidInputError

MIN_NODES = 4


def wrap(x):
    """Reduce ``x`` to the fundamental domain [0, 1).

    Works on scalars and arrays. A tiny negative input can round to exactly
    1.0 after ``x - floor(x)``; such values are mapped to 0.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("wrap: non-finite coordinate")
    r = arr - np.floor(arr)
    r = np.where(r >= 1.0, 0.0, r)
    if r.ndim == 0:
        return float(r)
    return r


@dataclass(frozen=True)
class TorusGrid:
    nx: int
    h: float = field(init=False)

    def __post_init__(self):
        if isinstance(self.nx, bool) or int(self.nx) != self.nx:
            raise InvalidInputError(f"nx must be an integer, got {self.nx!r}")
        if self.nx < MIN_NODES:
            raise InvalidInputError(f"nx must be >= {MIN_NODES}, got {self.nx}")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "h", 1.0 / self.nx)

    @property
    def nodes(self) -> np.ndarray:
        x = np.arange(self.nx, dtype=float) / self.nx
        x.flags.writeable = False
        return x


def make_uniform_grid(nx: int) -> TorusGrid:
    return TorusGrid(nx)


@dataclass(frozen=True)
class GridFunction:
    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.nx,):
            raise InvalidInputError(
                f"expected {self.grid.nx} values, got shape {v.shape}"
            )
        bad = np.flatnonzero(~np.isfinite(v))
        if bad.size:
            raise InvalidInputError(f"non-finite value at node {bad[0]}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


def _evaluate(fn: Callable, x: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(fn(x), dtype=float)
        if out.shape == x.shape:
            return out
        if out.ndim == 0:
            return np.full(x.shape, float(out))
    except (TypeError, ValueError):
        pass
    return np.array([float(fn(float(xi))) for xi in x])


def sample(fn: Callable, grid: TorusGrid) -> GridFunction:
    """Sample ``fn`` at the grid nodes.

    ``fn`` may be vectorized (array in, array out) or scalar-only.
    """
    values = _evaluate(fn, np.asarray(grid.nodes))
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise InvalidInputError(f"sampled function is non-finite at node {bad[0]}")
    return GridFunction(grid, values)
