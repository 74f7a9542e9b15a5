"""Semi-Lagrangian schemes for periodic dispersive conservation laws."""

from .dispersive import LambdaSet, Shift, lambda4, lambda5
from .elliptic import CnoidalWave, corrected_cnoidal
from .grid import GridFunction, TorusGrid, make_uniform_grid, sample, wrap
from .interpolation import (
    HermiteData,
    PiecewiseCubic,
    build_cubic_hermite,
    build_periodic_cubic_spline,
    evaluate,
)
from .stepper import FluxSpec, SchemeConfig, SchemeState, run, step

__all__ = [
    "CnoidalWave",
    "FluxSpec",
    "GridFunction",
    "HermiteData",
    "LambdaSet",
    "PiecewiseCubic",
    "SchemeConfig",
    "SchemeState",
    "Shift",
    "TorusGrid",
    "build_cubic_hermite",
    "build_periodic_cubic_spline",
    "corrected_cnoidal",
    "evaluate",
    "lambda4",
    "lambda5",
    "make_uniform_grid",
    "run",
    "sample",
    "step",
    "wrap",
]

__version__ = "0.1.0"
