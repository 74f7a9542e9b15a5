import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from dispersl.dispersive import lambda4, lambda5
from dispersl.elliptic import corrected_cnoidal
from dispersl.errors import InvalidInputError, NonConvergenceError
from dispersl.grid import GridFunction, make_uniform_grid
from dispersl.interpolation import HermiteData, build_cubic_hermite
from dispersl.norms import relative_l2_error
from dispersl.stepper import (
    FluxSpec,
    SchemeConfig,
    SchemeState,
    consistency_error,
    initial_state,
    num_steps,
    numerical_solution,
    run,
    solve_node,
    step,
    step_hermite,
    step_spline,
)

NU = 1e-3


def cfg_for(interp, dt=1e-2, flux=None, ls=None, **kw):
    return SchemeConfig(NU, flux or FluxSpec.kdv(), ls or lambda5(), interp, dt, 1.0, **kw)


def periodic(grid, y):
    return np.append(y, y[0])


def bisect_fixed_point(G, lo, hi, iters=200):
    """Vectorized bisection on G(u) - u, which changes sign on [lo, hi]."""
    flo = G(lo) - lo
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = G(mid) - mid
        same = np.sign(fm) == np.sign(flo)
        lo = np.where(same, mid, lo)
        flo = np.where(same, fm, flo)
        hi = np.where(same, hi, mid)
    return 0.5 * (lo + hi)


def oracle_feet(interp, x, u, cfg, order=0):
    delta = cfg.shift.delta
    return sum(g * interp(np.mod(x - u * cfg.dt + lam * delta, 1.0), order)
               for g, lam in cfg.lambda_set.pairs)


def test_num_steps():
    assert num_steps(1.0, 1 / 100) == 100
    assert num_steps(1.0, 1 / 3) == 3
    assert num_steps(1.0, 0.3) == 3
    assert num_steps(1.0, 1 / 1600) == 1600


def test_config_validation():
    with pytest.raises(InvalidInputError):
        cfg_for("spline", dt=2.0)
    with pytest.raises(InvalidInputError):
        SchemeConfig(0.0, FluxSpec.kdv(), lambda5(), "spline", 0.1, 1.0)
    with pytest.raises(InvalidInputError):
        SchemeConfig(NU, FluxSpec.kdv(), lambda5(), "spline", 0.5, 0.25)
    with pytest.raises(InvalidInputError):
        cfg_for("spline", fp_tol=1e-16)
    with pytest.raises(ValueError):
        cfg_for("linear")
    with pytest.raises(InvalidInputError):
        FluxSpec("burgers")


def test_flux_polynomial():
    f = FluxSpec.polynomial([1.0, 0.0, 3.0])
    assert f.f(2.0) == 13.0
    assert f.fprime(2.0) == 12.0
    assert f.fsecond(2.0) == 6.0
    assert FluxSpec.zero().is_zero and not FluxSpec.kdv().is_zero
    assert FluxSpec.kdv().f(0.25) == 0.25


def test_spline_step_matches_scipy_oracle():
    grid = make_uniform_grid(1000)
    cfg = cfg_for("spline")
    wave = corrected_cnoidal(NU)
    state = initial_state(cfg, grid, lambda x: wave(x, 0.0))
    new = step_spline(state, cfg)
    spl = CubicSpline(np.append(grid.nodes, 1.0), periodic(grid, state.values.values),
                      bc_type="periodic")
    x = np.asarray(grid.nodes)
    u0 = state.values.values
    ref = bisect_fixed_point(lambda u: oracle_feet(spl, x, u, cfg), u0 - 0.05, u0 + 0.05)
    assert np.max(np.abs(new.values.values - ref)) <= 1e-8
    assert new.step_index == 1 and new.derivs is None


def test_hermite_step_matches_scipy_oracle():
    grid = make_uniform_grid(1000)
    cfg = cfg_for("hermite")
    wave = corrected_cnoidal(NU)
    state = initial_state(cfg, grid, lambda x: wave(x, 0.0), lambda x: wave(x, 0.0, 1))
    new = step_hermite(state, cfg)
    xs = np.append(grid.nodes, 1.0)
    her = CubicHermiteSpline(xs, periodic(grid, state.values.values),
                             periodic(grid, state.derivs.values))
    x = np.asarray(grid.nodes)
    u0 = state.values.values
    ref = bisect_fixed_point(lambda u: oracle_feet(her, x, u, cfg), u0 - 0.05, u0 + 0.05)
    w = oracle_feet(her, x, ref, cfg, order=1)
    ref_d = w / (1.0 + w * cfg.dt)  # f(u) = u, so f' = 1
    assert np.max(np.abs(new.values.values - ref)) <= 1e-8
    assert np.max(np.abs(new.derivs.values - ref_d)) <= 1e-8 * np.max(np.abs(ref_d))


def test_step_kind_mismatch():
    grid = make_uniform_grid(8)
    cfg = cfg_for("hermite")
    state = SchemeState(0, GridFunction(grid, np.zeros(8)))
    with pytest.raises(InvalidInputError):
        step_spline(state, cfg)
    with pytest.raises(InvalidInputError):
        step_hermite(state, cfg)  # missing slopes
    with pytest.raises(InvalidInputError):
        initial_state(cfg, grid, lambda x: 0 * x)


def test_solve_node_deterministic():
    grid = make_uniform_grid(64)
    wave = corrected_cnoidal(NU)
    cfg = cfg_for("hermite")
    pc = build_cubic_hermite(HermiteData(grid, wave(grid.nodes, 0.0), wave(grid.nodes, 0.0, 1)))
    a = solve_node(pc, 0.3, cfg, 0.2)
    b = solve_node(pc, 0.3, cfg, 0.2)
    assert a == b
    assert a[1] >= 1
    with pytest.raises(InvalidInputError):
        solve_node(pc, 0.3, cfg, math.nan)


def test_solve_node_zero_flux_single_evaluation():
    grid = make_uniform_grid(16)
    pc = build_cubic_hermite(HermiteData(grid, np.ones(16), np.zeros(16)))
    u, iters = solve_node(pc, 0.5, cfg_for("hermite", flux=FluxSpec.zero()), 3.0)
    assert u == pytest.approx(1.0, abs=1e-14)
    assert iters == 1


@pytest.mark.parametrize("interp", ["spline", "hermite"])
@pytest.mark.parametrize("flux", [FluxSpec.kdv(), FluxSpec.zero(), FluxSpec.polynomial([0.3, -1.0, 2.0])])
@pytest.mark.parametrize("ls", [lambda4(), lambda5()])
def test_constant_preservation(interp, flux, ls):
    grid = make_uniform_grid(32)
    cfg = SchemeConfig(NU, flux, ls, interp, 0.05, 0.5)
    c = 0.37

    def check(state):
        assert np.max(np.abs(state.values.values - c)) <= 1e-12
        if state.derivs is not None:
            assert np.max(np.abs(state.derivs.values)) <= 1e-12

    res = run(cfg, grid, lambda x: np.full_like(x, c), lambda x: np.zeros_like(x), callback=check)
    assert res.n_steps == 10


@pytest.mark.parametrize("interp", ["spline", "hermite"])
def test_node_order_independence(interp):
    grid = make_uniform_grid(128)
    wave = corrected_cnoidal(NU)
    cfg = cfg_for(interp)
    state = initial_state(cfg, grid, lambda x: wave(x, 0.0), lambda x: wave(x, 0.0, 1))
    rng = np.random.default_rng(3)
    for _ in range(3):
        forward = step(state, cfg)
        backward = step(state, cfg, node_order=np.arange(grid.nx)[::-1])
        shuffled = step(state, cfg, node_order=rng.permutation(grid.nx))
        for other in (backward, shuffled):
            assert np.array_equal(forward.values.values, other.values.values)
            if interp == "hermite":
                assert np.array_equal(forward.derivs.values, other.derivs.values)
        state = forward
    with pytest.raises(InvalidInputError):
        step(state, cfg, node_order=[0] * grid.nx)


@settings(max_examples=15, deadline=None)
@given(st.floats(-5, 5), st.integers(0, 2**32 - 1), st.sampled_from(["spline", "hermite"]))
def test_zero_flux_affine_equivariance(c, seed, interp):
    grid = make_uniform_grid(24)
    rng = np.random.default_rng(seed)
    vals, ders = rng.normal(size=24), rng.normal(size=24)
    cfg = cfg_for(interp, flux=FluxSpec.zero())
    a = SchemeState(0, GridFunction(grid, vals), GridFunction(grid, ders))
    b = SchemeState(0, GridFunction(grid, vals + c), GridFunction(grid, ders))
    for _ in range(3):
        a, b = step(a, cfg), step(b, cfg)
    assert np.max(np.abs(b.values.values - a.values.values - c)) <= 1e-12
    if interp == "hermite":
        assert np.max(np.abs(b.derivs.values - a.derivs.values)) <= 1e-9


def test_nonconvergence_reports_node_and_step():
    grid = make_uniform_grid(64)
    wave = corrected_cnoidal(NU)
    cfg = cfg_for("hermite", fp_max_iter=1)
    with pytest.raises(NonConvergenceError) as info:
        run(cfg, grid, lambda x: wave(x, 0.0), lambda x: wave(x, 0.0, 1))
    assert info.value.step == 1
    assert 0 <= info.value.node < 64
    assert info.value.residual > 0


def test_coarsest_dt_run_error_and_contraction():
    grid = make_uniform_grid(1000)
    wave = corrected_cnoidal(NU)
    cfg = cfg_for("hermite")
    res = run(cfg, grid, lambda x: wave(x, 0.0), lambda x: wave(x, 0.0, 1))
    assert res.n_steps == 100 and res.final_time == pytest.approx(1.0)
    assert res.max_iterations <= 100
    assert res.median_iterations <= 8
    err = relative_l2_error(numerical_solution(res.state, cfg), lambda x: wave(x, 1.0), grid)
    assert err == pytest.approx(2.36038e-3, rel=1e-3)


def test_consistency_error_constant_is_zero():
    const = lambda x, t, order=0: np.full_like(np.asarray(x, float), 0.4) if order == 0 else 0 * x  # noqa: E731
    cfg = cfg_for("hermite", flux=FluxSpec.zero())
    l2, star = consistency_error(const, 0.5, cfg, make_uniform_grid(16))
    assert l2 <= 1e-12 and star <= 1e-12


@pytest.mark.parametrize("ls, floor", [(lambda4(), 0.30), (lambda5(), 0.60)])
def test_consistency_orders(ls, floor):
    wave = corrected_cnoidal(NU)
    grid = make_uniform_grid(256)
    dts = (1e-2, 5e-3, 2.5e-3)
    errs = [consistency_error(wave, 0.5, cfg_for("hermite", dt=dt, ls=ls), grid)[0] for dt in dts]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert orders.min() >= floor
