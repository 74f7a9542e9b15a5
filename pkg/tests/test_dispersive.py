import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dispersl.dispersive import (
    CBRT4,
    LambdaSet,
    Shift,
    amplification,
    apply,
    apply_exact,
    derivative_multiplier_bound,
    lambda4,
    lambda5,
    lambda_set,
    moment,
    stability_identity_residual,
)
from dispersl.errors import InvalidInputError, MomentConditionError, UnsupportedOperationError
from dispersl.fourier import TrigPolynomial
from dispersl.grid import make_uniform_grid
from dispersl.harness import PRINTED_L4_PAIRS
from dispersl.interpolation import interpolate

L5_EXACT = [(Fraction(3, 16), -2), (Fraction(3, 8), 0), (Fraction(3, 4), 2),
            (Fraction(-3, 8), 4), (Fraction(1, 16), 6)]


def exact_moment(pairs, k):
    return sum(g * Fraction(lam) ** k for g, lam in pairs) / math.factorial(k)


@pytest.mark.parametrize("k", range(8))
def test_l5_moments_against_rational_arithmetic(k):
    assert moment(lambda5(), k) == pytest.approx(float(exact_moment(L5_EXACT, k)), rel=1e-14,
                                                 abs=1e-14)


def test_l5_fifth_moment_value():
    # (-6 + 24 - 384 + 486) / 120
    assert exact_moment(L5_EXACT, 5) == 1
    assert moment(lambda5(), 5) == pytest.approx(1.0, rel=1e-14)


def test_l4_moments():
    ls = lambda4()
    targets = [1.0, 0.0, 0.0, -1.0]
    for k, t in enumerate(targets):
        assert abs(moment(ls, k) - t) <= 1e-12
    assert ls.consistency_order == pytest.approx(1 / 3)
    assert lambda5().consistency_order == pytest.approx(2 / 3)


def test_cube_root_of_four():
    assert CBRT4**3 == pytest.approx(4.0, rel=1e-15)
    assert CBRT4 == pytest.approx(math.exp(math.log(4) / 3), rel=1e-15)


def test_printed_l4_is_rejected():
    with pytest.raises(MomentConditionError) as info:
        LambdaSet(PRINTED_L4_PAIRS, 1 / 3)
    assert info.value.k == 0
    assert info.value.value == pytest.approx(0.5, abs=1e-15)


def test_moment_errors():
    with pytest.raises(InvalidInputError):
        moment(lambda5(), 13)
    with pytest.raises(InvalidInputError):
        moment(lambda5(), -1)
    with pytest.raises(InvalidInputError):
        lambda_set("L7")
    assert lambda_set("l4").name == "L4"


def test_shift():
    assert Shift.from_nu_dt(1e-3, 1e-2).delta == pytest.approx(1e-5 ** (1 / 3), rel=1e-15)
    with pytest.raises(InvalidInputError):
        Shift.from_nu_dt(0.0, 0.1)
    with pytest.raises(InvalidInputError):
        Shift(-1.0)


def test_apply_constant_and_limit():
    grid = make_uniform_grid(32)
    const = interpolate(lambda x, order=0: np.full_like(x, 2.5) if order == 0 else 0 * x,
                        grid, "spline")
    for ls in (lambda4(), lambda5()):
        assert apply(ls, const, 0.3, Shift(0.05)) == pytest.approx(2.5, abs=1e-14)
    v = TrigPolynomial.from_cos_sin(sin=[1.0])
    pc = interpolate(v, grid, "hermite")
    assert apply(lambda5(), pc, 0.37, Shift(1e-12)) == pytest.approx(pc(0.37), abs=1e-9)


def test_apply_against_trig_sum():
    ls = lambda5()
    delta = 0.01
    pc = interpolate(TrigPolynomial.from_cos_sin(sin=[1.0]), make_uniform_grid(256), "spline")
    exact = sum(g * math.sin(2 * math.pi * (0.5 + lam * delta)) for g, lam in ls.pairs)
    # interpolation error (~1e-8 at nx=256) times sum |gamma| = 1.75
    assert abs(apply(ls, pc, 0.5, Shift(delta)) - exact) <= 1e-7


def test_amplification():
    for ls in (lambda4(), lambda5()):
        assert amplification(ls, 0.0, 0.3) == pytest.approx(1.0, abs=1e-15)
    theta = np.linspace(0, 2 * math.pi / CBRT4 * 10, 100_000)
    assert amplification(lambda4(), theta, 1.0).max() <= 1 + 1e-12
    theta = np.linspace(0, math.pi * 10, 100_000)
    assert amplification(lambda5(), theta, 1.0).max() <= 1 + 1e-12


def test_apply_exact_matches_pointwise_shifts(rng):
    v = TrigPolynomial.random(6, rng)
    delta = 0.037
    x = rng.uniform(0, 1, 50)
    for ls in (lambda4(), lambda5()):
        sv = apply_exact(ls, v, delta)
        direct = sum(g * v(x + lam * delta) for g, lam in ls.pairs)
        np.testing.assert_allclose(sv(x), direct, atol=1e-12)


def test_stability_identity_constant():
    v = TrigPolynomial(np.array([3.0 + 0j]))
    assert stability_identity_residual(lambda4(), v, 0.1) <= 1e-14
    assert stability_identity_residual(lambda5(), v, 0.1) <= 1e-14


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 8), st.floats(1e-3, 0.2), st.integers(0, 2**32 - 1))
def test_stability_identities(degree, delta, seed):
    v = TrigPolynomial.random(degree, np.random.default_rng(seed))
    for ls in (lambda4(), lambda5()):
        assert stability_identity_residual(ls, v, delta) <= 1e-12 * v.l2_norm_sq()


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 16), st.floats(1e-4, 0.3), st.integers(0, 2**32 - 1))
def test_operator_nonexpansive(degree, delta, seed):
    v = TrigPolynomial.random(degree, np.random.default_rng(seed))
    for ls in (lambda4(), lambda5()):
        sv = apply_exact(ls, v, delta)
        for s in (0, 1, 2):
            assert sv.seminorm_sq(s) <= v.seminorm_sq(s) * (1 + 1e-12) + 1e-300


def test_identity_unsupported_for_custom_set():
    custom = LambdaSet(lambda5().pairs, 2 / 3)  # same pairs, anonymous
    v = TrigPolynomial.random(3, np.random.default_rng(0))
    with pytest.raises(UnsupportedOperationError):
        stability_identity_residual(custom, v, 0.1)


def test_derivative_multiplier_bound():
    assert derivative_multiplier_bound(lambda4()) == pytest.approx(1.5)
    assert derivative_multiplier_bound(lambda5()) == pytest.approx(1.75)
