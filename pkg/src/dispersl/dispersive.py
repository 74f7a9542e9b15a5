"""Dispersive translation operator v -> sum_i gamma_i v(x + lambda_i * delta).

``delta = (nu * dt)^(1/3)``. The weight/shift sets are certified through
their moments (1/k!) sum gamma lambda^k, which must equal 1, 0, 0, -1 for
k = 0..3 so that the operator approximates v - nu dt v'''.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError, MomentConditionError, UnsupportedOperationError
from .fourier import TWO_PI, TrigPolynomial
from .grid import wrap
from .interpolation import PiecewiseCubic, evaluate

MOMENT_TOL = 1e-12
MAX_MOMENT_ORDER = 12
CBRT4 = float(np.cbrt(4.0))

# target value of (1/k!) sum gamma lambda^k
_TARGET_MOMENTS = {0: 1.0, 1: 0.0, 2: 0.0, 3: -1.0}

Pairs = Sequence[tuple[float, float]]


def moment(ls: "LambdaSet | Pairs", k: int) -> float:
    """(1/k!) * sum gamma * lambda^k, summed with exact rounding (math.fsum)."""
    if int(k) != k or k < 0:
        raise InvalidInputError(f"moment order must be a nonnegative integer, got {k}")
    if k > MAX_MOMENT_ORDER:
        raise InvalidInputError(f"moment order {k} exceeds {MAX_MOMENT_ORDER}")
    pairs = ls.pairs if isinstance(ls, LambdaSet) else ls
    return math.fsum(g * lam**k for g, lam in pairs) / math.factorial(k)


def moment_violations(pairs: Pairs, extra_zero: Iterable[int] = (), tol: float = MOMENT_TOL):
    """List of (k, value, expected) for every moment condition that fails."""
    targets = dict(_TARGET_MOMENTS)
    targets.update({k: 0.0 for k in extra_zero})
    bad = []
    for k in sorted(targets):
        value = moment(pairs, k)
        if abs(value - targets[k]) > tol:
            bad.append((k, value, targets[k]))
    return bad


@dataclass(frozen=True)
class LambdaSet:
    """Finite weight/shift set with certified moment conditions.

    ``extra_zero_moments`` lists further orders k whose moment must vanish
    (k = 4 for the five-point set); they are what raise the consistency order.
    """

    pairs: tuple[tuple[float, float], ...]
    consistency_order: float
    name: str = "custom"
    extra_zero_moments: tuple[int, ...] = ()

    def __post_init__(self):
        pairs = tuple((float(g), float(lam)) for g, lam in self.pairs)
        if not pairs:
            raise InvalidInputError("a parameter set needs at least one pair")
        if not all(math.isfinite(g) and math.isfinite(lam) for g, lam in pairs):
            raise InvalidInputError("parameter set entries must be finite")
        if not 0.0 < self.consistency_order <= 1.0:
            raise InvalidInputError("consistency order must lie in (0, 1]")
        object.__setattr__(self, "pairs", pairs)
        bad = moment_violations(pairs, self.extra_zero_moments)
        if bad:
            raise MomentConditionError(*bad[0])

    @property
    def weights(self) -> np.ndarray:
        return np.array([g for g, _ in self.pairs])

    @property
    def shifts(self) -> np.ndarray:
        return np.array([lam for _, lam in self.pairs])


def lambda4() -> LambdaSet:
    """Four-point set, consistency order 1/3.

    The first pair is (1/4, -cbrt(4)); with (-1/4, cbrt(4)) the zeroth
    moment would be 1/2 instead of 1.
    """
    c = CBRT4
    return LambdaSet(
        ((0.25, -c), (0.25, 0.0), (0.75, c), (-0.25, 2.0 * c)),
        consistency_order=1.0 / 3.0,
        name="L4",
    )


def lambda5() -> LambdaSet:
    """Five-point set, consistency order 2/3 (fourth moment also vanishes)."""
    return LambdaSet(
        ((3 / 16, -2.0), (3 / 8, 0.0), (3 / 4, 2.0), (-3 / 8, 4.0), (1 / 16, 6.0)),
        consistency_order=2.0 / 3.0,
        name="L5",
        extra_zero_moments=(4,),
    )


def lambda_set(name: str) -> LambdaSet:
    key = name.strip().upper()
    if key in ("L4", "LAMBDA4", "4"):
        return lambda4()
    if key in ("L5", "LAMBDA5", "5"):
        return lambda5()
    raise InvalidInputError(f"unknown parameter set {name!r}")


@dataclass(frozen=True)
class Shift:
    """Translation unit delta = (nu * dt)^(1/3)."""

    delta: float

    def __post_init__(self):
        if not (math.isfinite(self.delta) and self.delta > 0.0):
            raise InvalidInputError("shift must be positive and finite")

    @classmethod
    def from_nu_dt(cls, nu: float, dt: float) -> "Shift":
        if nu <= 0.0 or dt <= 0.0:
            raise InvalidInputError("nu and dt must be positive")
        return cls(float(np.cbrt(nu * dt)))


def _kahan_weighted_sum(weights, terms) -> np.ndarray:
    total = np.zeros_like(terms[0])
    comp = np.zeros_like(terms[0])
    for g, t in zip(weights, terms):
        y = g * t - comp
        s = total + y
        comp = (s - total) - y
        total = s
    return total


def apply(ls: LambdaSet, interpolant: PiecewiseCubic, x, shift: Shift, order: int = 0):
    """sum gamma * I(x + lambda * delta), or of its ``order``-th derivative."""
    x = np.asarray(x, dtype=float)
    terms = [
        np.asarray(evaluate(interpolant, wrap(x + lam * shift.delta), order), dtype=float)
        for lam in ls.shifts
    ]
    out = _kahan_weighted_sum(ls.weights, terms)
    if out.ndim == 0:
        return float(out)
    return out


def amplification(ls: LambdaSet, phi, delta: float):
    """|sum gamma exp(i phi lambda delta)|: modulus of the Fourier symbol."""
    phi = np.asarray(phi, dtype=float)
    theta = np.multiply.outer(phi * delta, ls.shifts)
    out = np.abs(np.exp(1j * theta) @ ls.weights)
    if out.ndim == 0:
        return float(out)
    return out


def apply_exact(ls: LambdaSet, v: TrigPolynomial, delta: float) -> TrigPolynomial:
    """The operator applied to a trigonometric polynomial, with no interpolation."""

    def symbol(k):
        return np.exp(1j * TWO_PI * np.multiply.outer(k, ls.shifts) * delta) @ ls.weights

    return v.multiply_symbol(symbol)


def _translation_combo(v: TrigPolynomial, terms) -> TrigPolynomial:
    """sum c * T_y v with (T_y v)(x) = v(x - y)."""
    out = v.scale(0.0)
    for c, y in terms:
        out = out + v.translate(y).scale(c)
    return out


def stability_gap_form(ls: LambdaSet, v: TrigPolynomial, delta: float) -> float:
    """Closed-form nonnegative quadratic form equal to ||v||^2 - ||S v||^2."""
    if ls.name == "L4":
        y = CBRT4 * delta
        w = _translation_combo(v, [(1.0, y), (-1.0, 0.0), (-1.0, -y), (1.0, -2.0 * y)])
        return w.l2_norm_sq() / 16.0
    if ls.name == "L5":
        w = _translation_combo(
            v, [(1.0, 0.0), (-2.0, 2 * delta), (2.0, 6 * delta), (-1.0, 8 * delta)]
        )
        return 3.0 * w.l2_norm_sq() / 256.0
    raise UnsupportedOperationError(
        f"stability identity is only known for L4 and L5, not {ls.name!r}"
    )


def stability_identity_residual(ls: LambdaSet, v: TrigPolynomial, delta: float) -> float:
    """|(||v||^2 - ||S v||^2) - Q(v)|, all norms exact via Parseval."""
    q = stability_gap_form(ls, v, delta)
    sv = apply_exact(ls, v, delta)
    return abs((v.l2_norm_sq() - sv.l2_norm_sq()) - q)


def derivative_multiplier_bound(ls: LambdaSet) -> float:
    """sum |gamma|: bounds the operator in every W^{m,inf} norm (finite sets)."""
    return math.fsum(abs(g) for g in ls.weights)
