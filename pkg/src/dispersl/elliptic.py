"""Jacobi elliptic integrals and the cnoidal traveling wave used as reference.

All routines are AGM/Landen based and accept numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, InvalidInputError

AGM_TOL = 1e-16
AGM_MAX_ITER = 40
MODULUS = 1.0 / math.sqrt(2.0)
MEAN = 0.1


def _check_modulus(k: float, allow_zero: bool = True) -> None:
    if not math.isfinite(k) or k >= 1.0 or k < 0.0 or (k == 0.0 and not allow_zero):
        raise DomainError(f"elliptic modulus must lie in [0, 1), got {k}")


def _agm_sequence(k: float):
    """Arithmetic-geometric mean ladder (a_n, c_n) starting from (1, sqrt(1-k^2))."""
    a, b, c = 1.0, math.sqrt((1.0 - k) * (1.0 + k)), k
    a_seq, c_seq = [a], [c]
    for _ in range(AGM_MAX_ITER):
        if abs(a - b) <= AGM_TOL * a:
            break
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        a_seq.append(a)
        c_seq.append(c)
    return a_seq, c_seq


def complete_K(k: float) -> float:
    """K(k) = F(pi/2, k) = pi / (2 AGM(1, sqrt(1 - k^2)))."""
    _check_modulus(k)
    a_seq, _ = _agm_sequence(k)
    return math.pi / (2.0 * a_seq[-1])


def incomplete_F(phi, k: float):
    """F(phi, k) = int_0^phi dtheta / sqrt(1 - k^2 sin^2 theta).

    Uses the descending Landen (AGM) transformation after reducing phi to
    [-pi/2, pi/2] with F(phi + m pi) = F(phi) + 2 m K.
    """
    _check_modulus(k)
    phi = np.asarray(phi, dtype=float)
    m = np.round(phi / math.pi)
    r = phi - m * math.pi
    a_seq, _ = _agm_sequence(k)
    b_seq = [math.sqrt((1.0 - k) * (1.0 + k))]
    for i in range(1, len(a_seq)):
        b_seq.append(math.sqrt(a_seq[i - 1] * b_seq[i - 1]))
    p = r.copy()
    for n in range(len(a_seq) - 1):
        p = p + np.arctan(b_seq[n] / a_seq[n] * np.tan(p)) + math.pi * np.round(p / math.pi)
    n_steps = len(a_seq) - 1
    f_reduced = p / (2.0**n_steps * a_seq[-1])
    out = f_reduced + 2.0 * m * (math.pi / (2.0 * a_seq[-1]))
    if out.ndim == 0:
        return float(out)
    return out


def _period_extended(k: float) -> np.longdouble:
    """4K(k) in extended precision (falls back to double where unavailable)."""
    one = np.longdouble(1)
    kk = np.longdouble(k)
    a, b = one, np.sqrt((one - kk) * (one + kk))
    for _ in range(AGM_MAX_ITER):
        if abs(a - b) <= np.finfo(np.longdouble).eps * a:
            break
        a, b = (a + b) / 2, np.sqrt(a * b)
    return 2 * _PI_EXT / a


_PI_EXT = np.longdouble("3.14159265358979323846264338327950288")


def _reduce_quarter_periods(x, k: float):
    """x - 4K * round(x / 4K), computed in extended precision."""
    period = _period_extended(k)
    xl = np.asarray(x, dtype=np.longdouble)
    n = np.round(xl / period)
    return np.asarray(xl - n * period, dtype=float)


def jacobi_am(x, k: float):
    """Amplitude phi with F(phi, k) = x, via the descending AGM recursion.

    The argument is reduced modulo 4K first; the returned angle is therefore
    only correct modulo 2 pi, which is all sin/cos need.
    """
    _check_modulus(k)
    x = np.asarray(x, dtype=float)
    if k == 0.0:
        return x.copy() if x.ndim else float(x)
    xr = _reduce_quarter_periods(x, k)
    a_seq, c_seq = _agm_sequence(k)
    n = len(a_seq) - 1
    phi = (2.0**n) * a_seq[-1] * xr
    for i in range(n, 0, -1):
        phi = 0.5 * (phi + np.arcsin(np.clip(c_seq[i] / a_seq[i] * np.sin(phi), -1.0, 1.0)))
    if phi.ndim == 0:
        return float(phi)
    return phi


def jacobi_sn_cn_dn(x, k: float):
    phi = np.asarray(jacobi_am(x, k))
    sn = np.sin(phi)
    cn = np.cos(phi)
    dn = np.sqrt(1.0 - (k * sn) ** 2)
    return sn, cn, dn


def jacobi_cn(x, k: float):
    out = np.cos(jacobi_am(x, k))
    if np.ndim(out) == 0:
        return float(out)
    return out


def _cn_derivatives(z, k: float, max_order: int):
    """[cn, cn', cn'', cn'''] in the elliptic argument z, up to max_order."""
    sn, cn, dn = jacobi_sn_cn_dn(z, k)
    k2 = k * k
    ders = [cn, -sn * dn, -cn * (dn * dn - k2 * sn * sn)]
    ders.append(sn * dn * (dn * dn + 4.0 * k2 * cn * cn - k2 * sn * sn))
    return ders[: max_order + 1]


@dataclass(frozen=True)
class CnoidalWave:
    """u(x, t) = a + b * cn(c (x - v t), k)^p, p in {1, 2}.

    ``exact`` records that the parameters satisfy the KdV traveling-wave
    relations (only meaningful for p = 2).
    """

    a: float
    b: float
    c: float
    k: float
    v: float
    p: int = 2
    exact: bool = False
    nu: float | None = None

    def __post_init__(self):
        _check_modulus(self.k, allow_zero=False)
        if not self.c > 0.0:
            raise InvalidInputError("wavenumber scale c must be positive")
        if self.p not in (1, 2):
            raise InvalidInputError("profile power must be 1 or 2")
        if self.exact:
            if self.p != 2 or self.nu is None:
                raise InvalidInputError("exact waves are cn^2 profiles with a known nu")
            k2 = self.k**2
            b_req = 12.0 * self.nu * k2 * self.c**2
            v_req = self.a + self.nu * self.c**2 * (8.0 * k2 - 4.0)
            if abs(self.b - b_req) > 1e-12 * abs(b_req):
                raise InvalidInputError("amplitude violates b = 12 nu k^2 c^2")
            if abs(self.v - v_req) > 1e-12 * max(abs(v_req), 1.0):
                raise InvalidInputError("speed violates v = a + nu c^2 (8k^2 - 4)")

    @property
    def x_period(self) -> float:
        big_k = complete_K(self.k)
        return (2.0 if self.p == 2 else 4.0) * big_k / self.c

    def __call__(self, x, t=0.0, order: int = 0):
        """Value or x-derivative (order 0..3) at (x, t)."""
        if order not in (0, 1, 2, 3):
            raise InvalidInputError("order must be 0..3")
        z = self.c * (np.asarray(x, dtype=float) - self.v * t)
        d = _cn_derivatives(z, self.k, order)
        if self.p == 1:
            val = d[order]
        else:
            prod = [
                d[0] * d[0],
                2.0 * d[0] * d[1] if order >= 1 else None,
                2.0 * (d[1] * d[1] + d[0] * d[2]) if order >= 2 else None,
                2.0 * (3.0 * d[1] * d[2] + d[0] * d[3]) if order >= 3 else None,
            ]
            val = prod[order]
        out = (self.a if order == 0 else 0.0) + self.b * self.c**order * val
        if np.ndim(out) == 0:
            return float(out)
        return out

    def time_derivative(self, x, t=0.0):
        return -self.v * self(x, t, 1)

    def at(self, t: float) -> Callable:
        """The snapshot x -> u(x, t), with x-derivatives via ``order``."""
        return lambda x, order=0: self(x, t, order)


def corrected_cnoidal(nu: float) -> CnoidalWave:
    """1-periodic cn^2 KdV solution with mean 1/10, speed 1/10, k = 1/sqrt 2."""
    if not nu > 0.0:
        raise InvalidInputError("nu must be positive")
    k = MODULUS
    c = 2.0 * complete_K(k)
    b = 12.0 * nu * k * k * c * c
    v = MEAN + nu * c * c * (8.0 * k * k - 4.0)
    return CnoidalWave(a=MEAN, b=b, c=c, k=k, v=v, p=2, exact=True, nu=nu)


def printed_cn_wave(nu: float) -> CnoidalWave:
    """The cn (not cn^2) profile with amplitude 3 nu / (2K), moving at 1/10."""
    if not nu > 0.0:
        raise InvalidInputError("nu must be positive")
    big_k = complete_K(MODULUS)
    return CnoidalWave(a=MEAN, b=3.0 * nu / (2.0 * big_k), c=2.0 * big_k, k=MODULUS, v=MEAN, p=1)


def printed_initial_condition(nu: float) -> Callable:
    """x -> 1/10 + 3 nu / (2K) cn(2K x, 1/sqrt 2); has x-period 2, not 1."""
    wave = printed_cn_wave(nu)
    return lambda x: wave(x, 0.0)


def pde_residual(sol: Callable, nu: float, flux, x: float, t: float, dx: float | None = None,
                 dt: float | None = None) -> float:
    """Finite-difference estimate of u_t + f(u) u_x + nu u_xxx at (x, t).

    ``sol(x, t)`` is only sampled. Central stencils at steps H and 2H are
    combined by Richardson extrapolation (fourth order).
    """
    hx = dx if dx is not None else 2e-2 * nu ** (1.0 / 3.0)
    ht = dt if dt is not None else 1e-3

    def d1(g, h):
        return (g(h) - g(-h)) / (2.0 * h)

    def d3(g, h):
        return (g(2 * h) - 2.0 * g(h) + 2.0 * g(-h) - g(-2 * h)) / (2.0 * h**3)

    def rich(op, g, h, order):
        coarse, fine = op(g, 2.0 * h), op(g, h)
        return fine + (fine - coarse) / (2.0**order - 1.0)

    along_x = lambda s: sol(x + s, t)  # noqa: E731
    along_t = lambda s: sol(x, t + s)  # noqa: E731
    u = sol(x, t)
    u_t = rich(d1, along_t, ht, 2)
    u_x = rich(d1, along_x, hx, 2)
    u_xxx = rich(d3, along_x, hx, 2)
    return float(u_t + flux.f(u) * u_x + nu * u_xxx)
