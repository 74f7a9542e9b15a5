"""Real trigonometric polynomials on the torus, with exact translation.

Used as smooth test functions and for Parseval-exact operator-stability
checks that bypass interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TrigPolynomial:
    """v(x) = sum_{k=-K..K} c_k exp(2 pi i k x) with c_{-k} = conj(c_k).

    ``coeffs[k]`` holds c_k for k = 0..K; negative modes are implied.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        c[0] = c[0].real
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_cos_sin(cls, a0=0.0, cos=(), sin=()):
        """Build from a0 + sum a_k cos(2 pi k x) + b_k sin(2 pi k x), k >= 1."""
        degree = max(len(cos), len(sin))
        c = np.zeros(degree + 1, dtype=complex)
        c[0] = a0
        for k, a in enumerate(cos, start=1):
            c[k] += 0.5 * a
        for k, b in enumerate(sin, start=1):
            c[k] += -0.5j * b
        return cls(c)

    @classmethod
    def random(cls, degree: int, rng: np.random.Generator, decay: float = 0.0):
        k = np.arange(degree + 1)
        scale = 1.0 / (1.0 + k) ** decay
        c = (rng.standard_normal(degree + 1) + 1j * rng.standard_normal(degree + 1)) * scale
        return cls(c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def _mode_coeffs(self, order: int) -> np.ndarray:
        k = np.arange(len(self.coeffs))
        return self.coeffs * (1j * TWO_PI * k) ** order

    def __call__(self, x, order: int = 0):
        x = np.asarray(x, dtype=float)
        d = self._mode_coeffs(order)
        k = np.arange(len(d))
        phase = np.exp(1j * TWO_PI * np.multiply.outer(x, k))
        # c_0 term once, positive modes doubled (real part of conjugate pair)
        total = d[0].real + 2.0 * np.real(phase[..., 1:] @ d[1:])
        if total.ndim == 0:
            return float(total)
        return total

    def translate(self, y: float) -> "TrigPolynomial":
        """The function x -> v(x - y)."""
        k = np.arange(len(self.coeffs))
        return TrigPolynomial(self.coeffs * np.exp(-1j * TWO_PI * k * y))

    def multiply_symbol(self, symbol) -> "TrigPolynomial":
        """Apply a Fourier multiplier given as a callable of the integer mode k.

        The symbol must satisfy symbol(-k) = conj(symbol(k)) so the result is real.
        """
        k = np.arange(len(self.coeffs))
        return TrigPolynomial(self.coeffs * symbol(k))

    def __add__(self, other: "TrigPolynomial") -> "TrigPolynomial":
        n = max(len(self.coeffs), len(other.coeffs))
        a = np.zeros(n, dtype=complex)
        a[: len(self.coeffs)] += self.coeffs
        a[: len(other.coeffs)] += other.coeffs
        return TrigPolynomial(a)

    def __sub__(self, other: "TrigPolynomial") -> "TrigPolynomial":
        return self + other.scale(-1.0)

    def scale(self, alpha: float) -> "TrigPolynomial":
        return TrigPolynomial(self.coeffs * alpha)

    def l2_norm_sq(self) -> float:
        """||v||^2 over one period, by Parseval."""
        c = self.coeffs
        return float(abs(c[0]) ** 2 + 2.0 * np.sum(np.abs(c[1:]) ** 2))

    def seminorm_sq(self, s: int) -> float:
        """|v|_{s,2}^2 = ||d^s v / dx^s||^2, by Parseval."""
        d = self._mode_coeffs(s)
        return float(abs(d[0]) ** 2 + 2.0 * np.sum(np.abs(d[1:]) ** 2))
