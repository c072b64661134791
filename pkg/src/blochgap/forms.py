"""Assembly engine for fiber sesquilinear forms in the exact mode basis.

Basis functions are ``Psi_{j,p} = T^{-1/2} psi_j(x') exp(2 pi i p x_n / T)``.
Substituting the quasi-momentum (``i d/dx_n -> i d/dx_n - tau``) turns the
longitudinal derivative into multiplication: ``l_n(tau) Psi_{j,p} =
-(tau + 2 pi p / T) Psi_{j,p}``.  Every operator handled here is a finite sum
of separable *form terms*

    coeff * W(x') * F(x_n) * (Du applied to the row function)
                           * (conj of Dv applied to the column function)

with Du, Dv one of: identity ('v'), a transverse partial ('d1', 'd2'), or the
fibered longitudinal derivative ('n', contributing the real scalar
``-(tau + 2 pi p / T)``).  Transverse integrals are evaluated by tensor
Gauss-Legendre quadrature; longitudinal integrals reduce to Fourier
coefficients of ``F`` and are exact for trigonometric polynomials.

Matrix convention: ``M[r, c] = <Op e_r, e_c>`` with the inner product linear
in the first slot, so the restriction of an assembled perturbation to a
crossing pair reproduces the 2x2 coupling matrix entrywise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import ConsistencyError, InputError
from .geometry import (CrossSection, Interval, quadrature_rule,
                       transverse_dim, transverse_modes)

__all__ = ["FourierSeries", "TransverseBasis", "FormTerm", "CompiledForm",
           "hermiticity_defect"]

_DROP = 1e-300


class FourierSeries:
    """Finite Fourier series ``sum_m c[m] exp(2 pi i m x / period)``."""

    __slots__ = ("period", "_c")

    def __init__(self, coeffs, period: float):
        if period <= 0:
            raise InputError(f"period must be positive, got {period}")
        self.period = float(period)
        self._c = {int(m): complex(c) for m, c in dict(coeffs).items()
                   if abs(complex(c)) > _DROP}

    @staticmethod
    def constant(value, period):
        return FourierSeries({0: value}, period)

    @classmethod
    def from_callable(cls, fn: Callable, period: float, max_mode: int,
                      samples: int = 1024) -> "FourierSeries":
        """Spectral coefficients of a smooth periodic callable via the FFT."""
        n = max(samples, 8 * (max_mode + 1))
        x = np.arange(n) * (period / n)
        vals = np.asarray(fn(x), dtype=complex) + np.zeros(n, complex)
        spec = np.fft.fft(vals) / n
        coeffs = {}
        for m in range(-max_mode, max_mode + 1):
            coeffs[m] = spec[m % n]
        return cls(coeffs, period)

    def coef(self, m: int) -> complex:
        return self._c.get(int(m), 0.0 + 0.0j)

    def coefficients(self):
        return dict(self._c)

    @property
    def max_mode(self) -> int:
        return max((abs(m) for m in self._c), default=0)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        for m, c in self._c.items():
            out += c * np.exp(2j * np.pi * m * x / self.period)
        return out

    def derivative(self) -> "FourierSeries":
        return FourierSeries(
            {m: c * (2j * np.pi * m / self.period) for m, c in self._c.items()},
            self.period)

    def conjugate(self) -> "FourierSeries":
        return FourierSeries({-m: np.conj(c) for m, c in self._c.items()}, self.period)

    def is_real(self, tol: float = 1e-12) -> bool:
        scale = max((abs(c) for c in self._c.values()), default=1.0)
        for m, c in self._c.items():
            if abs(np.conj(self._c.get(-m, 0.0)) - c) > tol * max(1.0, scale):
                return False
        return True

    def __add__(self, other):
        if not isinstance(other, FourierSeries):
            return NotImplemented
        self._check_period(other)
        out = dict(self._c)
        for m, c in other._c.items():
            out[m] = out.get(m, 0.0) + c
        return FourierSeries(out, self.period)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, other):
        if isinstance(other, FourierSeries):
            self._check_period(other)
            out = {}
            for m1, c1 in self._c.items():
                for m2, c2 in other._c.items():
                    out[m1 + m2] = out.get(m1 + m2, 0.0) + c1 * c2
            return FourierSeries(out, self.period)
        return FourierSeries({m: c * other for m, c in self._c.items()}, self.period)

    __rmul__ = __mul__

    def _check_period(self, other):
        if abs(other.period - self.period) > 1e-12 * self.period:
            raise InputError("Fourier series periods differ")

    def paper_hat(self, m: int) -> complex:
        """``int_0^T exp(2 pi i m x / T) f(x) dx`` = T * coef(-m)."""
        return self.period * self.coef(-m)


class TransverseBasis:
    """Mode values and first derivatives tabulated on a quadrature rule."""

    def __init__(self, cross_section: CrossSection, count: int, quad_points: int):
        self.cross_section = cross_section
        self.modes = transverse_modes(cross_section, count)
        rule = quadrature_rule(cross_section, quad_points)
        self.weights = rule.weights
        if transverse_dim(cross_section) == 1:
            self.coords = (rule.points,)
        else:
            self.coords = (rule.points[:, 0], rule.points[:, 1])
        self.val = np.array([m.psi(*self.coords) for m in self.modes])
        grads = [m.grad_psi(*self.coords) for m in self.modes]
        self.d1 = np.array([g[0] for g in grads])
        self.d2 = np.array([g[1] for g in grads]) if len(grads[0]) > 1 else None

    @property
    def count(self):
        return len(self.modes)

    def table(self, op: str) -> np.ndarray:
        if op in ("v", "n"):
            return self.val
        if op == "d1":
            return self.d1
        if op == "d2":
            if self.d2 is None:
                raise InputError("'d2' form term used with a 1d cross-section")
            return self.d2
        raise InputError(f"unknown form operation {op!r}")

    def weight_values(self, weight: Optional[Callable]) -> np.ndarray:
        if weight is None:
            return np.ones_like(self.weights)
        return np.asarray(weight(*self.coords), dtype=complex) \
            + np.zeros_like(self.weights, dtype=complex)


@dataclass(frozen=True)
class FormTerm:
    """One separable contribution ``coeff * W(x') * F(x_n) * Du(.) conj(Dv(.))``."""
    coeff: complex
    weight: Optional[Callable]
    longit: FourierSeries
    op_u: str
    op_v: str


class CompiledForm:
    """Form terms with transverse integrals precomputed against a basis.

    ``element`` evaluates a single matrix entry for arbitrary longitudinal
    indices; ``matrix`` assembles the dense fiber matrix for indices
    |p| <= P (set ``longitudinal_cut`` at construction to enable it).
    """

    def __init__(self, terms: Sequence[FormTerm], basis: TransverseBasis,
                 period: float, longitudinal_cut: Optional[int] = None):
        self.basis = basis
        self.period = float(period)
        self.P = longitudinal_cut
        self._terms = []
        w = basis.weights
        for t in terms:
            wv = basis.weight_values(t.weight)
            tu = basis.table(t.op_u)
            tv = basis.table(t.op_v)
            gram = (tu * (wv * w)) @ tv.T
            lmat = None
            if self.P is not None:
                ps = np.arange(-self.P, self.P + 1)
                diff = ps[None, :] - ps[:, None]  # p_col - p_row
                coefarr = np.array([[t.longit.coef(int(d)) for d in row] for row in diff])
                lmat = coefarr
            self._terms.append((complex(t.coeff), gram, t.longit, t.op_u, t.op_v, lmat))

    def element(self, tau: float, row: Tuple[int, int], col: Tuple[int, int]) -> complex:
        """Entry <Op Psi_row, Psi_col> at quasi-momentum ``tau``.

        ``row`` and ``col`` are (transverse index j >= 1, longitudinal index p).
        """
        (j, p), (k, q) = row, col
        if not (1 <= j <= self.basis.count and 1 <= k <= self.basis.count):
            raise InputError(f"transverse index out of range: {row}, {col}")
        th_p = tau + 2.0 * np.pi * p / self.period
        th_q = tau + 2.0 * np.pi * q / self.period
        out = 0.0 + 0.0j
        for coeff, gram, series, opu, opv, _ in self._terms:
            su = -th_p if opu == "n" else 1.0
            sv = -th_q if opv == "n" else 1.0
            out += coeff * su * sv * gram[j - 1, k - 1] * series.coef(q - p)
        return out

    def matrix(self, tau: float) -> np.ndarray:
        """Dense fiber matrix over modes 1..J and |p| <= P, index (j, p) C-ordered."""
        if self.P is None:
            raise InputError("CompiledForm built without a longitudinal cut")
        J = self.basis.count
        nP = 2 * self.P + 1
        ps = np.arange(-self.P, self.P + 1)
        theta = tau + 2.0 * np.pi * ps / self.period
        M = np.zeros((J, nP, J, nP), dtype=complex)
        ones = np.ones_like(theta)
        for coeff, gram, _series, opu, opv, lmat in self._terms:
            su = -theta if opu == "n" else ones
            sv = -theta if opv == "n" else ones
            L = lmat * np.outer(su, sv)
            M += coeff * np.einsum("ab,pq->apbq", gram, L)
        return M.reshape(J * nP, J * nP)


def hermiticity_defect(M: np.ndarray) -> float:
    return float(np.max(np.abs(M - M.conj().T))) if M.size else 0.0


def require_hermitian(M: np.ndarray, tol: float, context: str) -> None:
    defect = hermiticity_defect(M)
    scale = max(1.0, float(np.max(np.abs(M))) if M.size else 1.0)
    if defect > tol * scale:
        raise ConsistencyError(
            f"{context}: Hermiticity defect {defect:.3e} exceeds {tol:.1e} * {scale:.3e}")
