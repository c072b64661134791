"""Straight waveguide geometry: cross-sections, transverse Dirichlet modes, quadrature.

The waveguide is the cylinder ``omega x R`` with a one-dimensional (interval)
or two-dimensional (rectangle) cross-section ``omega``.  Both catalog
cross-sections have closed-form Dirichlet eigenpairs, which keeps every
downstream integral exactly checkable:

* ``Interval(w)``:   lambda_j = (pi j / w)^2,  psi_j = sqrt(2/w) sin(pi j x / w)
* ``Rectangle(a,b)``: lambda_{m,l} = (pi m / a)^2 + (pi l / b)^2,
                      psi = 2/sqrt(ab) sin(pi m x1 / a) sin(pi l x2 / b),
  sorted ascending with lexicographic tie-break in (m, l).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Tuple, Union

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import InputError

__all__ = [
    "Interval", "Rectangle", "CrossSection", "TransverseMode",
    "WaveguideConfig", "QuadratureRule",
    "transverse_modes", "check_simplicity", "quadrature_rule",
]


def _require_positive(name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise InputError(f"{name} must be a positive finite number, got {value!r}")


@dataclass(frozen=True)
class Interval:
    """One-dimensional cross-section (0, width)."""
    width: float

    def __post_init__(self):
        _require_positive("width", self.width)


@dataclass(frozen=True)
class Rectangle:
    """Two-dimensional cross-section (0, side_a) x (0, side_b)."""
    side_a: float
    side_b: float

    def __post_init__(self):
        _require_positive("side_a", self.side_a)
        _require_positive("side_b", self.side_b)


CrossSection = Union[Interval, Rectangle]


def transverse_dim(cs: CrossSection) -> int:
    return 1 if isinstance(cs, Interval) else 2


def area(cs: CrossSection) -> float:
    if isinstance(cs, Interval):
        return cs.width
    return cs.side_a * cs.side_b


@dataclass(frozen=True)
class TransverseMode:
    """One Dirichlet eigenpair of the cross-section Laplacian.

    ``psi`` and ``grad_psi`` are vectorized over numpy arrays; ``grad_psi``
    returns a tuple with one array per transverse coordinate.
    ``multiplicity_gap`` is the distance to the nearest other eigenvalue.
    ``numbers`` holds the analytic quantum numbers, (j,) or (m, l).
    """
    index: int
    eigenvalue: float
    psi: Callable
    grad_psi: Callable
    multiplicity_gap: float
    numbers: Tuple[int, ...]


def _interval_mode(w, j):
    amp = math.sqrt(2.0 / w)
    kj = math.pi * j / w

    def psi(x1):
        return amp * np.sin(kj * np.asarray(x1))

    def grad(x1):
        return (amp * kj * np.cos(kj * np.asarray(x1)),)

    return kj * kj, psi, grad, (j,)


def _rectangle_mode(a, b, m, l):
    amp = 2.0 / math.sqrt(a * b)
    km = math.pi * m / a
    kl = math.pi * l / b

    def psi(x1, x2):
        return amp * np.sin(km * np.asarray(x1)) * np.sin(kl * np.asarray(x2))

    def grad(x1, x2):
        x1 = np.asarray(x1)
        x2 = np.asarray(x2)
        return (amp * km * np.cos(km * x1) * np.sin(kl * x2),
                amp * kl * np.sin(km * x1) * np.cos(kl * x2))

    return km * km + kl * kl, psi, grad, (m, l)


@lru_cache(maxsize=64)
def transverse_modes(cs: CrossSection, count: int) -> Tuple[TransverseMode, ...]:
    """First ``count`` Dirichlet eigenpairs of ``cs``, ascending.

    Ties are broken lexicographically in the quantum numbers, so repeated
    calls return the identical ordering.
    """
    if not isinstance(count, int) or count < 1:
        raise InputError(f"count must be a positive integer, got {count!r}")
    entries = []
    if isinstance(cs, Interval):
        # one extra neighbor so the last returned mode gets a correct gap
        for j in range(1, count + 2):
            lam, psi, grad, nums = _interval_mode(cs.width, j)
            entries.append((lam, nums, psi, grad))
    elif isinstance(cs, Rectangle):
        # the count smallest eigenvalues all have m, l <= count + 1
        k = count + 2
        for m in range(1, k + 1):
            for l in range(1, k + 1):
                lam, psi, grad, nums = _rectangle_mode(cs.side_a, cs.side_b, m, l)
                entries.append((lam, nums, psi, grad))
    else:
        raise InputError(f"unsupported cross-section {cs!r}")
    entries.sort(key=lambda e: (e[0], e[1]))
    lams = [e[0] for e in entries]
    modes = []
    for i in range(count):
        lam, nums, psi, grad = entries[i]
        gap = min(abs(lams[k] - lam) for k in range(len(lams)) if k != i)
        modes.append(TransverseMode(i + 1, lam, psi, grad, gap, nums))
    return tuple(modes)


def check_simplicity(modes, j: int, tol: float = 1e-9) -> bool:
    """True iff eigenvalue ``j`` (1-based) is simple within relative ``tol``.

    Requires the list to extend at least one mode past ``j`` so the upper
    neighbor is visible.
    """
    if j < 1 or j > len(modes):
        raise InputError(f"mode index {j} out of range 1..{len(modes)}")
    if j == len(modes):
        raise InputError(f"mode list too short to see the upper neighbor of index {j}")
    lam = modes[j - 1].eigenvalue
    threshold = tol * max(1.0, abs(lam))
    dist = min(abs(m.eigenvalue - lam) for m in modes if m.index != j)
    return dist > threshold


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor Gauss-Legendre rule over the cross-section.

    ``points`` has shape (n,) for an interval and (n, 2) for a rectangle;
    ``weights`` sum to the cross-section area.
    """
    points: np.ndarray
    weights: np.ndarray


def _gauss(a, b, n):
    x, w = leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def quadrature_rule(cs: CrossSection, order: int) -> QuadratureRule:
    """Gauss-Legendre rule with ``order`` points per transverse dimension.

    Exact for polynomials of degree 2*order - 1 in each coordinate.
    """
    if not isinstance(order, int) or order < 1:
        raise InputError(f"order must be a positive integer, got {order!r}")
    if isinstance(cs, Interval):
        x, w = _gauss(0.0, cs.width, order)
        return QuadratureRule(x, w)
    if isinstance(cs, Rectangle):
        x1, w1 = _gauss(0.0, cs.side_a, order)
        x2, w2 = _gauss(0.0, cs.side_b, order)
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        W = np.outer(w1, w2)
        pts = np.column_stack([X1.ravel(), X2.ravel()])
        return QuadratureRule(pts, W.ravel())
    raise InputError(f"unsupported cross-section {cs!r}")


@dataclass(frozen=True)
class WaveguideConfig:
    """Cross-section, longitudinal period and ambient dimension.

    The quasi-momentum ranges over (-pi/period, pi/period].
    """
    cross_section: CrossSection
    period: float
    dimension: int

    def __post_init__(self):
        _require_positive("period", self.period)
        if self.dimension not in (2, 3):
            raise InputError(f"dimension must be 2 or 3, got {self.dimension}")
        want = self.dimension - 1
        have = transverse_dim(self.cross_section)
        if want != have:
            raise InputError(
                f"dimension {self.dimension} requires a "
                f"{'1d interval' if want == 1 else '2d rectangle'} cross-section")

    @property
    def brillouin_edge(self) -> float:
        return math.pi / self.period

    def modes(self, count: int):
        return transverse_modes(self.cross_section, count)

    def modes_below(self, energy: float, extra: int = 2):
        """All modes with eigenvalue <= energy, plus ``extra`` neighbors above."""
        count = 8
        while True:
            modes = self.modes(count)
            n_le = sum(1 for m in modes if m.eigenvalue <= energy)
            if n_le + extra <= len(modes) and modes[-1].eigenvalue > energy:
                return modes[:max(n_le + extra, 1)]
            count *= 2
