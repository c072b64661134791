"""Shared builders for the catalog configurations used across the suite."""

import math

import numpy as np
import pytest

from blochgap.bands import find_intersections
from blochgap.forms import FourierSeries
from blochgap.geometry import Interval, Rectangle, WaveguideConfig
from blochgap.perturbation import (BoundaryDeformation2D, Magnetic, Potential,
                                   Profile, SeparableTerm, Twist3D)

SQRT7 = math.sqrt(7.0)


def cosine_terms(freq_index, amplitude=1.0, profile=None):
    """Terms of amplitude * profile(x') * cos(2 pi freq_index x_n / T)."""
    half = amplitude / 2.0
    return (SeparableTerm(half, freq_index, profile),
            SeparableTerm(half, -freq_index, profile))


def cosine_series(freq_index, period, amplitude=1.0):
    half = amplitude / 2.0
    return FourierSeries({freq_index: half, -freq_index: half}, period)


def pick(inters, kind, require_admissible=True):
    for it in inters:
        if it.kind == kind and (it.admissible or not require_admissible):
            return it
    raise AssertionError(f"no {kind} intersection found")


PROFILE_12 = Profile.from_expression("2*sin(pi*x1)*sin(2*pi*x1)")
PROFILE_11 = Profile.from_expression("2*sin(pi*x1)^2")


@pytest.fixture(scope="session")
def central_potential():
    """Interval(1), T = 2, V = cos(2 pi x_n); central crossing at 2 pi^2."""
    cfg = WaveguideConfig(Interval(1.0), 2.0, 2)
    spec = Potential(cosine_terms(2))
    inter = pick(find_intersections(cfg, 3 * math.pi ** 2 * 1.1), "central")
    return cfg, spec, inter


@pytest.fixture(scope="session")
def interior_potential():
    """Interval(1), T = 1, V = cos(2 pi x_n) psi1 psi2; crossing at tau0 = pi/4."""
    cfg = WaveguideConfig(Interval(1.0), 1.0, 2)
    spec = Potential(cosine_terms(1, profile=PROFILE_12))
    inter = pick(find_intersections(cfg, 42.0), "interior")
    return cfg, spec, inter


@pytest.fixture(scope="session")
def interior_magnetic():
    """T = 1 interior crossing driven by the axial field A_n = psi1 psi2 cos(2 pi x_n/T)."""
    cfg = WaveguideConfig(Interval(1.0), 1.0, 2)
    spec = Magnetic(((), cosine_terms(1, profile=PROFILE_12)))
    inter = pick(find_intersections(cfg, 42.0), "interior")
    return cfg, spec, inter


@pytest.fixture(scope="session")
def central_zero_magnetic():
    """The same axial-field construction at the zone center: coupling vanishes."""
    cfg = WaveguideConfig(Interval(1.0), 2.0, 2)
    spec = Magnetic(((), cosine_terms(2, profile=PROFILE_11)))
    inter = pick(find_intersections(cfg, 3 * math.pi ** 2 * 1.1), "central")
    return cfg, spec, inter


@pytest.fixture(scope="session")
def central_deformation():
    """T = 2 strip with the far wall wiggled by eps*cos(2 pi x_2)."""
    cfg = WaveguideConfig(Interval(1.0), 2.0, 2)
    spec = BoundaryDeformation2D(FourierSeries({}, 2.0), cosine_series(2, 2.0))
    inter = pick(find_intersections(cfg, 3 * math.pi ** 2 * 1.1), "central")
    return cfg, spec, inter


@pytest.fixture(scope="session")
def interior_twist():
    """Rectangle(pi, pi/2) rod, T = 2, twisted by eps*cos(2 pi x_3 / T)."""
    cfg = WaveguideConfig(Rectangle(math.pi, math.pi / 2), 2.0, 3)
    spec = Twist3D(cosine_series(1, 2.0))
    inter = pick(find_intersections(cfg, 12.0), "interior")
    return cfg, spec, inter


def cubic_eigenvalues_bisect(M, tol=1e-13):
    """Roots of det(M - x I) for a 3x3 Hermitian M, located by bisection.

    The characteristic cubic p(x) = x^3 + c2 x^2 + c1 x + c0 has three real
    roots separated by the critical points of p, so each root is bracketed
    analytically and bisected to ``tol``.
    """
    M = np.asarray(M)
    c2 = -np.trace(M).real
    minors = 0.0
    for i in range(3):
        for j in range(i + 1, 3):
            minors += (M[i, i] * M[j, j] - M[i, j] * M[j, i]).real
    c1 = minors
    c0 = -np.linalg.det(M).real  # determinant of a Hermitian matrix is real

    def p(x):
        return ((x + c2) * x + c1) * x + c0

    radius = 1.0 + max(abs(c2), abs(c1), abs(c0))
    lo, hi = -radius - 1.0, radius + 1.0
    # critical points of the cubic bracket its roots
    disc = 4.0 * c2 * c2 - 12.0 * c1
    brackets = []
    if disc > 0:
        t1 = (-2.0 * c2 - math.sqrt(disc)) / 6.0
        t2 = (-2.0 * c2 + math.sqrt(disc)) / 6.0
        if p(t1) > 0.0 > p(t2):
            brackets = [(lo, t1), (t1, t2), (t2, hi)]
    if not brackets:
        # nearly multiple roots: fall back to a sign scan
        xs = np.linspace(lo, hi, 20001)
        vals = p(xs)
        for i in range(len(xs) - 1):
            if vals[i] == 0.0:
                brackets.append((xs[i], xs[i]))
            elif vals[i] * vals[i + 1] < 0.0:
                brackets.append((xs[i], xs[i + 1]))
        brackets = brackets[:3]
        while len(brackets) < 3 and brackets:
            brackets.append(brackets[-1])

    roots = []
    for a, b in brackets:
        fa = p(a)
        for _ in range(200):
            mid = 0.5 * (a + b)
            fm = p(mid)
            if fa * fm <= 0.0:
                b = mid
            else:
                a, fa = mid, fm
            if b - a < tol:
                break
        roots.append(0.5 * (a + b))
    return np.sort(np.array(roots))


def random_hermitian(rng, n=3, scale=1.0):
    A = rng.normal(size=(n, n), scale=scale) + 1j * rng.normal(size=(n, n), scale=scale)
    return 0.5 * (A + A.conj().T)
