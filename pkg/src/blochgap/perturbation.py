"""Periodic perturbations of the waveguide Laplacian and their fiber overlaps.

Five coefficient families are supported, each periodic in the axial
coordinate with the waveguide period:

* ``Potential``             -- multiplication by a real function V
* ``Magnetic``              -- first-order field terms i(A_j d_j + d_j A_j)
* ``BoundaryDeformation2D`` -- strip with boundaries displaced by eps*h_-/h_+
* ``Twist3D``               -- cross-section rotated by the angle eps*theta(x_3)
* ``GeneralSecondOrder``    -- full divergence-form coefficients (A_ij, A_j, A_0)

Potential / magnetic / general coefficients are finite sums of separable
terms ``amplitude * profile(x') * exp(2 pi i m x_n / T)``; boundary and twist
data are finite Fourier series of the axial variable only.  For the two
geometric families the operator acted on here is the first-order term of the
pulled-back form; the solver module assembles the exact form separately.

Overlaps are matrix elements of the fibered operator between the exact basis
functions, ``<L(tau) Psi_left, Psi_right>`` over one cell, with the inner
product linear in the first slot.  Axial integrals are exact; transverse
integrals use the shared Gauss-Legendre rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import expressions
from .bands import BandIndex, Intersection
from .errors import ConsistencyError, InputError
from .forms import CompiledForm, FormTerm, FourierSeries, TransverseBasis
from .geometry import Interval, Rectangle, WaveguideConfig, quadrature_rule, transverse_dim

__all__ = [
    "Profile", "SeparableTerm", "Potential", "Magnetic", "BoundaryDeformation2D",
    "Twist3D", "GeneralSecondOrder", "PerturbationSpec", "CouplingMatrix",
    "fiber_overlap", "coupling_matrix", "magnetic_entries", "deformation_overlap",
    "twist_overlap", "fourier_coefficient", "first_order_terms", "exact_terms",
    "validate_spec", "is_real_operator", "scaled",
]

HERMITICITY_TOL = 1e-10


@dataclass(frozen=True)
class Profile:
    """Real-valued transverse factor; wraps an expression tree or raw callable."""
    fn: Callable
    source: Optional[str] = None

    def __call__(self, *coords):
        return self.fn(*coords)

    @staticmethod
    def from_expression(text: str) -> "Profile":
        tree = expressions.parse(text)

        def fn(*coords):
            return expressions.evaluate(tree, *coords)

        return Profile(fn, text)

    @property
    def uses_x2(self) -> bool:
        if self.source is None:
            return False
        return expressions.uses_x2(expressions.parse(self.source))


@dataclass(frozen=True)
class SeparableTerm:
    """One separable coefficient term amplitude * profile(x') * e^{2 pi i m x_n / T}."""
    amplitude: complex
    mode: int
    profile: Optional[Profile] = None


@dataclass(frozen=True, eq=False)
class Potential:
    terms: Tuple[SeparableTerm, ...]


@dataclass(frozen=True, eq=False)
class Magnetic:
    """Vector potential components A_1..A_n, one term tuple per component."""
    components: Tuple[Tuple[SeparableTerm, ...], ...]


@dataclass(frozen=True, eq=False)
class BoundaryDeformation2D:
    """Two-dimensional strip with walls displaced to eps*h_- and w + eps*h_+."""
    h_minus: FourierSeries
    h_plus: FourierSeries


@dataclass(frozen=True, eq=False)
class Twist3D:
    """Cross-section rotated by the angle eps*theta(x_3) around the axis."""
    theta: FourierSeries


@dataclass(frozen=True, eq=False)
class GeneralSecondOrder:
    """Divergence-form coefficients; ``matrix`` holds the upper triangle (i <= j),
    the lower triangle is the entrywise conjugate."""
    matrix: Mapping[Tuple[int, int], Tuple[SeparableTerm, ...]]
    vector: Mapping[int, Tuple[SeparableTerm, ...]]
    scalar: Tuple[SeparableTerm, ...]

    def matrix_terms(self, i: int, j: int) -> Tuple[SeparableTerm, ...]:
        if (i, j) in self.matrix:
            return tuple(self.matrix[(i, j)])
        if (j, i) in self.matrix:
            return tuple(SeparableTerm(np.conj(t.amplitude), -t.mode, t.profile)
                         for t in self.matrix[(j, i)])
        return ()


PerturbationSpec = Union[Potential, Magnetic, BoundaryDeformation2D,
                         Twist3D, GeneralSecondOrder]


@dataclass(frozen=True)
class CouplingMatrix:
    """2x2 Hermitian matrix of first-order overlaps at one crossing branch.

    Branch 'plus' couples (j,p) and (k,q) at +tau0; branch 'minus' couples
    (j,-p) and (k,-q) at -tau0.
    """
    b11: complex
    b12: complex
    b21: complex
    b22: complex
    branch: str

    def as_array(self) -> np.ndarray:
        return np.array([[self.b11, self.b12], [self.b21, self.b22]])


# ---------------------------------------------------------------------------
# term builders
# ---------------------------------------------------------------------------

def _unit_series(m: int, T: float) -> FourierSeries:
    return FourierSeries({m: 1.0}, T)


def _weight(profile: Optional[Profile]):
    return profile if profile is not None else None


def _product_profile(p1: Optional[Profile], p2: Optional[Profile]) -> Optional[Profile]:
    if p1 is None:
        return p2
    if p2 is None:
        return p1
    return Profile(lambda *xs, a=p1, b=p2: a(*xs) * b(*xs))


def _vector_component_terms(i: int, n: int, terms, T):
    """Form terms of A_i l_i + l_i A_i for one component of a first-order field."""
    out = []
    for t in terms:
        series = _unit_series(t.mode, T)
        if i < n:
            out.append(FormTerm(1j * t.amplitude, _weight(t.profile), series, f"d{i}", "v"))
            out.append(FormTerm(-1j * t.amplitude, _weight(t.profile), series, "v", f"d{i}"))
        else:
            out.append(FormTerm(t.amplitude, _weight(t.profile), series, "n", "v"))
            out.append(FormTerm(t.amplitude, _weight(t.profile), series, "v", "n"))
    return out


def _deformation_width(config: WaveguideConfig) -> float:
    return config.cross_section.width


def _deformation_first_order_terms(spec: BoundaryDeformation2D, config: WaveguideConfig):
    w = _deformation_width(config)
    h = spec.h_plus - spec.h_minus
    dh = h.derivative()
    dhm = spec.h_minus.derivative()
    x1 = lambda a: a
    return [
        FormTerm(-2.0 / w, None, h, "d1", "d1"),
        FormTerm(+1j, None, (1.0 / (2 * w)) * dh, "n", "v"),
        FormTerm(-1j, None, (1.0 / (2 * w)) * dh, "v", "n"),
        FormTerm(-1j, None, dhm, "d1", "n"),
        FormTerm(-1j, x1, (1.0 / w) * dh, "d1", "n"),
        FormTerm(+1j, None, dhm, "n", "d1"),
        FormTerm(+1j, x1, (1.0 / w) * dh, "n", "d1"),
    ]


def _twist_first_order_terms(spec: Twist3D):
    tp = spec.theta.derivative()
    x1 = lambda a, b: a
    x2 = lambda a, b: b
    return [
        FormTerm(+1j, x2, tp, "d1", "n"),
        FormTerm(-1j, x2, tp, "n", "d1"),
        FormTerm(-1j, x1, tp, "d2", "n"),
        FormTerm(+1j, x1, tp, "n", "d2"),
    ]


def first_order_terms(spec: PerturbationSpec, config: WaveguideConfig):
    """Form terms of the leading (epsilon-independent) perturbation operator."""
    T = config.period
    n = config.dimension
    if isinstance(spec, Potential):
        return [FormTerm(t.amplitude, _weight(t.profile), _unit_series(t.mode, T), "v", "v")
                for t in spec.terms]
    if isinstance(spec, Magnetic):
        out = []
        for i, comp in enumerate(spec.components, start=1):
            out.extend(_vector_component_terms(i, n, comp, T))
        return out
    if isinstance(spec, GeneralSecondOrder):
        out = []
        for i in range(1, n + 1):       # v side carries l_i
            for m in range(1, n + 1):   # u side carries l_m
                for t in spec.matrix_terms(i, m):
                    cu = 1j if m < n else 1.0
                    cv = -1j if i < n else 1.0
                    opu = f"d{m}" if m < n else "n"
                    opv = f"d{i}" if i < n else "n"
                    out.append(FormTerm(cu * cv * t.amplitude, _weight(t.profile),
                                        _unit_series(t.mode, T), opu, opv))
        for i in range(1, n + 1):
            out.extend(_vector_component_terms(i, n, spec.vector.get(i, ()), T))
        out.extend(FormTerm(t.amplitude, _weight(t.profile), _unit_series(t.mode, T), "v", "v")
                   for t in spec.scalar)
        return out
    if isinstance(spec, BoundaryDeformation2D):
        return _deformation_first_order_terms(spec, config)
    if isinstance(spec, Twist3D):
        return _twist_first_order_terms(spec)
    raise InputError(f"unknown perturbation {spec!r}")


def _real_series_callable(series: FourierSeries):
    return lambda x: np.real(series(x))


def _deformation_exact_terms(spec, config, eps, max_mode):
    """All powers of eps of the pulled-back metric form, minus the flat part.

    Every coefficient function below carries an explicit factor of eps, so at
    eps = 0 the assembled correction vanishes identically and the fiber matrix
    is exactly diagonal.
    """
    w = _deformation_width(config)
    T = config.period
    hv = _real_series_callable(spec.h_plus - spec.h_minus)
    dhv = _real_series_callable((spec.h_plus - spec.h_minus).derivative())
    dhmv = _real_series_callable(spec.h_minus.derivative())
    dd = lambda x: 1.0 + eps * hv(x) / w
    F = lambda fn: FourierSeries.from_callable(fn, T, max_mode)
    x1 = lambda a: a
    x1sq = lambda a: a * a
    e2 = eps * eps
    return [
        # transverse kinetic block: (A11 / det - 1) psi' psi'
        FormTerm(1.0, None, F(lambda x: (e2 * dhmv(x) ** 2 - 2 * eps * hv(x) / w
                                         - e2 * hv(x) ** 2 / w ** 2) / dd(x) ** 2), "d1", "d1"),
        FormTerm(1.0, x1, F(lambda x: 2 * e2 * dhmv(x) * dhv(x) / (w * dd(x) ** 2)), "d1", "d1"),
        FormTerm(1.0, x1sq, F(lambda x: e2 * dhv(x) ** 2 / (w ** 2 * dd(x) ** 2)), "d1", "d1"),
        # shear block
        FormTerm(-1j * eps, None, F(lambda x: dhmv(x) / dd(x)), "d1", "n"),
        FormTerm(-1j * eps, x1, F(lambda x: dhv(x) / (w * dd(x))), "d1", "n"),
        FormTerm(+1j * eps, None, F(lambda x: dhmv(x) / dd(x)), "n", "d1"),
        FormTerm(+1j * eps, x1, F(lambda x: dhv(x) / (w * dd(x))), "n", "d1"),
        FormTerm(1.0, None, F(lambda x: e2 * dhmv(x) * dhv(x) / (2 * w * dd(x) ** 2)), "d1", "v"),
        FormTerm(1.0, x1, F(lambda x: e2 * dhv(x) ** 2 / (2 * w ** 2 * dd(x) ** 2)), "d1", "v"),
        FormTerm(1.0, None, F(lambda x: e2 * dhmv(x) * dhv(x) / (2 * w * dd(x) ** 2)), "v", "d1"),
        FormTerm(1.0, x1, F(lambda x: e2 * dhv(x) ** 2 / (2 * w ** 2 * dd(x) ** 2)), "v", "d1"),
        # axial block: the density factor (det^{-1/2}) derivatives
        FormTerm(+1j * eps, None, F(lambda x: dhv(x) / (2 * w * dd(x))), "n", "v"),
        FormTerm(-1j * eps, None, F(lambda x: dhv(x) / (2 * w * dd(x))), "v", "n"),
        FormTerm(1.0, None, F(lambda x: e2 * dhv(x) ** 2 / (4 * w ** 2 * dd(x) ** 2)), "v", "v"),
    ]


def _twist_exact_terms(spec, eps):
    tp = spec.theta.derivative()
    tp2 = tp * tp
    x1 = lambda a, b: a
    x2 = lambda a, b: b
    x1x2 = lambda a, b: a * b
    x1sq = lambda a, b: a * a
    x2sq = lambda a, b: b * b
    e2 = eps * eps
    return [
        FormTerm(+1j * eps, x2, tp, "d1", "n"),
        FormTerm(-1j * eps, x2, tp, "n", "d1"),
        FormTerm(-1j * eps, x1, tp, "d2", "n"),
        FormTerm(+1j * eps, x1, tp, "n", "d2"),
        FormTerm(e2, x2sq, tp2, "d1", "d1"),
        FormTerm(e2, x1sq, tp2, "d2", "d2"),
        FormTerm(-e2, x1x2, tp2, "d1", "d2"),
        FormTerm(-e2, x1x2, tp2, "d2", "d1"),
    ]


def exact_terms(spec: PerturbationSpec, config: WaveguideConfig, epsilon: float,
                max_mode: int):
    """Form terms of the full perturbation at finite epsilon.

    Additive families enter as eps * L0 (plus the eps^2 |A|^2 completion of
    the magnetic square); the geometric families contribute every power of
    eps so the solver sees the honest operator.  The returned terms are the
    correction to the flat diagonal Lambda_{j,p}(tau).
    """
    T = config.period
    if isinstance(spec, (Potential, GeneralSecondOrder)):
        return [FormTerm(epsilon * t.coeff, t.weight, t.longit, t.op_u, t.op_v)
                for t in first_order_terms(spec, config)]
    if isinstance(spec, Magnetic):
        out = [FormTerm(epsilon * t.coeff, t.weight, t.longit, t.op_u, t.op_v)
               for t in first_order_terms(spec, config)]
        e2 = epsilon * epsilon
        for comp in spec.components:
            for t1 in comp:
                for t2 in comp:
                    out.append(FormTerm(e2 * t1.amplitude * t2.amplitude,
                                        _product_profile(t1.profile, t2.profile),
                                        _unit_series(t1.mode + t2.mode, T), "v", "v"))
        return out
    if isinstance(spec, BoundaryDeformation2D):
        return _deformation_exact_terms(spec, config, epsilon, max_mode)
    if isinstance(spec, Twist3D):
        return _twist_exact_terms(spec, epsilon)
    raise InputError(f"unknown perturbation {spec!r}")


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def _sample_terms(terms, config, xn):
    """Evaluate a separable-term sum on (transverse nodes) x (axial samples)."""
    rule = quadrature_rule(config.cross_section, 8)
    if transverse_dim(config.cross_section) == 1:
        coords = (rule.points,)
    else:
        coords = (rule.points[:, 0], rule.points[:, 1])
    total = np.zeros((len(rule.weights), len(xn)), dtype=complex)
    for t in terms:
        prof = np.ones(len(rule.weights)) if t.profile is None else np.asarray(t.profile(*coords))
        total += t.amplitude * np.outer(prof, np.exp(2j * np.pi * t.mode * xn / config.period))
    return total


def _require_real_terms(name, terms, config, tol=1e-10):
    if not terms:
        return
    xn = np.linspace(0.0, config.period, 17)[:-1]
    vals = _sample_terms(terms, config, xn)
    scale = max(1.0, float(np.max(np.abs(vals))))
    if float(np.max(np.abs(vals.imag))) > tol * scale:
        raise InputError(f"{name} must be a real-valued function")


def _require_profile_dim(name, terms, config):
    if transverse_dim(config.cross_section) == 1:
        for t in terms:
            if t.profile is not None and t.profile.uses_x2:
                raise InputError(f"{name}: profile uses 'x2' but the cross-section is 1d")


def validate_spec(spec: PerturbationSpec, config: WaveguideConfig) -> None:
    """Check dimension compatibility and realness constraints of a spec."""
    _spec_ok(spec, config)


@lru_cache(maxsize=256)
def _spec_ok(spec, config) -> bool:
    _validate_impl(spec, config)
    return True


def _validate_impl(spec: PerturbationSpec, config: WaveguideConfig) -> None:
    n = config.dimension
    if isinstance(spec, Potential):
        _require_profile_dim("potential", spec.terms, config)
        _require_real_terms("potential", spec.terms, config)
    elif isinstance(spec, Magnetic):
        if len(spec.components) != n:
            raise InputError(
                f"magnetic field needs {n} components for dimension {n}, "
                f"got {len(spec.components)}")
        for i, comp in enumerate(spec.components, start=1):
            _require_profile_dim(f"A_{i}", comp, config)
            _require_real_terms(f"A_{i}", comp, config)
    elif isinstance(spec, BoundaryDeformation2D):
        if n != 2 or not isinstance(config.cross_section, Interval):
            raise InputError("boundary deformation requires a 2d waveguide (interval cross-section)")
        for name, s in (("h_minus", spec.h_minus), ("h_plus", spec.h_plus)):
            if abs(s.period - config.period) > 1e-12 * config.period:
                raise InputError(f"{name} period differs from the waveguide period")
            if not s.is_real():
                raise InputError(f"{name} must be a real-valued function")
    elif isinstance(spec, Twist3D):
        if n != 3 or not isinstance(config.cross_section, Rectangle):
            raise InputError("twist requires a 3d waveguide (rectangle cross-section)")
        if abs(spec.theta.period - config.period) > 1e-12 * config.period:
            raise InputError("theta period differs from the waveguide period")
        if not spec.theta.is_real():
            raise InputError("theta must be a real-valued function")
    elif isinstance(spec, GeneralSecondOrder):
        for (i, j) in spec.matrix:
            if not (1 <= i <= n and 1 <= j <= n):
                raise InputError(f"matrix coefficient index {(i, j)} out of range for dimension {n}")
            if i > j:
                raise InputError(f"matrix coefficients are stored upper-triangular, got {(i, j)}")
            _require_profile_dim(f"A_{i}{j}", spec.matrix[(i, j)], config)
        for (i, j) in spec.matrix:
            if i == j:
                _require_real_terms(f"A_{i}{i}", spec.matrix[(i, j)], config)
        for i in spec.vector:
            if not 1 <= i <= n:
                raise InputError(f"vector coefficient index {i} out of range for dimension {n}")
            _require_profile_dim(f"A_{i}", spec.vector[i], config)
            _require_real_terms(f"A_{i}", spec.vector[i], config)
        _require_real_terms("A_0", spec.scalar, config)
        _require_profile_dim("A_0", spec.scalar, config)
    else:
        raise InputError(f"unknown perturbation {spec!r}")


def is_real_operator(spec: PerturbationSpec, config: WaveguideConfig) -> bool:
    """True iff the perturbation, written out, has real coefficients.

    First-order field terms carry a factor i, so a magnetic perturbation is
    real only when the field vanishes; the geometric families and real
    potentials are always real.
    """
    if isinstance(spec, (Potential, BoundaryDeformation2D, Twist3D)):
        return True
    if isinstance(spec, Magnetic):
        return all(len(c) == 0 for c in spec.components)
    if isinstance(spec, GeneralSecondOrder):
        if any(spec.vector.get(i) for i in spec.vector):
            return False
        xn = np.linspace(0.0, config.period, 17)[:-1]
        for key in spec.matrix:
            vals = _sample_terms(spec.matrix[key], config, xn)
            scale = max(1.0, float(np.max(np.abs(vals))))
            if float(np.max(np.abs(vals.imag))) > 1e-10 * scale:
                return False
        return True
    raise InputError(f"unknown perturbation {spec!r}")


def scaled(spec: PerturbationSpec, factor: float) -> PerturbationSpec:
    """The same perturbation with all coefficient data multiplied by ``factor``."""
    def sc(terms):
        return tuple(SeparableTerm(factor * t.amplitude, t.mode, t.profile) for t in terms)

    if isinstance(spec, Potential):
        return Potential(sc(spec.terms))
    if isinstance(spec, Magnetic):
        return Magnetic(tuple(sc(c) for c in spec.components))
    if isinstance(spec, BoundaryDeformation2D):
        return BoundaryDeformation2D(factor * spec.h_minus, factor * spec.h_plus)
    if isinstance(spec, Twist3D):
        return Twist3D(factor * spec.theta)
    if isinstance(spec, GeneralSecondOrder):
        return GeneralSecondOrder({k: sc(v) for k, v in spec.matrix.items()},
                                  {k: sc(v) for k, v in spec.vector.items()},
                                  sc(spec.scalar))
    raise InputError(f"unknown perturbation {spec!r}")


# ---------------------------------------------------------------------------
# overlaps
# ---------------------------------------------------------------------------

def default_quad_points(jmax: int) -> int:
    return max(32, 4 * jmax + 16)


@lru_cache(maxsize=32)
def _compiled_first_order(spec, config, jmax, quad_points):
    basis = TransverseBasis(config.cross_section, jmax, quad_points)
    return CompiledForm(first_order_terms(spec, config), basis, config.period)


def fiber_overlap(spec: PerturbationSpec, config: WaveguideConfig, tau: float,
                  left: BandIndex, right: BandIndex,
                  quad_points: Optional[int] = None) -> complex:
    """<L0(tau) Psi_left, Psi_right> over one cell.

    Axial integrals are exact for the trigonometric-polynomial coefficients;
    transverse integrals use Gauss-Legendre quadrature sized to the mode order.
    """
    validate_spec(spec, config)
    jmax = max(left.j, right.j)
    qp = quad_points or default_quad_points(jmax)
    form = _compiled_first_order(spec, config, jmax, qp)
    return form.element(tau, (left.j, left.p), (right.j, right.p))


def coupling_matrix(spec: PerturbationSpec, config: WaveguideConfig,
                    inter: Intersection, branch: str = "plus",
                    quad_points: Optional[int] = None) -> CouplingMatrix:
    """2x2 coupling matrix at +tau0 ('plus') or at -tau0 with mirrored
    longitudinal indices ('minus')."""
    if branch not in ("plus", "minus"):
        raise InputError(f"branch must be 'plus' or 'minus', got {branch!r}")
    sgn = 1 if branch == "plus" else -1
    tau = sgn * inter.tau0
    one = BandIndex(inter.first.j, sgn * inter.first.p)
    two = BandIndex(inter.second.j, sgn * inter.second.p)
    b11 = fiber_overlap(spec, config, tau, one, one, quad_points)
    b12 = fiber_overlap(spec, config, tau, one, two, quad_points)
    b21 = fiber_overlap(spec, config, tau, two, one, quad_points)
    b22 = fiber_overlap(spec, config, tau, two, two, quad_points)
    scale = max(1.0, abs(b11), abs(b12), abs(b22))
    if abs(b21 - np.conj(b12)) > HERMITICITY_TOL * scale \
            or abs(b11.imag) > HERMITICITY_TOL * scale \
            or abs(b22.imag) > HERMITICITY_TOL * scale:
        raise ConsistencyError("coupling matrix is not Hermitian within tolerance")
    return CouplingMatrix(b11, b12, b21, b22, branch)


def _transverse_nodes(config):
    rule = quadrature_rule(config.cross_section, default_quad_points(8))
    if transverse_dim(config.cross_section) == 1:
        return (rule.points,), rule.weights
    return (rule.points[:, 0], rule.points[:, 1]), rule.weights


def magnetic_entries(spec: Magnetic, config: WaveguideConfig,
                     inter: Intersection, branch: str = "plus"):
    """Closed-form coupling entries for a magnetic field, plus the axial-mean
    diagnostics a11 = (1/T) int A_n psi_j^2, a22 likewise for psi_k.

    The off-diagonal entry combines the transverse circulation of (A_1..A_{n-1})
    with the resonant Fourier coefficient of A_n; each diagonal entry is
    -2 (2 pi p / T + tau) times the axial mean of A_n against the mode square.
    """
    if not isinstance(spec, Magnetic):
        raise InputError("magnetic_entries requires a Magnetic spec")
    validate_spec(spec, config)
    if branch not in ("plus", "minus"):
        raise InputError(f"branch must be 'plus' or 'minus', got {branch!r}")
    sgn = 1 if branch == "plus" else -1
    tau = sgn * inter.tau0
    j, p = inter.first.j, sgn * inter.first.p
    k, q = inter.second.j, sgn * inter.second.p
    T = config.period
    n = config.dimension
    modes = config.modes(max(j, k))
    coords, wts = _transverse_nodes(config)
    psi_j = modes[j - 1].psi(*coords)
    psi_k = modes[k - 1].psi(*coords)
    grad_j = modes[j - 1].grad_psi(*coords)
    grad_k = modes[k - 1].grad_psi(*coords)

    def tint(values):
        return float(np.sum(wts * values))

    def resonant(comp, m):
        """Sum of amplitude * profile for terms with axial index m."""
        out = None
        for t in comp:
            if t.mode == m:
                prof = np.ones_like(wts) if t.profile is None else np.asarray(t.profile(*coords))
                out = t.amplitude * prof if out is None else out + t.amplitude * prof
        return out

    m = q - p  # resonant axial index for the (p, q) entry
    b12 = 0.0 + 0.0j
    for i in range(1, n):
        prof = resonant(spec.components[i - 1], m)
        if prof is not None:
            circ = grad_j[i - 1] * psi_k - grad_k[i - 1] * psi_j
            b12 += 1j * tint(prof * circ)
    prof_n = resonant(spec.components[n - 1], m)
    if prof_n is not None:
        b12 += -2.0 * (math.pi * (p + q) / T + tau) * tint(prof_n * psi_j * psi_k)
    mean_n_j = resonant(spec.components[n - 1], 0)
    a11 = tint(mean_n_j * psi_j ** 2) if mean_n_j is not None else 0.0
    a22 = tint(mean_n_j * psi_k ** 2) if mean_n_j is not None else 0.0
    b11 = -2.0 * (2 * math.pi * p / T + tau) * a11
    b22 = -2.0 * (2 * math.pi * q / T + tau) * a22
    coupling = CouplingMatrix(complex(b11), b12, np.conj(b12), complex(b22), branch)
    return coupling, {"a11": float(a11), "a22": float(a22)}


# exact axial-derivative cross integrals on the unit interval:
#   S1(j,k) = int_0^1 psi_j psi_k' dx,  X1(j,k) = int_0^1 x psi_j psi_k' dx
def _S1(j, k):
    if j == k or (j + k) % 2 == 0:
        return 0.0
    return 4.0 * j * k / (j * j - k * k)


def _X1(j, k):
    if j == k:
        return -0.5
    return (-1.0) ** (j + k + 1) * 2.0 * j * k / (j * j - k * k)


def deformation_overlap(spec: BoundaryDeformation2D, config: WaveguideConfig,
                        inter: Intersection):
    """Closed-form first-order overlap for a deformed strip, with the
    width-change (I1, I2) and sideways-shift (I3) pieces reported separately.

    Returns ``(value, {"I1": .., "I2": .., "I3": ..})`` where
    value = -(I1 + I2 + I3)/T.
    """
    if not isinstance(spec, BoundaryDeformation2D):
        raise InputError("deformation_overlap requires a BoundaryDeformation2D spec")
    validate_spec(spec, config)
    w = _deformation_width(config)
    T = config.period
    j, p = inter.first.j, inter.first.p
    k, q = inter.second.j, inter.second.p
    tau = inter.tau0
    m = p - q
    th_p = tau + 2 * math.pi * p / T
    th_q = tau + 2 * math.pi * q / T
    h = spec.h_plus - spec.h_minus
    h_hat = h.paper_hat(m)
    dh_hat = h.derivative().paper_hat(m)
    dhm_hat = spec.h_minus.derivative().paper_hat(m)
    lam_j = config.modes(j)[j - 1].eigenvalue
    delta = 1.0 if j == k else 0.0
    I1 = (2.0 * math.pi ** 2 * m ** 2 / (w * T ** 2)) * h_hat * delta
    I2 = (2.0 * lam_j / w) * h_hat * delta
    S = _S1(j, k) / w
    Sb = _S1(k, j) / w
    X = _X1(j, k)
    Xb = _X1(k, j)
    I3 = 1j * (dhm_hat * (th_p * S - th_q * Sb) + (dh_hat / w) * (th_p * X - th_q * Xb))
    value = -(I1 + I2 + I3) / T
    return value, {"I1": complex(I1), "I2": complex(I2), "I3": complex(I3)}


def twist_overlap(spec: Twist3D, config: WaveguideConfig, inter: Intersection):
    """Closed-form first-order overlap for a twisted rod: value = a * (b - c).

    ``a`` is the axial factor (2 pi (p-q)/T^2) * theta_hat_{p-q}; ``b`` is a
    boundary integral that vanishes for Dirichlet modes and is evaluated and
    checked numerically; ``c`` is the angular-momentum-like transverse
    integral times (2 pi (p+q)/T + 2 tau0).  A symmetric crossing (equal
    transverse indices) gives c = 0, reported with ``degenerate = True``.
    """
    if not isinstance(spec, Twist3D):
        raise InputError("twist_overlap requires a Twist3D spec")
    validate_spec(spec, config)
    T = config.period
    j, p = inter.first.j, inter.first.p
    k, q = inter.second.j, inter.second.p
    tau = inter.tau0
    m = p - q
    a = (2 * math.pi * m / T ** 2) * spec.theta.paper_hat(m)
    modes = config.modes(max(j, k))
    coords, wts = _transverse_nodes(config)
    x1, x2 = coords
    psi_j = modes[j - 1].psi(*coords)
    psi_k = modes[k - 1].psi(*coords)
    gj = modes[j - 1].grad_psi(*coords)
    gk = modes[k - 1].grad_psi(*coords)
    th_p = tau + 2 * math.pi * p / T
    # b: integral of the total derivative x2 d1(psi_j psi_k) - x1 d2(psi_j psi_k)
    total = float(np.sum(wts * (x2 * (gj[0] * psi_k + psi_j * gk[0])
                                - x1 * (gj[1] * psi_k + psi_j * gk[1]))))
    b = 1j * th_p * total
    if abs(total) > 1e-8:
        raise ConsistencyError(
            f"twist boundary integral should vanish for Dirichlet modes, got {total:.3e}")
    c_int = float(np.sum(wts * (x2 * gj[0] * psi_k - x1 * gj[1] * psi_k)))
    c = (2 * math.pi * (p + q) / T + 2 * tau) * c_int
    degenerate = j == k
    value = 0.0 + 0.0j if degenerate else a * (b - c)
    return value, {"a": complex(a), "b": complex(b), "c": complex(c),
                   "degenerate": degenerate}


def fourier_coefficient(f, m: int, period: float, degree_hint: int = 8) -> complex:
    """``int_0^T exp(2 pi i m x / T) f(x) dx``; exact for Fourier series,
    trapezoid rule otherwise."""
    if isinstance(f, FourierSeries):
        return f.paper_hat(m)
    n = max(64, 8 * (abs(m) + degree_hint))
    x = np.arange(n) * (period / n)
    vals = np.asarray(f(x), dtype=complex)
    return complex(np.sum(vals * np.exp(2j * np.pi * m * x / period)) * (period / n))
