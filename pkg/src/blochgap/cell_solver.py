"""Galerkin oracle: dense fiber eigenproblems, zone sweeps, gap measurement.

The fiber operator at quasi-momentum tau is discretized in the exact
unperturbed eigenbasis truncated to transverse indices ``j <= J`` and
longitudinal indices ``|p| <= P``.  In that basis the unperturbed part is
the exact diagonal ``Lambda_{j,p}(tau)`` and the perturbation enters through
the separable form terms of :mod:`blochgap.perturbation`; for the geometric
families those terms carry every power of epsilon, so the measured spectra
are those of the honest operator, not of its linearization.

Gaps are read off sorted eigenvalues alone: a gap is a property of the
spectrum as a set, so no eigenvector continuation or band tracking is
needed.  Edge extremizers are refined by golden-section search seeded by the
first-order prediction.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .bands import BandIndex, Intersection, band_range
from .errors import (AmbiguousWindowError, GapNotFoundError, InputError,
                     NotHermitianError)
from .forms import CompiledForm, TransverseBasis, hermiticity_defect
from .geometry import WaveguideConfig
from .perturbation import (PerturbationSpec, default_quad_points, exact_terms,
                           validate_spec)
from .predictor import GapPrediction, predict_gap

__all__ = ["Truncation", "BandStructure", "GapReport", "ConvergenceReport",
           "FiberAssembler", "assemble_fiber_matrix", "hermitian_eigenvalues",
           "band_structure", "detect_gap", "convergence_study", "loglog_slope"]

HERMITICITY_TOL = 1e-10
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Truncation:
    """Galerkin cutoffs: transverse modes 1..J, longitudinal indices |p| <= P."""
    J: int
    P: int
    quad_points: Optional[int] = None

    def __post_init__(self):
        if self.J < 1 or self.P < 0:
            raise InputError(f"invalid truncation J={self.J}, P={self.P}")

    @property
    def size(self) -> int:
        return self.J * (2 * self.P + 1)

    @staticmethod
    def for_intersection(config: WaveguideConfig, inter: Intersection,
                         safety: float = 4.0,
                         quad_points: Optional[int] = None) -> "Truncation":
        """Cutoffs with both basis tails at least ``safety`` times the crossing
        energy, and a margin past the crossing indices themselves."""
        target = safety * inter.lambda0
        modes = config.modes_below(target, extra=2)
        J = max(len(modes), inter.first.j + 2, inter.second.j + 2)
        T = config.period
        P = int(math.ceil(T * math.sqrt(target) / (2.0 * math.pi) + 0.5))
        P = max(P, abs(inter.first.p) + 2, abs(inter.second.p) + 2)
        return Truncation(J, P, quad_points)


class FiberAssembler:
    """Compiled fiber matrices for one (spec, config, truncation, epsilon)."""

    def __init__(self, spec: PerturbationSpec, config: WaveguideConfig,
                 trunc: Truncation, epsilon: float):
        validate_spec(spec, config)
        if epsilon < 0:
            raise InputError(f"epsilon must be nonnegative, got {epsilon}")
        self.config = config
        self.trunc = trunc
        self.epsilon = float(epsilon)
        qp = trunc.quad_points or default_quad_points(trunc.J)
        basis = TransverseBasis(config.cross_section, trunc.J, qp)
        # axial resolution for non-polynomial coefficient functions
        max_mode = 2 * trunc.P + 16
        terms = exact_terms(spec, config, self.epsilon, max_mode)
        self._form = CompiledForm(terms, basis, config.period, longitudinal_cut=trunc.P)
        self._lams = np.array([m.eigenvalue for m in basis.modes])

    def matrix(self, tau: float) -> np.ndarray:
        """Dense Hermitian fiber matrix; raises on a Hermiticity defect."""
        M = self._form.matrix(tau)
        J, P = self.trunc.J, self.trunc.P
        ps = np.arange(-P, P + 1)
        shifted = (tau + 2.0 * np.pi * ps / self.config.period) ** 2
        diag = (self._lams[:, None] + shifted[None, :]).ravel()
        M[np.diag_indices_from(M)] += diag
        defect = hermiticity_defect(M)
        scale = max(1.0, float(np.max(np.abs(M))))
        if defect > HERMITICITY_TOL * scale:
            raise NotHermitianError(
                f"assembled fiber matrix has Hermiticity defect {defect:.3e}")
        return M

    def eigenvalues(self, tau: float) -> np.ndarray:
        return hermitian_eigenvalues(self.matrix(tau))


def assemble_fiber_matrix(spec: PerturbationSpec, config: WaveguideConfig,
                          tau: float, epsilon: float, trunc: Truncation) -> np.ndarray:
    return FiberAssembler(spec, config, trunc, epsilon).matrix(tau)


def hermitian_eigenvalues(M: np.ndarray, tol: float = HERMITICITY_TOL) -> np.ndarray:
    """All eigenvalues of a Hermitian matrix, ascending."""
    defect = hermiticity_defect(M)
    scale = max(1.0, float(np.max(np.abs(M))) if M.size else 1.0)
    if defect > tol * scale:
        raise NotHermitianError(f"matrix is not Hermitian: defect {defect:.3e}")
    return np.linalg.eigvalsh(0.5 * (M + M.conj().T))


def _sweep(assembler: FiberAssembler, taus: np.ndarray,
           threads: Optional[int] = None) -> List[np.ndarray]:
    """Eigenvalues at every grid point, assembled in grid order regardless of
    completion order."""
    if threads is not None and threads == 0:
        import os
        threads = os.cpu_count() or 1
    if threads is None or threads <= 1 or len(taus) < 4:
        return [assembler.eigenvalues(t) for t in taus]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(assembler.eigenvalues, taus))


@dataclass(frozen=True)
class BandStructure:
    """Eigenvalue table over a quasi-momentum grid, columns ascending per row."""
    tau_grid: np.ndarray
    energies: np.ndarray  # shape (len(tau_grid), m_max)
    epsilon: float
    truncation: Truncation


def band_structure(spec: PerturbationSpec, config: WaveguideConfig, epsilon: float,
                   tau_grid: Sequence[float], trunc: Truncation,
                   m_max: int = 12, threads: Optional[int] = None) -> BandStructure:
    """Sweep the fiber eigenproblem over ``tau_grid``."""
    taus = np.asarray(tau_grid, dtype=float)
    edge = config.brillouin_edge
    if taus.size and (taus.min() <= -edge - 1e-12 or taus.max() > edge + 1e-12):
        raise InputError("tau grid must lie inside (-pi/T, pi/T]")
    assembler = FiberAssembler(spec, config, trunc, epsilon)
    rows = _sweep(assembler, taus, threads)
    m = min(m_max, trunc.size)
    table = np.array([r[:m] for r in rows]) if taus.size else np.zeros((0, m))
    return BandStructure(taus, table, epsilon, trunc)


@dataclass(frozen=True)
class GapReport:
    """Measured gap around one energy window."""
    found: bool
    alpha_l: float
    alpha_r: float
    tau_l: float
    tau_r: float
    width: float
    epsilon: float


def _ambiguity_check(config: WaveguideConfig, window: Tuple[float, float]) -> None:
    lo, hi = window
    modes = config.modes_below(hi, extra=2)
    T = config.period
    pmax = int(math.ceil(T * math.sqrt(max(hi, 0.0)) / (2.0 * math.pi) + 0.5)) + 1
    touching = []
    for mode in modes:
        if mode.eigenvalue > hi:
            continue
        for p in range(-pmax, pmax + 1):
            rlo, rhi = band_range(config, BandIndex(mode.index, p))
            if rlo <= hi and rhi >= lo:
                touching.append((mode.index, p))
    if len(touching) > 2:
        raise AmbiguousWindowError(
            f"window {window} meets {len(touching)} unperturbed bands: {touching}")


def _golden_max(f, a: float, b: float, xtol: float) -> Tuple[float, float]:
    """Golden-section maximization of a unimodal function on [a, b]."""
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > xtol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def detect_gap(spec: PerturbationSpec, config: WaveguideConfig, epsilon: float,
               window: Tuple[float, float], trunc: Truncation,
               tau_points: int = 256,
               prediction: Optional[GapPrediction] = None,
               refine_tol_factor: float = 1e-4,
               min_width: Optional[float] = None,
               threads: Optional[int] = None) -> GapReport:
    """Measure the spectral gap inside ``window``.

    A coarse full-zone sweep locates the global maximum of the band below
    the window midpoint and the minimum of the band above it; golden-section
    refinement then sharpens both extremizers, seeded at the coarse argmax
    and, when a prediction is supplied, at the predicted extremizers and
    their mirrors.
    """
    lo, hi = window
    if not lo < hi:
        raise InputError(f"empty window {window}")
    _ambiguity_check(config, window)
    mid = 0.5 * (lo + hi)
    assembler = FiberAssembler(spec, config, trunc, epsilon)
    edge = config.brillouin_edge
    taus = np.linspace(-edge, edge, tau_points, endpoint=False) + edge / tau_points

    rows = _sweep(assembler, taus, threads)

    def below(evs):
        sel = evs[evs < mid]
        return sel[-1] if sel.size else -np.inf

    def above(evs):
        sel = evs[evs >= mid]
        return sel[0] if sel.size else np.inf

    lower = np.array([below(r) for r in rows])
    upper = np.array([above(r) for r in rows])

    def f_lower(tau):
        return below(assembler.eigenvalues(tau))

    def f_upper_neg(tau):
        return -above(assembler.eigenvalues(tau))

    spacing = taus[1] - taus[0]
    xtol = max(refine_tol_factor * epsilon, 1e-13) if epsilon > 0 else 1e-10

    def refine(fun, seeds):
        best_x, best_v = None, -np.inf
        for s in seeds:
            x, v = _golden_max(fun, s - 1.5 * spacing, s + 1.5 * spacing, xtol)
            if v > best_v:
                best_x, best_v = x, v
        return best_x, best_v

    seeds_l = [float(taus[np.argmax(lower)])]
    seeds_r = [float(taus[np.argmin(upper)])]
    if prediction is not None:
        tl, tr = prediction.extremizers(epsilon)
        seeds_l += [tl, -tl]
        seeds_r += [tr, -tr]

    tau_l, alpha_l = refine(f_lower, seeds_l)
    tau_r, neg_alpha_r = refine(f_upper_neg, seeds_r)
    alpha_r = -neg_alpha_r

    if min_width is None:
        # a split narrower than the refinement resolution times the band
        # slope is indistinguishable from an exact crossing
        lipschitz = 2.0 * (edge + 2.0 * np.pi * trunc.P / config.period) + 1.0
        min_width = max(6.0 * xtol * lipschitz, 1e-10 * max(1.0, abs(mid)))
    found = bool(np.isfinite(alpha_l) and np.isfinite(alpha_r)
                 and alpha_r - alpha_l > min_width)
    width = float(alpha_r - alpha_l) if found else 0.0
    return GapReport(found, float(alpha_l), float(alpha_r),
                     float(tau_l), float(tau_r), width, epsilon)


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log(y) against log(x)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.maximum(np.asarray(ys, dtype=float), 1e-300)
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


@dataclass(frozen=True)
class ConvergenceReport:
    """Edge and extremizer errors of the first-order prediction over an
    epsilon ladder, with fitted log-log convergence slopes."""
    epsilons: Tuple[float, ...]
    edge_errors_left: Tuple[float, ...]
    edge_errors_right: Tuple[float, ...]
    extremizer_errors_left: Tuple[float, ...]
    extremizer_errors_right: Tuple[float, ...]
    widths: Tuple[float, ...]
    slopes: dict
    prediction: GapPrediction
    reports: Tuple[GapReport, ...]


def _default_window(config: WaveguideConfig, pred: GapPrediction,
                    epsilon: float) -> Tuple[float, float]:
    """Window of ten predicted widths, clamped into the isolated energy zone."""
    lam0 = pred.lambda0
    span = pred.beta_r - pred.beta_l
    half = max(10.0 * epsilon * span,
               2.0 * epsilon * max(abs(pred.beta_l), abs(pred.beta_r)))
    pair = (pred.intersection.first, pred.intersection.second)
    iso = _isolation_distance(config, lam0, pair)
    # stay inside the isolated zone but never collapse to a sliver
    floor = 0.5 * iso if iso > 0 else 0.05 * max(1.0, abs(lam0))
    if iso > 0:
        half = min(half, 0.9 * iso)
    half = max(half, floor,
               1.25 * epsilon * max(abs(pred.beta_l), abs(pred.beta_r), span))
    return lam0 - half, lam0 + half


def _isolation_distance(config: WaveguideConfig, lambda0: float, pair) -> float:
    """Distance from lambda0 to the nearest foreign band range."""
    T = config.period
    probe = 2.0 * abs(lambda0) + 10.0
    modes = config.modes_below(probe, extra=2)
    pmax = int(math.ceil(T * math.sqrt(probe) / (2.0 * math.pi) + 0.5)) + 1
    skip = set(pair)
    best = math.inf
    for mode in modes:
        for p in range(-pmax, pmax + 1):
            idx = BandIndex(mode.index, p)
            if idx in skip:
                continue
            rlo, rhi = band_range(config, idx)
            if rlo <= lambda0 <= rhi:
                return 0.0
            best = min(best, abs(rlo - lambda0), abs(rhi - lambda0))
    return best if math.isfinite(best) else 0.0


def convergence_study(spec: PerturbationSpec, config: WaveguideConfig,
                      inter: Intersection, epsilons: Sequence[float],
                      trunc: Optional[Truncation] = None,
                      tau_points: int = 256,
                      threads: Optional[int] = None) -> ConvergenceReport:
    """Measure prediction errors over a decreasing epsilon ladder.

    Edge errors compare the measured gap endpoints with
    ``Lambda0 + eps * beta``; extremizer errors compare the measured
    extremizing quasi-momenta with ``tau_* + eps * gamma`` (against the
    mirror as well when both signs are extremal).  Slopes are least-squares
    fits in log-log scale.
    """
    eps_list = sorted(set(float(e) for e in epsilons), reverse=True)
    if len(eps_list) < 3:
        raise InputError("convergence study needs at least three epsilon values")
    if trunc is None:
        trunc = Truncation.for_intersection(config, inter)
    pred = predict_gap(spec, config, inter, eps_list[0])

    edge_l, edge_r, ext_l, ext_r, widths, reports = [], [], [], [], [], []
    for eps in eps_list:
        window = _default_window(config, pred, eps)
        report = detect_gap(spec, config, eps, window, trunc,
                            tau_points=tau_points, prediction=pred, threads=threads)
        if not report.found:
            if eps == eps_list[0]:
                raise GapNotFoundError(
                    f"no gap found at the largest epsilon {eps}: {report}")
            raise GapNotFoundError(f"gap lost at epsilon {eps}: {report}")
        al_pred = inter.lambda0 + eps * pred.beta_l
        ar_pred = inter.lambda0 + eps * pred.beta_r
        tl_pred, tr_pred = pred.extremizers(eps)
        edge_l.append(abs(report.alpha_l - al_pred))
        edge_r.append(abs(report.alpha_r - ar_pred))
        if pred.tie_l:
            ext_l.append(min(abs(report.tau_l - tl_pred), abs(-report.tau_l - tl_pred)))
        else:
            ext_l.append(abs(report.tau_l - tl_pred))
        if pred.tie_r:
            ext_r.append(min(abs(report.tau_r - tr_pred), abs(-report.tau_r - tr_pred)))
        else:
            ext_r.append(abs(report.tau_r - tr_pred))
        widths.append(report.width)
        reports.append(report)

    slopes = {
        "edge_left": loglog_slope(eps_list, edge_l),
        "edge_right": loglog_slope(eps_list, edge_r),
        "extremizer_left": loglog_slope(eps_list, ext_l),
        "extremizer_right": loglog_slope(eps_list, ext_r),
    }
    return ConvergenceReport(tuple(eps_list), tuple(edge_l), tuple(edge_r),
                             tuple(ext_l), tuple(ext_r), tuple(widths),
                             slopes, pred, tuple(reports))
