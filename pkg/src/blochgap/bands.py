"""Unperturbed band functions and the search for admissible band crossings.

A band is the parabola ``Lambda_{j,p}(tau) = lambda_j + (tau + 2 pi p / T)^2``
indexed by a transverse mode ``j`` and a longitudinal Fourier index ``p``.
Two bands crossing transversally at ``tau0`` with opposite slopes, simple
transverse eigenvalues and an energy isolated from every other band form an
admissible crossing; those are the only places a weak periodic perturbation
can open a spectral gap at first order.

Crossing points are computed in closed form from

    lambda_k - lambda_j = (2 pi (p - q) / T) * (2 pi (p + q) / T + 2 tau0),

never by root-finding.  Rejected crossings are returned with diagnostic
flags rather than dropped, so a caller can see which condition failed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

from .errors import InputError
from .geometry import WaveguideConfig, check_simplicity

__all__ = ["BandIndex", "IntersectionFlags", "Intersection",
           "band_value", "band_slope", "band_range",
           "find_intersections", "isolation_check"]

# relative slack for closed-interval overlap tests on floating-point ranges
_OVERLAP_SLACK = 1e-9
# relative slack for classifying tau0 as a zone center / endpoint
_ENDPOINT_SLACK = 1e-12


@dataclass(frozen=True)
class BandIndex:
    """Transverse index j (1-based) and longitudinal Fourier index p."""
    j: int
    p: int


@dataclass(frozen=True)
class IntersectionFlags:
    simple_eigenvalues: bool
    opposite_slopes: bool
    isolated: bool

    def all_ok(self) -> bool:
        return self.simple_eigenvalues and self.opposite_slopes and self.isolated

    def failing(self) -> List[str]:
        out = []
        if not self.simple_eigenvalues:
            out.append("simple_eigenvalues")
        if not self.opposite_slopes:
            out.append("opposite_slopes")
        if not self.isolated:
            out.append("isolated")
        return out


@dataclass(frozen=True)
class Intersection:
    """A crossing of two bands at quasi-momentum ``tau0`` in [0, pi/T].

    ``kind`` is 'central' (tau0 = 0), 'endpoint' (tau0 = pi/T) or 'interior'.
    """
    tau0: float
    lambda0: float
    first: BandIndex
    second: BandIndex
    slope_first: float
    slope_second: float
    flags: IntersectionFlags
    kind: str

    @property
    def admissible(self) -> bool:
        return self.flags.all_ok()


def band_value(config: WaveguideConfig, idx: BandIndex, tau: float) -> float:
    """Lambda_{j,p}(tau) = lambda_j + (tau + 2 pi p / T)^2."""
    lam = config.modes(idx.j)[idx.j - 1].eigenvalue
    return lam + (tau + 2.0 * math.pi * idx.p / config.period) ** 2


def band_slope(config: WaveguideConfig, idx: BandIndex, tau: float) -> float:
    return 2.0 * (tau + 2.0 * math.pi * idx.p / config.period)


def band_range(config: WaveguideConfig, idx: BandIndex) -> Tuple[float, float]:
    """Exact min/max of Lambda_{j,p} over tau in [0, pi/T].

    The parabola vertex sits at tau = -2 pi p / T; it is clamped into the
    half-zone, otherwise the extrema are at the endpoints.
    """
    lam = config.modes(idx.j)[idx.j - 1].eigenvalue
    T = config.period
    hi_tau = math.pi / T
    vertex = -2.0 * math.pi * idx.p / T
    ends = [lam + (0.0 + 2.0 * math.pi * idx.p / T) ** 2,
            lam + (hi_tau + 2.0 * math.pi * idx.p / T) ** 2]
    lo, hi = min(ends), max(ends)
    if 0.0 <= vertex <= hi_tau:
        lo = lam
    return lo, hi


def _longitudinal_bound(config: WaveguideConfig, energy: float) -> int:
    """Smallest P* with (2 pi |p| / T - pi / T)^2 > energy for |p| > P*."""
    if energy <= 0:
        return 1
    T = config.period
    return int(math.ceil(T * math.sqrt(energy) / (2.0 * math.pi) + 0.5)) + 1


def isolation_check(config: WaveguideConfig, lambda0: float,
                    excluded: Tuple[BandIndex, BandIndex], margin: float = 0.0) -> bool:
    """True iff no band other than the excluded pair meets
    [lambda0 - margin, lambda0 + margin] over the half-zone.

    Intervals are treated as closed with a small relative slack, so ranges
    that merely touch the energy count as overlapping.
    """
    if margin < 0:
        raise InputError(f"margin must be nonnegative, got {margin}")
    slack = _OVERLAP_SLACK * max(1.0, abs(lambda0))
    lo_w = lambda0 - margin - slack
    hi_w = lambda0 + margin + slack
    modes = config.modes_below(hi_w)
    pmax = _longitudinal_bound(config, hi_w)
    skip = set(excluded)
    for mode in modes:
        if mode.eigenvalue > hi_w:
            continue
        for p in range(-pmax, pmax + 1):
            idx = BandIndex(mode.index, p)
            if idx in skip:
                continue
            lo, hi = band_range(config, idx)
            if lo <= hi_w and hi >= lo_w:
                return False
    return True


def _classify(tau0: float, edge: float) -> str:
    slack = _ENDPOINT_SLACK * max(1.0, edge)
    if abs(tau0) <= slack:
        return "central"
    if abs(tau0 - edge) <= slack:
        return "endpoint"
    return "interior"


def find_intersections(config: WaveguideConfig, energy_cutoff: float,
                       simplicity_tol: float = 1e-9,
                       isolation_margin: float = 0.0) -> List[Intersection]:
    """All crossings of bands with transverse index in {1, 2} below the cutoff.

    Returns admissible and rejected crossings alike, flags filled in, sorted
    by crossing energy.  An energy cutoff at or below the lowest transverse
    eigenvalue yields an empty list.
    """
    modes = config.modes(4)
    if energy_cutoff <= modes[0].eigenvalue:
        return []
    T = config.period
    edge = math.pi / T
    pmax = _longitudinal_bound(config, energy_cutoff)
    tiny = _ENDPOINT_SLACK * max(1.0, edge)

    candidates = []
    for j in (1, 2):
        for k in (1, 2):
            for p in range(-pmax, pmax + 1):
                for q in range(-pmax, pmax + 1):
                    if (j, p) >= (k, q) or p == q:
                        continue
                    lam_j = modes[j - 1].eigenvalue
                    lam_k = modes[k - 1].eigenvalue
                    # closed-form crossing point of the two parabolas
                    dp = 2.0 * math.pi * (p - q) / T
                    tau0 = 0.5 * ((lam_k - lam_j) / dp - 2.0 * math.pi * (p + q) / T)
                    if not (-tiny <= tau0 <= edge + tiny):
                        continue
                    tau0 = min(max(tau0, 0.0), edge) + 0.0  # normalizes -0.0
                    lam0 = band_value(config, BandIndex(j, p), tau0)
                    if lam0 > energy_cutoff:
                        continue
                    candidates.append((j, p, k, q, tau0, lam0))

    out = []
    for j, p, k, q, tau0, lam0 in candidates:
        first, second = BandIndex(j, p), BandIndex(k, q)
        s1 = band_slope(config, first, tau0)
        s2 = band_slope(config, second, tau0)
        simple = _simple_pair(config, j, k, simplicity_tol)
        opposite = s1 * s2 < 0.0
        isolated = isolation_check(config, lam0, (first, second), isolation_margin)
        inter = Intersection(tau0, lam0, first, second, s1, s2,
                             IntersectionFlags(simple, opposite, isolated),
                             _classify(tau0, edge))
        if inter.admissible:
            # structural facts every admissible crossing must satisfy
            assert p * q <= 0, inter
            assert j + k <= 3, inter
        out.append(inter)
    out.sort(key=lambda it: (it.lambda0, it.tau0, it.first.j, it.first.p,
                             it.second.j, it.second.p))
    return out


def _simple_pair(config: WaveguideConfig, j: int, k: int, tol: float) -> bool:
    modes = config.modes(max(j, k) + 2)
    return check_simplicity(modes, j, tol) and check_simplicity(modes, k, tol)
