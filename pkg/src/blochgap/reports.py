"""Byte-deterministic CSV and JSON emission of sweeps, predictions and studies.

CSV band tables carry 17-significant-digit decimals (enough to round-trip
float64) with LF line endings; JSON reports use the shortest round-trip
float representation and a fixed key order, so identical inputs produce
identical bytes.
"""

from __future__ import annotations

import json
from typing import Optional

from . import __version__
from .bands import Intersection
from .cell_solver import BandStructure, ConvergenceReport, GapReport, Truncation
from .config import JobConfig, config_hash
from .predictor import GapPrediction

__all__ = ["emit_bands_csv", "emit_report_json", "intersection_to_dict",
           "prediction_to_dict", "gap_report_to_dict", "convergence_to_dict"]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def emit_bands_csv(bs: BandStructure, sink) -> None:
    """Write ``tau,E_1,...,E_m`` rows; header only for an empty structure."""
    m = bs.energies.shape[1] if bs.energies.size else bs.energies.shape[-1]
    header = "tau," + ",".join(f"E_{i + 1}" for i in range(m))
    sink.write(header + "\n")
    for tau, row in zip(bs.tau_grid, bs.energies):
        sink.write(_fmt(tau) + "," + ",".join(_fmt(v) for v in row) + "\n")


def _cplx(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def intersection_to_dict(inter: Intersection) -> dict:
    return {
        "tau0": inter.tau0,
        "lambda0": inter.lambda0,
        "first": [inter.first.j, inter.first.p],
        "second": [inter.second.j, inter.second.p],
        "slope_first": inter.slope_first,
        "slope_second": inter.slope_second,
        "kind": inter.kind,
        "flags": {
            "simple_eigenvalues": inter.flags.simple_eigenvalues,
            "opposite_slopes": inter.flags.opposite_slopes,
            "isolated": inter.flags.isolated,
        },
        "admissible": inter.admissible,
    }


def _coupling_to_dict(cm) -> dict:
    return {"b11": _cplx(cm.b11), "b12": _cplx(cm.b12),
            "b21": _cplx(cm.b21), "b22": _cplx(cm.b22), "branch": cm.branch}


def prediction_to_dict(pred: GapPrediction) -> dict:
    edges = pred.edges()
    extremizers = pred.extremizers()
    return {
        "verdict": pred.verdict,
        "lambda0": pred.lambda0,
        "epsilon": pred.epsilon,
        "beta_minus_plusbranch": pred.beta_minus_plusbranch,
        "beta_plus_plusbranch": pred.beta_plus_plusbranch,
        "beta_minus_minusbranch": pred.beta_minus_minusbranch,
        "beta_plus_minusbranch": pred.beta_plus_minusbranch,
        "beta_l": pred.beta_l,
        "beta_r": pred.beta_r,
        "gap_condition_holds": pred.gap_condition_holds,
        "tau_star_l": pred.tau_star_l,
        "tau_star_r": pred.tau_star_r,
        "gamma_l": pred.gamma_l,
        "gamma_r": pred.gamma_r,
        "tie_l": pred.tie_l,
        "tie_r": pred.tie_r,
        "edges": [edges[0], edges[1]],
        "extremizers": [extremizers[0], extremizers[1]],
        "coupling_plus": _coupling_to_dict(pred.coupling_plus),
        "coupling_minus": _coupling_to_dict(pred.coupling_minus),
        "message": pred.message,
    }


def gap_report_to_dict(report: GapReport) -> dict:
    return {
        "found": report.found,
        "alpha_l": report.alpha_l,
        "alpha_r": report.alpha_r,
        "tau_l": report.tau_l,
        "tau_r": report.tau_r,
        "width": report.width,
        "epsilon": report.epsilon,
    }


def convergence_to_dict(conv: ConvergenceReport) -> dict:
    return {
        "epsilons": list(conv.epsilons),
        "edge_errors_left": list(conv.edge_errors_left),
        "edge_errors_right": list(conv.edge_errors_right),
        "extremizer_errors_left": list(conv.extremizer_errors_left),
        "extremizer_errors_right": list(conv.extremizer_errors_right),
        "widths": list(conv.widths),
        "slopes": dict(conv.slopes),
        "gap_reports": [gap_report_to_dict(r) for r in conv.reports],
    }


def _truncation_to_dict(trunc: Optional[Truncation]) -> Optional[dict]:
    if trunc is None:
        return None
    return {"max_transverse": trunc.J, "max_longitudinal": trunc.P,
            "quad_points": trunc.quad_points, "size": trunc.size}


def emit_report_json(sink, *, config: Optional[JobConfig] = None,
                     intersection: Optional[Intersection] = None,
                     prediction: Optional[GapPrediction] = None,
                     gap_report: Optional[GapReport] = None,
                     convergence: Optional[ConvergenceReport] = None,
                     truncation: Optional[Truncation] = None,
                     extra: Optional[dict] = None) -> None:
    """Write one JSON report combining whatever pieces the run produced."""
    doc = {
        "tool": {"name": "blochgap", "version": __version__},
        "config_sha256": config_hash(config) if config is not None else None,
        "truncation": _truncation_to_dict(truncation),
        "intersection": intersection_to_dict(intersection) if intersection else None,
        "prediction": prediction_to_dict(prediction) if prediction else None,
        "gap_report": gap_report_to_dict(gap_report) if gap_report else None,
        "convergence": convergence_to_dict(convergence) if convergence else None,
    }
    if extra:
        doc.update(extra)
    json.dump(doc, sink, indent=2)
    sink.write("\n")
