"""Command-line interface.

Subcommands
-----------
intersections  list band crossings below the energy cutoff
predict        first-order gap prediction at one crossing
bands          sweep the Brillouin zone and emit a band table
gap            measure the spectral gap at one epsilon
verify         convergence study checked against slope targets
examples       write the built-in example job configs

Exit codes: 0 = success / pass, 1 = negative verdict (no gap, failed
condition, failed verification), 2 = usage or schema error.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import math
import os
import sys

import numpy as np

from .bands import find_intersections
from .cell_solver import (Truncation, band_structure, convergence_study,
                          detect_gap, _default_window)
from .config import JobConfig, parse_config
from .errors import BlochgapError, GapNotFoundError, InputError, SchemaError
from .predictor import GAP_PREDICTED, predict_gap
from .reports import emit_bands_csv, emit_report_json, intersection_to_dict

EXAMPLE_CONFIGS = {
    "potential_central": {
        "description": "axial cosine potential opening a gap at the zone center",
        "waveguide": {"dimension": 2,
                      "cross_section": {"type": "interval", "width": 1.0},
                      "period": 2.0},
        "perturbation": {"family": "potential",
                         "terms": [{"amplitude": 0.5, "longitudinal_mode": 2},
                                   {"amplitude": 0.5, "longitudinal_mode": -2}]},
        "run": {"epsilons": [0.1, 0.05, 0.025, 0.0125], "energy_cutoff": 32.6},
    },
    "potential_interior": {
        "description": "profiled cosine potential opening an interior gap",
        "waveguide": {"dimension": 2,
                      "cross_section": {"type": "interval", "width": 1.0},
                      "period": 1.0},
        "perturbation": {"family": "potential",
                         "terms": [{"amplitude": 0.5, "longitudinal_mode": 1,
                                    "profile": "2*sin(pi*x1)*sin(2*pi*x1)"},
                                   {"amplitude": 0.5, "longitudinal_mode": -1,
                                    "profile": "2*sin(pi*x1)*sin(2*pi*x1)"}]},
        "run": {"epsilons": [0.1, 0.05, 0.025], "energy_cutoff": 42.0},
    },
    "magnetic_interior": {
        "description": "axial magnetic component resonant with an interior crossing",
        "waveguide": {"dimension": 2,
                      "cross_section": {"type": "interval", "width": 1.0},
                      "period": 1.0},
        "perturbation": {"family": "magnetic",
                         "components": [[],
                                        [{"amplitude": 0.5, "longitudinal_mode": 1,
                                          "profile": "2*sin(pi*x1)*sin(2*pi*x1)"},
                                         {"amplitude": 0.5, "longitudinal_mode": -1,
                                          "profile": "2*sin(pi*x1)*sin(2*pi*x1)"}]]},
        "run": {"epsilons": [0.1, 0.05, 0.025], "energy_cutoff": 42.0},
    },
    "magnetic_central_zero": {
        "description": "same magnetic construction at the zone center: the "
                       "first-order coupling vanishes there",
        "waveguide": {"dimension": 2,
                      "cross_section": {"type": "interval", "width": 1.0},
                      "period": 2.0},
        "perturbation": {"family": "magnetic",
                         "components": [[],
                                        [{"amplitude": 0.5, "longitudinal_mode": 2,
                                          "profile": "2*sin(pi*x1)^2"},
                                         {"amplitude": 0.5, "longitudinal_mode": -2,
                                          "profile": "2*sin(pi*x1)^2"}]]},
        "run": {"epsilons": [0.05], "energy_cutoff": 32.6},
    },
    "deformation_central": {
        "description": "one-sided boundary wiggle opening a gap at the zone center",
        "waveguide": {"dimension": 2,
                      "cross_section": {"type": "interval", "width": 1.0},
                      "period": 2.0},
        "perturbation": {"family": "boundary_deformation",
                         "h_minus": [],
                         "h_plus": [{"amplitude": 0.5, "longitudinal_mode": 2},
                                    {"amplitude": 0.5, "longitudinal_mode": -2}]},
        "run": {"epsilons": [0.04, 0.02, 0.01], "energy_cutoff": 32.6},
    },
    "twist_interior": {
        "description": "periodically twisted rectangular rod, interior crossing",
        "waveguide": {"dimension": 3,
                      "cross_section": {"type": "rectangle",
                                        "side_a": 3.141592653589793,
                                        "side_b": 1.5707963267948966},
                      "period": 2.0},
        "perturbation": {"family": "twist",
                         "theta": [{"amplitude": 0.5, "longitudinal_mode": 1},
                                   {"amplitude": 0.5, "longitudinal_mode": -1}]},
        "run": {"epsilons": [0.04, 0.02, 0.01], "energy_cutoff": 12.0},
    },
}


def _load_config(path: str) -> JobConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _resolve_threads(value):
    if value is None:
        env = os.environ.get("BLOCHGAP_THREADS")
        if env is None:
            return None
        try:
            value = int(env)
        except ValueError:
            raise InputError(f"BLOCHGAP_THREADS must be an integer, got {env!r}")
    return value


def _default_cutoff(job: JobConfig) -> float:
    if job.run.energy_cutoff is not None:
        return job.run.energy_cutoff
    lam2 = job.waveguide.modes(2)[1].eigenvalue
    return lam2 + (3.0 * math.pi / job.waveguide.period) ** 2


def _intersections(job: JobConfig):
    return find_intersections(job.waveguide, _default_cutoff(job))


def _pick_intersection(job: JobConfig, index: int):
    inters = _intersections(job)
    if not inters:
        raise InputError("no band crossings below the energy cutoff")
    if not 0 <= index < len(inters):
        raise InputError(
            f"--intersection {index} out of range 0..{len(inters) - 1}")
    return inters[index]


def _truncation(job: JobConfig, inter=None) -> Truncation:
    s = job.solver
    if s.j_max is not None and s.p_max is not None:
        return Truncation(s.j_max, s.p_max, s.quad_points)
    if inter is not None:
        base = Truncation.for_intersection(job.waveguide, inter,
                                           quad_points=s.quad_points)
        return Truncation(s.j_max or base.J, s.p_max if s.p_max is not None else base.P,
                          s.quad_points)
    cutoff = _default_cutoff(job)
    modes = job.waveguide.modes_below(4.0 * cutoff, extra=2)
    T = job.waveguide.period
    P = int(math.ceil(T * math.sqrt(4.0 * cutoff) / (2.0 * math.pi) + 0.5))
    return Truncation(s.j_max or len(modes), s.p_max if s.p_max is not None else P,
                      s.quad_points)


def _pick_eps(job: JobConfig, flag) -> float:
    if flag is not None:
        return flag
    if job.run.epsilons:
        return job.run.epsilons[0]
    raise InputError("no epsilon given: pass --eps or set run.epsilons in the config")


@contextlib.contextmanager
def _open_out(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _tau_grid(job: JobConfig, tau_points) -> np.ndarray:
    n = tau_points or job.solver.tau_points
    edge = job.waveguide.brillouin_edge
    step = 2.0 * edge / n
    return np.linspace(-edge + step, edge, n)


def cmd_intersections(args) -> int:
    job = _load_config(args.config)
    inters = _intersections(job)
    if args.format == "json":
        with _open_out(args.out) as fh:
            json.dump([intersection_to_dict(it) for it in inters], fh, indent=2)
            fh.write("\n")
    else:
        with _open_out(args.out) as fh:
            fh.write(f"{'idx':>3} {'kind':<9} {'bands':<22} {'tau0':>12} "
                     f"{'lambda0':>12} {'admissible':>10}  failing\n")
            for i, it in enumerate(inters):
                bands_txt = (f"({it.first.j},{it.first.p})x"
                             f"({it.second.j},{it.second.p})")
                fh.write(f"{i:>3} {it.kind:<9} {bands_txt:<22} {it.tau0:>12.6f} "
                         f"{it.lambda0:>12.6f} {str(it.admissible):>10}  "
                         f"{','.join(it.flags.failing()) or '-'}\n")
    return 0 if any(it.admissible for it in inters) else 1


def cmd_predict(args) -> int:
    job = _load_config(args.config)
    inter = _pick_intersection(job, args.intersection)
    eps = _pick_eps(job, args.eps)
    if not inter.admissible:
        print("intersection not admissible; failing conditions: "
              + ", ".join(inter.flags.failing()), file=sys.stderr)
        with _open_out(args.out) as fh:
            emit_report_json(fh, config=job, intersection=inter)
        return 1
    pred = predict_gap(job.perturbation, job.waveguide, inter, eps)
    with _open_out(args.out) as fh:
        emit_report_json(fh, config=job, intersection=inter, prediction=pred)
    return 0 if pred.verdict == GAP_PREDICTED else 1


def cmd_bands(args) -> int:
    job = _load_config(args.config)
    eps = args.eps if args.eps is not None else \
        (job.run.epsilons[0] if job.run.epsilons else 0.0)
    trunc = _truncation(job)
    taus = _tau_grid(job, args.tau_points)
    bs = band_structure(job.perturbation, job.waveguide, eps, taus, trunc,
                        m_max=job.solver.m_max, threads=_resolve_threads(args.threads))
    with _open_out(args.out) as fh:
        if args.format == "json":
            json.dump({"epsilon": eps, "tau_grid": [float(t) for t in bs.tau_grid],
                       "energies": [[float(v) for v in row] for row in bs.energies]},
                      fh, indent=2)
            fh.write("\n")
        else:
            emit_bands_csv(bs, fh)
    return 0


def cmd_gap(args) -> int:
    job = _load_config(args.config)
    inter = _pick_intersection(job, args.intersection)
    eps = _pick_eps(job, args.eps)
    pred = None
    if inter.admissible:
        pred = predict_gap(job.perturbation, job.waveguide, inter, eps)
    trunc = _truncation(job, inter)
    if job.run.window is not None:
        window = job.run.window
    elif pred is not None:
        window = _default_window(job.waveguide, pred, eps)
    else:
        half = 0.05 * max(1.0, abs(inter.lambda0))
        window = (inter.lambda0 - half, inter.lambda0 + half)
    report = detect_gap(job.perturbation, job.waveguide, eps, window, trunc,
                        tau_points=job.solver.tau_points, prediction=pred,
                        threads=_resolve_threads(args.threads))
    with _open_out(args.out) as fh:
        emit_report_json(fh, config=job, intersection=inter, prediction=pred,
                         gap_report=report, truncation=trunc)
    return 0 if report.found else 1


def cmd_verify(args) -> int:
    job = _load_config(args.config)
    inter = _pick_intersection(job, args.intersection)
    if args.eps_list is not None:
        eps_list = [float(v) for v in args.eps_list.split(",") if v]
    else:
        eps_list = list(job.run.epsilons)
    if len(eps_list) < 3:
        raise InputError("verification needs at least three epsilons "
                         "(--eps-list or run.epsilons)")
    trunc = _truncation(job, inter)
    conv = convergence_study(job.perturbation, job.waveguide, inter, eps_list,
                             trunc, tau_points=job.solver.tau_points,
                             threads=_resolve_threads(args.threads))
    checks = {
        "edge_left": conv.slopes["edge_left"] >= args.edge_slope_min,
        "edge_right": conv.slopes["edge_right"] >= args.edge_slope_min,
        "extremizer_left": conv.slopes["extremizer_left"] >= args.extremizer_slope_min,
        "extremizer_right": conv.slopes["extremizer_right"] >= args.extremizer_slope_min,
    }
    passed = all(checks.values())
    for name, ok in checks.items():
        target = args.edge_slope_min if name.startswith("edge") else args.extremizer_slope_min
        print(f"{name}: slope {conv.slopes[name]:+.3f} "
              f"{'PASS' if ok else 'FAIL'} (target >= {target})", file=sys.stderr)
    with _open_out(args.out) as fh:
        emit_report_json(fh, config=job, intersection=inter,
                         prediction=conv.prediction, convergence=conv,
                         truncation=trunc,
                         extra={"verify": {"passed": passed, "checks": checks,
                                           "edge_slope_min": args.edge_slope_min,
                                           "extremizer_slope_min": args.extremizer_slope_min}})
    return 0 if passed else 1


def cmd_examples(args) -> int:
    outdir = args.out or "blochgap_examples"
    os.makedirs(outdir, exist_ok=True)
    for name, doc in EXAMPLE_CONFIGS.items():
        path = os.path.join(outdir, f"{name}.json")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        print(path)
    return 0


def _add_common(sp, *, eps=False, out=True, threads=False, intersection=False):
    sp.add_argument("--config", required=True, help="path to the job JSON")
    if intersection:
        sp.add_argument("--intersection", type=int, default=0,
                        help="index into the crossing list (default 0)")
    if eps:
        sp.add_argument("--eps", type=float, default=None,
                        help="perturbation size (default: first of run.epsilons)")
    if out:
        sp.add_argument("--out", default=None, help="output path (default stdout)")
    if threads:
        sp.add_argument("--threads", type=int, default=None,
                        help="sweep workers; 0 = auto (env BLOCHGAP_THREADS)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blochgap",
        description="Spectral-gap prediction and verification for periodically "
                    "perturbed waveguides")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("intersections", help="list band crossings")
    _add_common(sp)
    sp.add_argument("--format", choices=("text", "json"), default="text")
    sp.set_defaults(func=cmd_intersections)

    sp = sub.add_parser("predict", help="first-order prediction at one crossing")
    _add_common(sp, eps=True, intersection=True)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("bands", help="sweep the zone and emit a band table")
    _add_common(sp, eps=True, threads=True)
    sp.add_argument("--tau-points", type=int, default=None)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.set_defaults(func=cmd_bands)

    sp = sub.add_parser("gap", help="measure the gap at one epsilon")
    _add_common(sp, eps=True, threads=True, intersection=True)
    sp.set_defaults(func=cmd_gap)

    sp = sub.add_parser("verify", help="convergence study with pass/fail slopes")
    _add_common(sp, threads=True, intersection=True)
    sp.add_argument("--eps-list", default=None, help="comma-separated epsilons")
    sp.add_argument("--edge-slope-min", type=float, default=1.8)
    sp.add_argument("--extremizer-slope-min", type=float, default=1.2)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("examples", help="write the built-in example configs")
    sp.add_argument("--out", default=None, help="output directory")
    sp.set_defaults(func=cmd_examples)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except SchemaError as exc:
        for line in exc.errors:
            print(f"config error: {line}", file=sys.stderr)
        return 2
    except (InputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GapNotFoundError as exc:
        print(f"no gap: {exc}", file=sys.stderr)
        return 1
    except BlochgapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def console() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console()
