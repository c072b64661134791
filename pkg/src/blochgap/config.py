"""Job configuration: schema-checked JSON in, solver-ready objects out.

One JSON document describes one job: the waveguide, one perturbation family,
solver cutoffs, and run parameters.  Validation is strict: unknown keys and
duplicated keys are rejected, every error names the offending key path, and
coefficient realness constraints are enforced (complex amplitudes are
accepted only inside the second-order coefficient matrix).

Units: lengths are dimensionless, energies are inverse length squared.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Tuple

from .errors import InputError, ParseError, SchemaError
from .forms import FourierSeries
from .geometry import Interval, Rectangle, WaveguideConfig
from .perturbation import (BoundaryDeformation2D, GeneralSecondOrder, Magnetic,
                           Potential, Profile, SeparableTerm, Twist3D,
                           validate_spec)

__all__ = ["JobConfig", "SolverOptions", "RunOptions", "parse_config",
           "config_hash", "canonical_json"]

_FAMILIES = ("potential", "magnetic", "boundary_deformation", "twist",
             "general_second_order")


@dataclass(frozen=True)
class SolverOptions:
    j_max: Optional[int] = None
    p_max: Optional[int] = None
    tau_points: int = 256
    m_max: int = 12
    quad_points: Optional[int] = None


@dataclass(frozen=True)
class RunOptions:
    epsilons: Tuple[float, ...] = ()
    energy_cutoff: Optional[float] = None
    window: Optional[Tuple[float, float]] = None


@dataclass(frozen=True, eq=False)
class JobConfig:
    waveguide: WaveguideConfig
    perturbation: object
    solver: SolverOptions
    run: RunOptions
    raw: dict


def _no_duplicates(pairs):
    seen = set()
    out = {}
    for key, value in pairs:
        if key in seen:
            raise SchemaError([f"duplicate key {key!r}"])
        seen.add(key)
        out[key] = value
    return out


def _is_num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


class _Checker:
    def __init__(self):
        self.errors = []

    def fail(self, path, message):
        self.errors.append(f"{path}: {message}")

    def keys(self, obj, path, required, optional=()):
        if not isinstance(obj, dict):
            self.fail(path, f"expected an object, got {type(obj).__name__}")
            return False
        ok = True
        for key in obj:
            if key not in required and key not in optional:
                self.fail(f"{path}.{key}", "unknown key")
                ok = False
        for key in required:
            if key not in obj:
                self.fail(f"{path}.{key}", "missing required key")
                ok = False
        return ok

    def number(self, obj, path, positive=False):
        if not _is_num(obj):
            self.fail(path, f"expected a number, got {type(obj).__name__}")
            return None
        if positive and not obj > 0:
            self.fail(path, f"must be positive, got {obj}")
            return None
        return float(obj)

    def integer(self, obj, path, minimum=None):
        if not isinstance(obj, int) or isinstance(obj, bool):
            self.fail(path, f"expected an integer, got {type(obj).__name__}")
            return None
        if minimum is not None and obj < minimum:
            self.fail(path, f"must be >= {minimum}, got {obj}")
            return None
        return obj


def _parse_waveguide(chk, obj, path):
    if not chk.keys(obj, path, ("dimension", "cross_section", "period")):
        return None
    dim = chk.integer(obj.get("dimension"), f"{path}.dimension")
    period = chk.number(obj.get("period"), f"{path}.period", positive=True)
    cs_obj = obj.get("cross_section")
    cs = None
    cs_path = f"{path}.cross_section"
    if isinstance(cs_obj, dict) and cs_obj.get("type") == "interval":
        if chk.keys(cs_obj, cs_path, ("type", "width")):
            width = chk.number(cs_obj.get("width"), f"{cs_path}.width", positive=True)
            if width is not None:
                cs = Interval(width)
    elif isinstance(cs_obj, dict) and cs_obj.get("type") == "rectangle":
        if chk.keys(cs_obj, cs_path, ("type", "side_a", "side_b")):
            a = chk.number(cs_obj.get("side_a"), f"{cs_path}.side_a", positive=True)
            b = chk.number(cs_obj.get("side_b"), f"{cs_path}.side_b", positive=True)
            if a is not None and b is not None:
                cs = Rectangle(a, b)
    else:
        chk.fail(f"{cs_path}.type", "must be 'interval' or 'rectangle'")
    if chk.errors or cs is None or dim is None or period is None:
        return None
    try:
        return WaveguideConfig(cs, period, dim)
    except InputError as exc:
        chk.fail(path, str(exc))
        return None


def _parse_amplitude(chk, obj, path, allow_complex):
    if _is_num(obj):
        return complex(float(obj))
    if allow_complex and isinstance(obj, list) and len(obj) == 2 \
            and all(_is_num(v) for v in obj):
        return complex(float(obj[0]), float(obj[1]))
    if allow_complex:
        chk.fail(path, "expected a number or a [re, im] pair")
    else:
        chk.fail(path, "expected a real number (complex amplitudes are only "
                       "allowed in the second-order coefficient matrix)")
    return None


def _parse_terms(chk, obj, path, allow_profile=True, allow_complex=False):
    if not isinstance(obj, list):
        chk.fail(path, f"expected a list of terms, got {type(obj).__name__}")
        return None
    out = []
    for i, item in enumerate(obj):
        tpath = f"{path}[{i}]"
        optional = ("profile",) if allow_profile else ()
        if not chk.keys(item, tpath, ("amplitude", "longitudinal_mode"), optional):
            continue
        amp = _parse_amplitude(chk, item.get("amplitude"), f"{tpath}.amplitude",
                               allow_complex)
        mode = chk.integer(item.get("longitudinal_mode"), f"{tpath}.longitudinal_mode")
        profile = None
        if allow_profile and "profile" in item:
            text = item["profile"]
            if not isinstance(text, str):
                chk.fail(f"{tpath}.profile", "expected an expression string")
            else:
                try:
                    profile = Profile.from_expression(text)
                except ParseError as exc:
                    chk.fail(f"{tpath}.profile", str(exc))
        if amp is not None and mode is not None:
            out.append(SeparableTerm(amp, mode, profile))
    return tuple(out)


def _terms_to_series(terms, period):
    coeffs = {}
    for t in terms:
        coeffs[t.mode] = coeffs.get(t.mode, 0.0) + t.amplitude
    return FourierSeries(coeffs, period)


def _parse_perturbation(chk, obj, path, waveguide):
    if not isinstance(obj, dict) or "family" not in obj:
        chk.fail(f"{path}.family", "missing required key")
        return None
    family = obj.get("family")
    if family not in _FAMILIES:
        chk.fail(f"{path}.family", f"unknown family {family!r}; expected one of {_FAMILIES}")
        return None
    n = waveguide.dimension if waveguide is not None else 2

    if family == "potential":
        if not chk.keys(obj, path, ("family", "terms")):
            return None
        terms = _parse_terms(chk, obj.get("terms"), f"{path}.terms")
        return Potential(terms) if terms is not None and not chk.errors else None

    if family == "magnetic":
        if not chk.keys(obj, path, ("family", "components")):
            return None
        comps = obj.get("components")
        if not isinstance(comps, list) or len(comps) != n:
            chk.fail(f"{path}.components",
                     f"expected a list of {n} component term lists")
            return None
        parsed = []
        for i, comp in enumerate(comps):
            t = _parse_terms(chk, comp, f"{path}.components[{i}]")
            parsed.append(t if t is not None else ())
        return Magnetic(tuple(parsed)) if not chk.errors else None

    if family == "boundary_deformation":
        if not chk.keys(obj, path, ("family", "h_minus", "h_plus")):
            return None
        hm = _parse_terms(chk, obj.get("h_minus"), f"{path}.h_minus", allow_profile=False)
        hp = _parse_terms(chk, obj.get("h_plus"), f"{path}.h_plus", allow_profile=False)
        if chk.errors or hm is None or hp is None:
            return None
        T = waveguide.period
        return BoundaryDeformation2D(_terms_to_series(hm, T), _terms_to_series(hp, T))

    if family == "twist":
        if not chk.keys(obj, path, ("family", "theta")):
            return None
        th = _parse_terms(chk, obj.get("theta"), f"{path}.theta", allow_profile=False)
        if chk.errors or th is None:
            return None
        return Twist3D(_terms_to_series(th, waveguide.period))

    # general_second_order
    if not chk.keys(obj, path, ("family",), ("a_matrix", "a_vector", "a_scalar")):
        return None
    matrix = {}
    for key, val in (obj.get("a_matrix") or {}).items():
        kpath = f"{path}.a_matrix.{key}"
        if len(key) != 2 or not key.isdigit():
            chk.fail(kpath, "matrix keys are two digits 'ij' with i <= j")
            continue
        i, j = int(key[0]), int(key[1])
        if i > j:
            chk.fail(kpath, "store the upper triangle only (i <= j); the lower "
                            "triangle is the conjugate")
            continue
        terms = _parse_terms(chk, val, kpath, allow_complex=True)
        if terms is not None:
            matrix[(i, j)] = terms
    vector = {}
    for key, val in (obj.get("a_vector") or {}).items():
        kpath = f"{path}.a_vector.{key}"
        if not key.isdigit():
            chk.fail(kpath, "vector keys are single digits")
            continue
        terms = _parse_terms(chk, val, kpath)
        if terms is not None:
            vector[int(key)] = terms
    scalar = _parse_terms(chk, obj.get("a_scalar", []), f"{path}.a_scalar")
    if chk.errors or scalar is None:
        return None
    return GeneralSecondOrder(matrix, vector, scalar)


def _parse_solver(chk, obj, path):
    if obj is None:
        return SolverOptions()
    if not chk.keys(obj, path, (), ("max_transverse", "max_longitudinal",
                                    "tau_points", "m_max", "quad_points")):
        return SolverOptions()
    kw = {}
    if "max_transverse" in obj:
        kw["j_max"] = chk.integer(obj["max_transverse"], f"{path}.max_transverse", 1)
    if "max_longitudinal" in obj:
        kw["p_max"] = chk.integer(obj["max_longitudinal"], f"{path}.max_longitudinal", 0)
    if "tau_points" in obj:
        kw["tau_points"] = chk.integer(obj["tau_points"], f"{path}.tau_points", 8)
    if "m_max" in obj:
        kw["m_max"] = chk.integer(obj["m_max"], f"{path}.m_max", 1)
    if "quad_points" in obj:
        kw["quad_points"] = chk.integer(obj["quad_points"], f"{path}.quad_points", 4)
    kw = {k: v for k, v in kw.items() if v is not None}
    return SolverOptions(**kw)


def _parse_run(chk, obj, path):
    if obj is None:
        return RunOptions()
    if not chk.keys(obj, path, (), ("epsilons", "energy_cutoff", "window")):
        return RunOptions()
    eps = ()
    if "epsilons" in obj:
        raw = obj["epsilons"]
        if not isinstance(raw, list) or not all(_is_num(v) and v > 0 for v in raw):
            chk.fail(f"{path}.epsilons", "expected a list of positive numbers")
        else:
            eps = tuple(float(v) for v in raw)
    cutoff = None
    if "energy_cutoff" in obj:
        cutoff = chk.number(obj["energy_cutoff"], f"{path}.energy_cutoff", positive=True)
    window = None
    if "window" in obj:
        raw = obj["window"]
        if not (isinstance(raw, list) and len(raw) == 2 and all(_is_num(v) for v in raw)
                and raw[0] < raw[1]):
            chk.fail(f"{path}.window", "expected [lo, hi] with lo < hi")
        else:
            window = (float(raw[0]), float(raw[1]))
    return RunOptions(eps, cutoff, window)


def parse_config(text: str) -> JobConfig:
    """Parse and validate one job document; raises SchemaError listing every
    violation with its key path."""
    try:
        raw = json.loads(text, object_pairs_hook=_no_duplicates)
    except SchemaError:
        raise
    except json.JSONDecodeError as exc:
        raise SchemaError([f"not valid JSON: {exc}"]) from exc
    chk = _Checker()
    if not chk.keys(raw, "$", ("waveguide", "perturbation"),
                    ("solver", "run", "description")):
        raise SchemaError(chk.errors)
    if "description" in raw and not isinstance(raw["description"], str):
        raise SchemaError(["$.description: expected a string"])
    waveguide = _parse_waveguide(chk, raw.get("waveguide"), "$.waveguide")
    spec = None
    if waveguide is not None:
        spec = _parse_perturbation(chk, raw.get("perturbation"), "$.perturbation",
                                   waveguide)
    solver = _parse_solver(chk, raw.get("solver"), "$.solver")
    run = _parse_run(chk, raw.get("run"), "$.run")
    if chk.errors:
        raise SchemaError(chk.errors)
    try:
        validate_spec(spec, waveguide)
    except InputError as exc:
        raise SchemaError([f"$.perturbation: {exc}"]) from exc
    return JobConfig(waveguide, spec, solver, run, raw)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: JobConfig) -> str:
    import hashlib
    return hashlib.sha256(canonical_json(cfg.raw).encode("utf-8")).hexdigest()
