import io
import json
import math
import os

import numpy as np
import pytest

from blochgap.cell_solver import BandStructure, Truncation
from blochgap.cli import EXAMPLE_CONFIGS, main
from blochgap.config import config_hash, parse_config
from blochgap.errors import SchemaError
from blochgap.geometry import Interval, Rectangle
from blochgap.perturbation import Potential, Twist3D
from blochgap.reports import emit_bands_csv, emit_report_json

MINIMAL = {
    "waveguide": {"dimension": 2,
                  "cross_section": {"type": "interval", "width": 1.0},
                  "period": 2.0},
    "perturbation": {"family": "potential",
                     "terms": [{"amplitude": 0.5, "longitudinal_mode": 2},
                               {"amplitude": 0.5, "longitudinal_mode": -2}]},
}


def test_parse_minimal_config_fills_defaults():
    job = parse_config(json.dumps(MINIMAL))
    assert isinstance(job.waveguide.cross_section, Interval)
    assert isinstance(job.perturbation, Potential)
    assert job.solver.tau_points == 256
    assert job.solver.j_max is None
    assert job.run.epsilons == ()
    assert job.run.window is None


def test_duplicate_key_is_rejected():
    text = ('{"waveguide": {"dimension": 2, "dimension": 2, '
            '"cross_section": {"type": "interval", "width": 1.0}, "period": 1.0},'
            ' "perturbation": {"family": "potential", "terms": []}}')
    with pytest.raises(SchemaError, match="duplicate key 'dimension'"):
        parse_config(text)


def test_unknown_key_is_rejected_with_path():
    doc = dict(MINIMAL)
    doc["solver"] = {"tau_points": 64, "bogus": 1}
    with pytest.raises(SchemaError, match=r"\$\.solver\.bogus"):
        parse_config(json.dumps(doc))


def test_dimension_mismatch_is_named():
    doc = {
        "waveguide": MINIMAL["waveguide"],
        "perturbation": {"family": "twist",
                         "theta": [{"amplitude": 0.5, "longitudinal_mode": 1}]},
    }
    with pytest.raises(SchemaError, match="3d waveguide"):
        parse_config(json.dumps(doc))


def test_complex_amplitude_only_in_second_order_matrix():
    doc = {
        "waveguide": MINIMAL["waveguide"],
        "perturbation": {"family": "potential",
                         "terms": [{"amplitude": [0.0, 1.0], "longitudinal_mode": 1}]},
    }
    with pytest.raises(SchemaError, match="amplitude"):
        parse_config(json.dumps(doc))
    ok = {
        "waveguide": MINIMAL["waveguide"],
        "perturbation": {"family": "general_second_order",
                         "a_matrix": {"12": [
                             {"amplitude": [0.0, 0.5], "longitudinal_mode": 1},
                             {"amplitude": [0.0, 0.5], "longitudinal_mode": -1}]}},
    }
    job = parse_config(json.dumps(ok))
    assert (1, 2) in job.perturbation.matrix


def test_non_real_potential_is_rejected():
    doc = {
        "waveguide": MINIMAL["waveguide"],
        "perturbation": {"family": "potential",
                         "terms": [{"amplitude": 1.0, "longitudinal_mode": 1}]},
    }
    with pytest.raises(SchemaError, match="real-valued"):
        parse_config(json.dumps(doc))


def test_profile_error_carries_path_and_offset():
    doc = {
        "waveguide": MINIMAL["waveguide"],
        "perturbation": {"family": "potential",
                         "terms": [{"amplitude": 1.0, "longitudinal_mode": 0,
                                    "profile": "sin(x1"}]},
    }
    with pytest.raises(SchemaError, match=r"terms\[0\]\.profile.*offset 6"):
        parse_config(json.dumps(doc))


def test_schema_errors_are_collected():
    doc = {
        "waveguide": {"dimension": 5,
                      "cross_section": {"type": "interval", "width": -1.0},
                      "period": 1.0},
        "perturbation": {"family": "potential", "terms": []},
    }
    with pytest.raises(SchemaError) as err:
        parse_config(json.dumps(doc))
    assert len(err.value.errors) >= 1


def _small_band_structure():
    taus = np.array([0.0, 0.1, 0.2])
    energies = np.array([[1.0, 2.0], [1.5, 2.5], [1.0 / 3.0, math.pi]])
    return BandStructure(taus, energies, 0.0, Truncation(2, 1))


def test_csv_round_trip_and_determinism():
    bs = _small_band_structure()
    buf1, buf2 = io.StringIO(), io.StringIO()
    emit_bands_csv(bs, buf1)
    emit_bands_csv(bs, buf2)
    assert buf1.getvalue() == buf2.getvalue()
    lines = buf1.getvalue().split("\n")
    assert lines[0] == "tau,E_1,E_2"
    for i, line in enumerate(lines[1:4]):
        vals = [float(v) for v in line.split(",")]
        assert vals[0] == bs.tau_grid[i]
        assert vals[1:] == list(bs.energies[i])  # 17 digits round-trip exactly


def test_csv_empty_structure_is_header_only():
    bs = BandStructure(np.zeros((0,)), np.zeros((0, 3)), 0.0, Truncation(1, 0))
    buf = io.StringIO()
    emit_bands_csv(bs, buf)
    assert buf.getvalue() == "tau,E_1,E_2,E_3\n"


def test_report_json_is_deterministic_and_valid(central_potential, tmp_path):
    jsonschema = pytest.importorskip("jsonschema")
    from blochgap.cell_solver import detect_gap
    from blochgap.predictor import predict_gap

    cfg, spec, inter = central_potential
    job = parse_config(json.dumps(MINIMAL))
    pred = predict_gap(spec, cfg, inter, 0.05)
    trunc = Truncation.for_intersection(cfg, inter)
    report = detect_gap(spec, cfg, 0.05, (inter.lambda0 - 1, inter.lambda0 + 1),
                        trunc, prediction=pred)
    bufs = []
    for _ in range(2):
        buf = io.StringIO()
        emit_report_json(buf, config=job, intersection=inter, prediction=pred,
                         gap_report=report, truncation=trunc)
        bufs.append(buf.getvalue())
    assert bufs[0] == bufs[1]
    doc = json.loads(bufs[0])
    schema_path = os.path.join(os.path.dirname(os.path.dirname(__file__)),
                               "src", "blochgap", "schemas", "report.schema.json")
    with open(schema_path) as fh:
        schema = json.load(fh)
    jsonschema.validate(doc, schema)
    assert doc["config_sha256"] == config_hash(job)


def _write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_cli_intersections_and_predict(tmp_path, capsys):
    cfg_path = _write(tmp_path, "job.json", EXAMPLE_CONFIGS["potential_central"])
    assert main(["intersections", "--config", cfg_path]) == 0
    table = capsys.readouterr().out
    assert "central" in table

    out = tmp_path / "report.json"
    rc = main(["predict", "--config", cfg_path, "--intersection", "1",
               "--eps", "0.05", "--out", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["prediction"]["verdict"] == "GapPredicted"
    assert doc["prediction"]["beta_l"] == pytest.approx(-0.5, abs=1e-10)

    rc = main(["intersections", "--config", cfg_path, "--format", "json",
               "--out", str(tmp_path / "list.json")])
    assert rc == 0
    listing = json.loads((tmp_path / "list.json").read_text())
    assert any(item["kind"] == "central" for item in listing)


def test_cli_bands_csv_is_byte_deterministic(tmp_path):
    cfg_path = _write(tmp_path, "job.json", {
        **EXAMPLE_CONFIGS["potential_central"],
        "solver": {"max_transverse": 3, "max_longitudinal": 4, "m_max": 5},
    })
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["bands", "--config", cfg_path, "--eps", "0.05",
                 "--tau-points", "32", "--out", str(a)]) == 0
    assert main(["bands", "--config", cfg_path, "--eps", "0.05",
                 "--tau-points", "32", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    text = a.read_text()
    assert text.startswith("tau,E_1")
    assert len(text.strip().split("\n")) == 33
    assert "\r" not in text


def test_cli_gap_and_exit_codes(tmp_path):
    cfg_path = _write(tmp_path, "job.json", EXAMPLE_CONFIGS["potential_central"])
    out = tmp_path / "gap.json"
    rc = main(["gap", "--config", cfg_path, "--intersection", "1",
               "--eps", "0.05", "--out", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["gap_report"]["found"] is True
    assert doc["gap_report"]["width"] == pytest.approx(0.05, rel=0.05)

    # zero-coupling family: predict exits 1
    zero_path = _write(tmp_path, "zero.json", EXAMPLE_CONFIGS["magnetic_central_zero"])
    rc = main(["predict", "--config", zero_path, "--intersection", "1",
               "--eps", "0.05", "--out", str(tmp_path / "z.json")])
    assert rc == 1


def test_cli_verify_passes_on_catalog_example(tmp_path):
    doc = {**EXAMPLE_CONFIGS["potential_interior"],
           "solver": {"tau_points": 192}}
    cfg_path = _write(tmp_path, "job.json", doc)
    out = tmp_path / "verify.json"
    rc = main(["verify", "--config", cfg_path, "--intersection", "1",
               "--out", str(out)])
    assert rc == 0
    report = json.loads(out.read_text())
    assert report["verify"]["passed"] is True
    assert report["convergence"]["slopes"]["edge_left"] >= 1.8


def test_cli_usage_and_schema_errors(tmp_path):
    assert main(["predict", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["predict", "--config", str(bad)]) == 2
    dup = tmp_path / "dup.json"
    dup.write_text('{"waveguide": 1, "waveguide": 2}')
    assert main(["intersections", "--config", str(dup)]) == 2
    assert main(["nonsense"]) == 2
    cfg_path = _write(tmp_path, "job.json", EXAMPLE_CONFIGS["potential_central"])
    assert main(["predict", "--config", cfg_path, "--intersection", "99"]) == 2


def test_cli_examples_round_trip(tmp_path, capsys):
    rc = main(["examples", "--out", str(tmp_path / "cat")])
    assert rc == 0
    paths = capsys.readouterr().out.strip().split("\n")
    assert len(paths) == len(EXAMPLE_CONFIGS)
    for path in paths:
        job = parse_config(open(path).read())
        assert job.waveguide.period > 0


def test_threads_env_fallback(tmp_path, monkeypatch):
    cfg_path = _write(tmp_path, "job.json", {
        **EXAMPLE_CONFIGS["potential_central"],
        "solver": {"max_transverse": 3, "max_longitudinal": 4},
    })
    monkeypatch.setenv("BLOCHGAP_THREADS", "2")
    a = tmp_path / "a.csv"
    assert main(["bands", "--config", cfg_path, "--eps", "0.05",
                 "--tau-points", "16", "--out", str(a)]) == 0
    monkeypatch.setenv("BLOCHGAP_THREADS", "zzz")
    assert main(["bands", "--config", cfg_path, "--eps", "0.05",
                 "--tau-points", "16", "--out", str(a)]) == 2
