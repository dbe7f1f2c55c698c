import json

import jsonschema
import numpy as np
import pytest

from srlab import runner
from srlab.config import ConfigError, parse_scenario
from srlab.report import CheckReport, diff_reports, dumps, load_schema, plain, quantity
from srlab.runner import run_scenario

FAST = '''name = "fast"
model = "martinet"
domain = "box"
checks = ["reduction", "santalo", "lambda1"]
seed = 11
santalo_functions = ["one"]
[domain_params]
lo = [-0.5, -0.5, -0.5]
hi = [0.5, 0.5, 0.5]
[samples]
reduction = 100
santalo_interior = 500
santalo_boundary = 500
lambda1 = 50
[expected."reduction.h1_residual"]
value = 0.0
tolerance = 1e-9
provenance = "trivial"
'''


def test_report_is_schema_valid_and_deterministic():
    a = run_scenario(parse_scenario(FAST)).to_dict()
    b = run_scenario(parse_scenario(FAST), threads=3).to_dict()
    jsonschema.validate(a, load_schema())
    assert diff_reports(a, b) == []
    assert a["passed"] and a["expected"][0]["passed"]
    assert [c["name"] for c in a["checks"]] == ["reduction", "santalo", "lambda1"]


def test_seed_changes_monte_carlo_values():
    a = run_scenario(parse_scenario(FAST)).to_dict()
    b = run_scenario(parse_scenario(FAST), seed=12).to_dict()
    assert diff_reports(a, b)


def test_empty_check_list():
    rep = run_scenario(parse_scenario(FAST.replace('checks = ["reduction", "santalo", "lambda1"]', "checks = []")
                                      .split("[expected")[0]))
    assert rep.passed and rep.checks == []
    jsonschema.validate(rep.to_dict(), load_schema())


def test_bad_model_is_config_error():
    with pytest.raises(ConfigError):
        run_scenario(parse_scenario(FAST.replace('model = "martinet"', 'model = "torus"')))


def test_numeric_and_generic_errors_are_reported(monkeypatch):
    def boom(ctx, rng):
        raise FloatingPointError("overflow")

    def oops(ctx, rng):
        raise RuntimeError("nope")

    monkeypatch.setitem(runner.CHECK_FUNCTIONS, "reduction", boom)
    monkeypatch.setitem(runner.CHECK_FUNCTIONS, "lambda1", oops)
    rep = run_scenario(parse_scenario(FAST))
    assert rep.numeric_error and not rep.passed
    by = {c.name: c for c in rep.checks}
    assert by["reduction"].numeric_error and "overflow" in by["reduction"].error
    assert not by["lambda1"].numeric_error and "nope" in by["lambda1"].error
    assert rep.expected[0]["observed"] is None and not rep.expected[0]["passed"]


def test_expected_failure_marks_report_failed():
    text = FAST.replace("value = 0.0", "value = 5.0")
    rep = run_scenario(parse_scenario(text))
    assert all(c.passed for c in rep.checks)
    assert not rep.passed


def test_spectral_check_and_csv(tmp_path):
    s = parse_scenario('name = "sp"\nmodel = "spherical-band"\ndomain = "band"\nchecks = ["spectral"]\nseed = 1\n'
                       '[model_params]\nepsilon = 0.1\nvolume = "flat"\n[spectral]\ngrids = [128, 256, 512]\n')
    rep = run_scenario(s, out_dir=tmp_path)
    c = rep.checks[0]
    assert c.passed
    assert any("round volume" in cv for cv in c.caveats)
    assert sorted(p.name for p in tmp_path.iterdir()) == sorted(c.files)


def test_plain_handles_non_finite_and_numpy():
    out = plain({"a": np.float64(np.inf), "b": np.array([1, 2]), "c": (np.bool_(True), float("nan"))})
    assert out == {"a": "inf", "b": [1, 2], "c": [True, "nan"]}
    json.loads(dumps(out))
    assert quantity(1.0)["provenance"] == "computed"
    assert CheckReport("x", True).to_dict()["files"] == []


def test_diff_reports_ignores_timing():
    a = {"x": 1, "timing": {"t": 1}, "y": [1, {"z": 2}]}
    b = {"x": 1, "timing": {"t": 2}, "y": [1, {"z": 3}]}
    assert diff_reports(a, b) == ["/y/1/z"]
