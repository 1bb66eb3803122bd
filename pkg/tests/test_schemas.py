"""Tests for run configs, result documents and verification reports."""

import json

import pytest

from permclt.core.exceptions import ConfigError
from permclt.schemas.result import CheckResult, Metadata, ResultDocument, SuiteReport, VerifyReport
from permclt.schemas.run import build_run_config, build_verify_options, load_run_config


def test_run_config_defaults():
    cfg = build_run_config(n=12, samples=100)
    assert cfg.family == "exceedance:12"
    assert cfg.source == "y"
    assert cfg.grid == [0.25, 0.5, 0.75, 1.0]
    assert build_run_config(n=12, samples=100, source="tableau").family is None


@pytest.mark.parametrize(
    "values",
    [
        {"n": 5, "samples": 0},
        {"n": 0, "samples": 10},
        {"n": 5, "samples": 10, "grid": [0.5, 0.25]},
        {"n": 5, "samples": 10, "grid": [1.5]},
        {"n": 5, "samples": 10, "grid": []},
        {"n": 5, "samples": 10, "colour": "red"},
        {"n": 5, "samples": 10, "source": "nope"},
        {"n": 5, "samples": 10, "mode": "custom"},
    ],
)
def test_run_config_rejects(values):
    with pytest.raises(ConfigError):
        build_run_config(**values)


def test_config_error_names_the_field():
    with pytest.raises(ConfigError, match="samples"):
        build_run_config(n=5, samples=0)


def test_load_run_config_from_document():
    cfg = build_run_config(n=9, samples=50, seed=4, functionals=["integral"])
    doc = ResultDocument(command="simulate", config=cfg.model_dump(), metadata=Metadata.for_run(4, 1))
    reloaded = load_run_config(json.loads(doc.to_json()))
    assert reloaded == cfg
    assert load_run_config(cfg.model_dump()) == cfg
    with pytest.raises(ConfigError):
        load_run_config({"config": "nope"})


def test_result_document_serialization():
    doc = ResultDocument(
        command="matrix", config={"family": "exceedance:3"}, metadata=Metadata.for_run(7, 2), lam=0.5
    )
    text = doc.to_json()
    assert '"schema": "1"' in text
    data = doc.to_dict()
    assert data["lam"] == 0.5
    assert data["metadata"]["rng"]["seed"] == 7
    assert "timestamp" in data["metadata"]


def test_verify_options():
    opts = build_verify_options(trials=3)
    assert opts.n is None and opts.samples is None
    with pytest.raises(ConfigError):
        build_verify_options(n=1)


def test_verify_report():
    ok = CheckResult(name="a", target=1.0, estimate=1.01, se=0.02, passed=True)
    bad = CheckResult(name="b", tolerance=0.1, passed=False)
    report = VerifyReport(suites=[SuiteReport(suite="s1", checks=[ok]), SuiteReport(suite="s2", checks=[bad])])
    assert not report.passed
    assert report.suites[0].passed
    summary = report.summary()
    assert summary["passed"] is False
    assert summary["suites"][1]["checks"][0]["name"] == "b"
    table = report.table()
    assert "PASS" in table and "FAIL" in table
    assert table.splitlines()[-1] == "overall: FAIL"
