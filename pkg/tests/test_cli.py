"""End-to-end tests of the command-line surface."""

import json

import pytest

from permclt.cli.output import command_spec
from permclt.main import build_parser, main
from permclt.schemas.run import build_run_config
from permclt.services import matrix_service
from permclt.services.ensemble_service import canonical_payload


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _json(capsys, *argv):
    code, out, err = _run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def test_matrix_exceedance(capsys):
    doc = _json(capsys, "matrix", "--family", "exceedance", "--n", "100", "--summary")
    assert doc["schema"] == "1"
    assert doc["command"] == "matrix"
    assert 1.3 <= doc["lambda_sqrt_n"] <= 1.6
    assert doc["s"]["selected"] == doc["s"]["canonical"]
    assert "sigma" not in doc


def test_matrix_summary_streams_exceedance(capsys, monkeypatch):
    def dense(*args, **kwargs):
        raise AssertionError("dense matrix built")

    monkeypatch.setattr(matrix_service, "resolve_matrix", dense)
    doc = _json(capsys, "matrix", "--family", "exceedance:3000", "--summary")
    assert doc["n"] == 3000
    assert 1.3 <= doc["lambda_sqrt_n"] <= 1.6
    assert doc["lambda_tilde"] > 0


@pytest.mark.parametrize("mode", ["canonical", "tilde", "simple"])
def test_matrix_streamed_summary_matches_dense(capsys, mode):
    streamed = _json(capsys, "matrix", "--family", "exceedance:40", "--mode", mode, "--summary")
    dense = _json(capsys, "matrix", "--family", "exceedance:40", "--mode", mode)
    for key in ("canonical", "tilde", "simple", "selected"):
        assert streamed["s"][key] == pytest.approx(dense["s"][key], rel=1e-10)
    assert streamed["lambda"] == pytest.approx(dense["lambda"], rel=1e-10)
    assert streamed["lambda_tilde"] == pytest.approx(dense["lambda_tilde"], rel=1e-10)


def test_matrix_streamed_custom_scale(capsys):
    doc = _json(capsys, "matrix", "--family", "exceedance:10", "--mode", "custom", "--s", "2", "--summary")
    assert doc["s"]["selected"] == 2.0
    code, _, err = _run(capsys, "matrix", "--family", "exceedance:10", "--mode", "custom", "--summary")
    assert code == 2
    assert "NonPositiveError" in err


def test_matrix_full_tables(capsys):
    doc = _json(capsys, "matrix", "--family", "uniform:4:2")
    assert len(doc["sigma"]) == 4
    assert len(doc["gn"]) == 5


def test_matrix_additive_tilde_fails(capsys):
    code, _, err = _run(capsys, "matrix", "--family", "additive:5:1", "--mode", "tilde")
    assert code == 2
    assert "ZeroMatrixError" in err


def test_matrix_additive_reports_missing_tilde(capsys):
    doc = _json(capsys, "matrix", "--family", "additive:5:1", "--summary")
    assert doc["s"]["tilde"] is None
    assert doc["lambda_tilde"] is None
    assert doc["notes"]


def test_matrix_malformed_csv(capsys, csv_matrix):
    path = csv_matrix([[1, 2], [3, "oops"]])
    code, out, err = _run(capsys, "matrix", "--input", str(path))
    assert code == 2
    assert out == ""
    assert "row 2" in err or f"{path}:2" in err


def test_matrix_csv_output(capsys):
    code, out, _ = _run(capsys, "matrix", "--family", "exceedance", "--n", "4", "--format", "csv")
    lines = out.strip().splitlines()
    assert code == 0
    assert lines[0] == "c1,c2,c3,c4"
    assert len(lines) == 5


def test_simulate_rejects_zero_samples(capsys):
    code, _, err = _run(capsys, "simulate", "--n", "10", "--samples", "0")
    assert code == 2
    assert "ConfigError" in err


def test_simulate_needs_sizes(capsys):
    code, _, _ = _run(capsys, "simulate", "--n", "10")
    assert code == 2


def test_simulate_is_reproducible(capsys):
    argv = ["simulate", "--n", "20", "--samples", "3000", "--seed", "5", "--functional", "integral"]
    first = _json(capsys, *argv)
    second = _json(capsys, *argv, "--workers", "3")
    assert canonical_payload(first) == canonical_payload(second)
    assert first["count"] == 3000
    assert first["functionals"]["integral"]["se"] > 0


def test_simulate_config_round_trip(capsys, tmp_path):
    out = tmp_path / "run.json"
    code, _, _ = _run(
        capsys, "simulate", "--source", "tableau", "--n", "30", "--samples", "2500", "--grid", "0.5,1", "--out", str(out)
    )
    assert code == 0
    original = json.loads(out.read_text(encoding="utf-8"))
    rerun = _json(capsys, "simulate", "--config", str(out))
    assert canonical_payload(rerun) == canonical_payload(original)
    assert rerun["config"]["source"] == "tableau"


def test_simulate_covariance_csv(capsys):
    code, out, _ = _run(
        capsys, "simulate", "--n", "10", "--samples", "500", "--grid", "0.5,1", "--format", "csv"
    )
    lines = out.strip().splitlines()
    assert code == 0
    assert lines[0] == "t,u,cov,se"
    assert len(lines) == 4


def test_verify_unknown_suite(capsys):
    code, _, err = _run(capsys, "verify", "--suite", "nope")
    assert code == 2
    assert "UnknownSuiteError" in err


def test_verify_moments(capsys):
    code, out, err = _run(capsys, "verify", "--suite", "moments", "--n", "4")
    assert code == 0
    assert json.loads(out)["passed"] is True
    assert "overall: PASS" in err


def test_verify_exact_cov(capsys):
    code, out, _ = _run(capsys, "verify", "--suite", "exact-cov", "--n", "6", "--trials", "20")
    assert code == 0
    assert json.loads(out)["suites"][0]["suite"] == "exact-cov"


def test_verify_comma_list(capsys):
    doc = _json(capsys, "verify", "--suite", "fernique,lyapounov")
    assert [s["suite"] for s in doc["suites"]] == ["fernique", "lyapounov"]


def test_tableaux_cycle(capsys):
    doc = _json(capsys, "tableaux", "--perm", "3,1,2")
    assert doc["rows"] == 1
    assert doc["area"] == 2
    assert doc["boundary"] == [[2, 0], [2, 1], [1, 1], [0, 1]]
    assert doc["exact_moments"]["E[I_i]"]["exact"] == "1"


def test_tableaux_rejects_non_permutation(capsys):
    code, _, err = _run(capsys, "tableaux", "--perm", "1,1,2")
    assert code == 2
    assert "InvalidPermutationError" in err


def test_tableaux_random_with_monte_carlo(capsys):
    doc = _json(capsys, "tableaux", "--n", "200", "--samples", "50")
    assert doc["n"] == 200
    assert doc["monte_carlo"]["within_threshold"] is True


def test_gaussian_kernel(capsys):
    doc = _json(capsys, "gaussian", "kernel", "--m", "4")
    assert doc["sigma"][2][2] == pytest.approx(11 / 32)
    assert doc["sigma"][0] == [0.0] * 5


@pytest.mark.parametrize("action", ["sample", "integral", "kiefer", "alpha", "prelimit", "split"])
def test_gaussian_actions_run(capsys, action):
    doc = _json(capsys, "gaussian", action, "--m", "8", "--n", "10", "--paths", "2")
    assert doc["command"] == "gaussian"


def test_gaussian_fernique(capsys):
    doc = _json(capsys, "gaussian", "fernique", "--kernel", "bridge", "--beta", "2")
    assert doc["c_g_squared"] == pytest.approx(1.0)
    assert doc["diverges"] is False


def test_gaussian_bad_counts(capsys):
    code, _, _ = _run(capsys, "gaussian", "sample", "--m", "0")
    assert code == 2


def test_distance_identical_sources(capsys):
    doc = _json(
        capsys,
        "distance",
        "--a", "y",
        "--b", "y",
        "--functional", "ball:eps=0.5:p=2:rho=1:eta=0.5",
        "--n", "10",
        "--samples", "2000",
    )
    assert doc["estimate"] == 0.0
    assert doc["config"]["a"] == "y"


def test_csv_without_table_falls_back_to_json(capsys):
    code, out, err = _run(
        capsys, "distance", "--functional", "integral", "--n", "6", "--samples", "200", "--format", "csv"
    )
    assert code == 0
    assert json.loads(out)["command"] == "distance"
    assert "no CSV table" in err


def test_command_spec_from_parsed_args():
    args = build_parser().parse_args(
        ["matrix", "--family", "uniform:4:2", "--format", "csv", "--out", "sigma.csv", "--summary"]
    )
    spec = command_spec(args)
    assert spec.subcommand == "matrix"
    assert spec.format == "csv"
    assert spec.out == "sigma.csv"
    assert spec.inputs["family"] == "uniform:4:2"
    assert spec.inputs["summary"] is True
    assert "handler" not in spec.inputs and "input" not in spec.inputs
    assert spec.config is None


def test_command_spec_carries_run_config():
    args = build_parser().parse_args(["simulate", "--n", "10", "--samples", "50"])
    cfg = build_run_config(n=10, samples=50)
    spec = command_spec(args, cfg)
    assert spec.subcommand == "simulate"
    assert spec.config == cfg
    assert spec.format == "json" and spec.out is None
