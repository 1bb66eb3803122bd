"""Tests for the verification suites."""

import pytest

from permclt.core.exceptions import UnknownSuiteError
from permclt.schemas.run import build_verify_options
from permclt.services import verify_service


def _failures(report):
    return [(s.suite, c.name, c.estimate, c.tolerance) for s in report.suites for c in s.checks if not c.passed]


def test_resolve_suites():
    assert verify_service.resolve_suites(["all"]) == list(verify_service.SUITES)
    assert verify_service.resolve_suites(["moments", "moments", "area"]) == ["moments", "area"]
    with pytest.raises(UnknownSuiteError):
        verify_service.resolve_suites(["moments", "nope"])


def test_unknown_suite_fails_before_running():
    with pytest.raises(UnknownSuiteError):
        verify_service.run_verify(["nope"], build_verify_options())


@pytest.mark.parametrize(
    "suite, options",
    [
        ("exact-cov", {"n": 4, "trials": 3}),
        ("moments", {"n": 4}),
        ("fernique", {}),
        ("functionals", {"n": 20}),
        ("lyapounov", {}),
        ("determinism", {"n": 50, "samples": 4500}),
        ("prelimit", {"n": 8, "samples": 4000}),
    ],
)
def test_fast_suites_pass(suite, options):
    report = verify_service.run_verify([suite], build_verify_options(**options))
    assert report.suites[0].suite == suite
    assert report.suites[0].checks
    assert report.passed, _failures(report)


@pytest.mark.slow
@pytest.mark.parametrize(
    "suite",
    ["tableau-cov", "area", "rows", "kiefer", "prelimit", "distance-decay", "limit-consistency"],
)
def test_monte_carlo_suites_pass(suite):
    report = verify_service.run_verify([suite], build_verify_options(workers=4))
    assert report.passed, _failures(report)


def test_all_ignores_size_overrides(monkeypatch):
    seen = []
    monkeypatch.setattr(verify_service, "SUITES", {"stub": lambda opts: seen.append(opts) or []})
    verify_service.run_verify(["all"], build_verify_options(n=5, samples=10))
    assert seen[0].n is None and seen[0].samples is None
    verify_service.run_verify(["stub"], build_verify_options(n=5, samples=10))
    assert seen[1].n == 5
