"""Tests for score matrices, normalizations and the covariance structure."""

import json

import numpy as np
import pytest
from hypothesis import given, settings as hsettings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from permclt.core.exceptions import (
    InvalidPermutationError,
    NonFiniteError,
    NonPositiveError,
    ParseError,
    ShapeError,
    ZeroMatrixError,
)
from permclt.models.score import NormalizationMode
from permclt.services import matrix_service, tableau_service

scores = st.integers(min_value=2, max_value=7).flatmap(
    lambda n: arrays(np.float64, (n, n), elements=st.floats(-10, 10, allow_nan=False, width=64))
)
integer_scores = st.integers(min_value=2, max_value=7).flatmap(
    lambda n: arrays(np.float64, (n, n), elements=st.integers(-10, 10).map(float))
)


@given(scores)
def test_center_rows_zero_row_sums(a0):
    m = matrix_service.center_rows(a0)
    assert np.allclose(m.a.sum(axis=1), 0.0, atol=1e-9)
    assert np.allclose(m.a + m.row_means[:, None], a0)


def test_center_rows_rejects_bad_shapes():
    with pytest.raises(ShapeError):
        matrix_service.center_rows(np.ones((2, 3)))
    with pytest.raises(ShapeError):
        matrix_service.center_rows(np.ones((1, 1)))
    with pytest.raises(NonFiniteError):
        matrix_service.center_rows([[1.0, np.nan], [0.0, 1.0]])


def test_exceedance_centering(exceedance):
    m = exceedance(4)
    i = np.arange(1, 5)[:, None]
    j = np.arange(1, 5)[None, :]
    expected = (i <= j).astype(float) - 1.0 + (i - 1) / 4.0
    assert np.allclose(m.a, expected)


def test_scores_are_read_only(random_matrix):
    with pytest.raises(ValueError):
        random_matrix.a[0, 0] = 1.0


def test_tilde_standardize_double_centers():
    a0 = np.arange(16, dtype=float).reshape(4, 4) ** 1.5
    tilde = matrix_service.tilde_standardize(a0)
    assert np.allclose(tilde.sum(axis=0), 0.0)
    assert np.allclose(tilde.sum(axis=1), 0.0)


def test_normalization_modes(random_matrix):
    m = random_matrix
    canonical = matrix_service.normalization(m)
    simple = matrix_service.normalization(m, "simple")
    assert canonical.mode is NormalizationMode.CANONICAL
    assert canonical.s2 == pytest.approx(np.sum(m.a**2) / (m.n - 1))
    assert simple.s2 == pytest.approx(np.sum(m.a**2) / m.n)
    assert matrix_service.normalization(m, "custom", 2.5).s == 2.5


def test_normalization_zero_matrix():
    m = matrix_service.center_rows(np.ones((3, 3)))
    with pytest.raises(ZeroMatrixError):
        matrix_service.normalization(m)


def test_tilde_vanishes_for_additive_scores():
    m = matrix_service.center_rows(matrix_service.generate_family("additive:6:3"))
    assert matrix_service.normalization(m).s > 0
    with pytest.raises(ZeroMatrixError, match="tilde"):
        matrix_service.normalization(m, NormalizationMode.TILDE)
    with pytest.raises(ZeroMatrixError):
        matrix_service.lyapounov_tilde(m)


@pytest.mark.parametrize("mode", ["canonical", "tilde", "simple"])
def test_normalization_survives_large_row_offset(rng, mode):
    noise = rng.uniform(0.0, 0.05, size=(100, 100))
    plain = matrix_service.normalization(matrix_service.center_rows(noise), mode)
    shifted = matrix_service.normalization(matrix_service.center_rows(noise + 1e9), mode)
    assert shifted.s == pytest.approx(plain.s, rel=1e-4)


@pytest.mark.parametrize("s", [None, 0.0, -1.0, float("nan")])
def test_custom_normalization_needs_positive_s(random_matrix, s):
    with pytest.raises(NonPositiveError):
        matrix_service.normalization(random_matrix, "custom", s)


@given(integer_scores, st.floats(0.1, 100.0), st.floats(-5, 5))
@hsettings(max_examples=50)
def test_lyapounov_invariant_to_scale_and_row_shift(a0, c, shift):
    m = matrix_service.center_rows(a0)
    try:
        norm = matrix_service.normalization(m)
    except ZeroMatrixError:
        return
    moved = matrix_service.center_rows(c * a0 + shift)
    ratio = matrix_service.lyapounov_ratio(m, norm)
    assert matrix_service.lyapounov_ratio(moved, matrix_service.normalization(moved)) == pytest.approx(ratio, rel=1e-6)


def test_exceedance_lyapounov_matches_row_sums(exceedance):
    n = 60
    m = exceedance(n)
    sum_sq, sum_cube = tableau_service.exceedance_sums(n)
    assert np.sum(m.a**2) == pytest.approx(sum_sq, rel=1e-12)
    assert np.sum(np.abs(m.a) ** 3) == pytest.approx(sum_cube, rel=1e-12)
    dense = matrix_service.lyapounov_ratio(m, matrix_service.normalization(m)) * np.sqrt(n)
    assert dense == pytest.approx(tableau_service.lyapounov_scaled(n), rel=1e-10)


def test_sigma_matrix_structure(random_matrix):
    m = random_matrix
    norm = matrix_service.normalization(m)
    sigma = matrix_service.sigma_matrix(m, norm).sigma
    assert np.allclose(sigma, sigma.T)
    assert np.linalg.eigvalsh(sigma)[0] > -1e-12
    assert np.allclose(np.diag(sigma), np.sum(m.a**2, axis=1) / (m.n * norm.s2))
    assert np.trace(sigma) == pytest.approx((m.n - 1) / m.n)


def test_prelimit_covariance_is_sigma_partial_sums(random_matrix):
    m = random_matrix
    norm = matrix_service.normalization(m)
    sigma = matrix_service.sigma_matrix(m, norm)
    assert np.allclose(matrix_service.prelimit_covariance(m, norm), sigma.partial_sums(), atol=1e-12)


def test_empirical_fn_gn(random_matrix):
    m = random_matrix
    fn, gn = matrix_service.empirical_fn_gn(m, matrix_service.normalization(m))
    assert fn[0] == 0.0 and np.all(np.diff(fn) >= 0)
    assert fn[-1] == pytest.approx((m.n - 1) / m.n)
    assert np.allclose(gn, gn.T)
    assert gn.shape == (m.n + 1, m.n + 1)


def test_build_path(random_matrix):
    m = random_matrix
    norm = matrix_service.normalization(m)
    perm = [2, 1, 5, 3, 4]
    path = matrix_service.build_path(m, norm, perm)
    assert path.values[0] == 0.0
    expected = sum(m.a[i, perm[i] - 1] for i in range(5)) / norm.s
    assert path(1.0) == pytest.approx(expected)
    assert path(0.39) == pytest.approx(m.a[0, 1] / norm.s)
    assert path(0.4) == pytest.approx((m.a[0, 1] + m.a[1, 0]) / norm.s)


@pytest.mark.parametrize("perm", [[1, 1, 2], [1, 2], [0, 1, 2], [1.0, 2.0, 3.0]])
def test_validate_permutation_rejects(perm):
    with pytest.raises(InvalidPermutationError):
        matrix_service.validate_permutation(perm, 3)


def test_generate_family():
    assert np.array_equal(matrix_service.generate_family("exceedance:3"), np.triu(np.ones((3, 3))))
    first = matrix_service.generate_family("uniform:4:9")
    assert np.array_equal(first, matrix_service.generate_family("uniform:4:9"))
    binary = matrix_service.generate_family("bernoulli:5:0.3:1")
    assert set(np.unique(binary)) <= {0.0, 1.0}
    for bad in ("nope:3", "uniform:3", "uniform:x:1", "bernoulli:3:2:1"):
        with pytest.raises(ParseError):
            matrix_service.generate_family(bad)


def test_expand_family():
    assert matrix_service.expand_family("exceedance", 10) == "exceedance:10"
    assert matrix_service.expand_family("uniform", 4, seed=3) == "uniform:4:3"
    assert matrix_service.expand_family("bernoulli", 4, seed=3, p=0.2) == "bernoulli:4:0.2:3"
    assert matrix_service.expand_family("exceedance:7") == "exceedance:7"
    with pytest.raises(ParseError):
        matrix_service.expand_family("exceedance")


def test_load_matrix_csv_and_json(csv_matrix, tmp_path):
    path = csv_matrix([[1, 2], [3, 4]])
    assert np.array_equal(matrix_service.load_matrix(path), [[1.0, 2.0], [3.0, 4.0]])

    doc = tmp_path / "m.json"
    doc.write_text(json.dumps({"n": 2, "a0": [[0, 1], [1, 0]]}), encoding="utf-8")
    assert np.array_equal(matrix_service.load_matrix(doc), [[0.0, 1.0], [1.0, 0.0]])


def test_load_matrix_reports_bad_row(csv_matrix):
    path = csv_matrix([[1, 2], [3, "x"]])
    with pytest.raises(ParseError) as info:
        matrix_service.load_matrix(path)
    assert info.value.line == 2
    assert f"{path}:2" in str(info.value)


def test_load_matrix_ragged_and_missing(csv_matrix, tmp_path):
    with pytest.raises(ParseError, match="row 2"):
        matrix_service.load_matrix(csv_matrix([[1, 2], [3]]))
    with pytest.raises(ParseError):
        matrix_service.load_matrix(tmp_path / "missing.csv")


def test_resolve_matrix_needs_one_source(csv_matrix):
    with pytest.raises(ParseError):
        matrix_service.resolve_matrix()
    with pytest.raises(ParseError):
        matrix_service.resolve_matrix("exceedance:3", str(csv_matrix([[1, 0], [0, 1]])))
    assert matrix_service.resolve_matrix("exceedance:3").n == 3
