"""Tests for weak exceedances, exact moments, the tableau boundary and area."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from permclt.core.exceptions import IndexOrderError, InvalidPermutationError, RangeError, ShapeError
from permclt.core.rng import substream
from permclt.services import ensemble_service, matrix_service, tableau_service

permutations = st.integers(2, 40).flatmap(lambda n: st.permutations(list(range(1, n + 1))))


def test_record_identity():
    record = tableau_service.exceedance_record([1, 2, 3])
    assert record.indicators.tolist() == [1, 1, 1]
    assert record.rows == 3 and record.area == 0
    assert record.s0.values.tolist() == [0.0, 1.0, 2.0, 3.0]


def test_record_cycle():
    record = tableau_service.exceedance_record([3, 1, 2])
    assert record.indicators.tolist() == [1, 0, 0]
    assert record.rows == 1
    assert record.area == 2


def test_record_rejects_non_permutation():
    with pytest.raises(InvalidPermutationError):
        tableau_service.exceedance_record([1, 1, 2])


@given(permutations)
def test_area_identity(perm):
    batch = tableau_service.exceedance_batch(np.array([perm]) - 1)
    n = len(perm)
    assert batch.area[0] == batch.area_identity[0]
    assert tableau_service.area_from_centered(n, batch.y_hat[0]) == pytest.approx(batch.area[0], abs=1e-6 * n * n)


def test_boundary_vertices():
    poly = tableau_service.boundary(tableau_service.exceedance_record([3, 1, 2]))
    assert poly.points.tolist() == [[2, 0], [2, 1], [1, 1], [0, 1]]
    assert np.allclose(poly.scaled()[0], [2 / 3, 0.0])


@given(permutations)
def test_boundary_is_a_lattice_path(perm):
    poly = tableau_service.boundary(tableau_service.exceedance_record(perm))
    steps = np.diff(poly.points, axis=0)
    assert all(tuple(s) in {(0, 1), (-1, 0)} for s in steps)
    assert poly.points[-1, 0] == 0


@given(permutations)
def test_boundary_approximation_is_exact(perm):
    record = tableau_service.exceedance_record(perm)
    scaled = tableau_service.boundary(record).scaled()
    assert np.allclose(tableau_service.boundary_approximation(record), scaled, atol=1e-12)


def test_parabola_point():
    x, y = tableau_service.parabola_point(np.array([0.0, 0.5, 1.0]))
    assert np.allclose(x, [0.5, 0.375, 0.0])
    assert np.allclose(y, [0.0, 0.375, 0.5])


def test_parabola_distance_shrinks():
    n = 2000
    perm = ensemble_service.random_permutation(n, substream(4))
    record = tableau_service.exceedance_record(perm)
    assert tableau_service.parabola_distance(tableau_service.boundary(record)) < 5 / np.sqrt(n)


def test_yn_deviation_small():
    n = 400
    perm = ensemble_service.random_permutation(n, substream(8))
    assert tableau_service.yn_deviation(n, perm) < 2 / np.sqrt(n)


@given(permutations)
def test_yn_deviation_matches_dense_path(perm):
    n = len(perm)
    m = tableau_service.exceedance_matrix(n)
    path = matrix_service.build_path(m, matrix_service.normalization(m), perm)
    record = tableau_service.exceedance_record(perm)
    t = np.arange(n + 1) / n
    approx = np.sqrt(6.0 / n) * (record.s0.values - n * t * (1 - t / 2))
    dense = float(np.max(np.abs(path.values - approx)))
    assert tableau_service.yn_deviation(n, perm) == pytest.approx(dense, rel=1e-9, abs=1e-12)


def test_yn_deviation_rejects_wrong_size():
    with pytest.raises(InvalidPermutationError):
        tableau_service.yn_deviation(4, [1, 2, 3])
    with pytest.raises(ShapeError):
        tableau_service.yn_deviation(1, [1])


@pytest.mark.parametrize("n", [2, 5, 37])
def test_exceedance_tilde_sums_match_dense(monkeypatch, n):
    monkeypatch.setattr(tableau_service, "_TILDE_BLOCK", 7)
    tilde = matrix_service.tilde_standardize(tableau_service.exceedance_matrix(n).a0)
    sum_sq, sum_cube = tableau_service.exceedance_tilde_sums(n)
    assert sum_sq == pytest.approx(np.sum(tilde**2), rel=1e-10)
    assert sum_cube == pytest.approx(np.sum(np.abs(tilde) ** 3), rel=1e-10)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_exact_moments_match_enumeration(n):
    table = ensemble_service.permutation_table(n)
    batch = tableau_service.exceedance_batch(table)
    total = table.shape[0]
    ind = batch.indicators
    for i in range(1, n + 1):
        assert Fraction(int(ind[:, i - 1].sum()), total) == tableau_service.mean_indicator(n, i)
        for j in range(i + 1, n + 1):
            both = int((ind[:, i - 1] * ind[:, j - 1]).sum())
            assert Fraction(both, total) == tableau_service.joint_indicator(n, i, j)
            assert Fraction(both, int(ind[:, j - 1].sum())) == tableau_service.conditional_indicator(n, i, j)
    for k in range(n + 1):
        assert Fraction(int(batch.s0[:, k].sum()), total) == tableau_service.mean_s0(n, k)

    rows = [int(r) for r in batch.rows]
    mean = Fraction(sum(rows), total)
    assert Fraction(sum(r * r for r in rows), total) - mean**2 == tableau_service.exact_row_variance(n)
    assert Fraction(int(batch.area.sum()), total) == tableau_service.exact_area_mean(n)


def test_exact_moments_closed_forms():
    moments = tableau_service.exact_moments(10, 3, 7, 4)
    assert moments["E[I_i]"] == Fraction(8, 10)
    assert moments["E[I_i I_j]"] == Fraction(7 * 4, 9 * 10)
    assert moments["E[I_i | I_j=1]"] == Fraction(7, 9)
    assert moments["E[S_0(k/n)]"] == Fraction(4 * 17, 20)


def test_moment_index_errors():
    with pytest.raises(IndexOrderError):
        tableau_service.joint_indicator(5, 3, 3)
    with pytest.raises(IndexOrderError):
        tableau_service.exact_moments(5, 4, 2, 1)
    with pytest.raises(RangeError):
        tableau_service.mean_indicator(5, 6)
    with pytest.raises(RangeError):
        tableau_service.mean_s0(5, -1)


@pytest.mark.parametrize("n", [10, 100, 1000])
def test_mean_deviation_bounded(n):
    assert tableau_service.mean_deviation(n) <= 1.0
    assert tableau_service.mean_deviation(n, [k / n for k in range(n + 1)]) == pytest.approx(0.5)


def test_limit_covariance_values():
    assert tableau_service.limit_cov_hat(0.5, 0.5) == pytest.approx(11 / 192)
    assert tableau_service.limit_cov_hat(1.0, 1.0) == pytest.approx(1 / 12)
    assert tableau_service.limit_cov_hat(0.5, 1.0) == pytest.approx(1 / 24)
    assert tableau_service.limit_cov_hat(1.0, 0.5) == pytest.approx(1 / 24)
    assert tableau_service.limit_cov_hat(0.0, 0.0) == 0.0
    with pytest.raises(RangeError):
        tableau_service.limit_cov_hat(1.5, 0.5)


def test_area_limit_variance():
    assert tableau_service.area_limit_variance() == pytest.approx(1 / 144, abs=1e-12)
    assert tableau_service.area_functional(tableau_service.limit_cov_hat) == pytest.approx(1 / 144, abs=1e-8)
    scaled = tableau_service.area_functional(lambda t, u: 36.0 * tableau_service.limit_cov_hat(t, u))
    assert scaled == pytest.approx(36 / 144, abs=1e-7)


def test_lyapounov_scaling():
    for n in (100, 1000, 10_000):
        assert 1.3 <= tableau_service.lyapounov_scaled(n) <= 1.6
    assert tableau_service.lyapounov_scaled(10_000) == pytest.approx(6**1.5 / 10, rel=0.02)


def test_scaled_variances():
    rows = np.array([1, 2, 3, 4])
    assert tableau_service.rows_variance_scaled(rows, 2) == pytest.approx(np.var(rows, ddof=1) / 2)
    assert tableau_service.area_variance_scaled(rows, 2) == pytest.approx(np.var(rows, ddof=1) / 8)
