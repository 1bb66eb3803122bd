"""Tests for the smooth test-functional catalog."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from permclt.core.exceptions import GridMismatchError, NonPositiveError, ParseError, RangeError
from permclt.models.functional import BallFunctional, EvalFunctional, IntegralFunctional, ProductFunctional
from permclt.models.path import StepPath
from permclt.services import functional_service

path_values = arrays(np.float64, st.integers(2, 12).map(lambda n: n + 1), elements=st.floats(-5, 5, width=64))


@given(st.floats(0.01, 10), st.floats(-10, 10), st.floats(1, 64), st.integers(1, 20))
def test_h_of_constant_path(eps, c, p, n):
    path = StepPath(n=n, values=np.full(n + 1, c))
    assert functional_service.h_eps_p(path, eps, p) == pytest.approx(np.hypot(eps, c), rel=1e-9)


def test_h_uses_first_n_values():
    path = StepPath(n=2, values=[0.0, 0.0, 100.0])
    assert functional_service.h_eps_p(path, 1.0, 2.0) == pytest.approx(1.0)


def test_h_argument_checks():
    path = StepPath.zero(3)
    with pytest.raises(NonPositiveError):
        functional_service.h_eps_p(path, 0.0, 2.0)
    with pytest.raises(RangeError):
        functional_service.h_eps_p(path, 1.0, 0.5)


def test_h_large_p_approaches_sup(rng, random_paths):
    paths = random_paths(rng, 200, 30)
    eps = 0.3
    sup = np.sqrt(eps**2 + paths[:, :30] ** 2).max(axis=1)
    assert np.allclose(functional_service.h_eps_p(paths, eps, 4096.0) / sup, 1.0, atol=1e-2)


@given(path_values, path_values, st.floats(0.05, 2), st.floats(1, 8))
def test_minkowski(y, z, eps, p):
    size = min(y.size, z.size)
    y, z = y[:size], z[:size]
    n = size - 1
    lhs = functional_service.h_eps_p(StepPath(n=n, values=y + z), eps, p)
    rhs = functional_service.h_eps_p(StepPath(n=n, values=y), eps, p) + np.mean(np.abs(z[:n]) ** p) ** (1 / p)
    assert lhs <= rhs * (1 + 1e-12) + 1e-12


def test_phi_cutoff_values():
    phi = functional_service.phi_cutoff
    assert phi(-1.0) == 1.0 and phi(0.0) == 1.0
    assert phi(1.0) == 0.0 and phi(3.0) == 0.0
    assert phi(0.5) == pytest.approx(0.5)
    xs = np.linspace(-0.5, 1.5, 401)
    assert np.all(np.diff(phi(xs)) <= 1e-15)


@pytest.mark.parametrize("x", [0.0, 1.0])
def test_phi_cutoff_derivatives_vanish(x):
    phi = functional_service.phi_cutoff
    h = 1e-3
    d1 = (phi(x + h) - phi(x - h)) / (2 * h)
    d2 = (phi(x + h) - 2 * phi(x) + phi(x - h)) / h**2
    assert abs(d1) < 1e-4
    assert abs(d2) < 1e-1


@given(st.floats(-5, 5), st.floats(0.01, 3), st.floats(-10, 10))
def test_phi_rho_eta_plateaus(rho, eta, x):
    value = functional_service.phi_rho_eta(x, rho, eta)
    assert 0.0 <= value <= 1.0
    if x <= rho:
        assert value == 1.0
    if x >= rho + eta:
        assert value == 0.0


def test_phi_rho_eta_needs_positive_eta():
    with pytest.raises(NonPositiveError):
        functional_service.phi_rho_eta(0.5, 0.0, 0.0)


def test_ball_plateaus(rng, random_paths):
    paths = random_paths(rng, 500, 20)
    h = functional_service.h_eps_p(paths, 0.3, 3.0)
    rho = float(np.median(h))
    values = functional_service.ball(BallFunctional(eps=0.3, p=3.0, rho=rho, eta=0.2), paths)
    assert np.all(values[h <= rho] == 1.0)
    assert np.all(values[h >= rho + 0.2] == 0.0)
    assert np.all((values >= 0) & (values <= 1))


def test_ball_center_grid_must_match():
    g = BallFunctional(eps=1, p=2, rho=1, eta=1, center=StepPath.zero(3), center_label="c")
    with pytest.raises(GridMismatchError):
        functional_service.ball(g, StepPath.zero(4))


def test_ball_with_center_scores_one_inside():
    center = StepPath(n=4, values=[0.0, 1.0, 2.0, 1.0, 0.0])
    g = BallFunctional(eps=0.1, p=2, rho=0.2, eta=0.5, center=center, center_label="c")
    assert functional_service.evaluate(g, center) == 1.0
    far = StepPath(n=4, values=center.values + 5.0)
    assert functional_service.evaluate(g, far) == 0.0


def test_eval_and_integral():
    path = StepPath(n=4, values=[0.0, 1.0, 2.0, 3.0, 4.0])
    assert functional_service.evaluate(EvalFunctional(t=0.5), path) == 2.0
    assert functional_service.evaluate(EvalFunctional(t=1.0), path) == 4.0
    assert functional_service.evaluate(IntegralFunctional(), path) == pytest.approx(1.5)


def test_product_multiplies_factors(rng, random_paths):
    paths = random_paths(rng, 100, 10)
    a = BallFunctional(eps=0.5, p=2, rho=0.5, eta=0.5)
    b = BallFunctional(eps=0.2, p=4, rho=0.8, eta=0.3)
    product = functional_service.evaluate_batch(ProductFunctional(factors=(a, b)), paths, 10)
    assert np.allclose(product, functional_service.ball(a, paths) * functional_service.ball(b, paths))


def test_norm_scale():
    assert functional_service.norm_scale(BallFunctional(eps=1, p=1, rho=0, eta=1)) == 1.0
    assert functional_service.norm_scale(BallFunctional(eps=1, p=1, rho=0, eta=2)) == pytest.approx(1 / 8)
    assert functional_service.norm_scale(BallFunctional(eps=0.5, p=2, rho=0, eta=1)) == pytest.approx(16.0)
    product = ProductFunctional(
        factors=(BallFunctional(eps=0.5, p=1, rho=0, eta=2), BallFunctional(eps=2, p=3, rho=0, eta=0.5))
    )
    assert functional_service.norm_scale(product) == pytest.approx(9 / (0.25 * 0.125))


def test_parse_functional():
    ball = functional_service.parse_functional("ball:eps=0.5:p=2:rho=1:eta=0.25")
    assert isinstance(ball, BallFunctional) and ball.eta == 0.25 and ball.center is None
    assert functional_service.parse_functional("integral") == IntegralFunctional()
    assert functional_service.parse_functional("eval:t=0.3") == EvalFunctional(t=0.3)
    product = functional_service.parse_functional("ball:eps=1:p=2:rho=1:eta=1*ball:eps=1:p=3:rho=2:eta=1")
    assert isinstance(product, ProductFunctional) and len(product.factors) == 2
    assert product.name.count("ball:") == 2


@pytest.mark.parametrize(
    "spec",
    [
        "nope",
        "eval:t=2",
        "eval:t=x",
        "ball:eps=1:p=2",
        "ball:eps=0:p=2:rho=1:eta=1",
        "ball:eps=1:p=0.5:rho=1:eta=1",
        "ball:eps=1:p=2:rho=1:eta",
        "ball:eps=1:p=2:rho=1:eta=1*integral",
    ],
)
def test_parse_functional_rejects(spec):
    with pytest.raises(ParseError):
        functional_service.parse_functional(spec)


def test_center_from_csv(csv_matrix):
    path = csv_matrix([[0.0, 0.0], [0.5, 1.0], [1.0, 0.0]], name="center.csv")
    g = functional_service.parse_functional(f"ball:eps=0.1:p=2:rho=0.2:eta=0.1:center={path}")
    assert g.center.n == 2
    assert np.array_equal(g.center.values, [0.0, 1.0, 0.0])
    assert functional_service.evaluate(g, g.center) == 1.0
