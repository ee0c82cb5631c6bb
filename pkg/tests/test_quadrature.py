import math

import numpy as np
import pytest
from scipy import integrate

from crowdirt import expect, gauss_hermite
from crowdirt.errors import DomainError, NumericError


def gaussian_moment(d, mu=0.0, sigma=1.0):
    """E[X^d] for X ~ N(mu, sigma^2) via the binomial expansion."""
    total = 0.0
    for k in range(0, d + 1, 2):
        total += math.comb(d, k) * mu ** (d - k) * sigma**k * math.prod(range(k - 1, 0, -2))
    return total


def test_single_point_rule():
    r = gauss_hermite(1)
    assert r.nodes.tolist() == [0.0] and r.weights.tolist() == [1.0]


@pytest.mark.parametrize("n", [1, 2, 5, 41, 101])
def test_weights_normalized_and_nodes_increasing(n):
    r = gauss_hermite(n, 0.7, 2.0)
    assert abs(r.weights.sum() - 1.0) < 1e-12
    assert np.all(r.weights > 0)
    assert np.all(np.diff(r.nodes) > 0)
    assert expect(r, lambda x: 1.0) == pytest.approx(1.0, abs=1e-12)
    assert expect(r, lambda x: 7.0) == pytest.approx(7.0, abs=1e-11)


def test_second_moment_against_trapezoid():
    grid = np.linspace(-12, 12, 200_001)
    density = np.exp(-0.5 * grid**2) / math.sqrt(2 * math.pi)
    oracle = integrate.trapezoid(grid**2 * density, grid)
    assert abs(oracle - 1.0) < 1e-10
    assert abs(expect(gauss_hermite(21), lambda x: x * x) - oracle) < 1e-10


def test_first_and_fourth_moments():
    r = gauss_hermite(21)
    assert abs(expect(r, lambda x: x)) < 1e-12
    assert abs(expect(r, lambda x: x**4) - 3.0) < 1e-9


def test_table_cross_check_n5():
    x, w = np.polynomial.hermite.hermgauss(5)
    r = gauss_hermite(5)
    assert np.allclose(r.nodes, math.sqrt(2) * x, atol=1e-14, rtol=0)
    assert np.allclose(r.weights, w / math.sqrt(math.pi), atol=1e-15, rtol=0)


@pytest.mark.parametrize("n", [5, 11, 21])
@pytest.mark.parametrize("mu, sigma", [(0.0, 1.0), (0.5, 1.7)])
def test_polynomial_exactness(n, mu, sigma):
    r = gauss_hermite(n, mu, sigma)
    for d in range(2 * n):
        exact = gaussian_moment(d, mu, sigma)
        scale = gaussian_moment(d + (d % 2), abs(mu), sigma)
        got = float(np.sum(r.weights * r.nodes**d))
        assert abs(got - exact) <= 1e-9 * max(1.0, scale), (d, got, exact)


def test_degree_2n_not_exact():
    r = gauss_hermite(3)
    assert abs(float(np.sum(r.weights * r.nodes**6)) - 15.0) > 1e-3


@pytest.mark.parametrize("n", [2, 7, 40, 41])
def test_symmetry_about_mean(n):
    r = gauss_hermite(n, 1.5, 0.8)
    assert np.allclose(r.nodes - 1.5, -(r.nodes[::-1] - 1.5), atol=1e-12)
    assert np.allclose(r.weights, r.weights[::-1], rtol=1e-12, atol=0)


@pytest.mark.parametrize("n, sigma", [(0, 1.0), (102, 1.0), (5, 0.0), (5, -1.0)])
def test_domain_errors(n, sigma):
    with pytest.raises(DomainError):
        gauss_hermite(n, 0.0, sigma)


def test_non_finite_integrand_names_node():
    r = gauss_hermite(3)
    with pytest.raises(NumericError, match="node"):
        expect(r, lambda x: 1.0 / x if x != 0 else float("inf"))
