import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crowdirt import ResponseMatrix, grad_log_likelihood, log_likelihood, p_correct
from crowdirt.errors import DomainError

from .conftest import matrix

finite = st.floats(-50, 50, allow_nan=False)


def _random_matrix(rng, J, I, missing=0.2):
    cells = np.where(rng.random((J, I)) < missing, -1, rng.integers(0, 2, (J, I)))
    return ResponseMatrix([f"s{j}" for j in range(J)], [f"i{i}" for i in range(I)], cells)


def test_equal_ability_and_difficulty_is_half():
    assert p_correct(0.0, 0.0) == 0.5


def test_one_logit_above():
    mpmath.mp.dps = 30
    oracle = float(1 / (1 + mpmath.exp(-1)))
    assert p_correct(1.0, 0.0) == pytest.approx(oracle, abs=1e-15)
    assert p_correct(1.0, 0.0) == pytest.approx(0.7310586, abs=1e-7)


def test_saturation_and_no_overflow():
    assert p_correct(-20.0, 0.0) < 1e-8
    assert p_correct(700.0, 0.0) == 1.0
    assert p_correct(-700.0, 0.0) > 0.0
    assert np.isfinite(log_likelihood(matrix([[0]]), [700.0], [0.0]))


def test_non_finite_rejected():
    with pytest.raises(DomainError):
        p_correct(float("nan"), 0.0)
    with pytest.raises(DomainError):
        p_correct(0.0, float("inf"))


@given(finite, finite)
def test_complement(theta, b):
    assert p_correct(theta, b) + p_correct(b, theta) == pytest.approx(1.0, abs=1e-12)


@given(finite, finite, st.floats(0.01, 5))
def test_monotone(theta, b, step):
    if abs(theta - b) < 30:
        assert p_correct(theta + step, b) > p_correct(theta, b)
        assert p_correct(theta, b + step) < p_correct(theta, b)


def test_log_likelihood_half_cells():
    m = matrix([[1, 0], [1, 1]])
    assert log_likelihood(m, [0, 0], [0, 0]) == pytest.approx(4 * math.log(0.5), abs=1e-12)
    assert log_likelihood(m, [0, 0], [0, 0]) == pytest.approx(-2.7725887, abs=1e-7)


def test_log_likelihood_certain_success():
    assert abs(log_likelihood(matrix([[1]]), [30.0], [0.0])) < 1e-12


def test_log_likelihood_empty():
    m = ResponseMatrix((), (), np.zeros((0, 0)))
    assert log_likelihood(m, [], []) == 0.0


def test_missing_cells_contribute_nothing():
    full = log_likelihood(matrix([[1, 0]]), [0.3], [0.1, -0.4])
    part = log_likelihood(matrix([[1, None]]), [0.3], [0.1, -0.4])
    assert part == pytest.approx(math.log(p_correct(0.3, 0.1)))
    assert full < part


def test_dimension_mismatch():
    with pytest.raises(DomainError):
        log_likelihood(matrix([[1, 0]]), [0.0], [0.0])
    with pytest.raises(DomainError):
        grad_log_likelihood(matrix([[1, 0]]), [0.0, 1.0], [0.0, 0.0])


def test_gradient_single_cell():
    gt, gb = grad_log_likelihood(matrix([[1]]), [0.4], [0.4])
    assert gt[0] == pytest.approx(0.5) and gb[0] == pytest.approx(-0.5)


def test_gradient_saturated():
    gt, gb = grad_log_likelihood(matrix([[1, 1], [1, 1]]), [30.0, 31.0], [0.0, 1.0])
    assert np.all(np.abs(gt) < 1e-12) and np.all(np.abs(gb) < 1e-12)


def _fd_grad(m, thetas, bs, h=1e-5):
    def f(x):
        return log_likelihood(m, x[: m.n_subjects], x[m.n_subjects:])

    x = np.concatenate([thetas, bs])
    g = np.empty_like(x)
    for k in range(x.size):
        up, dn = x.copy(), x.copy()
        up[k] += h
        dn[k] -= h
        g[k] = (f(up) - f(dn)) / (2 * h)
    return g[: m.n_subjects], g[m.n_subjects:]


@pytest.mark.parametrize("J, I, seed", [(5, 5, 0), (10, 10, 1), (10, 10, 2), (10, 10, 3)])
def test_gradient_matches_finite_differences(J, I, seed):
    rng = np.random.default_rng(seed)
    m = _random_matrix(rng, J, I)
    thetas, bs = rng.normal(size=J), rng.normal(size=I)
    gt, gb = grad_log_likelihood(m, thetas, bs)
    ft, fb = _fd_grad(m, thetas, bs)
    assert np.max(np.abs(gt - ft)) < 1e-6
    assert np.max(np.abs(gb - fb)) < 1e-6


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(-5, 5))
def test_translation_invariance(seed, c):
    rng = np.random.default_rng(seed)
    m = _random_matrix(rng, 6, 4)
    thetas, bs = rng.normal(size=6), rng.normal(size=4)
    assert log_likelihood(m, thetas + c, bs + c) == pytest.approx(log_likelihood(m, thetas, bs), abs=1e-9)
    assert log_likelihood(m, thetas, bs) <= 0.0
