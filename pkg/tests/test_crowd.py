import numpy as np
import pytest

from crowdirt import CompetenceProfile, CrowdSpec, competence_to_theta, simulate, split_half
from crowdirt.crowd import Gaussian, sample_profiles
from crowdirt.errors import DomainError
from crowdirt.irt import sigmoid


def test_saturated_crowd_all_correct():
    spec = CrowdSpec(100, 100, theta_dist=[20.0] * 100, b_dist=[0.0] * 100, seed=1)
    m, _, _ = simulate(spec)
    assert (m.cells == 1).all()


def test_deterministic():
    spec = CrowdSpec(50, 20, seed=42)
    a, ta, ba = simulate(spec)
    b, tb, bb = simulate(spec)
    assert a == b and np.array_equal(ta, tb) and np.array_equal(ba, bb)
    c, _, _ = simulate(CrowdSpec(50, 20, seed=43))
    assert a != c


def test_subcrowd_is_prefix():
    # keyed draws: a smaller crowd with the same seed is the top-left block
    big, tb, bb = simulate(CrowdSpec(40, 30, seed=5))
    small, ts, bs = simulate(CrowdSpec(10, 8, seed=5))
    assert np.array_equal(big.cells[:10, :8], small.cells)
    assert np.array_equal(tb[:10], ts)


def test_proportions_follow_model(reference_crowd):
    m, thetas, bs = reference_crowd
    expected = sigmoid(thetas[:, None] - bs[None, :]).mean(axis=0)
    observed = (m.cells == 1).mean(axis=0)
    assert np.mean(np.abs(observed - expected)) <= 0.05


def test_missing_rate():
    m, _, _ = simulate(CrowdSpec(200, 100, missing_rate=0.3, seed=2))
    assert abs((m.cells == -1).mean() - 0.3) < 0.01


def test_explicit_parameters_used():
    m, thetas, bs = simulate(CrowdSpec(2, 3, theta_dist=[0.1, 0.2], b_dist=[1.0, 2.0, 3.0], seed=0))
    assert thetas.tolist() == [0.1, 0.2] and bs.tolist() == [1.0, 2.0, 3.0]


def test_gaussian_parameters():
    _, thetas, _ = simulate(CrowdSpec(20000, 1, theta_dist=Gaussian(1.5, 0.5), seed=0))
    assert thetas.mean() == pytest.approx(1.5, abs=0.02)
    assert thetas.std() == pytest.approx(0.5, abs=0.02)


@pytest.mark.parametrize(
    "kwargs",
    [dict(n_subjects=0, n_items=1), dict(n_subjects=1, n_items=1, missing_rate=1.0),
     dict(n_subjects=2, n_items=1, theta_dist=[0.0])],
)
def test_spec_validation(kwargs):
    with pytest.raises(DomainError):
        CrowdSpec(**kwargs)


def test_competence_link():
    assert competence_to_theta(CompetenceProfile(1.0, 0.0)) == 0.0
    assert competence_to_theta(CompetenceProfile(1.0, 1 - 1e-12)) == -10.0
    assert competence_to_theta(CompetenceProfile(0.5, 0.1)) == pytest.approx(np.log(0.5) + 2 * np.log(0.9))


def test_competence_monotone():
    rng = np.random.default_rng(0)
    for _ in range(500):
        f1, f2 = sorted(rng.uniform(0.001, 1, 2))
        c1, c2 = sorted(rng.uniform(0, 0.999, 2))
        strong = competence_to_theta(CompetenceProfile(f2, c1))
        weak = competence_to_theta(CompetenceProfile(f1, c2))
        assert strong >= weak


def test_competence_validation():
    with pytest.raises(DomainError):
        CompetenceProfile(0.0, 0.1)
    with pytest.raises(DomainError):
        CompetenceProfile(0.5, 1.0)


def test_sample_profiles_ranges():
    ps = sample_profiles(500, seed=1)
    assert all(0.01 <= p.train_fraction <= 1.0 and 0.0 <= p.corruption_rate < 0.5 for p in ps)
    thetas = [competence_to_theta(p) for p in ps]
    assert min(thetas) < -3 and max(thetas) > -0.5


@pytest.mark.parametrize("J, sizes", [(1000, (500, 500)), (7, (4, 3)), (2, (1, 1))])
def test_split_half_sizes(J, sizes):
    m, _, _ = simulate(CrowdSpec(J, 3, seed=0))
    a, b = split_half(m, seed=9)
    assert (a.n_subjects, b.n_subjects) == sizes
    assert set(a.subject_ids) | set(b.subject_ids) == set(m.subject_ids)
    assert not set(a.subject_ids) & set(b.subject_ids)
    assert a.item_ids == b.item_ids == m.item_ids


def test_split_half_needs_two():
    m, _, _ = simulate(CrowdSpec(1, 3, seed=0))
    with pytest.raises(DomainError):
        split_half(m, 0)
