import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from crowdirt import AlignedPair, density_summary, rank_disagreement, rmsd, spearman
from crowdirt.analysis import average_ranks
from crowdirt.errors import DomainError


def pair(xs, ys):
    ids = [f"k{n}" for n in range(len(xs))]
    return AlignedPair.join(ids, xs, ids, ys)


def test_spearman_examples():
    assert spearman(pair([1, 2, 3], [10, 20, 30])) == pytest.approx(1.0)
    assert spearman(pair([1, 2, 3], [3, 2, 1])) == pytest.approx(-1.0)


def test_spearman_ties_average_ranks():
    assert average_ranks([1, 2, 2, 4]).tolist() == [1, 2.5, 2.5, 4]
    got = spearman(pair([1, 2, 2, 4], [1, 3, 2, 4]))
    assert got == pytest.approx(stats.spearmanr([1, 2, 2, 4], [1, 3, 2, 4])[0], abs=1e-12)
    assert got == pytest.approx(4.5 / math.sqrt(4.5 * 5.0), abs=1e-12)


def test_spearman_undefined():
    with pytest.raises(DomainError, match="undefined correlation"):
        spearman(pair([1, 1, 1], [1, 2, 3]))
    with pytest.raises(DomainError, match="undefined correlation"):
        spearman(pair([1], [2]))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(-5, 5), st.integers(-5, 5)), min_size=3, max_size=30))
def test_spearman_matches_scipy(points):
    xs, ys = np.array(points, dtype=float).T
    if np.ptp(xs) == 0 or np.ptp(ys) == 0:
        return
    assert spearman(pair(xs, ys)) == pytest.approx(stats.spearmanr(xs, ys)[0], abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-100, 100), min_size=3, max_size=30, unique=True))
def test_spearman_monotone_transform_invariant(xs):
    xs = np.array(xs, dtype=float)
    ys = np.sin(xs) + xs / 50
    if np.ptp(ys) == 0:
        return
    base = spearman(pair(xs, ys))
    assert spearman(pair(np.exp(xs / 50), ys)) == pytest.approx(base, abs=1e-12)
    assert spearman(pair(xs, ys**3)) == pytest.approx(base, abs=1e-12)


def test_rmsd_examples():
    assert rmsd(pair([1, 2, 3], [1, 2, 3])) == 0.0
    assert rmsd(pair([0, 0], [1, 1])) == 1.0
    assert rmsd(pair([0, 0, 0], [1, 2, 2])) == pytest.approx(math.sqrt(3), abs=1e-12)
    assert rmsd(pair([0, 0, 0], [1, 2, 2])) == pytest.approx(1.7320508, abs=1e-7)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 20).flatmap(lambda n: st.lists(
    st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=n, max_size=n)))
def test_rmsd_symmetric_and_triangle(rows):
    x, y, z = (np.array(c) for c in zip(*rows))
    assert rmsd(pair(x, y)) == rmsd(pair(y, x))
    assert rmsd(pair(x, z)) <= rmsd(pair(x, y)) + rmsd(pair(y, z)) + 1e-9


def test_alignment_by_id():
    a = AlignedPair.join(["a", "b", "c", "d"], [1.0, 2.0, 3.0, 5.0], ["d", "c", "b", "a"], [4.0, 3.5, 2.0, 0.0])
    b = AlignedPair.join(["a", "b", "c", "d"], [1.0, 2.0, 3.0, 5.0], ["a", "b", "c", "d"], [0.0, 2.0, 3.5, 4.0])
    assert spearman(a) == spearman(b) and rmsd(a) == rmsd(b)
    assert rank_disagreement(a)[0] == rank_disagreement(b)[0]


def test_inner_join_reports_unmatched():
    p = AlignedPair.join(["a", "b", "c"], [1, 2, 3], ["b", "c", "z"], [5, 6, 7])
    assert p.ids == ("b", "c")
    assert p.unmatched_x == ("a",) and p.unmatched_y == ("z",)


def test_rank_disagreement_identical():
    rows, mean = rank_disagreement(pair([1, 2, 3], [4, 5, 6]), 3)
    assert mean == 0.0 and all(r.abs_diff == 0 for r in rows)
    assert [r.id for r in rows] == ["k0", "k1", "k2"]


def test_rank_disagreement_reversal():
    rows, mean = rank_disagreement(pair([1, 2, 3], [3, 2, 1]), 1)
    assert len(rows) == 1 and rows[0].abs_diff == 2 and rows[0].id == "k0"
    assert mean == pytest.approx(4 / 3)


def test_rank_disagreement_random_permutation():
    n = 100
    expected = (n * n - 1) / (3 * n)
    rng = np.random.default_rng(0)
    sims = [np.abs(rng.permutation(n) - np.arange(n)).mean() for _ in range(2000)]
    assert np.mean(sims) == pytest.approx(expected, rel=0.01)
    _, mean = rank_disagreement(pair(np.arange(n), rng.permutation(n)))
    assert mean == pytest.approx(expected, rel=0.10)


def test_rank_disagreement_bad_k():
    with pytest.raises(DomainError):
        rank_disagreement(pair([1, 2], [2, 1]), 3)


def test_density_boundary_convention():
    edges, counts = density_summary([0, 0.5, 1], 2)
    assert edges.tolist() == [0, 0.5, 1]
    assert counts.tolist() == [1, 2]
    edges, counts = density_summary([0, 0.4, 1], 2)
    assert counts.tolist() == [2, 1]


def test_density_single_value():
    edges, counts = density_summary([3.0], 10)
    assert counts.tolist() == [1] and edges[0] <= 3.0 <= edges[-1]


def test_density_normal_mode():
    v = np.random.default_rng(1).standard_normal(10000)
    edges, counts = density_summary(v, 20)
    k = int(np.argmax(counts))
    width = edges[1] - edges[0]
    assert edges[k] - width <= 0.0 <= edges[k + 1] + width
    assert counts.sum() == 10000


def test_density_errors():
    with pytest.raises(DomainError):
        density_summary([], 3)
    with pytest.raises(DomainError):
        density_summary([1.0], 0)
