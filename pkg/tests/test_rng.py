import numpy as np
from scipy import stats

from crowdirt.rng import keyed_normal, keyed_permutation, keyed_uniform


def test_same_key_same_draw():
    a = keyed_uniform(3, "x", np.arange(10)[:, None], np.arange(5)[None, :])
    b = keyed_uniform(3, "x", np.arange(10)[:, None], np.arange(5)[None, :])
    assert np.array_equal(a, b)


def test_draw_independent_of_visiting_order():
    full = keyed_uniform(11, "cells", np.arange(20)[:, None], np.arange(30)[None, :])
    assert full[7, 13] == keyed_uniform(11, "cells", 7, 13)
    assert np.array_equal(full[::-1], keyed_uniform(11, "cells", np.arange(20)[::-1, None], np.arange(30)[None, :]))


def test_streams_and_seeds_differ():
    k = np.arange(1000)
    assert not np.array_equal(keyed_uniform(1, "a", k), keyed_uniform(1, "b", k))
    assert not np.array_equal(keyed_uniform(1, "a", k), keyed_uniform(2, "a", k))


def test_distributions():
    u = keyed_uniform(5, "u", np.arange(20000))
    assert u.min() > 0 and u.max() < 1
    assert stats.kstest(u, "uniform").pvalue > 1e-3
    z = keyed_normal(5, "z", np.arange(20000))
    assert stats.kstest(z, "norm").pvalue > 1e-3


def test_permutation():
    p = keyed_permutation(9, "perm", 50)
    assert sorted(p) == list(range(50))
    assert np.array_equal(p, keyed_permutation(9, "perm", 50))
