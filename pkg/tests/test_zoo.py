import itertools

import numpy as np
import pytest

from voterwf import errors
from voterwf.kernel import is_translation_invariant
from voterwf.zoo import ZooSpec, hypercube, moran, random_regular_perm, torus_nn, torus_range


def test_moran_small():
    assert np.allclose(moran(2).rates.toarray(), [[0, 1], [1, 0]])
    assert np.allclose(moran(3).rates.toarray(), (np.ones((3, 3)) - np.eye(3)) / 2)
    with pytest.raises(errors.BadParam):
        moran(1)


def test_moran_pair_density_identity():
    k = moran(10)
    nu = k.nu.toarray()
    for bits in itertools.islice(itertools.product((0, 1), repeat=10), 0, 1024, 37):
        xi = np.array(bits)
        p1 = k.pi @ xi
        p10 = (nu * np.outer(xi, 1 - xi)).sum() / k.nu_total
        assert p10 == pytest.approx(10 / 9 * p1 * (1 - p1), abs=1e-13)


def test_torus_nn_examples():
    k = torus_nn(4, 1)
    assert k.rates[0, 1] == 0.5 and k.rates[0, 3] == 0.5 and k.rates.nnz == 8
    k = torus_nn(3, 2)
    assert k.n == 9
    assert np.all(np.diff(k.rates.indptr) == 4)
    assert np.allclose(k.rates.data, 0.25)
    for n, d in ((5, 1), (4, 3), (6, 2)):
        k = torus_nn(n, d)
        assert np.allclose(k.total_rate, 1.0) and np.allclose(k.pi, n ** -d)
    with pytest.raises(errors.BadParam):
        torus_nn(2, 1)


def test_torus_range_examples():
    assert abs(torus_range(10, 1, 1).rates - torus_nn(10, 1).rates).max() == 0
    k = torus_range(10, 2, 1)
    assert np.all(np.diff(k.rates.indptr) == 4) and np.allclose(k.rates.data, 0.25)
    k = torus_range(9, 1, 2)
    assert np.all(np.diff(k.rates.indptr) == 8) and np.allclose(k.rates.data, 1 / 8)
    with pytest.raises(errors.BadParam):
        torus_range(10, 5, 1)


def test_unit_range_box_contains_nearest_neighbours():
    for n in (5, 6):
        a = torus_range(n, 1, 2).rates.toarray()
        b = torus_nn(n, 2).rates.toarray()
        # the box [-1, 1]^2 is the 8-site Moore neighbourhood, so the two differ for d >= 2
        assert np.all((b > 0) <= (a > 0))
        assert np.count_nonzero(a[0]) == 8


def test_hypercube_examples():
    assert np.allclose(hypercube(1).rates.toarray(), [[0, 1], [1, 0]])
    k = hypercube(3)
    assert k.n == 8 and np.all(np.diff(k.rates.indptr) == 3) and np.allclose(k.rates.data, 1 / 3)
    for x in range(8):
        for y in k.rates.indices[k.rates.indptr[x]:k.rates.indptr[x + 1]]:
            assert bin(x ^ y).count("1") == 1
    assert is_translation_invariant(k)
    with pytest.raises(errors.TooLarge):
        hypercube(21)


def test_random_regular_rows_and_loops():
    for seed in range(5):
        k = random_regular_perm(15, 4, seed)
        a = k.info["adjacency"].toarray()
        assert np.array_equal(a, a.T)
        assert np.all(a.sum(axis=1) == 4)
        assert np.allclose(k.total_rate, 1 - np.diag(a) / 4)
        assert k.detailed_balance_residual <= 1e-15
        assert np.all(np.diag(a) % 2 == 0)
        assert k.info["attempts"] >= 1


def test_random_regular_is_deterministic():
    a = random_regular_perm(30, 6, 99)
    b = random_regular_perm(30, 6, 99)
    assert abs(a.rates - b.rates).max() == 0
    assert (a.info["adjacency"] != b.info["adjacency"]).nnz == 0


def test_random_regular_params():
    with pytest.raises(errors.BadParam):
        random_regular_perm(10, 3, 0)
    with pytest.raises(errors.BadParam):
        random_regular_perm(4, 4, 0)


def test_spec_dispatch_and_validation():
    s = ZooSpec("torus_range", {"n": 10, "m": 2, "d": 1})
    assert s.build().n == 10
    assert s.label() == "torus_range(d=1,m=2,n=10)"
    with pytest.raises(errors.BadParam):
        ZooSpec("petersen", {})
    with pytest.raises(errors.BadParam):
        ZooSpec("random_regular_perm", {"n": 10, "k": 4, "seed": -1})
