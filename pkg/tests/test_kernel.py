import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from voterwf import errors
from voterwf.kernel import (
    build_from_adjacency,
    build_from_rates,
    is_translation_invariant,
    load_kernel,
    pair_measure,
    sample_pair,
    save_kernel,
    stationary_distribution,
)
from voterwf.zoo import moran, torus_nn


def test_two_state_symmetric():
    k = build_from_rates(2, [(0, 1, 1.0), (1, 0, 1.0)])
    assert np.allclose(k.pi, [0.5, 0.5])
    assert k.q_max == 1.0
    assert k.nu_total == pytest.approx(0.5)
    assert k.pi_diag == pytest.approx(0.5)
    assert k.reversible


def test_complete_three():
    k = build_from_rates(3, [(x, y, 0.5) for x in range(3) for y in range(3) if x != y])
    assert np.allclose(k.pi, 1 / 3)
    assert k.nu_total == pytest.approx(1 / 3)
    assert k.pi_diag == pytest.approx(1 / 3)


def test_one_way_path_not_irreducible():
    with pytest.raises(errors.NotIrreducible):
        build_from_rates(3, [(0, 1, 1.0), (1, 2, 1.0)])


def test_bad_entries():
    with pytest.raises(errors.NegativeRate):
        build_from_rates(2, [(0, 1, -1.0), (1, 0, 1.0)])
    with pytest.raises(errors.BadIndex):
        build_from_rates(2, [(0, 2, 1.0)])


def test_path_graph_walk():
    a = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    k = build_from_adjacency(a)
    assert np.allclose(k.pi, [0.25, 0.5, 0.25])
    assert np.allclose(stationary_distribution(k.rates), [0.25, 0.5, 0.25])


def test_complete_graph_walk():
    k = build_from_adjacency(np.ones((3, 3)) - np.eye(3))
    assert np.allclose(k.rates.toarray(), (np.ones((3, 3)) - np.eye(3)) / 2)
    assert np.allclose(k.total_rate, 1.0)


def test_whole_loop_lowers_rate():
    a = np.array([[2, 1, 1], [1, 0, 3], [1, 3, 0]])
    k = build_from_adjacency(a)
    assert k.total_rate[0] == pytest.approx(0.5)


def test_adjacency_errors():
    with pytest.raises(errors.AsymmetricAdjacency):
        build_from_adjacency(np.array([[0, 1], [0, 0]]))
    with pytest.raises(errors.Disconnected):
        build_from_adjacency(np.array([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]))
    with pytest.raises(errors.ZeroDegree):
        build_from_adjacency(np.array([[0, 0], [0, 0]]))


def test_doubly_stochastic_uniform(rng):
    m = rng.random((5, 5))
    m = m + m.T
    np.fill_diagonal(m, 0)
    k = build_from_rates(5, [(x, y, m[x, y]) for x in range(5) for y in range(5) if x != y])
    assert np.allclose(k.pi, 0.2)


def test_two_state_asymmetric():
    k = build_from_rates(2, [(0, 1, 2.0), (1, 0, 1.0)])
    assert np.allclose(k.pi, [1 / 3, 2 / 3])


def test_pair_measure_examples():
    k = build_from_rates(2, [(0, 1, 1.0), (1, 0, 1.0)])
    pm = pair_measure(k)
    assert np.allclose(pm.as_dense(2), [[0, 0.5], [0.5, 0]])
    pm = pair_measure(moran(3))
    assert np.allclose(pm.weights, 1 / 6)
    assert pm.normalizer == pytest.approx(moran(3).nu_total, abs=1e-12)


def test_symmetric_zero_diagonal_nu_total():
    for k in (moran(7), torus_nn(5, 2)):
        assert k.nu_total * k.n == pytest.approx(1.0, abs=1e-12)


def test_sample_pair(rng):
    k = torus_nn(4, 1)
    a, b = sample_pair(k, "VV'", rng, size=2000)
    assert np.all(a != b)
    u, v = sample_pair(k, "UU'", rng, size=100_000)
    freq = np.mean(u == v)
    sd = np.sqrt(k.pi_diag * (1 - k.pi_diag) / 100_000)
    assert abs(freq - k.pi_diag) < 3 * sd
    x, y = sample_pair(k, "UU'", rng)
    assert isinstance(x, int) and 0 <= y < 4


def test_file_roundtrip(tmp_path):
    k = torus_nn(4, 2)
    p = tmp_path / "k.txt"
    save_kernel(k, p)
    text = p.read_text().splitlines()
    assert text[0].startswith("#") and "16" in text
    back = load_kernel(p)
    assert back.n == 16 and back.group == (4, 4)
    assert abs(back.rates - k.rates).max() == 0
    assert is_translation_invariant(back)


def test_file_comments_and_missing_count(tmp_path):
    p = tmp_path / "k.txt"
    p.write_text("# two states\n2\n0 1 1.5  # forward\n1 0 0.5\n")
    k = load_kernel(p)
    assert np.allclose(k.pi, [0.25, 0.75])
    p.write_text("# nothing\n")
    with pytest.raises(errors.KernelError):
        load_kernel(p)


@st.composite
def rate_matrices(draw):
    n = draw(st.integers(2, 7))
    vals = draw(st.lists(st.floats(0.05, 3.0), min_size=n * n, max_size=n * n))
    m = np.array(vals).reshape(n, n)
    np.fill_diagonal(m, 0)
    return m


@settings(max_examples=40, deadline=None)
@given(rate_matrices())
def test_balance_and_pair_mass(m):
    n = m.shape[0]
    k = build_from_rates(n, [(x, y, m[x, y]) for x in range(n) for y in range(n) if x != y])
    q = k.dense_generator()
    assert np.abs(k.pi @ q).max() <= 1e-10
    assert k.pi.sum() == pytest.approx(1.0, abs=1e-12)
    direct = sum(k.pi[x] ** 2 * m[x, y] for x in range(n) for y in range(n) if x != y)
    assert pair_measure(k).normalizer == pytest.approx(direct, rel=1e-12)
    flow = k.pi[:, None] * m
    assert k.reversible == bool(np.abs(flow - flow.T).max() <= 1e-10)


@settings(max_examples=20, deadline=None)
@given(rate_matrices())
def test_symmetric_rates_are_reversible(m):
    s = m + m.T
    n = s.shape[0]
    k = build_from_rates(n, [(x, y, s[x, y]) for x in range(n) for y in range(n) if x != y])
    assert k.reversible
    assert np.allclose(k.pi, 1 / n)


def test_sparse_adjacency_accepted():
    a = sp.csr_matrix(np.array([[0, 2], [2, 0]]))
    k = build_from_adjacency(a)
    assert np.allclose(k.pi, 0.5)
