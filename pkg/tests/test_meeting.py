import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from voterwf import errors
from voterwf.kernel import build_from_rates
from voterwf.meeting import (
    ProductChain,
    all_configurations,
    dual_pair_expectation,
    dual_pair_expectations,
    identity_check,
    meeting_moments,
    meeting_tail,
    meeting_tails,
    muv_consistency,
    prop61_bound_check,
)
from voterwf.zoo import hypercube, moran, random_regular_perm, torus_nn, torus_range

TWO = build_from_rates(2, [(0, 1, 1.0), (1, 0, 1.0)])


def test_moran_t_meet():
    assert meeting_moments(moran(3)).t_meet == pytest.approx(2 / 3, rel=1e-12)
    for n in (2, 5, 17, 40):
        for route in ("product", "difference"):
            assert meeting_moments(moran(n), route).t_meet == pytest.approx((n - 1) ** 2 / (2 * n), rel=1e-10)


def test_two_state_t_meet():
    assert meeting_moments(TWO).t_meet == pytest.approx(0.25, rel=1e-12)


def test_symmetric_zero_diagonal_mvv_mean():
    for k in (moran(6), torus_nn(5, 2), hypercube(4), torus_range(11, 3)):
        assert meeting_moments(k).mvv_mean == pytest.approx((k.n - 1) / 2, rel=1e-10)


def test_identities_moran3():
    k = moran(3)
    s = meeting_moments(k)
    assert s.mvv_mean == pytest.approx(1.0)
    assert s.mvv_second == pytest.approx(2.0)
    ic = identity_check(k, s)
    assert ic.max_residual <= 1e-12 and ic.lower_bound_ok


@pytest.mark.parametrize("k", [moran(7), torus_nn(4, 2), hypercube(5), torus_range(9, 2),
                               random_regular_perm(18, 4, 7),
                               build_from_rates(3, [(0, 1, 1.0), (1, 2, 2.0), (2, 0, 0.5), (1, 0, 0.3)])])
def test_identities_everywhere(k):
    s = meeting_moments(k)
    ic = identity_check(k, s)
    assert ic.max_residual <= 1e-8
    assert ic.lower_bound_ok
    h1, h2 = s.as_matrix("h1"), s.as_matrix("h2")
    assert np.all(h1 >= 0) and np.all(np.diag(h1) == 0)
    assert np.all(h2 >= h1 ** 2 - 1e-9)
    assert s.t_meet == pytest.approx(k.pi @ h1 @ k.pi, rel=1e-12)


def test_lower_bound_symmetric_form():
    for k in (moran(9), torus_nn(6, 1), hypercube(3)):
        e = k.n
        assert meeting_moments(k).t_meet >= (e - 1) ** 2 / (4 * e)


@pytest.mark.parametrize("n", range(3, 9))
def test_reduction_matches_product(n):
    k = torus_nn(n, 1)
    a = meeting_moments(k, "product")
    b = meeting_moments(k, "difference")
    assert np.allclose(a.as_matrix(), b.as_matrix(), atol=1e-9)
    assert np.allclose(a.as_matrix("h2"), b.as_matrix("h2"), rtol=1e-9)
    assert a.mvv_second == pytest.approx(b.mvv_second, rel=1e-9)


def test_half_time_identity():
    # hitting time of 0 from pi for a single walker, halved
    k = torus_nn(7, 2)
    q = k.dense_generator()
    keep = np.arange(1, k.n)
    h = np.linalg.solve(-q[np.ix_(keep, keep)], np.ones(k.n - 1))
    assert meeting_moments(k).t_meet == pytest.approx((k.pi[keep] @ h) / 2, rel=1e-10)


def test_route_errors():
    with pytest.raises(errors.TooLarge):
        meeting_moments(random_regular_perm(80, 4, 1))
    with pytest.raises(errors.TooLarge):
        meeting_moments(torus_nn(9, 2), "product")
    with pytest.raises(errors.TooLarge):
        meeting_moments(random_regular_perm(20, 4, 1), "difference")


def test_tail_examples():
    k = torus_nn(5, 1)
    uu, vv = meeting_tails(k, [0.0])
    assert uu[0] == pytest.approx(1 - k.pi_diag)
    assert vv[0] == pytest.approx(1.0)
    t = np.linspace(0, 3, 7)
    assert np.allclose(meeting_tail(moran(3), "VV'", t), np.exp(-t), atol=1e-12)
    assert np.allclose(meeting_tail(moran(3), "UU'", t), 2 / 3 * np.exp(-t), atol=1e-12)


def test_muv_examples():
    grid = np.arange(0, 5.0 + 1e-9, 0.01)
    assert muv_consistency(moran(3), grid).max_residual <= 1e-6
    assert muv_consistency(torus_nn(5, 1), grid).max_residual <= 1e-6
    late = muv_consistency(torus_nn(5, 1), np.linspace(0, 50, 5001))
    assert abs(late.residuals[-1]) <= 1e-8
    with pytest.raises(errors.BadParam):
        muv_consistency(moran(3), [0.5, 1.0])


def test_muv_grid_refinement():
    k = torus_nn(5, 2)
    a = muv_consistency(k, np.linspace(0, 5, 501)).max_residual
    b = muv_consistency(k, np.linspace(0, 5, 1001)).max_residual
    assert b <= a


def test_markov_bound():
    for k in (torus_nn(4, 2), moran(10), random_regular_perm(16, 4, 2)):
        t = np.linspace(0, 30, 61)
        vv = meeting_tail(k, "VV'", t)
        assert np.all(2 * k.nu_total * t * vv <= 1 - k.pi_diag + 1e-12)


def test_dual_consensus_and_time_zero(rng):
    k = torus_nn(3, 2)
    for which in ("p1p0", "p10", "p01"):
        assert dual_pair_expectation(k, np.ones(9, int), which, 0.7) == pytest.approx(0.0, abs=1e-15)
    xi = (rng.random(9) < 0.5).astype(int)
    p1 = k.pi @ xi
    assert dual_pair_expectation(k, xi, "p1p0", 0.0) == pytest.approx(p1 * (1 - p1), abs=1e-14)


def test_dual_bernoulli_average():
    k = torus_nn(3, 2)
    u, t = 0.3, 0.8
    xi = all_configurations(9)
    w = np.prod(np.where(xi == 1, u, 1 - u), axis=1)
    avg = w @ dual_pair_expectations(k, xi, "p1p0", t)
    assert avg == pytest.approx(u * (1 - u) * meeting_tail(k, "UU'", [t])[0], rel=1e-10)


def test_dual_matches_forward_voter_generator():
    # E_xi[p1 p0(xi_t)] through the 2^n-state voter chain itself
    import scipy.linalg
    k = moran(4)
    n = k.n
    xi = all_configurations(n)
    m = len(xi)
    index = {tuple(c): i for i, c in enumerate(xi)}
    gen = np.zeros((m, m))
    r = k.rates.toarray()
    for i, c in enumerate(xi):
        for x in range(n):
            for y in range(n):
                if c[x] != c[y] and r[x, y] > 0:
                    d = c.copy()
                    d[x] = c[y]
                    gen[i, index[tuple(d)]] += r[x, y]
        gen[i, i] = -gen[i].sum()
    p1 = xi @ k.pi
    fwd = scipy.linalg.expm(0.6 * gen) @ (p1 * (1 - p1))
    assert np.allclose(fwd, dual_pair_expectations(k, xi, "p1p0", 0.6), atol=1e-12)


def test_prop61_examples():
    b = prop61_bound_check(torus_nn(3, 2), 0.5, 1.5)
    assert len(b.configs) == 512
    assert b.min_margin_tv >= 0 and b.min_margin_gap >= 0 and b.ok
    cons = np.all(b.configs == b.configs[:, :1], axis=1)
    assert np.allclose(b.lhs_p10[cons], 0.0)
    nonrev = build_from_rates(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0), (1, 0, 0.5)])
    b = prop61_bound_check(nonrev, 0.5, 1.5)
    assert b.rhs_gap is None and b.min_margin_gap is None and b.ok


def test_prop61_sampled_configs():
    b = prop61_bound_check(torus_nn(4, 2), 1.0, 3.0)
    assert len(b.configs) == 258 and b.ok
    c = prop61_bound_check(torus_nn(4, 2), 1.0, 3.0)
    assert np.array_equal(b.configs, c.configs)
    with pytest.raises(errors.BadParam):
        prop61_bound_check(moran(5), 2.0, 1.0)


def test_product_chain_rows():
    pc = ProductChain(moran(4))
    g = pc.generator.toarray()
    assert np.all(g - np.diag(np.diag(g)) >= 0)
    # leaving rate is q(x) + q(y) = 2; rate into the diagonal is 2/(n-1)
    assert np.allclose(-g.sum(axis=1), 2 / 3)


@st.composite
def small_kernels(draw):
    n = draw(st.integers(2, 6))
    vals = draw(st.lists(st.floats(0.1, 2.0), min_size=n * n, max_size=n * n))
    m = np.array(vals).reshape(n, n)
    return build_from_rates(n, [(x, y, m[x, y]) for x, y in itertools.product(range(n), repeat=2) if x != y])


@settings(max_examples=30, deadline=None)
@given(small_kernels())
def test_identities_random_kernels(k):
    ic = identity_check(k, meeting_moments(k))
    assert ic.max_residual <= 1e-8
    assert ic.lower_bound_ok
