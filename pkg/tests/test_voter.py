import numpy as np
import pytest

import voterwf.voter as vm
from voterwf import errors
from voterwf._streams import replica_rng
from voterwf.kernel import build_from_adjacency, build_from_rates
from voterwf.meeting import meeting_moments, meeting_tail
from voterwf.stats import ks_two_sample, mean_se
from voterwf.voter import (
    choose_mode,
    ensemble,
    init_bernoulli,
    mean_field_residual,
    run,
    state_from_config,
    step,
)
from voterwf.zoo import moran, torus_nn

TWO = build_from_rates(2, [(0, 1, 1.0), (1, 0, 1.0)])


def irregular():
    a = np.array([
        [0, 1, 1, 1, 1, 0],
        [1, 0, 1, 0, 0, 0],
        [1, 1, 0, 0, 0, 1],
        [1, 0, 0, 0, 1, 0],
        [1, 0, 0, 1, 0, 1],
        [0, 0, 1, 0, 1, 2],
    ])
    return build_from_adjacency(a)


def test_init_extremes(rng):
    k = torus_nn(4, 2)
    s = init_bernoulli(k, 0.0, rng)
    assert s.p1 == 0 and s.p10 == 0 and s.p01 == 0 and s.absorbed
    s = init_bernoulli(k, 1.0, rng)
    assert s.p1 == pytest.approx(1.0) and s.p10 == 0 and s.p01 == 0
    with pytest.raises(errors.BadParam):
        init_bernoulli(k, 1.5, rng)


def test_init_mean(rng):
    k = irregular()
    u = 0.3
    p = np.array([init_bernoulli(k, u, rng).p1 for _ in range(4000)])
    sd = np.sqrt(u * (1 - u) * k.pi_diag / len(p))
    assert abs(p.mean() - u) < 3 * sd


def test_step_on_consensus(rng):
    s = state_from_config(moran(4), np.ones(4, int))
    with pytest.raises(errors.AbsorbedState):
        step(s, moran(4), rng)


def test_two_site_flip_is_fair(rng):
    ones = 0
    for i in range(4000):
        s = state_from_config(TWO, [1, 0])
        ev = step(s, TWO, rng)
        assert ev.flipped
        ones += s.p1 == 1
    assert abs(ones / 4000 - 0.5) < 3 * 0.5 / np.sqrt(4000)


def test_flip_moves_density_by_site_weight(rng):
    k = irregular()
    s = init_bernoulli(k, 0.5, rng)
    while s.absorbed:
        s = init_bernoulli(k, 0.5, rng)
    for _ in range(500):
        if s.absorbed:
            break
        before = s.p1
        ev = step(s, k, rng)
        jump = abs(s.p1 - before)
        if ev.flipped:
            assert jump == pytest.approx(k.pi[ev.site], abs=1e-14)
        else:
            assert jump == 0
        assert jump <= k.pi_max + 1e-15
        assert s.audit(k) <= 1e-10
        assert 0 <= s.p10 <= 1 and 0 <= s.p01 <= 1
        assert (s.p10 + s.p01 == 0) == s.absorbed


def test_integrals_nondecreasing(rng):
    k = moran(6)
    s = init_bernoulli(k, 0.5, rng)
    last = (0.0, 0.0)
    while not s.absorbed:
        step(s, k, rng)
        assert s.int_p1p0 >= last[0] and s.int_pairs >= last[1]
        last = (s.int_p1p0, s.int_pairs)


def test_run_zero_density(rng):
    tr = run(torus_nn(5, 2), 0.0, 2.0, 3.0, np.linspace(0, 2, 5), rng)
    assert np.all(tr.p1 == 0) and tr.tau1 is None and tr.consensus == 0
    assert mean_field_residual(tr) == 0


def test_run_consensus_one(rng):
    tr = run(torus_nn(5, 2), 1.0, 2.0, 3.0, np.linspace(0, 2, 5), rng)
    assert np.all(tr.p1 == 1) and tr.tau1 == 0.0
    assert mean_field_residual(tr) == 0


def test_run_explicit_initial(rng):
    k = moran(8)
    xi = np.array([1, 1, 1, 0, 0, 0, 0, 0])
    tr = run(k, None, 1.0, 1.0, [0.0, 1.0], rng, initial=xi)
    assert tr.p1[0] == pytest.approx(3 / 8)
    with pytest.raises(errors.BadParam):
        run(k, None, 1.0, 1.0, [0.0], rng, initial=[0, 2, 0, 0, 0, 0, 0, 0])


def test_absorbed_runs_stay_constant():
    k = moran(10)
    for i in range(50):
        tr = run(k, 0.5, 5.0, 10.0, np.linspace(0, 5, 26), replica_rng(3, i))
        if tr.consensus is not None:
            hit = np.argmax((tr.p1 == 0) | (tr.p1 == 1))
            assert np.all(tr.p1[hit:] == tr.p1[hit])
            assert np.all(np.diff(tr.int_pairs[hit:]) == 0)


def test_right_continuous_grid_start(rng):
    k = torus_nn(4, 2)
    for _ in range(20):
        tr = run(k, 0.5, 1.0, 5.0, [0.0, 0.5, 1.0], rng)
        assert tr.int_pairs[0] == 0 and tr.int_p1p0[0] == 0
        assert 0 <= tr.p1[0] <= 1


def test_drift_audit(monkeypatch):
    monkeypatch.setattr(vm, "AUDIT_EVERY", 1)
    k = irregular()
    for i in range(30):
        tr = run(k, 0.5, 3.0, 5.0, [0.0, 3.0], replica_rng(0, i))
        assert tr.max_drift <= 1e-10


def test_bad_times(rng):
    with pytest.raises(errors.BadParam):
        run(moran(4), 0.5, 1.0, 0.0, [0.0], rng)
    with pytest.raises(errors.BadParam):
        run(moran(4), 0.5, 1.0, 1.0, [2.0], rng)


@pytest.mark.parametrize("k", [torus_nn(6, 2), irregular()])
def test_modes_agree_in_law(k):
    g = meeting_moments(k).t_meet
    a = ensemble(k, 0.5, g, 1.0, 2000, 1, [0.0, 0.5, 1.0], mode="plain")
    b = ensemble(k, 0.5, g, 1.0, 2000, 2, [0.0, 0.5, 1.0], mode="discordant")
    for j in (1, 2):
        assert ks_two_sample(a.p1[:, j], b.p1[:, j]).passed


def test_mode_choice():
    assert choose_mode(torus_nn(5, 2)) == "discordant"
    assert choose_mode(moran(100)) == "plain"
    with pytest.raises(errors.BadParam):
        choose_mode(moran(5), "fast")


def test_ensemble_deterministic_across_workers():
    k = torus_nn(6, 2)
    a = ensemble(k, 0.5, 10.0, 1.0, 40, 77, [0.0, 0.5, 1.0], parallelism=1)
    b = ensemble(k, 0.5, 10.0, 1.0, 40, 77, [0.0, 0.5, 1.0], parallelism=4)
    assert np.array_equal(a.p1, b.p1)
    assert np.array_equal(a.residuals, b.residuals)
    assert a.mean_p1p0.tobytes() == b.mean_p1p0.tobytes()


def test_single_replica_is_run():
    k = moran(12)
    e = ensemble(k, 0.5, 5.0, 1.0, 1, 9, [0.0, 1.0])
    tr = run(k, 0.5, 1.0, 5.0, [0.0, 1.0], replica_rng(9, 0, "voter"))
    assert np.array_equal(e.p1[0], tr.p1)
    assert e.residuals[0] == mean_field_residual(tr)


@pytest.mark.parametrize("k", [moran(30), torus_nn(6, 2), irregular()])
def test_second_moment_and_martingale(k):
    g = meeting_moments(k).t_meet
    grid = [0.0, 0.25, 0.5, 1.0, 2.0]
    e = ensemble(k, 0.5, g, 2.0, 3000, 5, grid)
    exact = 0.25 * meeting_tail(k, "UU'", g * np.array(grid))
    assert np.all(np.abs(e.mean_p1p0 - exact) <= 3 * e.se("p1p0"))
    inc = e.p1[:, 1:] - e.p1[:, :1]
    m, se = mean_se(inc)
    assert np.all(np.abs(m) <= 3 * se)


def test_compensator_identity():
    k = torus_nn(5, 2)
    g = meeting_moments(k).t_meet
    u = 0.4
    vals = []
    for i in range(2000):
        tr = run(k, u, 1.0, g, [0.0, 1.0], replica_rng(21, i))
        vals.append(tr.int_pairs[-1] + tr.p1p0[-1])
    m, se = mean_se(np.array(vals))
    assert abs(m - u * (1 - u) * (1 - k.pi_diag)) <= 3 * se


def test_mean_field_residual_moran_is_small():
    k = moran(40)
    g = meeting_moments(k).t_meet
    e = ensemble(k, 0.5, g, 2.0, 200, 4, [0.0, 2.0])
    # on the complete graph p10 + p01 is proportional to p1 p0, so R is O(1/n)
    assert np.mean(np.abs(e.residuals)) < 0.02
