"""Acceptance battery: one test per criterion, each printing a PASS/FAIL line.

The exact criteria are cheap and run first.  The randomized criteria share a
single ensemble run (and a second run with a different worker count for the
determinism check), so the whole module takes several minutes.
"""
import pytest

from voterwf import battery

from .conftest import ACCEPTANCE_LINES


@pytest.fixture(scope="module")
def results():
    return {r.number: r for r in battery.run_all(battery.MASTER_SEED)}


def judge(results, key):
    r = results[key]
    print(r.line())
    ACCEPTANCE_LINES.append(r.line())
    assert r.passed, r.line()


def test_criterion_01_meeting_identities_and_tail_relation(results):
    judge(results, "1")


def test_criterion_02_meeting_time_lower_bound(results):
    judge(results, "2")


def test_criterion_03_hypercube_gap(results):
    judge(results, "3")


def test_criterion_04_long_range_bottleneck_and_cheeger(results):
    judge(results, "4")


def test_criterion_05_exponential_meeting_limit(results):
    judge(results, "5")


def test_criterion_06_density_second_moment(results):
    judge(results, "6")


def test_criterion_07_density_martingale(results):
    judge(results, "7")


def test_criterion_08_mean_field_residual_trend(results):
    judge(results, "8")


def test_criterion_09_partial_coalescence_vs_kingman(results):
    judge(results, "9")


def test_criterion_10_full_coalescence_vs_kingman(results):
    judge(results, "10")


def test_criterion_11_pair_density_bounds(results):
    judge(results, "11")


def test_criterion_12_mixing_condition_trends(results):
    judge(results, "12")


def test_criterion_13a_two_dim_torus_asymptotics(results):
    judge(results, "13a")


def test_criterion_13b_three_dim_torus_asymptotics(results):
    judge(results, "13b")


def test_criterion_14_determinism_across_workers(results):
    judge(results, "14")
