import csv
import json

import numpy as np
import pytest

from voterwf import errors
from voterwf.experiment import (
    TEST_NAMES,
    ExperimentConfig,
    Verdict,
    kernel_hash,
    resolve_gamma,
    run_experiment,
    trend_check,
)
from voterwf.meeting import meeting_moments
from voterwf.zoo import moran, torus_nn


def test_trend_examples():
    assert trend_check([3, 2, 1]).passed
    assert not trend_check([3, 2, 2]).passed
    assert trend_check([1, 2, 3], "increasing").passed
    assert trend_check([3.0, 3.05, 2.0], se=[0.1, 0.1, 0.1]).passed
    assert not trend_check([3.0, 3.5, 2.0], se=[0.1, 0.1, 0.1]).passed
    with pytest.raises(errors.TooFewPoints):
        trend_check([2, 1])
    with pytest.raises(errors.BadParam):
        trend_check([3, 2, 1], "sideways")


@pytest.mark.parametrize("bad", [
    {"specs": [], "tests": ["identities"]},
    {"specs": [{"family": "moran", "params": {"n": 5}}], "tests": []},
    {"specs": [{"family": "moran", "params": {"n": 5}}], "tests": ["nonsense"]},
    {"specs": [{"params": {"n": 5}}], "tests": ["identities"]},
    {"specs": [{"family": "moran", "params": {"n": 5}}], "tests": ["identities"], "gamma": -1},
    {"specs": [{"family": "moran", "params": {"n": 5}}], "tests": ["identities"], "master_seed": -3},
    {"specs": [{"family": "moran", "params": {"n": 5}}], "tests": ["identities"], "colour": "red"},
])
def test_config_errors(bad):
    with pytest.raises(errors.ConfigError):
        ExperimentConfig.from_dict(bad)


def test_config_load_errors(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(errors.ConfigError):
        ExperimentConfig.load(p)
    with pytest.raises(errors.ConfigError):
        ExperimentConfig.load(tmp_path / "missing.json")


def test_ladders_and_hash():
    cfg = ExperimentConfig.from_dict({
        "specs": [{"family": "hypercube", "ladder": [3, 4, 5]}, {"family": "moran", "params": {"n": 5}}],
        "tests": ["identities"],
    })
    lad = cfg.ladders()
    assert [s.params["n_dim"] for s in lad[0][1]] == [3, 4, 5]
    assert len(lad[1][1]) == 1
    again = ExperimentConfig.from_dict({
        "specs": [{"family": "hypercube", "ladder": [3, 4, 5]}, {"family": "moran", "params": {"n": 5}}],
        "tests": ["identities"],
    })
    assert cfg.hash() == again.hash()
    again.master_seed = 1
    assert cfg.hash() != again.hash()


def test_resolve_gamma():
    k = moran(10)
    g, se = resolve_gamma(k, "tmeet")
    assert g == pytest.approx(meeting_moments(k).t_meet) and se == 0
    assert resolve_gamma(k, 2.5) == (2.5, 0.0)
    with pytest.raises(errors.ConfigError):
        resolve_gamma(k, 0)


def test_kernel_hash_is_content_based():
    assert kernel_hash(torus_nn(4, 2)) == kernel_hash(torus_nn(4, 2))
    assert kernel_hash(torus_nn(4, 2)) != kernel_hash(torus_nn(5, 2))


def test_verdict_json_roundtrip():
    v = Verdict("kingman", "moran(n=5)", "t", np.float64(0.01), 0.06, np.bool_(True), 3, {"k": np.int64(4)})
    d = json.loads(json.dumps(v.to_dict()))
    assert d["passed"] is True and d["inputs"]["k"] == 4


SMALL = {
    "specs": [{"family": "hypercube", "ladder": [3, 4, 5]}, {"family": "torus_nn", "params": {"n": 5, "d": 2}}],
    "tests": list(TEST_NAMES),
    "replicas": 200,
    "master_seed": 11,
}


def test_run_experiment_deterministic(tmp_path):
    a = run_experiment(dict(SMALL, parallelism=1))
    b = run_experiment(dict(SMALL, parallelism=3, output=str(tmp_path)))
    da, db = a.to_dict(), b.to_dict()
    for d in (da, db):
        d.pop("timestamp")
        d.pop("config_hash")
    assert json.dumps(da, sort_keys=True) == json.dumps(db, sort_keys=True)
    tests = {v.test for v in a.verdicts}
    assert {"identities", "conditions", "prop61", "cheeger", "kingman", "density_moment"} <= tests
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["passed"] == b.passed
    rows = list(csv.DictReader(open(tmp_path / "tables" / "verdicts.csv")))
    assert len(rows) == len(b.verdicts)
    inst = list(csv.DictReader(open(tmp_path / "tables" / "instances.csv")))
    assert len(inst) == 4
    assert b.exit_code == (0 if b.passed else 1)
