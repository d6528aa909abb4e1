"""The acceptance battery: fourteen numbered checks with fixed instances and tolerances.

Each ``criterion_<k>`` returns a :class:`CriterionResult`.  Randomized
criteria take ``master_seed`` and ``parallelism`` and expose the statistics
they were judged on in ``stats`` so that reruns can be compared exactly.
"""
from dataclasses import dataclass, field
import json
import math

import numpy as np

from . import analysis, meeting, zoo
from .experiment import (
    check_cheeger,
    check_density_moment,
    check_full_coalescence,
    check_identities,
    check_kingman,
    check_martingale,
    check_meeting_exp,
    check_prop61,
    conditions_ladder,
    density_ensemble,
    mean_field_ladder,
    trend_check,
    _jsonable,
)

MASTER_SEED = 20_240_917
G3 = 1.516386059151978  # Watson's integral: expected visits to the origin, simple walk on Z^3


@dataclass
class CriterionResult:
    number: str
    title: str
    passed: bool
    summary: str
    stats: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list, repr=False)

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'} [{self.number}] {self.title}: {self.summary}"

    def fingerprint(self):
        """Exact serialization of the judged statistics (floats by ``repr``)."""
        return json.dumps(_jsonable(self.stats), sort_keys=True, default=repr)


def small_instances():
    """Every zoo instance with at most 64 sites used by the exact checks."""
    out = [zoo.moran(n) for n in (2, 3, 5, 8, 16, 32, 64)]
    out += [zoo.torus_nn(n, 1) for n in (3, 4, 5, 6, 7, 8, 16, 33)]
    out += [zoo.torus_nn(n, 2) for n in (3, 4, 5, 6, 7, 8)]
    out += [zoo.torus_nn(3, 3), zoo.torus_nn(4, 3)]
    out += [zoo.torus_range(n, m, 1) for n, m in ((10, 2), (16, 3), (20, 4), (40, 7))]
    out += [zoo.torus_range(7, 1, 2), zoo.torus_range(8, 2, 2)]
    out += [zoo.hypercube(d) for d in range(1, 7)]
    out += [zoo.random_regular_perm(n, k, s) for n, k, s in ((12, 4, 1), (20, 4, 2), (40, 6, 3), (64, 4, 4))]
    return out


def reduced_tori():
    return [zoo.torus_nn(L, 2) for L in (10, 15, 20, 25, 30)] + [zoo.torus_nn(L, 3) for L in (6, 8)]


def _label(k):
    inner = ",".join(f"{a}={b}" for a, b in k.info.items() if a in ("n", "d", "m", "k", "n_dim", "seed"))
    return f"{k.info.get('family', 'kernel')}({inner})"


# ---------------------------------------------------------------- exact criteria

def criterion_1():
    verdicts = []
    for k in small_instances():
        verdicts.append(check_identities(k, _label(k), route="product"))
        if k.group:
            red = meeting.meeting_moments(k, "difference")
            prod = verdicts[-1].details["t_meet"]
            agree = abs(red.t_meet - prod) / prod
            verdicts[-1].details["reduction_agreement"] = agree
            verdicts[-1].passed = verdicts[-1].passed and agree <= 1e-9
    for k in reduced_tori():
        verdicts.append(check_identities(k, _label(k), route="difference"))
    worst_m = max(v.details["moment_residual"] for v in verdicts)
    worst_u = max(v.details["muv_residual"] for v in verdicts)
    ok = all(v.passed for v in verdicts)
    return CriterionResult("1", "meeting-moment identities", ok,
                           f"{len(verdicts)} instances, max moment residual {worst_m:.2e} (<= 1e-8), "
                           f"max tail-relation residual {worst_u:.2e} (<= 1e-6)",
                           {"moment": worst_m, "muv": worst_u}, verdicts)


def _zero_diagonal_symmetric(k):
    r = k.rates
    return (abs(r - r.T).max() < 1e-14 if r.nnz else True) and np.allclose(k.total_rate, 1.0)


def criterion_2():
    rows = []
    ok = True
    for k in small_instances() + reduced_tori():
        sol = meeting.meeting_moments(k)
        ic = meeting.identity_check(k, sol)
        good = sol.t_meet >= ic.lower_bound - 1e-9
        if _zero_diagonal_symmetric(k):
            e = k.n
            good = good and sol.t_meet >= (e - 1) ** 2 / (4 * e) - 1e-9
        rows.append((_label(k), sol.t_meet, ic.lower_bound, good))
        ok = ok and good
    slack = min(t - b for _, t, b, _ in rows)
    return CriterionResult("2", "meeting-time lower bound", ok,
                           f"{len(rows)} instances, min slack t_meet - bound = {slack:.3e}",
                           {"min_slack": slack})


def criterion_3():
    errs = {d: abs(analysis.spectral_gap(zoo.hypercube(d)) - 2.0 / d) for d in range(2, 11)}
    worst = max(errs.values())
    return CriterionResult("3", "hypercube spectral gap 2/n", worst <= 1e-9,
                           f"max |g - 2/n| over n=2..10 = {worst:.2e} (<= 1e-9)", {"max_error": worst})


def criterion_4():
    detail = {}
    ok = True
    for n, m in ((10, 2), (16, 3), (20, 4)):
        k = zoo.torus_range(n, m, 1)
        phi, _ = analysis.bottleneck_optimum(k, "intervals_1d")
        target = (m + 1) / (2 * (n // 2))
        good = abs(phi - target) <= 1e-12
        row = {"phi": phi, "formula": target}
        if n <= 16:
            ex, _ = analysis.bottleneck_optimum(k, "exhaustive")
            row["exhaustive"] = ex
            good = good and abs(ex - target) <= 1e-12
        detail[f"({n},{m})"] = row
        ok = ok and good
    cheeger = [check_cheeger(k, _label(k)) for k in small_instances()
               if k.reversible and (k.n <= 20 or (k.group and len(k.group) == 1))]
    ok = ok and all(v.passed for v in cheeger)
    worst = min(v.statistic for v in cheeger)
    return CriterionResult("4", "bottleneck formula and Cheeger bound", ok,
                           "; ".join(f"{key}: {r['phi']:.12g} vs {r['formula']:.12g}" for key, r in detail.items())
                           + f"; Cheeger min slack {worst:.3e} over {len(cheeger)} instances",
                           {"phi": detail, "cheeger_min_slack": worst}, cheeger)


def criterion_11():
    vs = [check_prop61(k, _label(k)) for k in (zoo.torus_nn(3, 2), zoo.moran(8))]
    worst = min(v.statistic for v in vs)
    return CriterionResult("11", "pair-density bounds", all(v.passed for v in vs),
                           f"min margin {worst:.3e} (>= -1e-9)", {"min_margin": worst}, vs)


def criterion_12():
    moran_v, _ = conditions_ladder([zoo.moran(n) for n in (30, 100, 300)], ["moran(30)", "moran(100)", "moran(300)"],
                                   reversible_trend=False)
    cube_v, _ = conditions_ladder([zoo.hypercube(d) for d in (6, 8, 10)],
                                  ["hypercube(6)", "hypercube(8)", "hypercube(10)"])
    vs = moran_v + cube_v
    fams = ["moran"] + ["hypercube"] * len(cube_v)
    txt = "; ".join(f"{f} {v.instance.split(' ')[-1]} " + ", ".join(f"{x:.4g}" for x in v.details["values"])
                    + (" decreasing" if "mix" in v.instance else " increasing")
                    for f, v in zip(fams, vs))
    return CriterionResult("12", "condition-report trends", all(v.passed for v in vs),
                           txt, {v.instance: v.details["values"] for v in vs}, vs)


def torus_ratios():
    two = {L: meeting.meeting_moments(zoo.torus_nn(L, 2)).t_meet / (L * L * math.log(L * L) / (2 * math.pi))
           for L in (15, 20, 25, 30)}
    three = {L: meeting.meeting_moments(zoo.torus_nn(L, 3)).t_meet / L ** 3 for L in (6, 8, 10)}
    return two, three


def criterion_13a():
    two, _ = torus_ratios()
    vals = list(two.values())
    inside = all(0.7 <= v <= 1.3 for v in vals)
    tr = trend_check([abs(v - 1.0) for v in vals], "decreasing")
    return CriterionResult("13a", "2-d torus meeting asymptotics", inside and tr.passed,
                           "ratios " + ", ".join(f"L={L}: {v:.4f}" for L, v in two.items())
                           + " in [0.7, 1.3], moving toward 1", {"ratios": two})


def criterion_13b():
    _, three = torus_ratios()
    rel = {L: abs(v / G3 - 1.0) for L, v in three.items()}
    ok = all(r <= 0.25 for r in rel.values())
    return CriterionResult("13b", "3-d torus t_meet/L^3 near G3", ok,
                           ", ".join(f"L={L}: {three[L]:.4f} ({100 * rel[L]:.0f}% from {G3:.3f})" for L in three)
                           + " (tolerance 25%)", {"ratios": three})


# ---------------------------------------------------------------- randomized criteria

def criterion_5(master_seed=MASTER_SEED, parallelism=None):
    k = zoo.torus_nn(25, 2)
    v = check_meeting_exp(k, "torus_nn(25,2)", 5000, master_seed, threshold=0.05, parallelism=parallelism)
    return CriterionResult("5", "exponential meeting-time limit", v.passed,
                           f"KS {v.statistic:.4f} (<= 0.05; 1% sampling threshold {v.details['ks_1pct']:.4f})",
                           {"ks": v.statistic}, [v])


def voter_runs(master_seed=MASTER_SEED, parallelism=None):
    """The voter ensembles behind the density-moment and martingale criteria."""
    out = {}
    for k, lab in ((zoo.moran(200), "moran(200)"), (zoo.torus_nn(20, 2), "torus_nn(20,2)")):
        g = meeting.meeting_moments(k).t_meet
        out[lab] = (k, density_ensemble(k, 2000, master_seed, g, [0.25, 0.5, 1.0, 2.0], parallelism=parallelism))
    return out


def mean_field_runs(master_seed=MASTER_SEED, parallelism=None):
    ladders = {
        "moran": [zoo.moran(n) for n in (30, 100, 300)],
        "torus_nn 2-d": [zoo.torus_nn(L, 2) for L in (10, 20, 40)],
    }
    out = {}
    for name, ks in ladders.items():
        labels = [_label(k) for k in ks]
        out[name] = (ks, labels) + mean_field_ladder(ks, labels, 500, master_seed, parallelism=parallelism)
    return out


def criterion_6(runs):
    vs = []
    for lab, (k, s) in runs.items():
        vs.append(check_density_moment(k, lab, s, wf_slack=0.15 if lab.startswith("torus") else None))
    txt = "; ".join(f"{v.instance}: max |z| {v.statistic:.2f}" for v in vs)
    stats = {v.instance: {"mean": v.details["mean"], "z": v.details["z"]} for v in vs}
    return CriterionResult("6", "density second moment vs exact meeting tail", all(v.passed for v in vs),
                           txt + " (<= 3)", stats, vs)


def criterion_7(runs, mf_runs):
    vs = [check_martingale(k, lab, s) for lab, (k, s) in runs.items()]
    for ks, labels, _, summaries in mf_runs.values():
        vs += [check_martingale(k, lab, s) for k, lab, s in zip(ks, labels, summaries)]
    worst = max(v.statistic for v in vs)
    return CriterionResult("7", "density martingale", all(v.passed for v in vs),
                           f"{len(vs)} instances, max |z| of p1(t) - p1(0) = {worst:.2f} (<= 3)",
                           {v.instance: v.details["mean_increment"] for v in vs}, vs)


def criterion_8(mf_runs):
    vs = [entry[2] for entry in mf_runs.values()]
    txt = "; ".join(
        f"{name}: E|R(2)| " + ", ".join(f"{x:.5f}" for x in v.details["values"])
        + f", steps ok {v.details['steps_ok']}, last/first {v.statistic:.3f} (<= 0.5)"
        for name, v in zip(mf_runs, vs)
    )
    return CriterionResult("8", "mean-field residual trend", all(v.passed for v in vs), txt,
                           {v.instance: v.details["values"] for v in vs}, vs)


def criterion_9(master_seed=MASTER_SEED, parallelism=None):
    vs = check_kingman(zoo.torus_nn(20, 2), "torus_nn(20,2)", 3000, master_seed, k=4, threshold=0.06,
                       parallelism=parallelism)
    return CriterionResult("9", "Kingman partial coalescence", all(v.passed for v in vs),
                           "; ".join(f"{v.instance}: KS {v.statistic:.4f}" for v in vs) + " (<= 0.06)",
                           {v.instance: v.statistic for v in vs}, vs)


def criterion_10(master_seed=MASTER_SEED, parallelism=None):
    v = check_full_coalescence(zoo.moran(100), "moran(100)", 2000, master_seed, threshold=0.06,
                               parallelism=parallelism)
    return CriterionResult("10", "full coalescence vs Kingman tree height", v.passed,
                           f"KS {v.statistic:.4f} (<= 0.06), mean {v.details['mean']:.4f}",
                           {"ks": v.statistic, "mean": v.details["mean"]}, [v])


def randomized(master_seed=MASTER_SEED, parallelism=None):
    """All randomized criteria, keyed by number."""
    runs = voter_runs(master_seed, parallelism)
    mf = mean_field_runs(master_seed, parallelism)
    return {
        "5": criterion_5(master_seed, parallelism),
        "6": criterion_6(runs),
        "7": criterion_7(runs, mf),
        "8": criterion_8(mf),
        "9": criterion_9(master_seed, parallelism),
        "10": criterion_10(master_seed, parallelism),
    }


def criterion_14(first, second):
    """Compare two runs of the randomized criteria statistic by statistic."""
    same = {key: first[key].fingerprint() == second[key].fingerprint() for key in first}
    return CriterionResult("14", "determinism", all(same.values()),
                           "identical statistics on rerun: " + ", ".join(f"{k}={v}" for k, v in same.items()),
                           {"identical": same})


EXACT = {
    "1": criterion_1, "2": criterion_2, "3": criterion_3, "4": criterion_4, "11": criterion_11,
    "12": criterion_12, "13a": criterion_13a, "13b": criterion_13b,
}
ORDER = ["1", "2", "3", "4", "5", "6", "7", "8", "9", "10", "11", "12", "13a", "13b", "14"]


def run_all(master_seed=MASTER_SEED, parallelism=None, only=None, rerun_parallelism=2):
    """Every criterion; ``14`` reruns the randomized ones with a different worker count."""
    want = set(ORDER if not only else only)
    out = {}
    for key, fn in EXACT.items():
        if key in want:
            out[key] = fn()
    if want & {"5", "6", "7", "8", "9", "10", "14"}:
        first = randomized(master_seed, parallelism)
        out.update({k: v for k, v in first.items() if k in want})
        if "14" in want:
            out["14"] = criterion_14(first, randomized(master_seed, rerun_parallelism))
    return [out[k] for k in ORDER if k in out]
