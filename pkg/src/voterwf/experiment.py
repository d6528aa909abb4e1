"""Configuration-driven experiments: per-instance tables, statistical verdicts, reports.

A config is a JSON document::

    {"specs": [{"family": "moran", "ladder": [30, 100, 300]},
               {"family": "torus_nn", "params": {"d": 2}, "ladder": [10, 20, 40]}],
     "tests": ["identities", "meeting_exp", "mean_field_trend"],
     "gamma": "tmeet", "replicas": 500, "master_seed": 1, "parallelism": 1,
     "output": "out"}

Each ladder entry fills the family's size parameter (``n``, or ``n_dim``
for the hypercube).  Command-line flags override the matching fields.
"""
from dataclasses import asdict, dataclass, field
import csv
import hashlib
import json
import math
import os
import platform
import time

import numpy as np

from . import __version__, errors
from . import analysis, coalescent, meeting, stats, voter, wright_fisher
from ._streams import named_rng
from .zoo import ZooSpec

TEST_NAMES = (
    "identities",
    "meeting_exp",
    "density_moment",
    "mean_field_trend",
    "kingman",
    "full_coalescence",
    "conditions",
    "prop61",
    "cheeger",
)

# which result each verdict exercises
TAGS = {
    "identities": "meeting-moment identities and tail relation",
    "lower_bound": "meeting-time lower bound",
    "meeting_exp": "exponential limit of the scaled meeting time",
    "density_moment": "second moment of the density under product initial law",
    "martingale": "martingale property of the density",
    "mean_field_trend": "mean-field condition",
    "kingman": "convergence of partial coalescence times to Kingman",
    "full_coalescence": "full coalescence time and consensus time",
    "conditions": "sufficient mixing conditions",
    "prop61": "pair-density bounds by meeting tails and mixing",
    "cheeger": "Cheeger inequality",
    "gap": "hypercube spectral gap",
    "bottleneck": "bottleneck ratio of long-range tori",
    "torus_asymptotics": "meeting-time asymptotics on tori",
    "determinism": "reproducibility",
}

SIZE_KEY = {"hypercube": "n_dim"}


@dataclass
class Verdict:
    test: str
    instance: str
    tag: str
    statistic: float
    threshold: float
    passed: bool
    seed: object = None
    inputs: str = ""
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return _jsonable(asdict(self))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def kernel_hash(kernel):
    """SHA-256 of the rate matrix and group labelling."""
    h = hashlib.sha256()
    r = kernel.rates.tocsr()
    r.sort_indices()
    h.update(np.int64(kernel.n).tobytes())
    for a in (r.indptr.astype(np.int64), r.indices.astype(np.int64), r.data.astype(np.float64)):
        h.update(a.tobytes())
    h.update(repr(kernel.group).encode())
    return h.hexdigest()[:16]


# ---------------------------------------------------------------- trends

@dataclass
class TrendVerdict:
    values: list
    se: list
    direction: str
    steps_ok: list
    passed: bool


def trend_check(values, direction="decreasing", se=None, k_se=2.0):
    """Each successive value must move in ``direction`` up to ``k_se`` combined standard errors.

    For ``decreasing``, ``v[i] <= v[i-1] + k_se sqrt(se[i]^2 + se[i-1]^2)``.
    A constant series fails at zero SE, since ties do not count as movement.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        raise errors.TooFewPoints("a trend needs at least 3 points")
    s = np.zeros_like(v) if se is None else np.asarray(se, dtype=float)
    if direction not in ("decreasing", "increasing"):
        raise errors.BadParam("direction must be 'decreasing' or 'increasing'")
    sign = 1.0 if direction == "decreasing" else -1.0
    steps = []
    for i in range(1, v.size):
        slack = k_se * math.hypot(s[i], s[i - 1])
        diff = sign * (v[i - 1] - v[i])
        steps.append(bool(diff > 0 or (slack > 0 and diff >= -slack)))
    return TrendVerdict(v.tolist(), s.tolist(), direction, steps, all(steps))


# ---------------------------------------------------------------- gamma

def resolve_gamma(kernel, policy="tmeet", *, master_seed=0, replicas=2000, parallelism=None):
    """``(gamma, se)``; exact ``t_meet`` when solvable, else a two-lineage Monte Carlo mean."""
    if policy != "tmeet":
        g = float(policy)
        if g <= 0:
            raise errors.ConfigError("gamma must be positive")
        return g, 0.0
    try:
        return meeting.meeting_moments(kernel).t_meet, 0.0
    except errors.TooLarge:
        c = coalescent.partial_ensemble(kernel, 2, replicas, master_seed, parallelism=parallelism,
                                        stream="gamma")
        m, se = stats.mean_se(c[:, 1])
        return float(m), float(se)


# ---------------------------------------------------------------- checks

def check_identities(kernel, label, *, grid_end=5.0, step=0.01, route="auto"):
    sol = meeting.meeting_moments(kernel, route)
    ic = meeting.identity_check(kernel, sol)
    grid = np.linspace(0.0, grid_end, int(round(grid_end / step)) + 1)
    muv = meeting.muv_consistency(kernel, grid, route)
    ok = ic.max_residual <= 1e-8 and muv.max_residual <= 1e-6
    return Verdict(
        "identities", label, TAGS["identities"], max(ic.max_residual, muv.max_residual), 1e-8, bool(ok),
        inputs=kernel_hash(kernel),
        details={"route": sol.route, "moment_residual": ic.max_residual, "muv_residual": muv.max_residual,
                 "t_meet": sol.t_meet, "lower_bound": ic.lower_bound, "lower_bound_ok": ic.lower_bound_ok},
    )


def check_meeting_exp(kernel, label, replicas, master_seed, *, t_meet=None, threshold=0.05,
                      parallelism=None):
    t_meet = meeting.meeting_moments(kernel).t_meet if t_meet is None else t_meet
    c = coalescent.partial_ensemble(kernel, 2, replicas, master_seed, parallelism=parallelism,
                                    stream="meeting-exp")
    law = wright_fisher.MixtureExpLaw(kernel.pi_diag)
    ks = stats.ks_one_sample(c[:, 1] / t_meet, law.cdf, cdf_left=law.cdf_left)
    return Verdict(
        "meeting_exp", label, TAGS["meeting_exp"], ks.statistic, threshold, ks.statistic <= threshold,
        seed=master_seed, inputs=kernel_hash(kernel),
        details={"replicas": replicas, "ks_1pct": ks.threshold, "t_meet": t_meet, "pi_diag": kernel.pi_diag},
    )


def density_ensemble(kernel, replicas, master_seed, gamma, times, horizon=None, *, u=0.5,
                     parallelism=None):
    times = np.asarray(times, dtype=float)
    grid = np.unique(np.concatenate([[0.0], times]))
    horizon = float(grid[-1]) if horizon is None else horizon
    return voter.ensemble(kernel, u, gamma, horizon, replicas, master_seed, grid,
                          parallelism=parallelism)


def check_density_moment(kernel, label, summary, *, u=0.5, k_se=3.0, wf_slack=None):
    """``E[p1 p0](t)`` against ``u(1-u) P(M_UU' > gamma t)`` on every positive grid time."""
    grid = summary.grid
    pos = grid > 0
    tail = meeting.meeting_tail(kernel, "UU'", summary.gamma * grid[pos])
    exact = u * (1 - u) * tail
    se = summary.se("p1p0")[pos]
    dev = np.abs(summary.mean_p1p0[pos] - exact)
    z = dev / np.maximum(se, 1e-300)
    ok = bool(np.all(dev <= k_se * se))
    details = {"grid": grid[pos], "mean": summary.mean_p1p0[pos], "se": se, "exact": exact, "z": z}
    if wf_slack is not None:
        wf = np.array([wright_fisher.wf_moment(u, 1, t) - wright_fisher.wf_moment(u, 2, t) for t in grid[pos]])
        wf_ok = np.abs(summary.mean_p1p0[pos] - wf) <= k_se * se + wf_slack * wf
        details.update(wf=wf, wf_ok=wf_ok)
        ok = ok and bool(np.all(wf_ok))
    return Verdict("density_moment", label, TAGS["density_moment"], float(z.max()), k_se, ok,
                   inputs=kernel_hash(kernel), details=details)


def check_martingale(kernel, label, summary, *, k_se=3.0):
    """Increments ``p1(t) - p1(0)`` have mean zero at every grid time."""
    inc = summary.p1[:, 1:] - summary.p1[:, :1]
    m, se = stats.mean_se(inc)
    z = np.abs(m) / np.maximum(se, 1e-300)
    z = np.where(se > 0, z, np.where(m == 0, 0.0, np.inf))
    return Verdict("martingale", label, TAGS["martingale"], float(z.max()), k_se, bool(np.all(z <= k_se)),
                   inputs=kernel_hash(kernel),
                   details={"grid": summary.grid[1:], "mean_increment": m, "se": se,
                            "mean_p1": summary.mean_p1})


def mean_field_ladder(kernels, labels, replicas, master_seed, *, horizon=2.0, ratio=0.5,
                      parallelism=None, summaries=None):
    """``E|R(T)|`` along a size ladder: decreasing within 2 SE, last <= ``ratio`` * first."""
    vals, ses, out = [], [], []
    for i, (k, lab) in enumerate(zip(kernels, labels)):
        s = summaries[i] if summaries is not None else None
        if s is None:
            g = meeting.meeting_moments(k).t_meet
            s = voter.ensemble(k, 0.5, g, horizon, replicas, master_seed, [0.0, horizon / 2, horizon],
                               parallelism=parallelism)
        out.append(s)
        m, se = stats.mean_se(np.abs(s.residuals))
        vals.append(float(m))
        ses.append(float(se))
    tr = trend_check(vals, "decreasing", ses)
    rel = vals[-1] / vals[0]
    ok = tr.passed and rel <= ratio
    v = Verdict("mean_field_trend", " -> ".join(labels), TAGS["mean_field_trend"], rel, ratio, bool(ok),
                seed=master_seed, inputs=",".join(kernel_hash(k) for k in kernels),
                details={"values": vals, "se": ses, "steps_ok": tr.steps_ok, "last_over_first": rel})
    return v, out


def check_kingman(kernel, label, replicas, master_seed, *, k=4, threshold=0.06, t_meet=None,
                  parallelism=None):
    t_meet = meeting.meeting_moments(kernel).t_meet if t_meet is None else t_meet
    c = coalescent.partial_ensemble(kernel, k, replicas, master_seed, parallelism=parallelism,
                                    stream="kingman")
    rng = named_rng(master_seed, "kingman-reference")
    full = stats.ks_two_sample(c[:, 1] / t_meet, coalescent.kingman_sampler(k, 1, rng, replicas))
    first = stats.ks_two_sample(c[:, k - 1] / t_meet, coalescent.kingman_sampler(k, k - 1, rng, replicas))
    inputs = kernel_hash(kernel)
    return [
        Verdict("kingman", f"{label} C_{k},1", TAGS["kingman"], full.statistic, threshold,
                full.statistic <= threshold, seed=master_seed, inputs=inputs,
                details={"replicas": replicas, "ks_1pct": full.threshold}),
        Verdict("kingman", f"{label} C_{k},{k - 1}", TAGS["kingman"], first.statistic, threshold,
                first.statistic <= threshold, seed=master_seed, inputs=inputs,
                details={"replicas": replicas, "ks_1pct": first.threshold}),
    ]


def check_full_coalescence(kernel, label, replicas, master_seed, *, threshold=0.06, t_meet=None,
                           parallelism=None):
    t_meet = meeting.meeting_moments(kernel).t_meet if t_meet is None else t_meet
    c = coalescent.full_ensemble(kernel, replicas, master_seed, parallelism=parallelism)
    rng = named_rng(master_seed, "kingman-full-reference")
    ks = stats.ks_two_sample(c[:, 1] / t_meet, coalescent.kingman_sampler(None, 1, rng, replicas))
    m, se = stats.mean_se(c[:, 1] / t_meet)
    return Verdict("full_coalescence", label, TAGS["full_coalescence"], ks.statistic, threshold,
                   ks.statistic <= threshold, seed=master_seed, inputs=kernel_hash(kernel),
                   details={"replicas": replicas, "ks_1pct": ks.threshold, "mean": m, "se": se})


def check_prop61(kernel, label, pairs=((0.5, 1.5), (1.0, 3.0))):
    worst_tv, worst_gap, det = np.inf, np.inf, []
    for s, t in pairs:
        b = meeting.prop61_bound_check(kernel, s, t)
        worst_tv = min(worst_tv, b.min_margin_tv)
        if b.min_margin_gap is not None:
            worst_gap = min(worst_gap, b.min_margin_gap)
        det.append({"s": s, "t": t, "margin_tv": b.min_margin_tv, "margin_gap": b.min_margin_gap,
                    "configs": len(b.configs)})
    worst = min(worst_tv, worst_gap)
    return Verdict("prop61", label, TAGS["prop61"], worst, -1e-9, bool(worst >= -1e-9),
                   inputs=kernel_hash(kernel), details={"pairs": det})


def check_cheeger(kernel, label, strategy=None):
    g, phi, ok = analysis.cheeger_check(kernel, strategy)
    return Verdict("cheeger", label, TAGS["cheeger"], g - phi * phi / 2, 0.0, ok,
                   inputs=kernel_hash(kernel), details={"gap": g, "phi_star": phi})


def conditions_ladder(kernels, labels, reversible_trend=True):
    reps = [analysis.condition_report(k, meeting.meeting_moments(k).t_meet) for k in kernels]
    out = []
    tr = trend_check([r.ratio_mix for r in reps], "decreasing")
    out.append(Verdict("conditions", " -> ".join(labels) + " t_mix/t_meet", TAGS["conditions"],
                       tr.values[-1], tr.values[0], tr.passed,
                       inputs=",".join(kernel_hash(k) for k in kernels),
                       details={"values": tr.values, "steps_ok": tr.steps_ok}))
    if reversible_trend and all(r.gap_times_meet is not None for r in reps):
        tr = trend_check([r.gap_times_meet for r in reps], "increasing")
        out.append(Verdict("conditions", " -> ".join(labels) + " g*t_meet", TAGS["conditions"],
                           tr.values[-1], tr.values[0], tr.passed,
                           inputs=",".join(kernel_hash(k) for k in kernels),
                           details={"values": tr.values, "steps_ok": tr.steps_ok}))
    return out, reps


# ---------------------------------------------------------------- config and report

@dataclass
class ExperimentConfig:
    specs: list
    tests: list
    gamma: object = "tmeet"
    replicas: int = 500
    master_seed: int = 0
    parallelism: int | None = None
    output: str | None = None

    def __post_init__(self):
        if not self.specs:
            raise errors.ConfigError("config needs at least one spec")
        if not self.tests:
            raise errors.ConfigError("config needs at least one test")
        bad = [t for t in self.tests if t not in TEST_NAMES]
        if bad:
            raise errors.ConfigError(f"unknown tests {bad}")
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise errors.ConfigError("master_seed must be a 64-bit unsigned integer")
        if int(self.replicas) < 1:
            raise errors.ConfigError("replicas must be >= 1")
        for s in self.specs:
            if "family" not in s:
                raise errors.ConfigError("every spec needs a family")
        if self.gamma != "tmeet":
            try:
                if float(self.gamma) <= 0:
                    raise ValueError
            except (TypeError, ValueError):
                raise errors.ConfigError("gamma must be 'tmeet' or a positive number") from None

    @classmethod
    def from_dict(cls, d):
        known = {"specs", "tests", "gamma", "replicas", "master_seed", "parallelism", "output"}
        extra = set(d) - known
        if extra:
            raise errors.ConfigError(f"unknown config fields {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise errors.ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise errors.ConfigError(f"{path}: {exc}") from exc

    def ladders(self):
        """``[(family, [ZooSpec, ...]), ...]``, one list per configured spec."""
        out = []
        for s in self.specs:
            fam = s["family"]
            base = dict(s.get("params", {}))
            ladder = s.get("ladder")
            if ladder is None:
                out.append((fam, [ZooSpec(fam, base)]))
                continue
            key = SIZE_KEY.get(fam, "n")
            out.append((fam, [ZooSpec(fam, {**base, key: v}) for v in ladder]))
        return out

    def hash(self):
        d = asdict(self)
        d.pop("output", None)
        d.pop("parallelism", None)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def toolchain_stamp():
    import numba
    import scipy
    return {
        "package": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


@dataclass
class Report:
    config_hash: str
    instances: list
    verdicts: list
    stamp: dict
    timestamp: str = ""

    @property
    def passed(self):
        return all(v.passed for v in self.verdicts)

    @property
    def exit_code(self):
        return 0 if self.passed else 1

    def to_dict(self):
        return _jsonable({
            "config_hash": self.config_hash,
            "stamp": self.stamp,
            "timestamp": self.timestamp,
            "passed": self.passed,
            "instances": self.instances,
            "verdicts": [v.to_dict() for v in self.verdicts],
        })

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write(self, outdir):
        os.makedirs(os.path.join(outdir, "tables"), exist_ok=True)
        with open(os.path.join(outdir, "report.json"), "w") as fh:
            fh.write(self.to_json() + "\n")
        if self.instances:
            cols = sorted({k for row in self.instances for k in row})
            with open(os.path.join(outdir, "tables", "instances.csv"), "w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=cols)
                w.writeheader()
                for row in self.instances:
                    w.writerow(_jsonable(row))
        with open(os.path.join(outdir, "tables", "verdicts.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["test", "instance", "tag", "statistic", "threshold", "passed", "seed", "inputs"])
            for v in self.verdicts:
                w.writerow([v.test, v.instance, v.tag, repr(float(v.statistic)), repr(float(v.threshold)),
                            int(v.passed), v.seed, v.inputs])


def instance_row(kernel, label):
    row = {"instance": label, "n": kernel.n, "pi_diag": kernel.pi_diag, "nu_total": kernel.nu_total,
           "reversible": kernel.reversible, "hash": kernel_hash(kernel)}
    try:
        row["t_meet"] = meeting.meeting_moments(kernel).t_meet
    except errors.TooLarge:
        row["t_meet"] = None
    if kernel.n <= 4096:
        if row["t_meet"] is not None:
            rep = analysis.condition_report(kernel, row["t_meet"])
            row.update({k: v for k, v in rep.to_dict().items() if k not in row})
        try:
            row["phi_star"] = analysis.bottleneck_optimum(kernel, analysis.auto_bottleneck_strategy(kernel))[0]
        except errors.TooLarge:
            row["phi_star"] = None
    return row


def run_experiment(config):
    """Execute every configured test on every instance/ladder and assemble a report."""
    if isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    seed = int(config.master_seed)
    par = config.parallelism
    reps = int(config.replicas)
    instances, verdicts = [], []
    for fam, specs in config.ladders():
        kernels, labels = [], []
        for sp_ in specs:
            try:
                k = sp_.build()
            except errors.VoterWFError as exc:
                raise type(exc)(f"{sp_.label()}: {exc}") from exc
            kernels.append(k)
            labels.append(sp_.label())
        for k, lab in zip(kernels, labels):
            instances.append(instance_row(k, lab))
        gammas = [resolve_gamma(k, config.gamma, master_seed=seed, parallelism=par)[0] for k in kernels]
        for test in config.tests:
            if test == "identities":
                verdicts += [check_identities(k, lab) for k, lab in zip(kernels, labels)]
            elif test == "meeting_exp":
                verdicts += [check_meeting_exp(k, lab, reps, seed, t_meet=g, parallelism=par)
                             for k, lab, g in zip(kernels, labels, gammas)]
            elif test == "density_moment":
                for k, lab, g in zip(kernels, labels, gammas):
                    s = density_ensemble(k, reps, seed, g, [0.25, 0.5, 1.0, 2.0], parallelism=par)
                    verdicts.append(check_density_moment(k, lab, s))
                    verdicts.append(check_martingale(k, lab, s))
            elif test == "mean_field_trend":
                if len(kernels) >= 3:
                    verdicts.append(mean_field_ladder(kernels, labels, reps, seed, parallelism=par)[0])
            elif test == "kingman":
                for k, lab, g in zip(kernels, labels, gammas):
                    verdicts += check_kingman(k, lab, reps, seed, k=min(4, k.n), t_meet=g, parallelism=par)
            elif test == "full_coalescence":
                verdicts += [check_full_coalescence(k, lab, reps, seed, t_meet=g, parallelism=par)
                             for k, lab, g in zip(kernels, labels, gammas)]
            elif test == "conditions":
                if len(kernels) >= 3:
                    verdicts += conditions_ladder(kernels, labels, fam == "hypercube")[0]
            elif test == "prop61":
                verdicts += [check_prop61(k, lab) for k, lab in zip(kernels, labels)]
            elif test == "cheeger":
                # only where the exact optimum is computable
                for k, lab in zip(kernels, labels):
                    if not k.reversible:
                        continue
                    try:
                        strat = analysis.auto_bottleneck_strategy(k)
                    except errors.TooLarge:
                        continue
                    verdicts.append(check_cheeger(k, lab, strat))
    for v in verdicts:
        if v.seed is None:
            v.seed = seed
    report = Report(config.hash(), instances, verdicts, toolchain_stamp(),
                    time.strftime("%Y-%m-%dT%H:%M:%S"))
    if config.output:
        report.write(config.output)
    return report
