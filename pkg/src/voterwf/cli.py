"""Command line front end.

Exit codes: 0 all checks passed, 1 a statistical check failed, 2 bad
configuration or runtime error.  ``VOTERWF_PARALLEL`` sets the default
number of worker threads; ``--parallel`` overrides it.
"""
import argparse
import csv
import json
import os
import sys

import numpy as np

from . import errors
from .experiment import ExperimentConfig, _jsonable, run_experiment
from .voter import PARALLEL_ENV, default_parallelism


def _parse_value(v):
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


def _params(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise errors.ConfigError(f"parameter {item!r} is not key=value")
        k, v = item.split("=", 1)
        out[k] = _parse_value(v)
    return out


def parse_grid(text):
    """``a:b:step`` (inclusive) or a comma-separated list."""
    if ":" in text:
        a, b, h = (float(x) for x in text.split(":"))
        if h <= 0 or b < a:
            raise errors.ConfigError(f"bad grid {text!r}")
        return np.linspace(a, b, int(round((b - a) / h)) + 1)
    return np.array([float(x) for x in text.split(",") if x.strip()])


def _kernel(args):
    from .kernel import load_kernel
    from .zoo import ZooSpec
    if getattr(args, "kernel", None):
        return load_kernel(args.kernel)
    if getattr(args, "family", None):
        return ZooSpec(args.family, _params(args.param)).build()
    raise errors.ConfigError("give --kernel FILE or --family NAME")


def _emit(obj, out=None, name="result.json"):
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True)
    if out:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, name), "w") as fh:
            fh.write(text + "\n")
    print(text)


def _write_csv(out, name, header, rows):
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, name), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


def cmd_graph(args):
    from .kernel import save_kernel
    from .zoo import ZooSpec
    spec = ZooSpec(args.family_name, _params(args.param))
    k = spec.build()
    meta = {"spec": {"family": spec.family, "params": spec.params}, "n": k.n, "pi_diag": k.pi_diag,
            "pi_max": k.pi_max, "nu_total": k.nu_total, "reversible": k.reversible, "q_max": k.q_max,
            "group": k.group, "attempts": k.info.get("attempts"), "file": args.out}
    if args.out:
        save_kernel(k, args.out)
        with open(args.out + ".json", "w") as fh:
            fh.write(json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n")
    _emit(meta)
    return 0


def cmd_analyze(args):
    from . import analysis, meeting
    k = _kernel(args)
    res = {"n": k.n, "pi_diag": k.pi_diag, "reversible": k.reversible}
    if args.gap:
        res["gap"] = analysis.spectral_gap(k)
    if args.tmix:
        res["t_mix"] = analysis.mixing_time(k)
    if args.bottleneck:
        strat = analysis.auto_bottleneck_strategy(k) if args.bottleneck == "auto" else args.bottleneck
        phi, witness = analysis.bottleneck_optimum(k, strat)
        res["bottleneck"] = {"strategy": strat, "phi_star": phi, "witness": list(witness)}
    if args.report:
        res["conditions"] = analysis.condition_report(k, meeting.meeting_moments(k).t_meet).to_dict()
    _emit(res, args.out, "analysis.json")
    return 0


def cmd_exact(args):
    from . import meeting
    k = _kernel(args)
    res = {"n": k.n}
    sol = None
    if args.moments or args.identities:
        sol = meeting.meeting_moments(k)
        res["moments"] = {"route": sol.route, "t_meet": sol.t_meet, "mvv_mean": sol.mvv_mean,
                          "mvv_second": sol.mvv_second}
    if args.identities:
        ic = meeting.identity_check(k, sol)
        res["identities"] = vars(ic) | {"max_residual": ic.max_residual}
    if args.tails:
        grid = parse_grid(args.tails)
        uu, vv = meeting.meeting_tails(k, grid)
        res["tails"] = {"points": len(grid), "uu_at_end": uu[-1], "vv_at_end": vv[-1]}
        if grid[0] == 0.0 and len(grid) >= 3:
            res["tails"]["muv_residual"] = meeting.muv_consistency(k, grid).max_residual
        if args.out:
            _write_csv(args.out, "tails.csv", ["t", "P(M_UU'>t)", "P(M_VV'>t)"], zip(grid, uu, vv))
    if args.prop61:
        s, t = args.prop61
        b = meeting.prop61_bound_check(k, s, t)
        res["prop61"] = {"s": s, "t": t, "configs": len(b.configs), "rhs_tv": b.rhs_tv, "rhs_gap": b.rhs_gap,
                         "min_margin_tv": b.min_margin_tv, "min_margin_gap": b.min_margin_gap, "ok": b.ok}
    _emit(res, args.out, "exact.json")
    if args.prop61 and not res["prop61"]["ok"]:
        return 1
    return 0


def cmd_simulate(args):
    from . import coalescent, stats, voter
    from .experiment import resolve_gamma
    k = _kernel(args)
    par = args.parallel
    if args.what == "voter":
        gamma, gse = resolve_gamma(k, args.gamma, master_seed=args.seed, parallelism=par)
        grid = parse_grid(args.grid) if args.grid else np.linspace(0, args.T, 11)
        s = voter.ensemble(k, args.u, gamma, args.T, args.replicas, args.seed, grid, parallelism=par,
                           mode=args.mode)
        res = {"gamma": gamma, "gamma_se": gse, "replicas": s.replicas, "grid": s.grid,
               "mean_p1": s.mean_p1, "se_p1": s.se("p1"), "mean_p1p0": s.mean_p1p0, "se_p1p0": s.se("p1p0"),
               "mean_abs_residual": float(np.mean(np.abs(s.residuals))),
               "absorbed_one": s.absorbed_one, "absorbed_zero": s.absorbed_zero,
               "tau1_mean": float(s.tau1.mean()) if s.tau1.size else None}
        if args.out:
            _write_csv(args.out, "voter_summary.csv", ["s", "mean_p1", "var_p1", "mean_p1p0", "var_p1p0"],
                       zip(s.grid, s.mean_p1, s.var_p1, s.mean_p1p0, s.var_p1p0))
            _write_csv(args.out, "voter_replicas.csv", ["replica"] + [f"p1@{t:g}" for t in s.grid],
                       ([i] + list(row) for i, row in enumerate(s.p1)))
        _emit(res, args.out, "voter.json")
        return 0
    if args.full:
        times = coalescent.full_ensemble(k, args.replicas, args.seed, args.stop_at_j, parallelism=par)
    else:
        if args.k is None:
            raise errors.ConfigError("simulate coalescent needs --k or --full")
        times = coalescent.partial_ensemble(k, args.k, args.replicas, args.seed, args.stop_at_j,
                                            parallelism=par)
    # column j holds the first time with j blocks; the starting column is identically 0
    cols = list(range(times.shape[1] - 2, args.stop_at_j - 1, -1))
    res = {"replicas": args.replicas, "stop_at_j": args.stop_at_j}
    res["means"] = {str(j): float(np.mean(times[:, j])) for j in cols}
    if args.replicas >= 2:
        res["se"] = {str(j): float(stats.mean_se(times[:, j])[1]) for j in cols}
    if args.out:
        _write_csv(args.out, "coalescence_times.csv", ["replica"] + [f"C_{j}" for j in cols],
                   ([i] + [row[j] for j in cols] for i, row in enumerate(times)))
    _emit(res, args.out, "coalescent.json")
    return 0


def cmd_wf(args):
    from . import wright_fisher as wf
    res = {}
    if args.moment:
        u, k, t = args.moment
        res["moment"] = {"u": u, "k": int(k), "t": t, "value": wf.wf_moment(u, int(k), t)}
    if args.mixture:
        d, t = args.mixture
        res["mixture"] = {"delta": d, "t": t, "cdf": wf.mixture_cdf(d, t)}
    if args.simulate:
        u, T, dt, reps, seed = args.simulate
        times, paths = wf.wf_simulate(u, T, dt, np.random.default_rng(int(seed)), int(reps))
        y = paths[:, -1]
        res["simulate"] = {"u": u, "T": T, "dt": dt, "replicas": int(reps), "mean": float(y.mean()),
                           "mean_y1my": float(np.mean(y * (1 - y)))}
    if not res:
        raise errors.ConfigError("wf needs --moment, --mixture or --simulate")
    _emit(res)
    return 0


def cmd_verify(args):
    from . import battery
    only = args.only.split(",") if args.only else None
    results = battery.run_all(args.seed, args.parallel, only)
    for r in results:
        print(r.line())
    if args.out:
        _emit({r.number: {"passed": r.passed, "summary": r.summary, "stats": r.stats} for r in results},
              args.out, "verify.json")
    return 0 if all(r.passed for r in results) else 1


def cmd_report(args):
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.parallel is not None:
        cfg.parallelism = args.parallel
    if args.replicas is not None:
        cfg.replicas = args.replicas
    if args.out is not None:
        cfg.output = args.out
    ExperimentConfig.__post_init__(cfg)
    rep = run_experiment(cfg)
    for v in rep.verdicts:
        print(f"{'PASS' if v.passed else 'FAIL'} {v.test} {v.instance}: {v.statistic:.6g} (threshold {v.threshold:.6g})")
    return rep.exit_code


def _kernel_args(p):
    p.add_argument("--kernel", help="kernel file")
    p.add_argument("--family", help="zoo family instead of a file")
    p.add_argument("--param", action="append", help="family parameter key=value (repeatable)")


def build_parser():
    par_default = default_parallelism()
    ap = argparse.ArgumentParser(prog="voterwf", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("graph", help="build a zoo kernel and write it to a kernel file")
    p.add_argument("family_name")
    p.add_argument("--param", action="append")
    p.add_argument("--out")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("analyze", help="gap, mixing time, bottleneck ratio, condition report")
    _kernel_args(p)
    p.add_argument("--gap", action="store_true")
    p.add_argument("--tmix", action="store_true")
    p.add_argument("--bottleneck", nargs="?", const="auto", choices=["auto", "exhaustive", "intervals_1d"])
    p.add_argument("--report", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("exact", help="exact meeting moments, tails, identities and bound checks")
    _kernel_args(p)
    p.add_argument("--moments", action="store_true")
    p.add_argument("--tails", metavar="GRID", help="a:b:step or comma list")
    p.add_argument("--identities", action="store_true")
    p.add_argument("--prop61", nargs=2, type=float, metavar=("S", "T"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("simulate", help="voter or coalescent ensembles")
    p.add_argument("what", choices=["voter", "coalescent"])
    _kernel_args(p)
    p.add_argument("--u", type=float, default=0.5)
    p.add_argument("--gamma", default="tmeet")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--grid")
    p.add_argument("--mode", default="auto", choices=["auto", "plain", "discordant"])
    p.add_argument("--k", type=int)
    p.add_argument("--full", action="store_true")
    p.add_argument("--stop-at-j", type=int, default=1)
    p.add_argument("--replicas", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--parallel", type=int, default=par_default)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("wf", help="Wright-Fisher moments, mixture law, SDE paths")
    p.add_argument("--moment", nargs=3, type=float, metavar=("U", "K", "T"))
    p.add_argument("--mixture", nargs=2, type=float, metavar=("DELTA", "T"))
    p.add_argument("--simulate", nargs=5, type=float, metavar=("U", "T", "DT", "REPLICAS", "SEED"))
    p.set_defaults(func=cmd_wf)

    p = sub.add_parser("verify", help="run the acceptance battery")
    p.add_argument("--only", help="comma-separated criterion numbers, e.g. 1,3,13b")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--parallel", type=int, default=par_default)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="run an experiment config and write report.json + tables/")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--parallel", type=int)
    p.add_argument("--replicas", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.cmd == "verify" and args.seed is None:
        from .battery import MASTER_SEED
        args.seed = MASTER_SEED
    try:
        return args.func(args)
    except (errors.VoterWFError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


__all__ = ["main", "build_parser", "parse_grid", "PARALLEL_ENV"]
