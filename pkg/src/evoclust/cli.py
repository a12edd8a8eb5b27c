"""Command-line entry point.

Exit codes: 0 success / acceptance passed, 1 acceptance failed, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import fairness, harness, objectives, oracles
from .geometry import InputError, build_table, load_instance
from .gsemo import BudgetOnly, FirstHit, LocalOptimum, RunConfig, run, trace_to_jsonl

FORMULATIONS = {"ktmm": "ktmm", "kcenter": "kcenter", "kmedian": "kmedian", "kmeans": "kmeans",
                "fair": "fair_kmedian", "fair_kmedian": "fair_kmedian"}


def _add_common(p: argparse.ArgumentParser, formulation: bool = True):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--instance", help="JSON or CSV instance file")
    src.add_argument("--generator", help="uniform_square:N | gaussian_blobs:N:C:SPREAD | line:N")
    if formulation:
        p.add_argument("--formulation", choices=sorted(FORMULATIONS), default="ktmm")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _dataset(args, formulation: str):
    kind = "squared_euclidean" if formulation == "kmeans" else "euclidean"
    if args.instance:
        ds = load_instance(args.instance)
        if formulation == "kmeans" and ds.distance_kind != "squared_euclidean":
            ds = harness.Dataset(ds.points, distance_kind="squared_euclidean")
        return ds
    return harness.generate_instance(args.generator or "line:4", args.seed, kind)


def _formulation(name: str, ds, args):
    if name == "kmeans":
        return objectives.kmeans(ds, args.k, objectives.build_candidate_set(ds, "data_points", args.epsilon))
    if name == "fair_kmedian":
        return objectives.fair_kmedian(build_table(ds), args.k, args.beta)
    return getattr(objectives, name)(build_table(ds), args.k)


def cmd_run(args) -> int:
    name = FORMULATIONS[args.formulation]
    ds = _dataset(args, name)
    form = _formulation(name, ds, args)
    budget = args.budget or harness.default_budget(name, ds.n, args.k)
    if args.stop == "local_opt":
        rule = LocalOptimum(args.p, oracles.local_opt_delta(name, args.k, args.p, args.epsilon))
    elif args.stop == "first_hit" and name == "ktmm":
        rule = FirstHit(None)
    else:
        rule = BudgetOnly()
    res = run(form, RunConfig(k=args.k, budget=budget, seed=args.seed, stop_rule=rule))
    out = None if res.output is None else [int(i) for i in np.flatnonzero(res.output)]
    summary = {
        "formulation": name, "n": ds.n, "k": args.k, "iterations": res.iterations,
        "population": [[int(i) for i in np.flatnonzero(x)] for x, _ in res.population],
        "output": out, "events": len(res.trace), "stopped_early": res.stopped_early,
        "cost": None if res.output is None else objectives.original_cost(form, res.output),
    }
    if name == "ktmm" and res.output is not None:
        summary["kcenter_cost"] = objectives.original_cost(form, res.output, "kcenter")
    if name == "fair_kmedian" and res.output is not None:
        summary["violations"] = objectives.violations(form, res.output)
        summary["fairness_factor"] = fairness.fairness_factor(res.output, form.table, form.radii)
    print(json.dumps(summary, indent=1))
    if args.out:
        Path(args.out).write_text(trace_to_jsonl(res.trace))
    return 0 if res.output is not None else 1


def cmd_verify(args) -> int:
    v = harness.verify(args.theorem, seed=args.seed, trials=args.trials, timing=args.timing,
                       workers=args.workers)
    for line in v.lines():
        print(line)
    if args.theorem in ("t3", "t4", "t5"):
        print(harness.soft_bound_line(v))
    if args.out:
        harness.export(v.records, args.out, args.format)
    return 0 if v.passed else 1


def cmd_sweep(args) -> int:
    name = FORMULATIONS[args.formulation]
    base = args.generator or "uniform_square:8"
    gen = harness.parse_generator(base)
    rows = []
    for n in args.n:
        for k in args.k_values:
            if k >= n:
                continue
            spec = ":".join(str(v) for v in (gen[0], n, *gen[2:]))
            cfg = harness.ExperimentConfig(
                name, k, generator=spec, p=args.p, eps=args.epsilon, beta=args.beta, trials=args.trials,
                seed=args.seed, budget=args.budget, stop=args.stop, timing=False, workers=args.workers,
            )
            _, s = harness.run_trials(cfg)
            rows.append([n, k, s["trials"], s["hits"], s["mean_first_hit"], s["max_first_hit"],
                         s["max_ratio"], s["iteration_bound"]])
    header = ["n", "k", "trials", "hits", "mean_first_hit", "max_first_hit", "max_ratio", "iteration_bound"]
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([harness._fmt(v) for v in r])
    if args.out:
        fh.close()
    return 0


def cmd_oracle(args) -> int:
    name = FORMULATIONS[args.formulation]
    ds = _dataset(args, name)
    form = _formulation(name, ds, args)
    if name == "ktmm":
        res = oracles.exact_partition_opt(form.table, args.k, "ktmm")
        witness = res.witness.assignment.tolist()
    elif name == "fair_kmedian":
        res = oracles.exact_fair_opt(form)
        witness = None if res.witness is None else np.flatnonzero(res.witness).tolist()
    else:
        res = oracles.exact_subset_opt(form)
        witness = np.flatnonzero(res.witness).tolist()
    print(json.dumps({"formulation": name, "optimum": res.value if res.feasible else None,
                      "feasible": res.feasible, "witness": witness, "evaluated": res.evaluated}))
    return 0


def _read_centers(path: str) -> list[int]:
    text = Path(path).read_text().strip()
    if text.startswith("["):
        return [int(i) for i in json.loads(text)]
    return [int(tok) for tok in text.replace(",", " ").split()]


def cmd_fairness_audit(args) -> int:
    ds = _dataset(args, "fair_kmedian")
    t = build_table(ds)
    radii = fairness.fair_radius_all(t, args.k)
    balls = fairness.build_critical_balls(t, radii, args.beta, k=args.k)
    report = {"threshold": radii.threshold, "radii": radii.r.tolist(), "balls": json.loads(balls.to_json())}
    if args.centers:
        x = objectives.selection(ds.n, _read_centers(args.centers))
        report["centers"] = np.flatnonzero(x).tolist()
        report["violations"] = fairness.violation_count(x, balls, t)
        report["fairness_factor"] = fairness.fairness_factor(x, t, radii)
        report["beta_fair"] = fairness.is_fair(x, t, radii, args.beta)
    text = json.dumps(report, indent=1)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="evoclust", description="GSEMO for clustering with exact oracles")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single GSEMO run")
    _add_common(p)
    p.add_argument("--budget", type=int)
    p.add_argument("--stop", choices=("budget", "first_hit", "local_opt"), default="budget")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="canned acceptance experiment")
    p.add_argument("theorem", choices=("t1", "t2", "t3", "t4", "t5"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--timing", action="store_true", help="fill the wall_ms column (breaks byte-stable output)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="grid over n, k and seeds")
    _add_common(p)
    p.add_argument("--n", type=lambda s: [int(v) for v in s.split(",")], default=[8, 10])
    p.add_argument("--k-values", type=lambda s: [int(v) for v in s.split(",")], default=[2, 3])
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--budget", type=int)
    p.add_argument("--stop", choices=("budget", "first_hit", "local_opt"), default="budget")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="exact optimum and witness")
    _add_common(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("fairness-audit", help="fair radii, critical balls and fairness of a center set")
    _add_common(p, formulation=False)
    p.add_argument("--centers", help="file with center indices (JSON list or whitespace separated)")
    p.set_defaults(func=cmd_fairness_audit)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
