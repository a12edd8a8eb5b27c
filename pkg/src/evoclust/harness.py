"""Instance generation, multi-trial experiments, summaries and export."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fairness, objectives
from .geometry import Dataset, InputError, build_table, load_instance
from .gsemo import BudgetOnly, FirstHit, LocalOptimum, RunConfig, run
from .oracles import (
    BOUND_CONVENTION, OracleRefused, approximation_ratio, bound_params, exact_fair_opt,
    exact_partition_opt, exact_subset_opt, iteration_bound, local_opt_delta,
)

CSV_COLUMNS = ("trial", "seed", "first_hit", "cost", "opt", "ratio", "fairness_factor", "wall_ms")
RATIO_RTOL = 1e-9


# -- instances ----------------------------------------------------------------

def parse_generator(text: str) -> tuple:
    """``uniform_square:12``, ``gaussian_blobs:12:3:0.05`` or ``line:4``."""
    name, *args = text.split(":")
    try:
        if name == "uniform_square" and len(args) == 1:
            return (name, int(args[0]))
        if name == "line" and len(args) == 1:
            return (name, int(args[0]))
        if name == "gaussian_blobs" and len(args) == 3:
            return (name, int(args[0]), int(args[1]), float(args[2]))
    except ValueError:
        pass
    raise InputError(f"bad generator spec {text!r}")


def generate_instance(spec, seed: int = 0, distance_kind: str = "euclidean") -> Dataset:
    if isinstance(spec, str):
        spec = parse_generator(spec)
    name, n = spec[0], spec[1]
    if n < 1:
        raise InputError("an instance needs at least one point")
    # keyed apart from the GSEMO stream, which is seeded with the bare seed
    rng = np.random.default_rng((seed, 1))
    if name == "uniform_square":
        pts = rng.random((n, 2))
    elif name == "gaussian_blobs":
        _, _, centers, spread = spec
        if centers < 1:
            raise InputError("need at least one blob")
        mu = rng.random((centers, 2))
        pts = mu[np.arange(n) % centers] + rng.normal(0.0, spread, size=(n, 2))
    elif name == "line":
        m = math.ceil(n / 2)
        pts = np.concatenate([np.arange(m), 5 * m + np.arange(n - m)]).astype(float)[:, None]
    else:
        raise InputError(f"unknown generator {name!r}")
    return Dataset(pts, distance_kind=distance_kind)


# -- experiments --------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    formulation: str
    k: int
    generator: str | None = None
    instance: str | None = None
    p: int = 1
    eps: float = 0.1
    beta: float | tuple[float, ...] = 1.0
    trials: int = 1
    seed: int = 0
    budget: int | None = None
    stop: str = "budget"
    measure: str | None = None
    candidates: str = "data_points"
    resolution: float | None = None
    timing: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise InputError("trials must be at least 1")
        if (self.generator is None) == (self.instance is None):
            raise InputError("give exactly one of generator or instance")
        if self.formulation not in objectives.KINDS:
            raise InputError(f"unknown formulation {self.formulation!r}")
        if self.stop not in ("budget", "first_hit", "local_opt"):
            raise InputError(f"unknown stop policy {self.stop!r}")


@dataclass
class TrialRecord:
    trial: int
    seed: int
    first_hit: int | None
    cost: float | None
    opt: float | None
    ratio: float | None
    fairness_factor: float | None = None
    wall_ms: float | None = None
    iterations: int = 0
    output: list[int] | None = None
    violations: int | None = None
    beta: float | None = None
    bound: float | None = None
    oracle_refused: bool = False


def default_budget(kind: str, n: int, k: int) -> int:
    if kind in ("ktmm", "kcenter"):
        return 10 * math.ceil(math.e * k * k * n)
    return 1_000_000


def _dataset(cfg: ExperimentConfig, seed: int) -> Dataset:
    kind = "squared_euclidean" if cfg.formulation == "kmeans" else "euclidean"
    if cfg.instance is not None:
        ds = load_instance(cfg.instance)
        if cfg.formulation == "kmeans" and ds.distance_kind != "squared_euclidean":
            ds = Dataset(ds.points, distance_kind="squared_euclidean")
        return ds
    return generate_instance(cfg.generator, seed, kind)


def _formulation(cfg: ExperimentConfig, ds: Dataset):
    """Build the formulation; for fair runs also pick beta and solve the fair oracle."""
    kind, k = cfg.formulation, cfg.k
    if kind == "kmeans":
        cand = objectives.build_candidate_set(ds, cfg.candidates, cfg.eps, cfg.resolution)
        return objectives.kmeans(ds, k, cand), None
    t = build_table(ds)
    if kind != "fair_kmedian":
        return getattr(objectives, kind)(t, k), None
    betas = cfg.beta if isinstance(cfg.beta, tuple) else (cfg.beta,)
    form, exact = None, None
    for b in sorted(betas):
        form = objectives.fair_kmedian(t, k, b)
        try:
            exact = exact_fair_opt(form)
        except OracleRefused:
            return form, None
        if exact.feasible:
            break
    return form, exact


def _oracle(form, measure: str, fair_exact):
    if form.kind == "fair_kmedian":
        return fair_exact.value if fair_exact is not None and fair_exact.feasible else None
    if measure == "ktmm":
        return exact_partition_opt(form.table, form.k, "ktmm").value
    return exact_subset_opt(form, measure).value


def _ratio(cost: float | None, opt: float | None) -> float | None:
    if cost is None or opt is None:
        return None
    if opt == 0:
        return 1.0 if cost == 0 else math.inf
    return cost / opt


def _stop_rule(cfg: ExperimentConfig, kind: str, measure: str, opt: float | None, alpha: float):
    if cfg.stop == "budget":
        return BudgetOnly()
    if cfg.stop == "first_hit":
        if kind == "ktmm" and measure == "ktmm":
            return FirstHit(None)
        if opt is None:
            raise InputError("first_hit needs an oracle optimum")
        return FirstHit(alpha * opt * (1 + RATIO_RTOL), measure)
    return LocalOptimum(cfg.p, local_opt_delta(kind, cfg.k, cfg.p, cfg.eps))


def run_trial(cfg: ExperimentConfig, index: int) -> TrialRecord:
    seed = cfg.seed + index
    start = time.perf_counter()
    ds = _dataset(cfg, seed)
    form, fair_exact = _formulation(cfg, ds)
    kind, k = form.kind, cfg.k
    measure = cfg.measure or kind
    if kind == "fair_kmedian":
        measure = "fair_kmedian"
    alpha = approximation_ratio("kcenter" if measure == "kcenter" else kind, cfg.p, cfg.eps)

    refused = False
    try:
        opt = _oracle(form, measure, fair_exact)
    except OracleRefused:
        opt, refused = None, True
    if kind == "fair_kmedian" and fair_exact is None:
        refused = True

    budget = cfg.budget or default_budget(kind, ds.n, k)
    rule = _stop_rule(cfg, kind, measure, opt, alpha)
    res = run(form, RunConfig(k=k, budget=budget, seed=seed, stop_rule=rule))

    if kind == "ktmm":
        first_hit = res.hit_iteration(lambda r: r["j_max"] >= k)
    elif isinstance(rule, FirstHit):
        first_hit = res.first_hit_iteration
    elif opt is not None:
        limit = alpha * opt * (1 + RATIO_RTOL)
        first_hit = res.hit_iteration(
            lambda r: r["best_f1"] is not None and r.get("j_vio", 0) == 0 and -r["best_f1"] <= limit
        )
    else:
        first_hit = None

    cost = ff = viol = None
    if res.output is not None:
        cost = objectives.original_cost(form, res.output, measure)
        if kind == "fair_kmedian":
            ff = fairness.fairness_factor(res.output, form.table, form.radii)
            viol = objectives.violations(form, res.output)

    try:
        bound = iteration_bound(bound_params(form, cfg.p, cfg.eps))
    except (InputError, ValueError, ZeroDivisionError):
        bound = None

    wall = (time.perf_counter() - start) * 1000 if cfg.timing else None
    return TrialRecord(
        trial=index, seed=seed, first_hit=first_hit, cost=cost, opt=opt, ratio=_ratio(cost, opt),
        fairness_factor=ff, wall_ms=wall, iterations=res.iterations,
        output=None if res.output is None else [int(i) for i in np.flatnonzero(res.output)],
        violations=viol, beta=form.beta, bound=bound, oracle_refused=refused,
    )


def _trial_job(args):
    return run_trial(*args)


def summarize(records: list[TrialRecord], cfg: ExperimentConfig) -> dict:
    hits = [r.first_hit for r in records if r.first_hit is not None]
    ratios = [r.ratio for r in records if r.ratio is not None]
    bounds = [r.bound for r in records if r.bound is not None]
    return {
        "formulation": cfg.formulation,
        "trials": len(records),
        "hits": len(hits),
        "mean_first_hit": statistics.fmean(hits) if hits else None,
        "median_first_hit": statistics.median(hits) if hits else None,
        "max_first_hit": max(hits) if hits else None,
        "max_ratio": max(ratios) if ratios else None,
        "no_output": sum(r.cost is None for r in records),
        "oracle_refused": sum(r.oracle_refused for r in records),
        "iteration_bound": max(bounds) if bounds else None,
        "bound_convention": BOUND_CONVENTION,
    }


def run_trials(cfg: ExperimentConfig) -> tuple[list[TrialRecord], dict]:
    jobs = [(cfg, i) for i in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(_trial_job, jobs))
    else:
        records = [run_trial(*job) for job in jobs]
    records.sort(key=lambda r: r.trial)
    return records, summarize(records, cfg)


# -- export -------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def records_to_csv(records: list[TrialRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def records_to_json(records: list[TrialRecord]) -> str:
    rows = [{key: _jsonable(val) for key, val in dataclasses.asdict(r).items()} for r in records]
    return json.dumps(rows, indent=1) + "\n"


def records_from_json(text: str) -> list[TrialRecord]:
    out = []
    for row in json.loads(text):
        row = {key: (float(val) if val in ("inf", "-inf") else val) for key, val in row.items()}
        out.append(TrialRecord(**row))
    return out


def export(records: list[TrialRecord], path: str | Path, fmt: str = "csv") -> Path:
    if not records:
        raise InputError("nothing to export")
    if fmt == "csv":
        text = records_to_csv(records)
    elif fmt == "json":
        text = records_to_json(records)
    else:
        raise InputError(f"unknown export format {fmt!r}")
    path = Path(path)
    path.write_text(text)
    return path


# -- canned verifications -----------------------------------------------------

@dataclass
class Verdict:
    theorem: str
    records: list[TrialRecord]
    summary: dict
    checks: list[tuple[str, bool, str]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def lines(self) -> list[str]:
        return [f"{'PASS' if ok else 'FAIL'}  {name}: {detail}" for name, ok, detail in self.checks]


def verification_config(theorem: str, seed: int = 0, trials: int | None = None, timing: bool = False,
                        workers: int = 1) -> ExperimentConfig:
    common = dict(seed=seed, timing=timing, workers=workers)
    if theorem in ("t1", "t2"):
        return ExperimentConfig("ktmm", 3, generator="uniform_square:12", trials=trials or 100,
                                budget=10 * math.ceil(math.e * 9 * 12), stop="budget",
                                measure="ktmm" if theorem == "t1" else "kcenter", **common)
    if theorem == "t3":
        return ExperimentConfig("kmedian", 3, generator="uniform_square:12", p=1, eps=0.1,
                                trials=trials or 50, budget=1_000_000, stop="local_opt", **common)
    if theorem == "t4":
        return ExperimentConfig("kmeans", 3, generator="gaussian_blobs:12:3:0.05", p=1, eps=0.1,
                                candidates="data_points", trials=trials or 50, budget=1_000_000,
                                stop="local_opt", **common)
    if theorem == "t5":
        return ExperimentConfig("fair_kmedian", 3, generator="uniform_square:12", p=4,
                                beta=(1.0, 1.5, 2.0), trials=trials or 30, budget=1_000_000,
                                stop="local_opt", **common)
    raise InputError(f"unknown theorem {theorem!r}")


def _within(ratio: float | None, alpha: float) -> bool:
    return ratio is not None and ratio <= alpha * (1 + RATIO_RTOL)


def verify(theorem: str, seed: int = 0, trials: int | None = None, timing: bool = False,
           workers: int = 1) -> Verdict:
    cfg = verification_config(theorem, seed, trials, timing, workers)
    records, summary = run_trials(cfg)
    v = Verdict(theorem, records, summary)
    worst = summary["max_ratio"]
    if theorem in ("t1", "t2"):
        alpha = 2.0
        eq = "partition (k-tMM)" if theorem == "t1" else "k-center"
        v.checks.append((f"{eq} ratio <= 2", all(_within(r.ratio, alpha) for r in records),
                         f"max ratio {worst}"))
        if theorem == "t1":
            n, k = 12, 3
            bound = math.e * (k * k * n - k * (n - 1))
            hits = [r.first_hit for r in records]
            ok = None not in hits and statistics.fmean(hits) <= bound
            mean = statistics.fmean(h for h in hits if h is not None) if any(h is not None for h in hits) else None
            v.checks.append(("mean first-hit of J_max = k <= e(k^2 n - k(n-1))", ok,
                             f"mean {mean} vs bound {bound:.2f}; misses {hits.count(None)}"))
        return v

    alpha = approximation_ratio(cfg.formulation, cfg.p, cfg.eps)
    v.checks.append((f"every output cost <= {alpha:.4g} x OPT", all(_within(r.ratio, alpha) for r in records),
                     f"max ratio {worst}"))
    if theorem == "t5":
        v.checks.append(("every output covers all critical balls", all(r.violations == 0 for r in records),
                         f"max violations {max((r.violations or 0) for r in records)}"))
        v.checks.append(("every output is 7*beta fair",
                         all(r.fairness_factor is not None and r.fairness_factor <= 7 * r.beta for r in records),
                         f"max factor/beta {max((r.fairness_factor or 0) / r.beta for r in records):.4g}"))
    return v


def soft_bound_line(v: Verdict) -> str:
    """Non-gating comparison of mean first-hit time against the unit-constant bound."""
    s = v.summary
    mean, bound = s["mean_first_hit"], s["iteration_bound"]
    if mean is None or bound is None:
        return "INFO  iteration bound: no data"
    mag = math.log10(bound / max(mean, 1.0))
    return f"INFO  mean first-hit {mean:.1f} vs bound {bound:.3g} ({mag:+.1f} orders of magnitude headroom)"
