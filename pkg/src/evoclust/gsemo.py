"""GSEMO: Pareto-archive evolutionary optimizer over bit strings.

The population starts at the all-0s string, offspring with more than k
1-bits are discarded, and the size-k member of the final population is the
output clustering.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import InputError
from .objectives import Formulation, ObjectiveVector, evaluate, original_cost, violations
from .oracles import find_improving_swap

Member = tuple  # (bits: np.ndarray, ObjectiveVector)


def weakly_dominates(a: ObjectiveVector, b: ObjectiveVector) -> bool:
    return a[0] >= b[0] and a[1] >= b[1]


def dominates(a: ObjectiveVector, b: ObjectiveVector) -> bool:
    return a[0] >= b[0] and a[1] >= b[1] and (a[0] > b[0] or a[1] > b[1])


def mutate(x: np.ndarray, rng) -> np.ndarray:
    """Flip every bit independently with probability 1/len(x)."""
    g = len(x)
    flips = rng.random(g) < 1.0 / g
    return np.logical_xor(x, flips)


def update_population(pop: list, x: np.ndarray, v: ObjectiveVector, k: int) -> list:
    """Insert ``x`` unless it is too large or strictly dominated.

    Members weakly dominated by ``v`` are dropped, so an equal objective
    vector replaces the incumbent. Returns ``pop`` itself when nothing
    changes, otherwise a new list.
    """
    if v[1] > k:
        return pop
    for _, z in pop:
        if dominates(z, v):
            return pop
    kept = [m for m in pop if not weakly_dominates(v, m[1])]
    kept.append((x, v))
    return kept


def select_output(pop: list, k: int) -> np.ndarray | None:
    for x, v in pop:
        if v[1] == k:
            return x
    return None


def j_max(pop: list) -> int:
    """Largest size among members with nonnegative f1 (k-tMM progress measure)."""
    return max((v[1] for _, v in pop if v[0] >= 0), default=-1)


@dataclass(frozen=True)
class BudgetOnly:
    pass


@dataclass(frozen=True)
class FirstHit:
    """Stop once the size-k member's original cost is at most ``threshold``.

    For the fair formulation the member must also cover every critical
    ball. With ``threshold=None`` on k-tMM the target is J_max = k instead.
    """

    threshold: float | None = None
    measure: str | None = None


@dataclass(frozen=True)
class LocalOptimum:
    """Stop once the size-k member admits no p-swap improving it by a factor (1 - delta)."""

    p: int
    delta: float


@dataclass(frozen=True)
class RunConfig:
    k: int
    budget: int
    seed: int = 0
    stop_rule: BudgetOnly | FirstHit | LocalOptimum = field(default_factory=BudgetOnly)
    trace: bool = True

    def __post_init__(self):
        if self.budget < 1:
            raise InputError("budget must be at least 1")
        if self.k < 1:
            raise InputError("k must be at least 1")


@dataclass
class RunResult:
    population: list
    output: np.ndarray | None
    iterations: int
    trace: list[dict]
    first_hit_iteration: int | None = None
    stopped_early: bool = False

    @property
    def has_output(self) -> bool:
        return self.output is not None

    def hit_iteration(self, predicate: Callable[[dict], bool]) -> int | None:
        """Iteration stamp of the first trace record satisfying ``predicate``."""
        for rec in self.trace:
            if predicate(rec):
                return rec["iteration"]
        return None


def _json_float(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def trace_to_jsonl(trace: list[dict]) -> str:
    lines = []
    for rec in trace:
        out = {key: (_json_float(val) if isinstance(val, float) else val) for key, val in rec.items()}
        lines.append(json.dumps(out, sort_keys=False))
    return "\n".join(lines) + ("\n" if lines else "")


def run(form: Formulation, cfg: RunConfig, rng=None,
        observer: Callable[[int, list], None] | None = None) -> RunResult:
    """Run GSEMO on ``form`` for at most ``cfg.budget`` iterations.

    ``observer(iteration, population)`` is called after every iteration,
    which lets callers audit the population invariants.
    """
    k = cfg.k
    if k != form.k:
        raise InputError(f"config k={k} differs from formulation k={form.k}")
    if k >= form.ground_size:
        raise InputError(f"k must be smaller than the ground set ({form.ground_size})")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    rule = cfg.stop_rule
    kind = form.kind
    fair = kind == "fair_kmedian"

    zero = form.empty()
    pop = [(zero, evaluate(form, zero))]
    trace: list[dict] = []
    jm = j_max(pop)

    def record(it: int, event: str, v: ObjectiveVector):
        rec = {"iteration": it, "event": event, "f1": float(v[0]), "f2": int(v[1])}
        if kind == "ktmm":
            rec["j_max"] = jm
        out = select_output(pop, k)
        if fair:
            rec["j_vio"] = None if out is None else violations(form, out)
        best = None
        for _, z in pop:
            if z[1] == k:
                best = float(z[0])
        rec["best_f1"] = best
        trace.append(rec)

    def hit() -> bool:
        if isinstance(rule, BudgetOnly):
            return False
        if isinstance(rule, FirstHit) and rule.threshold is None:
            return jm >= k
        out = select_output(pop, k)
        if out is None or (fair and violations(form, out) > 0):
            return False
        if isinstance(rule, FirstHit):
            return original_cost(form, out, rule.measure) <= rule.threshold
        return find_improving_swap(form, out, rule.p, rule.delta) is None

    if cfg.trace:
        record(0, "init", pop[0][1])

    first_hit = 0 if hit() else None
    it = 0
    while it < cfg.budget and first_hit is None:
        it += 1
        parent = pop[rng.integers(len(pop))][0]
        child = mutate(parent, rng)
        if child.sum() <= k:
            v = evaluate(form, child)
            new = update_population(pop, child, v, k)
            if new is not pop:
                before = select_output(pop, k)
                pop = new
                if kind == "ktmm":
                    jm = j_max(pop)
                if cfg.trace:
                    record(it, "insert", v)
                after = select_output(pop, k)
                # the stop predicates depend only on J_max or the size-k member
                if after is not before or (kind == "ktmm" and isinstance(rule, FirstHit)):
                    if hit():
                        first_hit = it
        if observer is not None:
            observer(it, pop)

    return RunResult(pop, select_output(pop, k), it, trace, first_hit, first_hit is not None)
