"""Exact solvers, classical baselines and closed-form iteration bounds."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .geometry import Dataset, DistanceTable, InputError, build_table, require_metric
from .objectives import Formulation, Partition, eval_ktmm_partition_cost, original_cost

SUBSET_CAP = 2_000_000
PARTITION_CAP_N = 13


class OracleRefused(InputError):
    """The instance is too large for exhaustive enumeration."""


@dataclass(frozen=True)
class ExactResult:
    value: float
    witness: np.ndarray | Partition | None
    evaluated: int
    feasible: bool = True


def _subset_measure(form: Formulation, measure: str | None) -> str:
    if measure is not None:
        return measure
    # GSEMO's k-tMM representation searches exactly the k-center solution space
    return "kcenter" if form.kind == "ktmm" else form.kind


def _combo_chunks(g: int, k: int, rows: int):
    it = itertools.combinations(range(g), k)
    while True:
        block = list(itertools.islice(it, rows))
        if not block:
            return
        yield np.array(block, dtype=np.intp)


def _batch_near(cost: np.ndarray, combos: np.ndarray) -> np.ndarray:
    # (n, m) nearest distance of every client under every subset
    return cost[:, combos].min(axis=2)


def exact_subset_opt(form: Formulation, measure: str | None = None, cap: int = SUBSET_CAP) -> ExactResult:
    """Enumerate every size-k selection and return the cheapest.

    ``measure`` picks the objective: ``kcenter`` (max nearest distance) or a
    sum-of-nearest-distances problem (``kmedian``, ``kmeans``,
    ``fair_kmedian`` without its constraint). A k-tMM formulation defaults
    to the k-center objective.
    """
    g, k = form.ground_size, form.k
    total = math.comb(g, k)
    if total > cap:
        raise OracleRefused(f"C({g},{k}) = {total} subsets exceeds the cap of {cap}")
    measure = _subset_measure(form, measure)
    if measure == "ktmm":
        raise InputError("the k-tMM optimum ranges over partitions; use exact_partition_opt")
    rows = max(1, 400_000 // max(1, form.n * k))
    best, best_combo = math.inf, None
    for combos in _combo_chunks(g, k, rows):
        near = _batch_near(form.cost, combos)
        vals = near.max(axis=0) if measure == "kcenter" else near.sum(axis=0)
        i = int(np.argmin(vals))
        if vals[i] < best:
            best, best_combo = float(vals[i]), combos[i]
    witness = form.selection(best_combo)
    check = original_cost(form, witness, measure)
    assert math.isclose(check, best, rel_tol=1e-12, abs_tol=1e-12), (check, best)
    return ExactResult(best, witness, total)


def exact_fair_opt(form: Formulation, cap: int = SUBSET_CAP) -> ExactResult:
    """Cheapest size-k selection satisfying d(v_i, X) <= beta * r_i for all i."""
    if form.kind != "fair_kmedian":
        raise InputError("exact_fair_opt needs a fair_kmedian formulation")
    g, k = form.ground_size, form.k
    total = math.comb(g, k)
    if total > cap:
        raise OracleRefused(f"C({g},{k}) = {total} subsets exceeds the cap of {cap}")
    limit = (form.beta * form.radii.r)[:, None]
    rows = max(1, 400_000 // max(1, form.n * k))
    best, best_combo = math.inf, None
    for combos in _combo_chunks(g, k, rows):
        near = _batch_near(form.cost, combos)
        ok = np.all(near <= limit, axis=0)
        if not ok.any():
            continue
        vals = np.where(ok, near.sum(axis=0), np.inf)
        i = int(np.argmin(vals))
        if vals[i] < best:
            best, best_combo = float(vals[i]), combos[i]
    if best_combo is None:
        return ExactResult(math.inf, None, total, feasible=False)
    witness = form.selection(best_combo)
    assert math.isclose(original_cost(form, witness), best, rel_tol=1e-12, abs_tol=1e-12)
    return ExactResult(best, witness, total)


def _rgs_blocks(n: int, k: int, limit: int = 50_000):
    """Yield arrays of restricted growth strings of length n using at most k labels."""

    def expand(prefix: np.ndarray):
        if prefix.shape[1] == n:
            yield prefix
            return
        top = prefix.max(axis=1)
        parts = []
        for lab in range(k):
            rows = prefix[top + 1 >= lab]
            if len(rows):
                parts.append(np.hstack([rows, np.full((len(rows), 1), lab, dtype=np.int8)]))
        nxt = np.vstack(parts)
        if len(nxt) > limit:
            for chunk in np.array_split(nxt, math.ceil(len(nxt) / limit)):
                yield from expand(chunk)
        else:
            yield from expand(nxt)

    yield from expand(np.zeros((1, 1), dtype=np.int8))


def _ktmm_costs(labels: np.ndarray, d: np.ndarray) -> np.ndarray:
    same = labels[:, :, None] == labels[:, None, :]
    return np.where(same, d[None, :, :], 0.0).max(axis=(1, 2))


def _centroid_costs(labels: np.ndarray, pts: np.ndarray, k: int) -> np.ndarray:
    onehot = (labels[:, :, None] == np.arange(k)[None, None, :]).astype(float)
    counts = onehot.sum(axis=1)
    sums = np.einsum("mnk,nl->mkl", onehot, pts)
    sq = float(np.sum(pts * pts))
    with np.errstate(invalid="ignore", divide="ignore"):
        per_block = np.where(counts > 0, np.einsum("mkl,mkl->mk", sums, sums) / counts, 0.0)
    return np.maximum(sq - per_block.sum(axis=1), 0.0)


def exact_partition_opt(src: Dataset | DistanceTable, k: int, objective: str = "ktmm",
                        cap_n: int = PARTITION_CAP_N) -> ExactResult:
    """Enumerate all partitions of D into at most k non-empty blocks.

    ``ktmm`` scores the largest intra-block distance; ``kmeans_centroid``
    scores the within-block sum of squared deviations from the centroid,
    i.e. k-means with unrestricted centers.
    """
    if objective not in ("ktmm", "kmeans_centroid"):
        raise InputError(f"unknown partition objective {objective!r}")
    n = src.n_data if isinstance(src, DistanceTable) else src.n
    if n > cap_n:
        raise OracleRefused(f"n = {n} exceeds the partition enumeration cap of {cap_n}")
    if k < 1:
        raise InputError("k must be positive")
    if objective == "ktmm":
        t = src if isinstance(src, DistanceTable) else build_table(src)
        require_metric(t)
        d = t.data
        score = lambda lab: _ktmm_costs(lab, d)
    else:
        if not isinstance(src, Dataset) or src.dimension == 0:
            raise InputError("centroid costs need point coordinates")
        pts = src.points
        score = lambda lab: _centroid_costs(lab, pts, k)

    best, best_lab, count = math.inf, None, 0
    for labels in _rgs_blocks(n, k, limit=max(1000, 2_000_000 // (n * n))):
        vals = score(labels)
        count += len(labels)
        i = int(np.argmin(vals))
        if vals[i] < best:
            best, best_lab = float(vals[i]), labels[i].astype(int)
    witness = Partition(best_lab)
    if objective == "ktmm":
        assert eval_ktmm_partition_cost(witness, d) == best
    return ExactResult(best, witness, count)


def gonzalez(t, k: int, start: int = 0) -> np.ndarray:
    """Farthest-first traversal from ``start``; ties go to the lowest index."""
    d = t.data if isinstance(t, DistanceTable) else np.asarray(t, dtype=float)
    n = d.shape[0]
    if not 1 <= k <= n:
        raise InputError(f"k must lie in [1, {n}]")
    x = np.zeros(n, dtype=bool)
    x[start] = True
    near = d[start].copy()
    for _ in range(k - 1):
        far = int(np.argmax(np.where(x, -np.inf, near)))
        x[far] = True
        near = np.minimum(near, d[far])
    return x


def _swap_cost(form: Formulation, idx) -> float:
    near = form.cost[:, idx].min(axis=1)
    if form.kind in ("kcenter", "ktmm"):
        return float(near.max())
    return float(near.sum())


def _feasible(form: Formulation, idx) -> bool:
    if form.kind != "fair_kmedian":
        return True
    return bool(form.ball_members[:, idx].any(axis=1).all())


def swap_neighbors(x, p: int):
    """Yield (out, in) index tuples: equal-size swaps of 1..p points.

    Order: swap size ascending, then lexicographic by out-set, then in-set.
    """
    x = np.asarray(x, dtype=bool)
    inside = [int(i) for i in np.flatnonzero(x)]
    outside = [int(i) for i in np.flatnonzero(~x)]
    for s in range(1, min(p, len(inside), len(outside)) + 1):
        for out in itertools.combinations(inside, s):
            for inn in itertools.combinations(outside, s):
                yield out, inn


def find_improving_swap(form: Formulation, x, p: int, delta: float):
    """First p-swap whose cost is at most (1 - delta) times the current cost.

    The fair formulation only admits swaps that keep every critical ball
    covered. Returns the new selection or None when ``x`` is a
    (1 - delta)-approximate local optimum.
    """
    x = np.asarray(x, dtype=bool)
    cur = _swap_cost(form, np.flatnonzero(x))
    if cur <= 0:
        return None
    target = (1 - delta) * cur
    for out, inn in swap_neighbors(x, p):
        y = x.copy()
        y[list(out)] = False
        y[list(inn)] = True
        idx = np.flatnonzero(y)
        c = _swap_cost(form, idx)
        if c <= target and c < cur and _feasible(form, idx):
            return y
    return None


class LocalSearchResult(NamedTuple):
    selection: np.ndarray
    cost: float
    swaps: int
    converged: bool


def local_search_pswap(form: Formulation, p: int, delta: float, start, max_rounds: int = 100_000) -> LocalSearchResult:
    """First-improvement multiswap local search down to a (1 - delta)-approximate local optimum."""
    x = np.asarray(start, dtype=bool).copy()
    if x.sum() != form.k:
        raise InputError(f"start must select exactly k={form.k} elements")
    if p < 1 or not 0 < delta < 1:
        raise InputError("need p >= 1 and 0 < delta < 1")
    if not _feasible(form, np.flatnonzero(x)):
        raise InputError("start selection leaves a critical ball uncovered")
    swaps = 0
    converged = False
    while swaps < max_rounds:
        y = find_improving_swap(form, x, p, delta)
        if y is None:
            converged = True
            break
        x = y
        swaps += 1
    return LocalSearchResult(x, _swap_cost(form, np.flatnonzero(x)), swaps, converged)


# -- iteration bounds ---------------------------------------------------------

@dataclass(frozen=True)
class BoundParams:
    kind: str
    n: int
    k: int
    ground: int
    p: int = 1
    eps: float = 0.1
    lam: int = 1
    sum_dmax: float = 0.0
    sum_dmax_top: float = 0.0
    sum_dmin: float = 0.0


def distance_stats(form: Formulation) -> tuple[float, float, float]:
    """(sum_i d_i^max, sum of the n-k largest d_i^max, sum of the n-k smallest d_i^min)."""
    cost = form.cost
    n, k = form.n, form.k
    dmax = cost.max(axis=1)
    masked = cost.copy()
    if form.kind == "kmeans":
        pts = form.dataset.points
        same = np.all(pts[:, None, :] == form.candidates[None, :, :], axis=2)
        masked[same] = np.inf
    elif form.table is not None and form.table.entries.shape[0] == form.table.n_data:
        np.fill_diagonal(masked, np.inf)
    dmin = masked.min(axis=1)
    dmin = np.where(np.isfinite(dmin), dmin, 0.0)
    top = float(np.sort(dmax)[k:].sum())
    return float(dmax.sum()), top, float(np.sort(dmin)[: n - k].sum())


def bound_params(form: Formulation, p: int = 1, eps: float = 0.1, lam: int = 1) -> BoundParams:
    smax, stop, smin = distance_stats(form)
    return BoundParams(form.kind, form.n, form.k, form.ground_size, p, eps, lam, smax, stop, smin)


def successful_step_iterations(pr_sel: float, pr_rep: float, lam: int = 1) -> float:
    """Expected iterations per improving step: 1 / (1 - (1 - Pr_sel*Pr_rep)^lambda)."""
    a = pr_sel * pr_rep
    return 1.0 / -math.expm1(lam * math.log1p(-a))


def local_search_iterations(pr_sel: float, pr_rep: float, lam: int, delta: float, f_init: float, opt: float) -> float:
    """Generic local-search simulation bound with unit constant: steps/iteration times (1/delta) ln(f_init/OPT)."""
    if opt <= 0:
        return math.inf
    return successful_step_iterations(pr_sel, pr_rep, lam) * math.log(f_init / opt) / delta


BOUND_CONVENTION = "closed form for ktmm/kcenter; other kinds use the pre-asymptotic expression with unit O() constants"


def iteration_bound(bp: BoundParams) -> float:
    e = math.e
    n, k, g, p, eps = bp.n, bp.k, bp.ground, bp.p, bp.eps
    if bp.kind in ("ktmm", "kcenter"):
        return e * k * k * n - e * k * (n - 1)
    if bp.kind in ("kmedian", "kmeans", "fair_kmedian") and bp.sum_dmin <= 0:
        warnings.warn("sum of the n-k smallest nearest-neighbour distances is 0 (duplicate points); bound is infinite")
        return math.inf
    if bp.kind in ("kmedian", "kmeans"):
        phase1 = e * k * g * math.log(g / (g - k))
        phase2 = e * k * g ** (2 * p) * (k / eps) * math.log(bp.sum_dmax / bp.sum_dmin)
        return phase1 + phase2
    if bp.kind == "fair_kmedian":
        phase1 = e * k * n * math.log(n / (n - k))
        phase2 = 2 * e * k * k * n
        phase3 = e * k * n ** 8 * k * math.log(bp.sum_dmax_top / bp.sum_dmin)
        return phase1 + phase2 + phase3
    raise InputError(f"no bound for {bp.kind!r}")


def approximation_ratio(kind: str, p: int = 1, eps: float = 0.1) -> float:
    """Guaranteed ratio for GSEMO output (k-means: against the candidate-set optimum)."""
    if kind in ("ktmm", "kcenter"):
        return 2.0
    if kind == "kmedian":
        return (3 + 2 / p) / (1 - eps)
    if kind == "kmeans":
        return (3 + 2 / p) ** 2 / (1 - eps) ** 2
    if kind == "fair_kmedian":
        return 84.0
    raise InputError(kind)


def local_opt_delta(kind: str, k: int, p: int = 1, eps: float = 0.1) -> float:
    """Improvement threshold delta at which a local optimum carries the ratio guarantee."""
    if kind == "kmedian":
        return eps / k
    if kind == "kmeans":
        return (1 + (1 - eps) / (3 + 2 / p)) * eps / k
    if kind == "fair_kmedian":
        return 1 / (8 * k)
    raise InputError(f"no local-search threshold for {kind!r}")
