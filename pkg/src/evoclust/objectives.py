"""Bit-string selections and the bi-objective reformulations of each clustering problem.

A selection is a boolean numpy vector over a ground set: the data points for
k-tMM, k-center and fair k-median, the facilities for discrete k-median, and
the candidate centers for k-means. Objective vectors are maximized in both
coordinates: ``f1`` encodes clustering quality, ``f2`` is the selection size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import fairness
from .geometry import Dataset, DistanceTable, InputError, build_table, pairwise, require_metric

KINDS = ("ktmm", "kcenter", "kmedian", "kmeans", "fair_kmedian")


class EmptySelectionError(InputError):
    pass


class ObjectiveVector(NamedTuple):
    f1: float
    f2: int


@dataclass(frozen=True)
class Partition:
    """Cluster label per data point; ``centers[m]`` is the ground index of cluster m's center."""

    assignment: np.ndarray
    centers: tuple[int, ...] | None = None

    @property
    def n_clusters(self) -> int:
        if self.centers is not None:
            return len(self.centers)
        return int(self.assignment.max()) + 1 if len(self.assignment) else 0

    @property
    def clusters(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.assignment == m) for m in range(self.n_clusters)]


@dataclass(frozen=True, eq=False)
class Formulation:
    """One clustering problem ready for evaluation.

    ``cost`` is the (n, g) matrix of client-to-ground distances used by
    every nearest-center computation (squared Euclidean for k-means).
    Build instances with the module-level constructors rather than directly.
    """

    kind: str
    k: int
    cost: np.ndarray
    table: DistanceTable | None = None
    dataset: Dataset | None = None
    candidates: np.ndarray | None = None
    beta: float | None = None
    radii: fairness.FairRadii | None = None
    balls: fairness.CriticalBallSet | None = None
    penalty_weight: float = 0.0
    ball_members: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown formulation {self.kind!r}")
        if not 1 <= self.k <= self.ground_size:
            raise InputError(f"k must lie in [1, {self.ground_size}], got {self.k}")

    @property
    def ground_size(self) -> int:
        return self.cost.shape[1]

    @property
    def n(self) -> int:
        return self.cost.shape[0]

    def empty(self) -> np.ndarray:
        return np.zeros(self.ground_size, dtype=bool)

    def selection(self, indices) -> np.ndarray:
        return selection(self.ground_size, indices)


def selection(g: int, indices) -> np.ndarray:
    x = np.zeros(g, dtype=bool)
    x[list(indices)] = True
    return x


def _table(src) -> DistanceTable:
    return src if isinstance(src, DistanceTable) else build_table(src)


def ktmm(src, k: int) -> Formulation:
    t = _table(src)
    require_metric(t)
    return Formulation("ktmm", k, t.data, table=t)


def kcenter(src, k: int) -> Formulation:
    t = _table(src)
    require_metric(t)
    return Formulation("kcenter", k, t.data, table=t)


def kmedian(src, k: int) -> Formulation:
    t = _table(src)
    require_metric(t)
    return Formulation("kmedian", k, t.facilities, table=t)


def kmeans(ds: Dataset, k: int, candidates=None) -> Formulation:
    if ds.distance_kind != "squared_euclidean" or ds.dimension == 0:
        raise InputError("k-means needs coordinates with squared Euclidean distance")
    cand = ds.points if candidates is None else np.asarray(candidates, dtype=float)
    cost = pairwise("squared_euclidean", ds.points, cand)
    return Formulation("kmeans", k, cost, dataset=ds, candidates=cand)


def fair_kmedian(src, k: int, beta: float) -> Formulation:
    t = _table(src)
    require_metric(t)
    radii = fairness.fair_radius_all(t, k)
    balls = fairness.build_critical_balls(t, radii, beta, k=k)
    w = float(t.data.max(axis=1).sum())
    return Formulation(
        "fair_kmedian", k, t.data, table=t, beta=float(beta), radii=radii, balls=balls,
        penalty_weight=w, ball_members=fairness.ball_membership(t, balls),
    )


def _matrix(t) -> np.ndarray:
    return t.data if isinstance(t, DistanceTable) else np.asarray(t, dtype=float)


def _centers(x) -> np.ndarray:
    idx = np.flatnonzero(np.asarray(x, dtype=bool))
    if len(idx) == 0:
        raise EmptySelectionError("selection has no 1-bits")
    return idx


def assign_clusters(x, t) -> Partition:
    """Nearest-center assignment; ties go to the lowest-index center.

    ``t`` is a DistanceTable (its D x D block is used) or any (n, g)
    client-to-ground matrix.
    """
    idx = _centers(x)
    d = _matrix(t)
    # argmin returns the first minimum and idx is ascending
    labels = np.argmin(d[:, idx], axis=1)
    return Partition(labels, tuple(int(i) for i in idx))


def eval_ktmm_f1(x, t) -> float:
    """Minimum inter-center distance minus maximum point-to-own-center distance."""
    idx = np.flatnonzero(np.asarray(x, dtype=bool))
    if len(idx) <= 1:
        return math.inf
    d = _matrix(t)
    inter = d[np.ix_(idx, idx)][np.triu_indices(len(idx), 1)].min()
    intra = d[:, idx].min(axis=1).max()
    return float(inter - intra)


def eval_ktmm_partition_cost(p: Partition, t) -> float:
    """Largest distance between two points sharing a cluster."""
    d = _matrix(t)
    worst = 0.0
    for members in p.clusters:
        if len(members) > 1:
            worst = max(worst, float(d[np.ix_(members, members)].max()))
    return worst


def eval_kcenter(x, t) -> float:
    idx = _centers(x)
    return float(_matrix(t)[:, idx].min(axis=1).max())


def eval_kmedian(x, t) -> float:
    """Sum of nearest-facility distances; ``t`` may be a table (D x F block used) or a matrix."""
    d = t.facilities if isinstance(t, DistanceTable) else np.asarray(t, dtype=float)
    idx = _centers(x)
    return float(d[:, idx].min(axis=1).sum())


def eval_kmeans(x, ds: Dataset, candidates) -> float:
    idx = _centers(x)
    c = np.asarray(candidates, dtype=float)[idx]
    return float(pairwise("squared_euclidean", ds.points, c).min(axis=1).sum())


def eval_fair_penalized(x, t, balls: fairness.CriticalBallSet, penalty_weight: float) -> float:
    cost = eval_kmedian(x, _matrix(t))
    return cost + penalty_weight * fairness.violation_count(x, balls, t)


def evaluate(form: Formulation, x) -> ObjectiveVector:
    x = np.asarray(x, dtype=bool)
    idx = np.flatnonzero(x)
    size = len(idx)
    kind = form.kind
    if kind == "ktmm":
        if size <= 1:
            return ObjectiveVector(math.inf, size)
        return ObjectiveVector(eval_ktmm_f1(x, form.cost), size)
    if size == 0:
        return ObjectiveVector(-math.inf, 0)
    near = form.cost[:, idx].min(axis=1)
    if kind == "kcenter":
        return ObjectiveVector(-float(near.max()), size)
    if kind == "fair_kmedian":
        viol = int(np.sum(~form.ball_members[:, idx].any(axis=1)))
        return ObjectiveVector(-(float(near.sum()) + form.penalty_weight * viol), size)
    return ObjectiveVector(-float(near.sum()), size)


def violations(form: Formulation, x) -> int:
    """Uncovered critical balls (fair formulation only)."""
    idx = np.flatnonzero(np.asarray(x, dtype=bool))
    return int(np.sum(~form.ball_members[:, idx].any(axis=1)))


def original_cost(form: Formulation, x, measure: str | None = None) -> float:
    """Cost of ``x`` under the single-objective problem.

    ``measure`` defaults to the formulation's own problem; for k-tMM
    selections ``measure="kcenter"`` gives the k-center cost of the same
    centers.
    """
    measure = measure or form.kind
    if measure == "ktmm":
        return eval_ktmm_partition_cost(assign_clusters(x, form.cost), form.cost)
    if measure == "kcenter":
        return eval_kcenter(x, form.cost)
    # kmedian, kmeans and fair_kmedian all sum nearest distances
    return eval_kmedian(x, form.cost)


def build_candidate_set(ds: Dataset, strategy: str = "data_points", eps: float = 0.1,
                        resolution: float | None = None) -> np.ndarray:
    """Candidate centers for k-means.

    ``data_points`` returns D itself (deduplicated). ``grid`` adds an
    axis-aligned lattice over the bounding box of D with spacing
    ``resolution * diagonal`` (resolution defaults to ``eps``); the upper
    box edge is always included on every axis.
    """
    if ds.distance_kind != "squared_euclidean":
        raise InputError("candidate sets are defined for squared Euclidean instances")
    pts = ds.points
    if strategy == "data_points":
        return np.unique(pts, axis=0)
    if strategy != "grid":
        raise InputError(f"unknown candidate strategy {strategy!r}")
    resolution = eps if resolution is None else resolution
    if resolution <= 0:
        raise InputError("grid resolution must be positive")
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    diag = float(np.linalg.norm(hi - lo))
    if diag == 0:
        return np.unique(pts, axis=0)
    step = resolution * diag
    axes = []
    for a, b in zip(lo, hi):
        ticks = np.arange(a, b, step) if b > a else np.array([a])
        if ticks[-1] < b:
            ticks = np.append(ticks, b)
        axes.append(ticks)
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, pts.shape[1])
    return np.unique(np.vstack([pts, grid]), axis=0)
