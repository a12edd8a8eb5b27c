"""Individual fairness: fair radii, critical balls and violation measures."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .geometry import DistanceTable, InputError


class CriticalBallError(RuntimeError):
    """The greedy sweep produced a ball system that fails its own checks."""


@dataclass(frozen=True)
class FairRadii:
    r: np.ndarray
    threshold: int


@dataclass(frozen=True)
class CriticalBallSet:
    centers: tuple[int, ...]
    radii: tuple[float, ...]
    beta: float

    @property
    def q(self) -> int:
        return len(self.centers)

    def to_json(self) -> str:
        return json.dumps({"beta": self.beta, "centers": list(self.centers), "radii": list(self.radii)})

    @classmethod
    def from_json(cls, text: str) -> "CriticalBallSet":
        obj = json.loads(text)
        return cls(tuple(int(c) for c in obj["centers"]), tuple(float(r) for r in obj["radii"]), float(obj["beta"]))


def _data(t) -> np.ndarray:
    return t.data if isinstance(t, DistanceTable) else np.asarray(t, dtype=float)


def fair_radius_all(t, k: int) -> FairRadii:
    """Smallest radius around each point whose closed ball holds ceil(n/k) points."""
    d = _data(t)
    n = d.shape[0]
    if k < 1 or k > n:
        raise InputError(f"k must lie in [1, {n}], got {k}")
    threshold = math.ceil(n / k)
    # the point itself sits at distance 0 and counts
    r = np.sort(d, axis=1)[:, threshold - 1]
    return FairRadii(r, threshold)


def build_critical_balls(t, radii: FairRadii, beta: float, k: int | None = None) -> CriticalBallSet:
    """Greedy sweep in ascending radius order (ties by index).

    A point becomes a center when it is farther than ``6*beta*max(r(v), r(c))``
    from every center accepted so far. Both defining conditions are verified
    afterwards; if ``k`` is given, ``q <= k`` is enforced as well.
    """
    if beta < 1:
        raise InputError("beta must be at least 1")
    d = _data(t)
    r = radii.r
    order = sorted(range(len(r)), key=lambda i: (r[i], i))
    centers: list[int] = []
    for v in order:
        if all(d[v, c] > 6 * beta * max(r[v], r[c]) for c in centers):
            centers.append(v)

    c = np.array(centers)
    cover = d[:, c].min(axis=1)
    if np.any(cover > 6 * beta * r):
        i = int(np.argmax(cover - 6 * beta * r))
        raise CriticalBallError(f"point {i} is not within 6*beta*r of any critical center")
    for a in range(len(c)):
        for b in range(a + 1, len(c)):
            if not d[c[a], c[b]] > 6 * beta * max(r[c[a]], r[c[b]]):
                raise CriticalBallError(f"centers {c[a]} and {c[b]} are not separated")
    if k is not None and len(centers) > k:
        raise InputError(f"critical ball construction produced q={len(centers)} > k={k}")
    return CriticalBallSet(tuple(int(i) for i in centers), tuple(float(beta * r[i]) for i in centers), float(beta))


def ball_membership(t, balls: CriticalBallSet) -> np.ndarray:
    """Boolean (q, n) matrix: point i lies in ball j."""
    d = _data(t)
    if balls.q == 0:
        return np.zeros((0, d.shape[0]), dtype=bool)
    c = np.array(balls.centers)
    return d[c, :] <= np.array(balls.radii)[:, None]


def violation_count(x, balls: CriticalBallSet, t) -> int:
    """Number of critical balls that contain no selected point."""
    x = np.asarray(x, dtype=bool)
    members = ball_membership(t, balls)
    return int(np.sum(~(members & x[None, :]).any(axis=1)))


def nearest_distances(x, t) -> np.ndarray:
    d = _data(t)
    idx = np.flatnonzero(np.asarray(x, dtype=bool))
    if len(idx) == 0:
        raise InputError("empty selection")
    return d[:, idx].min(axis=1)


def fairness_factor(x, t, radii: FairRadii) -> float:
    """max_i d(v_i, X) / r_i; a selection is gamma-fair iff this is <= gamma."""
    near = nearest_distances(x, t)
    r = radii.r
    out = 0.0
    for di, ri in zip(near, r):
        if ri > 0:
            out = max(out, di / ri)
        elif di > 0:
            return math.inf
    return float(out)


def is_fair(x, t, radii: FairRadii, beta: float) -> bool:
    """Exact check of d(v_i, X) <= beta * r_i for every point."""
    return bool(np.all(nearest_distances(x, t) <= beta * radii.r))
