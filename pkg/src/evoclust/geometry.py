"""Point sets, distance tables and metric checking."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DISTANCE_KINDS = ("euclidean", "squared_euclidean", "explicit_table")


class InputError(ValueError):
    """Raised for malformed instances, parameters or selections."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Data points D, optional facilities F and how distances are measured.

    ``points`` has shape (n, l). When ``distance_kind`` is ``explicit_table``
    the ``table`` array covers D followed by F and coordinates may be absent
    (shape (n, 0)).
    """

    points: np.ndarray
    facilities: np.ndarray | None = None
    distance_kind: str = "euclidean"
    table: np.ndarray | None = None

    def __post_init__(self):
        if self.distance_kind not in DISTANCE_KINDS:
            raise InputError(f"unknown distance kind {self.distance_kind!r}")
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise InputError("a dataset needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise InputError("point coordinates must be finite")
        object.__setattr__(self, "points", _frozen(pts))

        if self.facilities is not None:
            fac = np.asarray(self.facilities, dtype=float)
            if fac.ndim == 1:
                fac = fac.reshape(-1, 1)
            if fac.shape[0] < 1 or fac.shape[1] != pts.shape[1]:
                raise InputError("facilities must share the points' dimension")
            if not np.all(np.isfinite(fac)):
                raise InputError("facility coordinates must be finite")
            object.__setattr__(self, "facilities", _frozen(fac))

        if self.distance_kind == "explicit_table":
            if self.table is None:
                raise InputError("explicit_table datasets need a table")
            tab = np.asarray(self.table, dtype=float)
            m = self.n + (0 if self.facilities is None else len(self.facilities))
            if tab.shape != (m, m):
                raise InputError(f"table must be {m}x{m}, got {tab.shape}")
            if not np.all(np.isfinite(tab)) or np.any(tab < 0):
                raise InputError("table entries must be finite and nonnegative")
            if not np.array_equal(tab, tab.T):
                raise InputError("table must be symmetric")
            if np.any(np.diag(tab) != 0):
                raise InputError("table diagonal must be zero")
            object.__setattr__(self, "table", _frozen(tab))
        elif self.table is not None:
            raise InputError("a table is only accepted with distance_kind='explicit_table'")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def has_facilities(self) -> bool:
        return self.facilities is not None


@dataclass(frozen=True)
class DistanceTable:
    """Symmetric distance matrix over D followed by F.

    Rows/columns ``0..n_data-1`` are the data points; the remaining ones, if
    any, are facilities.
    """

    entries: np.ndarray
    kind: str
    n_data: int

    @property
    def data(self) -> np.ndarray:
        """D x D block."""
        return self.entries[: self.n_data, : self.n_data]

    @property
    def facilities(self) -> np.ndarray:
        """D x F block; D x D when no separate facilities exist."""
        if self.entries.shape[0] == self.n_data:
            return self.data
        return self.entries[: self.n_data, self.n_data :]

    @property
    def is_metric(self) -> bool:
        return self.kind == "metric"


def distance(kind: str, u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise InputError(f"dimension mismatch: {u.shape} vs {v.shape}")
    sq = float(np.sum((u - v) ** 2))
    if kind == "euclidean":
        return float(np.sqrt(sq))
    if kind == "squared_euclidean":
        return sq
    raise InputError(f"distance() needs a coordinate kind, got {kind!r}")


def pairwise(kind: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """All distances between rows of ``a`` and rows of ``b``."""
    diff = a[:, None, :] - b[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    if kind == "euclidean":
        return np.sqrt(sq)
    if kind == "squared_euclidean":
        return sq
    raise InputError(f"pairwise() needs a coordinate kind, got {kind!r}")


def build_table(ds: Dataset) -> DistanceTable:
    if ds.distance_kind == "explicit_table":
        entries = np.array(ds.table)
        draft = DistanceTable(_frozen(entries), "non_metric", ds.n)
        kind = "metric" if check_metric(draft) is None else "non_metric"
        return DistanceTable(draft.entries, kind, ds.n)

    allpts = ds.points if ds.facilities is None else np.vstack([ds.points, ds.facilities])
    entries = pairwise(ds.distance_kind, allpts, allpts)
    # exact symmetry and zero diagonal regardless of rounding order
    entries = np.minimum(entries, entries.T)
    np.fill_diagonal(entries, 0.0)
    kind = "metric" if ds.distance_kind == "euclidean" else "non_metric"
    return DistanceTable(_frozen(entries), kind, ds.n)


def check_metric(t: DistanceTable | np.ndarray, tol: float | None = None) -> tuple[int, int, int] | None:
    """Look for a triangle-inequality violation.

    Returns the lexicographically first triple ``(i, j, m)`` with
    ``d(i, j) > d(i, m) + d(m, j) + tol``, or None when the table is metric.
    The default tolerance is ``1e-9 * max entry``.
    """
    d = t.entries if isinstance(t, DistanceTable) else np.asarray(t, dtype=float)
    if d.size == 0:
        return None
    if tol is None:
        tol = 1e-9 * float(d.max())
    for i in range(d.shape[0]):
        # bad[j, m]: d(i,j) > d(i,m) + d(m,j)
        bad = d[i][:, None] > d[i][None, :] + d.T + tol
        hits = np.argwhere(bad)
        if len(hits):
            j, m = hits[0]
            return (i, int(j), int(m))
    return None


def require_metric(t: DistanceTable) -> None:
    if not t.is_metric:
        raise InputError("this formulation needs a metric distance table")


def load_instance(path: str | Path) -> Dataset:
    """Read a JSON instance or a points-only CSV file."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
        try:
            pts = [[float(c) for c in r] for r in rows]
        except ValueError:
            # tolerate a header row
            pts = [[float(c) for c in r] for r in rows[1:]]
        return Dataset(np.array(pts))

    with open(path) as fh:
        spec = json.load(fh)
    kind = spec.get("distance", "euclidean")
    if kind == "table":
        kind = "explicit_table"
    table = spec.get("table")
    points = spec.get("points")
    if points is None:
        if table is None:
            raise InputError("instance has neither points nor table")
        points = np.zeros((len(table), 0))
    ds = Dataset(
        points=np.array(points, dtype=float),
        facilities=None if spec.get("facilities") is None else np.array(spec["facilities"], dtype=float),
        distance_kind=kind,
        table=None if table is None else np.array(table, dtype=float),
    )
    if "dimension" in spec and ds.points.shape[1] and ds.dimension != int(spec["dimension"]):
        raise InputError(f"declared dimension {spec['dimension']} != {ds.dimension}")
    return ds


def dump_instance(ds: Dataset, path: str | Path) -> None:
    kind = "table" if ds.distance_kind == "explicit_table" else ds.distance_kind
    out = {"dimension": ds.dimension, "points": ds.points.tolist(), "distance": kind}
    if ds.facilities is not None:
        out["facilities"] = ds.facilities.tolist()
    if ds.table is not None:
        out["table"] = ds.table.tolist()
    Path(path).write_text(json.dumps(out, indent=1))
