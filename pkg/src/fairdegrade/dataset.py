"""Datasets with protected-group labels, CSV I/O and distances."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist, pdist

from fairdegrade.errors import (
    DimensionMismatch,
    EmptyAfterFilter,
    GroupVanished,
    MissingColumn,
    ParseError,
    SingleGroup,
)

# above this many points, distances are computed row by row instead of cached
DENSE_DISTANCE_LIMIT = 5000
_CHUNK = 1024


class Metric(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    MANHATTAN = "manhattan"

    @property
    def scipy_name(self) -> str:
        return "cityblock" if self is Metric.MANHATTAN else "euclidean"


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """An n x d matrix of finite feature vectors; row i has id i."""

    points: np.ndarray
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"points must be a non-empty 2-D array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points contain NaN or infinite coordinates")
        object.__setattr__(self, "points", _readonly(pts))
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(pts.shape[1]))
        if len(names) != pts.shape[1]:
            raise DimensionMismatch(f"{len(names)} feature names for {pts.shape[1]} columns")
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def ids(self) -> np.ndarray:
        return np.arange(self.n)

    def __len__(self) -> int:
        return self.n


@dataclass(frozen=True)
class ProtectedGroups:
    """Hard partition of point ids into f >= 2 nonempty groups."""

    group_of: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        g = np.asarray(self.group_of)
        if g.ndim != 1 or g.size == 0:
            raise ValueError("group_of must be a non-empty 1-D array")
        if not np.issubdtype(g.dtype, np.integer):
            raise ValueError("group labels must be integers")
        g = g.astype(np.int64)
        f = int(g.max()) + 1
        if g.min() < 0:
            raise ValueError("group labels must be non-negative")
        if f < 2:
            raise SingleGroup("at least two protected groups are required")
        counts = np.bincount(g, minlength=f)
        if np.any(counts == 0):
            missing = [i for i in range(f) if counts[i] == 0]
            raise GroupVanished(f"groups {missing} have no members")
        object.__setattr__(self, "group_of", _readonly(g))
        names = tuple(self.names) or tuple(str(i) for i in range(f))
        if len(names) != f:
            raise ValueError(f"{len(names)} group names for {f} groups")
        object.__setattr__(self, "names", names)

    @property
    def f(self) -> int:
        return len(self.names)

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.group_of, minlength=self.f)

    @property
    def members(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.group_of == b) for b in range(self.f)]

    def __len__(self) -> int:
        return self.group_of.size


def load_csv(
    path: str | Path,
    feature_columns: Sequence[str],
    group_column: str,
    delimiter: str = ",",
) -> tuple[Dataset, ProtectedGroups]:
    """Read features and a group column from a headed CSV file.

    Rows with an empty or NA cell in any selected column are dropped.
    Group labels are mapped to 0..f-1 in order of first appearance.
    """
    feature_columns = list(feature_columns)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyAfterFilter(f"{path}: file is empty") from None
        wanted = feature_columns + [group_column]
        absent = [c for c in wanted if c not in header]
        if absent:
            raise MissingColumn(f"{path}: columns not found: {', '.join(absent)}")
        fidx = [header.index(c) for c in feature_columns]
        gidx = header.index(group_column)

        rows: list[list[float]] = []
        labels: list[str] = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            cells = [rec[i].strip() if i < len(rec) else "" for i in fidx]
            label = rec[gidx].strip() if gidx < len(rec) else ""
            if label in _MISSING or any(c in _MISSING for c in cells):
                continue
            try:
                values = [float(c) for c in cells]
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric feature value in {cells}") from None
            if not all(math.isfinite(v) for v in values):
                continue
            rows.append(values)
            labels.append(label)

    if not rows:
        raise EmptyAfterFilter(f"{path}: no rows left after dropping missing values")
    names: dict[str, int] = {}
    codes = [names.setdefault(lab, len(names)) for lab in labels]
    if len(names) < 2:
        raise SingleGroup(f"{path}: column {group_column!r} has a single value after filtering")
    ds = Dataset(np.array(rows, dtype=np.float64), tuple(feature_columns))
    pg = ProtectedGroups(np.array(codes, dtype=np.int64), tuple(names))
    return ds, pg


_MISSING = frozenset({"", "?", "NA", "NaN", "nan", "null"})


def write_csv(path: str | Path, ds: Dataset, pg: ProtectedGroups, group_column: str = "group") -> None:
    """Write a dataset so that load_csv reads it back bit-exactly."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*ds.feature_names, group_column])
        for row, g in zip(ds.points, pg.group_of):
            w.writerow([*(repr(float(v)) for v in row), pg.names[g]])


def subsample(ds: Dataset, pg: ProtectedGroups, m: int, seed: int) -> tuple[Dataset, ProtectedGroups]:
    if not 1 <= m <= ds.n:
        raise ValueError(f"subsample size must be in [1, {ds.n}], got {m}")
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(ds.n, size=m, replace=False))
    g = pg.group_of[keep]
    counts = np.bincount(g, minlength=pg.f)
    if np.any(counts == 0):
        gone = [pg.names[i] for i in range(pg.f) if counts[i] == 0]
        raise GroupVanished(f"groups {gone} have no members after subsampling to {m}")
    return Dataset(ds.points[keep], ds.feature_names), ProtectedGroups(g, pg.names)


def minmax_scale(ds: Dataset) -> Dataset:
    lo = ds.points.min(axis=0)
    span = ds.points.max(axis=0) - lo
    scaled = np.zeros_like(ds.points)
    nz = span > 0
    scaled[:, nz] = (ds.points[:, nz] - lo[nz]) / span[nz]
    return Dataset(scaled, ds.feature_names)


def distance(metric: Metric | str, x, y) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise DimensionMismatch(f"dimensions differ: {x.size} vs {y.size}")
    diff = np.abs(x - y)
    if Metric(metric) is Metric.MANHATTAN:
        return float(diff.sum())
    return float(np.sqrt(np.dot(diff, diff)))


def pairwise(metric: Metric | str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance matrix between the rows of a and the rows of b."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    return cdist(a, b, metric=Metric(metric).scipy_name)


def max_pairwise(points: np.ndarray, metric: Metric | str) -> float:
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < 2:
        return 0.0
    if n <= DENSE_DISTANCE_LIMIT:
        return float(pdist(points, metric=Metric(metric).scipy_name).max())
    best = 0.0
    for start in range(0, n, _CHUNK):
        best = max(best, float(pairwise(metric, points[start:start + _CHUNK], points).max()))
    return best


def diameter(ds: Dataset, metric: Metric | str = Metric.EUCLIDEAN) -> float:
    return max_pairwise(ds.points, metric)
