"""Hard cluster assignment and the balance fairness utility."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fairdegrade.clustering import CenterSet
from fairdegrade.dataset import Dataset, Metric, ProtectedGroups, pairwise
from fairdegrade.errors import EmptyCenters

# rho_table entry for a cluster that has no members of a group (or no members at all)
RHO_UNDEFINED = -1.0


@dataclass(frozen=True)
class Assignment:
    labels: np.ndarray
    k: int

    @property
    def label_of(self) -> dict[int, int]:
        return {i: int(c) for i, c in enumerate(self.labels)}

    @property
    def cluster_members(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.labels == a) for a in range(self.k)]


@dataclass(frozen=True)
class BalanceResult:
    value: float
    argmin_pair: tuple[int, int]
    rho_table: np.ndarray


def assign(ds: Dataset, centers: CenterSet, metric: Metric | str = Metric.EUCLIDEAN) -> Assignment:
    """Label every point with its nearest center; ties go to the lower center index."""
    if len(centers) == 0:
        raise EmptyCenters("center set is empty")
    dist = pairwise(metric, ds.points, centers.coords)
    return Assignment(np.argmin(dist, axis=1), len(centers))


def balance_values(counts: np.ndarray, group_sizes: np.ndarray) -> np.ndarray:
    """Per-(cluster, group) min(rho, 1/rho) for count tensors of shape (..., k, f).

    An empty cluster or a missing group contributes 0.
    """
    counts = np.asarray(counts, dtype=np.float64)
    sizes = np.asarray(group_sizes, dtype=np.float64)
    n = sizes.sum()
    cluster_size = counts.sum(axis=-1, keepdims=True)
    # rho = (N_b / n) / (c_ab / |a|) = (N_b |a|) / (c_ab n)
    lhs = counts * n
    rhs = cluster_size * sizes
    hi = np.maximum(lhs, rhs)
    lo = np.minimum(lhs, rhs)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(hi > 0, lo / np.where(hi > 0, hi, 1.0), 0.0)


def balance_of_counts(counts: np.ndarray, group_sizes: np.ndarray) -> np.ndarray:
    """Overall balance for each (k, f) count table in a stack of shape (..., k, f)."""
    vals = balance_values(counts, group_sizes)
    return vals.min(axis=(-2, -1))


def _result_from_counts(counts: np.ndarray, group_sizes: np.ndarray) -> BalanceResult:
    vals = balance_values(counts, group_sizes)
    a, b = np.unravel_index(int(np.argmin(vals)), vals.shape)
    n = group_sizes.sum()
    cluster_size = counts.sum(axis=1, keepdims=True)
    num = group_sizes[None, :] * cluster_size
    den = counts * n
    rho = np.full(counts.shape, RHO_UNDEFINED)
    ok = den > 0
    rho[ok] = num[ok] / den[ok]
    return BalanceResult(float(vals[a, b]), (int(a), int(b)), rho)


def balance_from_assignment(asg: Assignment, pg: ProtectedGroups, k: int | None = None) -> BalanceResult:
    k = asg.k if k is None else k
    labels = np.asarray(asg.labels)
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels must lie in 0..{k - 1}")
    counts = np.zeros((k, pg.f), dtype=np.int64)
    np.add.at(counts, (labels, pg.group_of), 1)
    return _result_from_counts(counts, pg.sizes)


def balance(
    ds: Dataset,
    pg: ProtectedGroups,
    centers: CenterSet,
    metric: Metric | str = Metric.EUCLIDEAN,
) -> BalanceResult:
    """Balance of the partition of the original points induced by ``centers``."""
    return balance_from_assignment(assign(ds, centers, metric), pg, len(centers))
