"""Exhaustive ground truth for small instances (test-time only)."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from fairdegrade.clustering import CenterSet, PhantomCenter, Pool, make_phantom, theta
from fairdegrade.dataset import Dataset, Metric, ProtectedGroups, pairwise
from fairdegrade.errors import KTooLarge, TooLarge
from fairdegrade.fairness import balance

MAX_SUBSETS = 10**6


@dataclass(frozen=True)
class ExhaustiveResult:
    best_set: CenterSet
    best_value: float
    evaluated: int


def _subsets(m: int, k: int):
    if k > m:
        raise KTooLarge(f"k={k} exceeds {m} distinct points")
    total = math.comb(m, k)
    if total > MAX_SUBSETS:
        raise TooLarge(f"C({m}, {k}) = {total} subsets exceeds the limit of {MAX_SUBSETS}")
    return itertools.combinations(range(m), k), total


def brute_force_kmedian(pool: Pool, k: int) -> ExhaustiveResult:
    """Exact k-median optimum over all k-subsets of distinct pool points."""
    combos, total = _subsets(len(pool), k)
    dist = pairwise(pool.metric, pool.coords, pool.coords)
    best, best_val = None, math.inf
    for combo in combos:
        val = float(dist[list(combo)].min(axis=0) @ pool.weight)
        if val < best_val:
            best, best_val = combo, val
    return ExhaustiveResult(pool.centers(best), best_val, total)


def brute_force_max_theta(pool: Pool, k: int, phantom: PhantomCenter | None = None) -> ExhaustiveResult:
    """Exact maximum of the phantom-shifted objective, evaluated point by point."""
    phantom = make_phantom(pool) if phantom is None else phantom
    v = phantom.virtual_distance
    combos, total = _subsets(len(pool), k)
    coords = pool.coords
    best, best_val = None, -math.inf
    for combo in combos:
        val = 0.0
        for x, wx in zip(coords, pool.weight):
            near = min(_dist(pool.metric, x, coords[c]) for c in combo)
            val += wx * (v - min(v, near))
        if val > best_val:
            best, best_val = combo, val
    return ExhaustiveResult(pool.centers(best), best_val, total)


def _dist(metric: Metric, x, y) -> float:
    diff = [abs(a - b) for a, b in zip(x, y)]
    if metric is Metric.MANHATTAN:
        return math.fsum(diff)
    return math.sqrt(math.fsum(t * t for t in diff))


def brute_force_min_balance(
    ds: Dataset,
    k: int,
    pg: ProtectedGroups,
    metric: Metric | str = Metric.EUCLIDEAN,
) -> ExhaustiveResult:
    """Exact minimum balance over all k-subsets of distinct points of ds."""
    pool = Pool(ds.points, metric)
    combos, total = _subsets(len(pool), k)
    best, best_val = None, math.inf
    for combo in combos:
        centers = pool.centers(combo)
        val = balance(ds, pg, centers, metric).value
        if val < best_val:
            best, best_val = combo, val
    return ExhaustiveResult(pool.centers(best), best_val, total)


def is_well_separated(ds: Dataset, partitions, metric: Metric | str = Metric.EUCLIDEAN) -> bool:
    """True iff, for every pair of partitions, both diameters are below their gap.

    ``partitions`` is either a label array over the points of ``ds`` or a
    sequence of index lists.
    """
    groups = _as_groups(ds.n, partitions)
    if len(groups) < 2:
        return True
    pts = [ds.points[g] for g in groups]
    intra = [float(pairwise(metric, p, p).max()) for p in pts]
    for i, j in itertools.combinations(range(len(pts)), 2):
        inter = float(pairwise(metric, pts[i], pts[j]).min())
        if not max(intra[i], intra[j]) < inter:
            return False
    return True


def _as_groups(n: int, partitions) -> list[np.ndarray]:
    if isinstance(partitions, np.ndarray) and partitions.ndim == 1 and partitions.size == n:
        labels = partitions
        groups = [np.flatnonzero(labels == v) for v in np.unique(labels)]
    else:
        groups = [np.asarray(list(g), dtype=int) for g in partitions]
    groups = [g for g in groups if g.size]
    covered = np.sort(np.concatenate(groups)) if groups else np.array([], int)
    if covered.size != n or np.any(covered != np.arange(n)):
        raise ValueError("partitions must cover every point exactly once")
    return groups


def check_approximation_ratio(
    pool: Pool,
    adv: CenterSet,
    phantom: PhantomCenter | None = None,
) -> tuple[float, bool]:
    """Theta(adv) / Theta(optimum) and whether it clears 1 - 1/e."""
    phantom = make_phantom(pool) if phantom is None else phantom
    opt = brute_force_kmedian(pool, len(adv))
    best = theta(opt.best_set, pool, phantom)
    got = theta(adv, pool, phantom)
    ratio = 1.0 if best == 0 else got / best
    return ratio, ratio >= 1.0 - 1.0 / math.e - 1e-12
