"""k-median objective, PAM, the phantom-center transform and greedy maximization.

All solvers work on a :class:`Pool`: the distinct coordinates of a point
multiset, each carrying an integer weight (its multiplicity).  Adversarial
copies therefore never create new candidates; they only raise the weight of
the location they duplicate.  Candidate order is the order of first
appearance, so "lowest index wins" tie-breaking is preserved.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from fairdegrade.dataset import DENSE_DISTANCE_LIMIT, Dataset, Metric, max_pairwise, pairwise
from fairdegrade.errors import EmptyCenters, KTooLarge

_CHUNK = 512
# relative slack used when deciding whether a PAM swap is a strict improvement
SWAP_RTOL = 1e-12


def _coord_key(row: np.ndarray) -> bytes:
    # +0.0 normalises -0.0 so that equal coordinates hash equally
    return (np.asarray(row, dtype=np.float64) + 0.0).tobytes()


@dataclass(frozen=True)
class CenterSet:
    """Ordered medoids; ``source_index`` points into the pool they came from."""

    coords: np.ndarray
    source_index: tuple[int, ...]

    def __post_init__(self):
        c = np.array(self.coords, dtype=np.float64, copy=True)
        if c.ndim != 2:
            raise ValueError("coords must be 2-D")
        if c.shape[0] != len(self.source_index):
            raise ValueError("one source index per center is required")
        keys = [_coord_key(r) for r in c]
        if len(set(keys)) != len(keys):
            raise ValueError("centers must have distinct coordinates")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)
        object.__setattr__(self, "source_index", tuple(int(i) for i in self.source_index))

    def __len__(self) -> int:
        return self.coords.shape[0]

    @property
    def k(self) -> int:
        return len(self)

    def key(self) -> frozenset[bytes]:
        """Coordinate-set identity; order and provenance are ignored."""
        return frozenset(_coord_key(r) for r in self.coords)

    def same_as(self, other: "CenterSet") -> bool:
        return self.key() == other.key()

    def to_lists(self) -> list[list[float]]:
        return [[float(v) for v in row] for row in self.coords]

    @classmethod
    def empty(cls, d: int) -> "CenterSet":
        return cls(np.zeros((0, d)), ())

    @classmethod
    def from_indices(cls, points: np.ndarray, indices: Iterable[int]) -> "CenterSet":
        idx = [int(i) for i in indices]
        return cls(np.asarray(points, dtype=np.float64)[idx], tuple(idx))


class Pool:
    """Weighted set of distinct points with cached or on-demand distances."""

    def __init__(self, points, metric: Metric | str = Metric.EUCLIDEAN, weights=None):
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if pts.shape[0] == 0:
            raise ValueError("pool is empty")
        w_in = np.ones(pts.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
        uniq, first, inverse = np.unique(pts + 0.0, axis=0, return_index=True, return_inverse=True)
        inverse = np.asarray(inverse).ravel()
        order = np.argsort(first, kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(order.size)
        self.metric = Metric(metric)
        self.coords = uniq[order]
        self.rep_index = first[order]
        self.inverse = rank[inverse]
        self.weight = np.bincount(self.inverse, weights=w_in, minlength=order.size).astype(np.float64)
        self.n_points = pts.shape[0]
        self._dense: np.ndarray | None = None
        self._key_to_uid = {_coord_key(r): u for u, r in enumerate(self.coords)}

    @classmethod
    def from_dataset(cls, ds: Dataset, metric: Metric | str = Metric.EUCLIDEAN, extra=None) -> "Pool":
        """Pool over ``ds`` plus optional extra points (e.g. an adversarial multiset)."""
        if extra is None or len(extra) == 0:
            return cls(ds.points, metric)
        return cls(np.vstack([ds.points, np.asarray(extra, dtype=np.float64)]), metric)

    def __len__(self) -> int:
        return self.coords.shape[0]

    @property
    def total_weight(self) -> float:
        return float(self.weight.sum())

    def with_weights(self, weights: np.ndarray) -> "Pool":
        """Same locations and distance cache, different multiplicities."""
        clone = object.__new__(Pool)
        clone.__dict__.update(self.__dict__)
        clone.weight = np.asarray(weights, dtype=np.float64).copy()
        return clone

    def uid_of(self, coords: np.ndarray) -> int:
        try:
            return self._key_to_uid[_coord_key(coords)]
        except KeyError:
            raise ValueError(f"point {np.asarray(coords).tolist()} is not in the pool") from None

    def uids(self, centers: CenterSet) -> list[int]:
        return [self.uid_of(r) for r in centers.coords]

    def centers(self, uids: Sequence[int]) -> CenterSet:
        return CenterSet(self.coords[list(uids)], tuple(int(self.rep_index[u]) for u in uids))

    def _matrix(self) -> np.ndarray | None:
        if self._dense is None and len(self) <= DENSE_DISTANCE_LIMIT:
            self._dense = pairwise(self.metric, self.coords, self.coords)
            self._dense.setflags(write=False)
        return self._dense

    def rows(self, uids) -> np.ndarray:
        """Distances from the given pool members to every pool member."""
        dense = self._matrix()
        if dense is not None:
            return dense[uids]
        return pairwise(self.metric, self.coords[uids], self.coords)

    def row_chunks(self, uids: np.ndarray | None = None):
        uids = np.arange(len(self)) if uids is None else np.asarray(uids)
        for start in range(0, uids.size, _CHUNK):
            part = uids[start:start + _CHUNK]
            yield part, self.rows(part)

    def diameter(self) -> float:
        return max_pairwise(self.coords, self.metric)


# --- objective evaluation on uid lists (internal fast paths) -----------------

def nearest_distance(pool: Pool, uids: Sequence[int]) -> np.ndarray:
    """Distance from each pool member to its nearest center (inf when none)."""
    out = np.full(len(pool), np.inf)
    if len(uids):
        out = pool.rows(list(uids)).min(axis=0)
    return out


def marginal_gains(pool: Pool, residual: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    """Theta gain of adding each pool member to a set whose residuals are given.

    ``residual[x]`` is min(phantom distance, distance to the current centers).
    """
    w = pool.weight if weights is None else weights
    gains = np.empty(len(pool))
    for part, rows in pool.row_chunks():
        gains[part] = np.maximum(residual[None, :] - rows, 0.0) @ w
    return gains


def greedy_uids(pool: Pool, k: int, virtual_distance: float, weights: np.ndarray | None = None) -> list[int]:
    if k > len(pool):
        raise KTooLarge(f"k={k} exceeds the {len(pool)} distinct points in the pool")
    residual = np.full(len(pool), float(virtual_distance))
    chosen: list[int] = []
    for _ in range(k):
        gains = marginal_gains(pool, residual, weights)
        gains[chosen] = -np.inf
        c = int(np.argmax(gains))
        chosen.append(c)
        residual = np.minimum(residual, pool.rows([c])[0])
    return chosen


# --- public API ---------------------------------------------------------------

@dataclass(frozen=True)
class PhantomCenter:
    """Virtual center farther from every real point than any pairwise distance."""

    virtual_distance: float

    def distance_to(self, x=None) -> float:
        return self.virtual_distance


def _center_distances(centers: CenterSet, pool: Pool) -> np.ndarray:
    if len(centers) == 0:
        raise EmptyCenters("center set is empty")
    return pairwise(pool.metric, centers.coords, pool.coords).min(axis=0)


def omega(centers: CenterSet, pool: Pool) -> float:
    """k-median cost: weighted sum of distances to the nearest center."""
    return float(_center_distances(centers, pool) @ pool.weight)


def make_phantom(pool: Pool) -> PhantomCenter:
    return PhantomCenter(pool.diameter() + 1.0)


def theta(centers: CenterSet, pool: Pool, phantom: PhantomCenter) -> float:
    """Omega({phantom}) - Omega({phantom} | centers)."""
    if len(centers) == 0:
        return 0.0
    v = phantom.virtual_distance
    resid = np.minimum(v, _center_distances(centers, pool))
    return float((v - resid) @ pool.weight)


def greedy_centers(pool: Pool, k: int, phantom: PhantomCenter) -> CenterSet:
    """Nemhauser greedy maximization of theta, ordered by selection."""
    return pool.centers(greedy_uids(pool, k, phantom.virtual_distance))


def pam_kmedian(pool: Pool, k: int, seed: int | None = None, shuffle_ties: bool = False) -> CenterSet:
    """PAM: greedy BUILD, then best-improvement SWAP until no swap lowers the cost.

    Ties go to the lowest slot, then the lowest pool index.  With
    ``shuffle_ties`` the candidate scan order is permuted by ``seed`` instead.
    """
    return pool.centers(pam_uids(pool, k, seed=seed, shuffle_ties=shuffle_ties))


def pam_uids(pool: Pool, k: int, seed: int | None = None, shuffle_ties: bool = False) -> list[int]:
    m = len(pool)
    if k < 1:
        raise KTooLarge("k must be at least 1")
    if k > m:
        raise KTooLarge(f"k={k} exceeds the {m} distinct points in the pool")
    w = pool.weight
    scan = np.arange(m)
    if shuffle_ties:
        scan = np.random.default_rng(seed).permutation(m)

    medoids: list[int] = []
    mind = np.full(m, np.inf)
    for _ in range(k):
        costs = np.empty(m)
        for part, rows in pool.row_chunks():
            costs[part] = np.minimum(mind[None, :], rows) @ w
        costs[medoids] = np.inf
        c = int(scan[np.argmin(costs[scan])])
        medoids.append(c)
        mind = np.minimum(mind, pool.rows([c])[0])

    current = float(mind @ w)
    while True:
        med_rows = pool.rows(medoids)
        best = (current, -1, -1)
        for s in range(k):
            others = [i for i in range(k) if i != s]
            rem = med_rows[others].min(axis=0) if others else np.full(m, np.inf)
            costs = np.empty(m)
            for part, rows in pool.row_chunks():
                costs[part] = np.minimum(rem[None, :], rows) @ w
            costs[medoids] = np.inf
            p = int(scan[np.argmin(costs[scan])])
            if costs[p] < best[0]:
                best = (float(costs[p]), s, p)
        val, s, p = best
        if s < 0 or not val < current - SWAP_RTOL * max(1.0, abs(current)):
            break
        medoids[s] = p
        current = val
    return medoids
