"""Adversarial centroid search and the point-injection attack on k-median."""

from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from fairdegrade.clustering import (
    CenterSet,
    Pool,
    greedy_uids,
    make_phantom,
    marginal_gains,
    pam_uids,
)
from fairdegrade.dataset import Dataset, Metric, ProtectedGroups, pairwise
from fairdegrade.errors import ConfigError, KTooLarge, SingleGroup, StagnationError
from fairdegrade.fairness import assign, balance, balance_of_counts

log = logging.getLogger(__name__)


class AttackStatus(str, enum.Enum):
    SUCCESS = "success"
    BUDGET_EXHAUSTED = "budget_exhausted"
    ALREADY_MINIMAL = "already_minimal"


class EmptyPartitionWarning(UserWarning):
    """An adversarial center captures no original points."""


@dataclass(frozen=True)
class AdversarialSet:
    """Injected points: ``per_center_counts[i]`` exact copies of ``locations[i]``."""

    locations: CenterSet
    per_center_counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.per_center_counts) != len(self.locations):
            raise ValueError("one count per location is required")
        if any(c < 0 for c in self.per_center_counts):
            raise ValueError("counts must be non-negative")

    @classmethod
    def empty(cls, locations: CenterSet) -> "AdversarialSet":
        return cls(locations, (0,) * len(locations))

    @property
    def points(self) -> np.ndarray:
        return np.repeat(self.locations.coords, self.per_center_counts, axis=0)

    def __len__(self) -> int:
        return int(sum(self.per_center_counts))


@dataclass(frozen=True)
class AttackOutcome:
    adversarial_set: AdversarialSet
    adv_centers: CenterSet
    initial_centers: CenterSet
    pre_balance: float
    post_balance: float
    cost: int
    iterations: int
    status: AttackStatus
    virtual_distance: float = float("nan")
    diagnostics: dict = field(default_factory=dict)

    @property
    def succeeded(self) -> bool:
        return self.status is AttackStatus.SUCCESS


def attack_cost(xs: AdversarialSet) -> int:
    """Attack cost is simply the number of injected points."""
    return len(xs)


# --- adversarial centroid search ---------------------------------------------

class _GroupCounts:
    """Per-location group counts for the distinct points of a dataset."""

    def __init__(self, pool: Pool, pg: ProtectedGroups):
        self.f = pg.f
        self.sizes = pg.sizes.astype(np.float64)
        self.table = np.zeros((len(pool), pg.f))
        np.add.at(self.table, (pool.inverse, pg.group_of), 1.0)

    def counts(self, labels: np.ndarray, k: int) -> np.ndarray:
        out = np.zeros((k, self.f))
        np.add.at(out, labels, self.table)
        return out


def _labels(pool: Pool, uids: list[int]) -> tuple[np.ndarray, np.ndarray]:
    rows = pool.rows(uids)
    return np.argmin(rows, axis=0), rows.min(axis=0)


def _slot_scan(pool, gc, medoids, slot, rem_label, rem_dist, exclude):
    """Balance and cost of putting each candidate into ``slot``.

    ``rem_label``/``rem_dist`` describe the assignment to the other slots
    (label -1 and distance inf for points no other slot covers).
    Returns (balance, cost) arrays over all pool members.
    """
    k = len(medoids)
    f = gc.f
    m = len(pool)
    covered = rem_label >= 0
    base = np.zeros((k, f))
    np.add.at(base, rem_label[covered], gc.table[covered])
    spread = np.zeros((m, k * f))
    cols = rem_label[covered][:, None] * f + np.arange(f)[None, :]
    spread[np.flatnonzero(covered)[:, None], cols] = gc.table[covered]

    bal = np.empty(m)
    cost = np.empty(m)
    for part, rows in pool.row_chunks():
        # a candidate takes a point on a strictly smaller distance, or on a tie
        # when its slot index is lower than the slot currently holding it
        take = (rows < rem_dist) | ((rows == rem_dist) & (slot < rem_label))
        t = take.astype(np.float64)
        lost = (t @ spread).reshape(-1, k, f)
        counts = base[None, :, :] - lost
        counts[:, slot, :] = t @ gc.table
        bal[part] = balance_of_counts(counts, gc.sizes)
        cost[part] = np.minimum(rows, rem_dist) @ pool.weight
    bal[exclude] = np.inf
    cost[exclude] = np.inf
    return bal, cost


def _best(bal: np.ndarray, cost: np.ndarray) -> int:
    # lowest balance, then lowest k-median cost, then lowest index
    return int(np.lexsort((np.arange(bal.size), cost, bal))[0])


def _current_balance(pool, gc, medoids) -> float:
    labels, _ = _labels(pool, medoids)
    return float(balance_of_counts(gc.counts(labels, len(medoids)), gc.sizes))


def _forward_select(pool: Pool, gc: _GroupCounts, k: int) -> list[int]:
    medoids: list[int] = []
    m = len(pool)
    rem_label = np.full(m, -1)
    rem_dist = np.full(m, np.inf)
    for j in range(k):
        trial = medoids + [-1]
        bal, cost = _slot_scan(pool, gc, trial, j, rem_label, rem_dist, medoids)
        c = _best(bal, cost)
        medoids.append(c)
        rem_label, rem_dist = _labels(pool, medoids)
    return medoids


def _swap_descent(pool: Pool, gc: _GroupCounts, medoids: list[int]) -> list[int]:
    medoids = list(medoids)
    k = len(medoids)
    current = _current_balance(pool, gc, medoids)
    while current > 0.0:
        rows = pool.rows(medoids)
        best = (np.inf, np.inf, -1, -1)
        for s in range(k):
            others = [i for i in range(k) if i != s]
            if others:
                sub = rows[others]
                rem_label = np.asarray(others)[np.argmin(sub, axis=0)]
                rem_dist = sub.min(axis=0)
            else:
                rem_label = np.full(len(pool), -1)
                rem_dist = np.full(len(pool), np.inf)
            bal, cost = _slot_scan(pool, gc, medoids, s, rem_label, rem_dist, medoids)
            p = _best(bal, cost)
            if (bal[p], cost[p]) < best[:2]:
                best = (float(bal[p]), float(cost[p]), s, p)
        if not best[0] < current:
            break
        _, _, s, p = best
        medoids[s] = p
        current = best[0]
    return medoids


def find_adversarial_centroids(
    ds: Dataset,
    k: int,
    pg: ProtectedGroups,
    metric: Metric | str = Metric.EUCLIDEAN,
    baseline: CenterSet | None = None,
    pool: Pool | None = None,
) -> CenterSet:
    """Greedy balance-minimizing medoid selection followed by swap descent.

    The forward pass adds, one at a time, the point whose inclusion gives the
    lowest balance (ties: lower k-median cost, then lower index).  Swaps of a
    medoid with a non-medoid are then applied best-first while they strictly
    lower the balance.  If the result is less unfair than ``baseline``
    (the plain PAM solution, computed when not given) the descent is rerun
    from the baseline, so the returned set is never fairer than it.
    """
    if pg.f < 2:
        raise SingleGroup("at least two protected groups are required")
    pool = Pool(ds.points, metric) if pool is None else pool
    if not 1 <= k <= len(pool):
        raise KTooLarge(f"k={k} must lie in [1, {len(pool)}] (distinct points)")
    gc = _GroupCounts(pool, pg)

    medoids = _swap_descent(pool, gc, _forward_select(pool, gc, k))
    found = _current_balance(pool, gc, medoids)
    if found > 0.0:
        base_uids = pam_uids(pool, k) if baseline is None else pool.uids(baseline)
        if _current_balance(pool, gc, base_uids) < found:
            alt = _swap_descent(pool, gc, base_uids)
            if _current_balance(pool, gc, alt) < found:
                medoids = alt
    return pool.centers(medoids)


# --- the injection attack -----------------------------------------------------

def _copies_needed(base, delta, a, budget_left, batch_doubling, stall_limit):
    """Smallest t with argmax(base + t*delta) == a, or None past the budget.

    Each copy at ``a`` raises its own gain by its residual and every other
    candidate's gain by strictly less, so the predicate is monotone in t.
    """

    def wins(t: int) -> bool:
        return int(np.argmax(base + t * delta)) == a

    if wins(0):
        return 0
    limit = budget_left + 1  # the copy that would overflow the budget
    if batch_doubling:
        lo, step = 0, 1
        while True:
            hi = min(lo + step, limit)
            if wins(hi):
                break
            if hi >= limit:
                return None
            lo, step = hi, step * 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if wins(mid):
                hi = mid
            else:
                lo = mid
        return hi if hi <= budget_left else None

    deficit = float(np.max(base) - base[a])
    stalled = 0
    for t in range(1, limit + 1):
        g = base + t * delta
        if int(np.argmax(g)) == a:
            return t if t <= budget_left else None
        now = float(np.max(g) - g[a])
        stalled = stalled + 1 if not now < deficit else 0
        if stalled >= stall_limit:
            raise StagnationError(
                f"greedy preference for location {a} did not improve after {stalled} copies"
            )
        deficit = now
    return None


def _exhausted(adv, mu0, pre, iterations, vdist, pool_size):
    log.info("attack budget exhausted after %d outer iterations", iterations)
    return AttackOutcome(
        adversarial_set=AdversarialSet.empty(adv),
        adv_centers=adv,
        initial_centers=mu0,
        pre_balance=pre,
        post_balance=pre,
        cost=0,
        iterations=iterations,
        status=AttackStatus.BUDGET_EXHAUSTED,
        virtual_distance=vdist,
    )


def run_attack(
    ds: Dataset,
    k: int,
    pg: ProtectedGroups,
    epsilon: int,
    metric: Metric | str = Metric.EUCLIDEAN,
    seed: int | None = 0,
    *,
    batch_doubling: bool = False,
    cluster_order: str = "selection",
    initial_centers: CenterSet | None = None,
    adv_centers: CenterSet | None = None,
) -> AttackOutcome:
    """Inject copies of the adversarial centroids until greedy k-median picks them.

    ``cluster_order`` controls the order in which the per-center injection
    loop visits the targets: ``"selection"`` keeps the order produced by the
    centroid search, ``"gain"`` visits next whichever remaining target the
    greedy step currently prefers.  ``adv_centers`` overrides the search.
    """
    if epsilon < 0:
        raise ConfigError("budget must be non-negative")
    if cluster_order not in ("selection", "gain"):
        raise ConfigError(f"unknown cluster order {cluster_order!r}")
    metric = Metric(metric)
    pool = Pool(ds.points, metric)
    if not 1 <= k <= len(pool):
        raise KTooLarge(f"k={k} must lie in [1, {len(pool)}] (distinct points)")

    mu0 = pool.centers(pam_uids(pool, k, seed=seed)) if initial_centers is None else initial_centers
    pre = balance(ds, pg, mu0, metric).value
    if adv_centers is None:
        if pre == 0.0:
            return AttackOutcome(
                adversarial_set=AdversarialSet.empty(mu0),
                adv_centers=mu0,
                initial_centers=mu0,
                pre_balance=pre,
                post_balance=pre,
                cost=0,
                iterations=0,
                status=AttackStatus.ALREADY_MINIMAL,
            )
        adv_centers = find_adversarial_centroids(ds, k, pg, metric, baseline=mu0, pool=pool)
    if len(adv_centers) != k:
        raise ConfigError(f"expected {k} adversarial centers, got {len(adv_centers)}")
    targets = pool.uids(adv_centers)
    target_set = set(targets)

    vdist = make_phantom(pool).virtual_distance
    w = pool.weight.copy()
    copies = [0] * k
    total = 0
    stall_limit = max(ds.n, 1)
    iterations = 0

    while True:
        if total > epsilon:
            return _exhausted(adv_centers, mu0, pre, iterations, vdist, len(pool))
        iterations += 1
        if set(greedy_uids(pool, k, vdist, w)) == target_set:
            break
        added_this_round = 0
        residual = np.full(len(pool), vdist)
        chosen: list[int] = []
        pending = list(range(k))
        while pending:
            gains = marginal_gains(pool, residual, w)
            gains[chosen] = -np.inf
            if cluster_order == "gain":
                i = max(pending, key=lambda j: (gains[targets[j]], -j))
            else:
                i = pending[0]
            pending.remove(i)
            a = targets[i]
            while True:
                delta = np.maximum(residual[a] - pool.rows([a])[0], 0.0)
                delta[chosen] = 0.0
                t = _copies_needed(gains, delta, a, epsilon - total, batch_doubling, stall_limit)
                if t is None:
                    return _exhausted(adv_centers, mu0, pre, iterations, vdist, len(pool))
                w[a] += t
                copies[i] += t
                total += t
                added_this_round += t
                # confirm against a fresh evaluation before moving on
                gains = marginal_gains(pool, residual, w)
                gains[chosen] = -np.inf
                if int(np.argmax(gains)) == a:
                    break
            chosen.append(a)
            residual = np.minimum(residual, pool.rows([a])[0])
        if added_this_round == 0:
            raise StagnationError("injection round added no points but greedy centers still differ")
        log.debug("round %d: %d copies so far", iterations, total)

    if total > epsilon:
        return _exhausted(adv_centers, mu0, pre, iterations, vdist, len(pool))
    post = balance(ds, pg, adv_centers, metric).value
    return AttackOutcome(
        adversarial_set=AdversarialSet(adv_centers, tuple(copies)),
        adv_centers=adv_centers,
        initial_centers=mu0,
        pre_balance=pre,
        post_balance=post,
        cost=total,
        iterations=iterations,
        status=AttackStatus.SUCCESS,
        virtual_distance=vdist,
    )


# --- budget bound for well-separated instances --------------------------------

@dataclass(frozen=True)
class BoundTerm:
    size: int
    own_cost: float
    sigma: float
    min_gap: float
    term: int


def epsilon_bound_terms(
    ds: Dataset,
    adv: CenterSet,
    metric: Metric | str = Metric.EUCLIDEAN,
    partition_labels: np.ndarray | None = None,
) -> list[BoundTerm]:
    """Per-center terms of the injection budget bound.

    Partitions default to the assignment of the original points to ``adv``.
    With ``partition_labels`` (e.g. the clusters of the unattacked solution),
    center i is paired with the partition that contains it.
    """
    if len(adv) == 0:
        raise ValueError("adversarial center set is empty")
    own = assign(ds, adv, metric).labels
    labels = own if partition_labels is None else np.asarray(partition_labels)
    terms = []
    for i, center in enumerate(adv.coords):
        if partition_labels is None:
            part = labels == i
        else:
            at = np.flatnonzero(np.all(ds.points == center, axis=1))
            part = labels == labels[at[0]] if at.size else np.zeros(ds.n, bool)
        pts = ds.points[part]
        if pts.shape[0] == 0:
            warnings.warn(f"adversarial center {i} captures no points", EmptyPartitionWarning, stacklevel=2)
            terms.append(BoundTerm(0, 0.0, 0.0, 0.0, 0))
            continue
        to_center = pairwise(metric, pts, center[None, :])[:, 0]
        own_cost = float(to_center.sum())
        sigma = min(float(pairwise(metric, pts[s:s + 512], pts).sum(axis=1).min()) for s in range(0, len(pts), 512))
        gaps = to_center[to_center > 0]
        numer = own_cost - sigma
        if gaps.size == 0 or numer <= 0:
            terms.append(BoundTerm(len(pts), own_cost, sigma, float(gaps.min()) if gaps.size else 0.0, 0))
            continue
        min_gap = float(gaps.min())
        terms.append(BoundTerm(len(pts), own_cost, sigma, min_gap, len(pts) * math.ceil(numer / min_gap)))
    return terms


def epsilon_upper_bound(
    ds: Dataset,
    adv: CenterSet,
    metric: Metric | str = Metric.EUCLIDEAN,
    partition_labels: np.ndarray | None = None,
) -> int:
    """Upper bound on the number of injected points for well-separated data."""
    return sum(t.term for t in epsilon_bound_terms(ds, adv, metric, partition_labels))
