import math

import numpy as np
import pytest

from fairdegrade import CenterSet, Dataset, Pool, ProtectedGroups, greedy_centers, make_phantom, omega
from fairdegrade.errors import TooLarge
from fairdegrade.oracle import (
    brute_force_kmedian,
    brute_force_max_theta,
    brute_force_min_balance,
    check_approximation_ratio,
    is_well_separated,
)


def line(*xs):
    return Dataset(np.array([[float(x)] for x in xs]))


def test_brute_force_kmedian_examples():
    pool = Pool(line(0, 1, 10, 11).points)
    res = brute_force_kmedian(pool, 2)
    assert res.best_value == 2.0
    assert res.evaluated == 6
    # ties go to the lexicographically smallest index tuple
    assert res.best_set.source_index == (0, 2)
    assert brute_force_kmedian(pool, 4).best_value == 0.0


def test_brute_force_counts_distinct_points_only():
    pool = Pool(line(0, 0, 1, 5).points)
    assert brute_force_kmedian(pool, 2).evaluated == 3


def test_brute_force_guard():
    pool = Pool(np.arange(60, dtype=float)[:, None])
    with pytest.raises(TooLarge):
        brute_force_kmedian(pool, 10)


def test_min_balance_examples(four_points):
    ds, pg = four_points
    res = brute_force_min_balance(ds, 2, pg)
    assert res.best_value == 0.0 and res.evaluated == 6
    # two coincident-point groups: every subset keeps the mix perfect
    mixed = Dataset(np.array([[0.0], [0.0], [5.0], [5.0]]))
    assert brute_force_min_balance(mixed, 2, ProtectedGroups(np.array([0, 1, 0, 1]))).best_value == 1.0


def test_theta_and_omega_oracles_agree(rng):
    for _ in range(100):
        pool = Pool(rng.uniform(0, 10, size=(int(rng.integers(2, 10)), int(rng.integers(1, 3)))))
        k = int(rng.integers(1, len(pool) + 1))
        ph = make_phantom(pool)
        a = brute_force_kmedian(pool, k)
        b = brute_force_max_theta(pool, k, ph)
        total = pool.total_weight * ph.virtual_distance
        assert a.best_value + b.best_value == pytest.approx(total, abs=1e-9)
        assert omega(b.best_set, pool) == pytest.approx(a.best_value, abs=1e-9)


def test_oracles_are_deterministic(rng):
    pool = Pool(rng.uniform(0, 10, size=(9, 2)))
    a, b = brute_force_max_theta(pool, 3), brute_force_max_theta(pool, 3)
    assert a.best_set.source_index == b.best_set.source_index
    assert a.best_value == b.best_value


def test_well_separated_examples():
    assert is_well_separated(line(0, 1, 10, 11), [[0, 1], [2, 3]])
    assert not is_well_separated(line(0, 5, 6, 11), [[0, 1], [2, 3]])
    assert is_well_separated(line(0, 1, 10, 11), np.array([0, 0, 1, 1]))
    # equality is not separation
    assert not is_well_separated(line(0, 1, 2, 3), [[0, 1], [2, 3]])
    with pytest.raises(ValueError):
        is_well_separated(line(0, 1, 2), [[0], [1]])


def test_well_separated_flips_at_threshold():
    # blobs {0, 2} and {2 + g, 4 + g}: intra 2, inter g
    for g in np.linspace(0.25, 4.0, 16):
        ds = line(0, 2, 2 + g, 4 + g)
        assert is_well_separated(ds, [[0, 1], [2, 3]]) == (g > 2.0)


def test_approximation_ratio_examples():
    pool = Pool(line(0, 1, 10, 11).points)
    opt = brute_force_kmedian(pool, 2).best_set
    ratio, holds = check_approximation_ratio(pool, opt)
    assert ratio == 1.0 and holds
    ratio, holds = check_approximation_ratio(pool, greedy_centers(pool, 2, make_phantom(pool)))
    assert holds


def test_approximation_ratio_negative_control():
    # the two far points of one blob while the other blob holds most of the mass
    pts = np.array([[0.0], [0.1], [100.0]] + [[200.0 + 0.01 * i] for i in range(6)])
    pool = Pool(pts)
    bad = CenterSet(np.array([[0.0], [0.1]]), (0, 1))
    ratio, holds = check_approximation_ratio(pool, bad)
    assert ratio < 1 - 1 / math.e
    assert not holds
