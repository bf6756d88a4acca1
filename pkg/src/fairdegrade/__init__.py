"""Fairness-degrading poisoning attack on k-median clustering."""

from fairdegrade.attack import (
    AdversarialSet,
    AttackOutcome,
    AttackStatus,
    attack_cost,
    epsilon_upper_bound,
    find_adversarial_centroids,
    run_attack,
)
from fairdegrade.clustering import (
    CenterSet,
    PhantomCenter,
    Pool,
    greedy_centers,
    make_phantom,
    omega,
    pam_kmedian,
    theta,
)
from fairdegrade.dataset import (
    Dataset,
    Metric,
    ProtectedGroups,
    diameter,
    distance,
    load_csv,
    minmax_scale,
    subsample,
    write_csv,
)
from fairdegrade.fairness import Assignment, BalanceResult, assign, balance, balance_from_assignment

__version__ = "0.1.0"

__all__ = [
    "AdversarialSet",
    "Assignment",
    "AttackOutcome",
    "AttackStatus",
    "BalanceResult",
    "CenterSet",
    "Dataset",
    "Metric",
    "PhantomCenter",
    "Pool",
    "ProtectedGroups",
    "assign",
    "attack_cost",
    "balance",
    "balance_from_assignment",
    "diameter",
    "distance",
    "epsilon_upper_bound",
    "find_adversarial_centroids",
    "greedy_centers",
    "load_csv",
    "make_phantom",
    "minmax_scale",
    "omega",
    "pam_kmedian",
    "run_attack",
    "subsample",
    "theta",
    "write_csv",
]
