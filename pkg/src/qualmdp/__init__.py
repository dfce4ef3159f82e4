"""Exact solver for qualitative MDPs and POMDPs over truncated epsilon-series."""

from .kappa import INF, KappaRanking, QualitativeDistribution, compute_counts, embed, order_of, validate_kappa
from .qmdp import (
    QmdpModel,
    bellman_apply,
    choose_rho,
    greedy_policy,
    policy_iterate,
    resolve,
    trajectory_expected_cost,
    value_iterate,
)
from .qpomdp import QpomdpModel, reach, update, value_iterate_belief
from .series import Series, make_series, parse_series, render

__all__ = [
    "INF", "KappaRanking", "QualitativeDistribution", "compute_counts", "embed", "order_of",
    "validate_kappa", "QmdpModel", "bellman_apply", "choose_rho", "greedy_policy", "policy_iterate", "resolve",
    "trajectory_expected_cost", "value_iterate", "QpomdpModel", "reach", "update",
    "value_iterate_belief", "Series", "make_series", "parse_series", "render",
]
