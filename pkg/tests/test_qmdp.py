import random
from dataclasses import replace
from fractions import Fraction

import pytest

from qualmdp.kappa import INF, KappaRanking, QualitativeDistribution
from qualmdp.qmdp import (
    ModelError,
    NonConvergenceError,
    OracleTooLargeError,
    QmdpModel,
    bellman_apply,
    choose_rho,
    contraction_factor,
    distance,
    greedy_policy,
    policy_evaluate,
    policy_iterate,
    q_value,
    resolve,
    restrict_to_policy,
    suboptimality_bound,
    trajectory_expected_cost,
    value_iterate,
    zero_values,
)
from qualmdp.series import Series, make_series
from gen import random_qmdp
from models import D, HALF, c, deterministic_chain, geometric, single_state, two_state

F = Fraction
e = Series.monomial(1, 1, D)


def test_resolve_embeds_kappa_rows():
    m = resolve(two_state())
    assert list(m.transitions[(0, 0)]) == [e, c(1) - e]
    assert list(m.transitions[(1, 2)]) == [c(0), c(1)]


def test_resolve_passes_explicit_rows():
    m = single_state()
    assert resolve(m).transitions == m.transitions


def test_resolve_rejects_bad_rows():
    m = single_state()
    bad = QualitativeDistribution((c(1) - e,), D)
    with pytest.raises(ModelError, match="sum"):
        resolve(replace(m, transitions={(0, 0): bad}))
    with pytest.raises(ModelError, match="discount"):
        resolve(replace(m, discount=F(1)))
    with pytest.raises(ModelError):
        resolve(replace(m, costs={}))


def test_bellman_from_zero_gives_min_cost():
    m = two_state(with_b=True)
    assert bellman_apply(m, zero_values(m)) == (c(1), c(0))


def test_bellman_two_state_hand_value():
    m = two_state()
    TJ = bellman_apply(m, (c(1), c(0)))
    assert TJ == (c(1) + e.scale(HALF), c(0))


def test_bellman_goal_is_fixed():
    m = two_state(with_b=True)
    rng = random.Random(0)
    for _ in range(5):
        J = (make_series([(k, rng.randint(-3, 3)) for k in range(3)], D), c(0))
        assert bellman_apply(m, J)[1] == c(0)


def test_greedy_prefers_a():
    m = two_state(with_b=True)
    J = (c(1), c(0))
    qa, qb = q_value(m, J, 0, 0), q_value(m, J, 0, 1)
    assert qa == c(1) + e.scale(HALF)
    assert qb == c(F(3, 2)) - e.scale(HALF)
    assert (qa - qb) == c(F(-1, 2)) + e
    assert greedy_policy(m, J) == (0, 2)


def test_greedy_tie_goes_to_lowest_id():
    m = two_state(with_b=True)
    m = replace(m, transitions={**m.transitions, (0, 1): m.transitions[(0, 0)]})
    assert greedy_policy(m, (c(5), c(0)))[0] == 0


def test_choose_rho_examples():
    rho, gamma = choose_rho(two_state())
    assert (rho, gamma) == (4, F(3, 4))
    assert contraction_factor(two_state(), 2) == 1
    assert choose_rho(deterministic_chain()) == (2, HALF)
    rho, gamma = choose_rho(two_state(alpha=F(9, 10)))
    assert rho == 32
    assert F(9, 10) * (1 + F(2, 16)) >= 1 > gamma


def test_value_iterate_single_state():
    res = value_iterate(single_state(), tol=F(1, 10**12))
    err = (res.J[0] - c(2)).norm(res.rho)
    assert err <= res.gamma / (1 - res.gamma) * res.residual


def test_value_iterate_two_state_reaches_exact_fixed_point():
    res = value_iterate(two_state(), tol=F(1, 10**30))
    assert res.status == "exact"
    assert res.J == (geometric(HALF), c(0))
    assert res.J[0] == (c(1) - e.scale(HALF)).inverse()


def test_value_iterate_huge_tol_is_one_sweep():
    m = two_state(with_b=True)
    res = value_iterate(m, tol=10**6)
    assert res.iterations == 1
    assert res.J == bellman_apply(m, zero_values(m))


def test_value_iterate_reports_non_convergence():
    with pytest.raises(NonConvergenceError) as info:
        value_iterate(two_state(alpha=F(9, 10)), tol=F(1, 10**9), max_iter=3)
    assert info.value.result.iterations == 3
    assert len(info.value.result.residuals) == 3


def test_value_iterate_rejects_bad_tol():
    with pytest.raises(ValueError):
        value_iterate(two_state(), tol=0)


def test_residuals_decay_by_gamma():
    res = value_iterate(two_state(with_b=True), tol=F(1, 10**12))
    for a, b in zip(res.residuals, res.residuals[1:]):
        assert b <= res.gamma * a


def test_suboptimality_bound_examples():
    m = two_state()
    assert suboptimality_bound(m, 0, 4) == 0
    assert suboptimality_bound(m, F(1, 7), 4) == F(3, 7)
    assert suboptimality_bound(deterministic_chain(), F(1, 1000), 2) == F(1, 1000)


def test_trajectory_oracle_examples():
    m = two_state()
    assert trajectory_expected_cost(m, (0, 2), 0, 2) == c(1) + e.scale(HALF)
    assert trajectory_expected_cost(m, (0, 2), 0, 1) == c(1)
    for N in range(1, 6):
        assert trajectory_expected_cost(m, (0, 2), 1, N).is_zero()


def test_trajectory_oracle_guard():
    with pytest.raises(OracleTooLargeError):
        trajectory_expected_cost(two_state(), (0, 2), 0, 30)
    with pytest.raises(ValueError):
        trajectory_expected_cost(two_state(), (0, 2), 0, 0)


def test_oracle_converges_to_policy_value():
    m = two_state(with_b=True)
    for mu in [(0, 2), (1, 2)]:
        fixed = value_iterate(restrict_to_policy(m, mu), tol=F(1, 10**30))
        rho = fixed.rho
        gaps = [(trajectory_expected_cost(m, mu, 0, N) - fixed.J[0]).norm(rho) for N in range(1, 9)]
        for N, gap in enumerate(gaps, 1):
            assert gap <= fixed.gamma**N * fixed.J[0].norm(rho)
        assert gaps == sorted(gaps, reverse=True)


@pytest.mark.parametrize("seed", range(30))
def test_each_control_contracts(seed):
    rng = random.Random(seed)
    m = resolve(random_qmdp(rng))
    rho, gamma = choose_rho(m)
    J = tuple(make_series([(k, rng.randint(-4, 4)) for k in range(3)], D) for _ in range(m.n))
    H = tuple(make_series([(k, rng.randint(-4, 4)) for k in range(3)], D) for _ in range(m.n))
    bound = gamma * distance(J, H, rho)
    for i, u in m.pairs():
        assert (q_value(m, J, i, u) - q_value(m, H, i, u)).norm(rho) <= bound
    if greedy_policy(m, J) == greedy_policy(m, H):
        assert distance(bellman_apply(m, J), bellman_apply(m, H), rho) <= bound


def fork(alpha=HALF):
    """State 0 picks successor 1 (control 0) or 2 (control 1); 1 and 2 absorb at cost 0."""
    rows = {(0, 0): KappaRanking((INF, 0, INF)), (0, 1): KappaRanking((INF, INF, 0)),
            (1, 0): KappaRanking((INF, 0, INF)), (2, 0): KappaRanking((INF, INF, 0))}
    costs = {k: c(0) for k in rows}
    return QmdpModel(3, ((0, 1), (0,), (0,)), rows, costs, alpha, D)


def test_lexicographic_min_is_not_nonexpansive():
    # J and H differ by 2e in state 2, but a shared e^2 tail decides the norm
    # once the argmin in state 0 flips
    m = fork()
    rho, gamma = choose_rho(m)
    assert (rho, gamma) == (2, HALF)
    tail = make_series([(2, -100)], D)
    J = (c(0), c(0), e + tail)
    H = (c(0), c(0), -e + tail)
    assert greedy_policy(m, J) == (0, 0, 0) and greedy_policy(m, H) == (1, 0, 0)
    assert distance(J, H, rho) == 1
    assert distance(bellman_apply(m, J), bellman_apply(m, H), rho) == F(51, 4)
    # a big enough tail defeats larger rho as well
    big = make_series([(2, -10**6)], D)
    J, H = (c(0), c(0), e + big), (c(0), c(0), -e + big)
    for r in (F(2), F(100), F(1000)):
        assert distance(bellman_apply(m, J), bellman_apply(m, H), r) > gamma * distance(J, H, r)


def test_policy_evaluate_two_state():
    J = policy_evaluate(two_state(), (0, 2))
    assert J == (geometric(HALF), c(0))


def test_policy_evaluate_rejects_inapplicable():
    with pytest.raises(ModelError):
        policy_evaluate(two_state(), (1, 2))


def test_policy_iterate_chain_and_choice():
    J, mu, _ = policy_iterate(two_state(with_b=True))
    assert mu == (0, 2)
    assert bellman_apply(two_state(with_b=True), J) == J
    J, mu, _ = policy_iterate(deterministic_chain())
    assert J == (c(1), c(0))


@pytest.mark.parametrize("seed", range(20))
def test_policy_iterate_matches_value_iteration(seed):
    rng = random.Random(300 + seed)
    m = resolve(random_qmdp(rng, max_n=4, alphas=(HALF,)))
    J, mu, _ = policy_iterate(m)
    assert bellman_apply(m, J) == J
    res = value_iterate(m, tol=F(1, 10**12))
    assert distance(res.J, J, res.rho) <= res.gamma / (1 - res.gamma) * res.residual
    assert mu == greedy_policy(m, J)


@pytest.mark.parametrize("seed", range(15))
def test_greedy_invariant_under_cost_scaling(seed):
    rng = random.Random(100 + seed)
    m = random_qmdp(rng, max_n=4, alphas=(HALF,))
    res = value_iterate(m, tol=F(1, 10**6))
    q = F(rng.randint(1, 9), rng.randint(1, 9))
    scaled = replace(m, costs={k: g.scale(q) for k, g in m.costs.items()})
    J = tuple(v.scale(q) for v in res.J)
    assert greedy_policy(scaled, J) == greedy_policy(m, res.J)


def test_fixed_point_within_tol():
    m = two_state(with_b=True)
    res = value_iterate(m, tol=F(1, 10**9))
    assert distance(bellman_apply(m, res.J), res.J, res.rho) <= F(1, 10**9)


def test_mixed_rows_allowed():
    m = two_state(with_b=True)
    explicit = QualitativeDistribution((c(1) - e, e), D)
    mixed = replace(m, transitions={**m.transitions, (0, 1): explicit})
    assert resolve(mixed).transitions[(0, 1)] == explicit
    value_iterate(mixed)


def test_kappa_rank_above_degree_rejected():
    m = two_state(degree=2)
    bad = replace(m, transitions={**m.transitions, (0, 0): KappaRanking((3, 0))})
    with pytest.raises(ModelError, match="rank above degree"):
        resolve(bad)
