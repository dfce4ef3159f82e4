"""Acceptance suite.  Each criterion prints one PASS/FAIL line; run with
``pytest tests/test_acceptance.py -s`` (or ``python3 tests/test_acceptance.py``)
to see them."""

import random
import sys
import time
from contextlib import contextmanager
from fractions import Fraction
from pathlib import Path

import pytest

from qualmdp.baseline import (
    agreement_probes,
    bayes_update,
    certified_greedy,
    embedded_rows,
    find_agreement_epsilon,
    instantiate,
    oom_bellman_fixpoint,
)
from qualmdp.kappa import INF, KappaRanking, embed, order_of
from qualmdp.modelio import load
from qualmdp.qmdp import (
    NonConvergenceError,
    backup_apply,
    as_backup,
    bellman_apply,
    choose_rho,
    distance,
    greedy_policy,
    policy_iterate,
    q_value,
    resolve,
    trajectory_expected_cost,
    value_iterate,
)
from qualmdp.qpomdp import (
    DeadEndError,
    controls_for,
    obs_rank,
    predict,
    reach,
    update,
    value_iterate_belief,
)
from qualmdp.series import Cmp, Series, compare, inverse, make_series, parse_series
from gen import random_qmdp, random_qpomdp, random_ranks

MODELS = Path(__file__).resolve().parents[1] / "models"
D = 16
F = Fraction


@contextmanager
def criterion(number: int, title: str):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"\nFAIL {number}: {title}", flush=True)
        raise
    took = time.perf_counter() - start
    print(f"\nPASS {number}: {title} ({took:.2f}s)", flush=True)


def test_1_example2_embedding():
    with criterion(1, "Example 2 embedding reproduced exactly"):
        ranking = KappaRanking((0, 0, 1, 1, 5))
        dist = embed(ranking, D)
        top = parse_series("1/2 - 1/2*e - 1/2*e^5", D)
        mid = parse_series("1/2*e - 1/2*e^5", D)
        low = parse_series("2*e^5", D)
        assert tuple(dist) == (top, top, mid, mid, low)
        assert dist.total() == Series.const(1, D)


@pytest.mark.parametrize("degree", [4, 16, 64])
def test_2_example1_inverse(degree):
    with criterion(2, f"Example 1 inverse at degree {degree}"):
        s = make_series([(k, F(1, 2**k)) for k in range(degree + 1)], degree)
        inv = inverse(s)
        assert inv == make_series([(0, 1), (1, F(-1, 2))], degree)
        assert s * inv == Series.const(1, degree)


def test_3_embedding_properties():
    with criterion(3, "1000 random rankings: unit mass, round trip, norm bound"):
        rng = random.Random(3)
        rhos = [F(2), F(10), F(100), F(1000)]
        for _ in range(1000):
            size = rng.randint(1, 8)
            k = KappaRanking(random_ranks(rng, size, max_rank=10))
            dist = embed(k, D)
            assert dist.total() == Series.const(1, D)
            assert order_of(dist) == k
            norms = [sum((p.norm(rho) for p in dist), F(0)) for rho in rhos]
            for rho, total in zip(rhos, norms):
                assert total <= 1 + F(1 + size * 2**size) / (rho - 1)
            assert all(a >= b for a, b in zip(norms, norms[1:]))


def _random_values(rng, n):
    return tuple(
        make_series([(k, F(rng.randint(-5, 5), rng.randint(1, 4))) for k in range(rng.randint(1, 4))], D)
        for _ in range(n)
    )


def test_4_contraction():
    with criterion(4, "200 random QMDPs: DP operator contracts, residuals decay"):
        rng = random.Random(4)
        pair_bad, sweep_bad = [], []
        for t in range(200):
            m = random_qmdp(rng)
            bk = as_backup(m)
            rho, gamma = choose_rho(m)
            assert gamma < 1
            J, H = _random_values(rng, m.n), _random_values(rng, m.n)
            if distance(backup_apply(bk, J), backup_apply(bk, H), rho) > gamma * distance(J, H, rho):
                pair_bad.append(t)
            try:
                res = value_iterate(m, max_iter=12)
            except NonConvergenceError as exc:
                res = exc.result
            assert (res.rho, res.gamma) == (rho, gamma)
            r = res.residuals
            if any(b > gamma * a for a, b in zip(r, r[1:])):
                sweep_bad.append(t)
        print(f"\n  contraction violated on models {pair_bad}; residual growth on models {sweep_bad}")
        assert not pair_bad and not sweep_bad


def test_5_trajectory_oracle():
    with criterion(5, "trajectory oracle matches the two-state value"):
        start = time.perf_counter()
        m = load(MODELS / "two_state.qmdp")
        res = value_iterate(m)
        # the geometric series is the exact fixed point inside the window;
        # value iteration stops once the remaining terms are below tol
        J1 = make_series([(k, F(1, 2**k)) for k in range(D + 1)], D)
        assert bellman_apply(m, (J1, Series.zero(D))) == (J1, Series.zero(D))
        assert (res.J[0] - J1).norm(res.rho) <= res.gamma / (1 - res.gamma) * res.residual
        mu = greedy_policy(m, res.J)
        norm = J1.norm(res.rho)
        for N in range(1, 11):
            v = trajectory_expected_cost(m, mu, 0, N)
            assert v == make_series([(k, F(1, 2**k)) for k in range(N)], D)
            assert (v - J1).norm(res.rho) <= res.gamma**N * norm
        assert trajectory_expected_cost(m, mu, 0, 2) == parse_series("1 + 1/2*e", D)
        assert time.perf_counter() - start < 1


def _clamp_free(m, k, u):
    k_u = predict(m, k, u)
    k_obs = obs_rank(m, k_u, u)
    for o in k_obs.support():
        for i in k_u.support():
            t = m.observations[(i, u)][o]
            if t != INF and k_u[i] + t - k_obs[o] > m.kappa_cap:
                return False
    return True


def test_6_kappa_bayes_commutation():
    with criterion(6, "500 random QPOMDPs: kappa update commutes with Bayes"):
        rng = random.Random(6)
        checked = 0
        instances = 0
        while instances < 500:
            m = random_qpomdp(rng)
            rows = embedded_rows(m)
            k0 = KappaRanking(random_ranks(rng, m.n))
            if not controls_for(m, k0):
                continue
            try:
                index = reach(m, k0)
            except DeadEndError:
                continue
            if not all(_clamp_free(m, k, u) for k in index.beliefs for u in controls_for(m, k)):
                continue
            instances += 1
            for k in index.beliefs:
                x = list(embed(k, D))
                for u in controls_for(m, k):
                    k_obs = obs_rank(m, predict(m, k, u), u)
                    for o in k_obs.support():
                        post, p = bayes_update(rows, x, u, o)
                        assert p.order == k_obs[o]
                        assert order_of(post) == update(m, k, u, o)
                        checked += 1
        assert checked > 500


def _has_tie(m, J):
    for i in range(m.n):
        qs = [q_value(m, J, i, u) for u in m.controls[i]]
        if len(set(qs)) < len(qs):
            return True
    return False


def _first_repeat(probes):
    prev = None
    for eps0, policy in probes:
        if policy is not None and prev == policy:
            return policy
        prev = policy
    return None


def test_7_policy_agreement():
    with criterion(7, "100 random tie-free QMDPs: numeric and qualitative policies agree"):
        rng = random.Random(7)
        done = early = 0
        while done < 100:
            m = resolve(random_qmdp(rng, max_rank=2))
            # exact fixed point inside the window, so ties are decided exactly
            J, qual, _ = policy_iterate(m)
            assert bellman_apply(m, J) == J
            if _has_tie(m, J):
                continue
            eps0, mu = find_agreement_epsilon(m, max_halvings=20, target=qual)
            assert certified_greedy(instantiate(m, eps0)).policy == mu == qual
            if _first_repeat(agreement_probes(m, max_halvings=20)) != qual:
                early += 1
            done += 1
        print(f"\n  {early} models had a numeric policy that repeated before agreeing")


def test_8_fully_observable_reduction():
    with criterion(8, "fully observable QPOMDP reproduces the QMDP values"):
        qm = load(MODELS / "two_state.qmdp")
        pm = load(MODELS / "two_state_fo.qpomdp")
        qres = value_iterate(qm)
        index = reach(pm, (0, INF))
        sol = value_iterate_belief(pm, index)
        tol = F(1, 10**9)
        for i in range(qm.n):
            point = tuple(0 if j == i else INF for j in range(qm.n))
            b = index.id_of(point)
            assert (sol.J[b] - qres.J[i]).norm(qres.rho) <= tol
            assert pm.control_names[sol.policy[b]] == qm.control_names[greedy_policy(qm, qres.J)[i]]


def test_9_degeneracy():
    with criterion(9, "order-of-magnitude equation cannot separate the chain's controls"):
        m = load(MODELS / "chain.qmdp")
        flat = oom_bellman_fixpoint(m)
        res = value_iterate(m)
        non_goal = [i for i in range(m.n) if i not in m.goals]
        assert len({flat[i] for i in non_goal}) == 1
        assert len({res.J[i] for i in non_goal}) == 2
        s1 = m.state_names.index("s1")
        qa, qb = (q_value(m, res.J, s1, u) for u in m.controls[s1])
        assert compare(qa, qb) == Cmp.LT
        # both controls get the same raw order-of-magnitude score
        rm = resolve(m)
        scores = set()
        for u in m.controls[s1]:
            ranks = [p.order for p in rm.transitions[(s1, u)]]
            worst = max([m.costs[(s1, u)].order] + [r + flat[j] for j, r in enumerate(ranks) if r != INF])
            scores.add(worst)
        assert len(scores) == 1


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
