"""Numeric oracles: evaluate series at a concrete epsilon, solve the resulting
MDP in exact rationals, Bayesian belief updates, the policy-agreement search,
and the raw order-of-magnitude Bellman recursion."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .kappa import INF
from .qmdp import DEFAULT_MAX_ITER, DEFAULT_TOL, NonConvergenceError, QmdpModel, resolve
from .qpomdp import ImpossibleObservationError, QpomdpModel
from .kappa import embed


class EpsilonTooLargeError(ValueError):
    pass


class NoAgreementError(RuntimeError):
    pass


@dataclass(frozen=True)
class NumericMdp:
    n: int
    controls: tuple[tuple[int, ...], ...]
    probs: Mapping[tuple[int, int], tuple[Fraction, ...]]
    costs: Mapping[tuple[int, int], Fraction]
    discount: Fraction

    def problems(self) -> list[str]:
        out = []
        if not 0 < self.discount < 1:
            out.append(f"discount {self.discount} outside (0, 1)")
        for key, row in self.probs.items():
            if any(not 0 <= p <= 1 for p in row):
                out.append(f"row {key} has a mass outside [0, 1]")
            if sum(row) != 1:
                out.append(f"row {key} sums to {sum(row)}")
        return out


def instantiate(model: QmdpModel, eps0) -> NumericMdp:
    """Evaluate every series of the resolved model at ``eps0``."""
    eps0 = Fraction(eps0)
    if not model.is_resolved():
        model = resolve(model)
    probs = {}
    for key, dist in model.transitions.items():
        row = tuple(p.evaluate(eps0) for p in dist)
        if any(not 0 <= p <= 1 for p in row):
            raise EpsilonTooLargeError(f"row {key} leaves [0, 1] at epsilon {eps0}")
        probs[key] = row
    costs = {key: g.evaluate(eps0) for key, g in model.costs.items()}
    m = NumericMdp(model.n, model.controls, probs, costs, model.discount)
    problems = m.problems()
    if problems:
        raise EpsilonTooLargeError("; ".join(problems))
    return m


def numeric_q(m: NumericMdp, J: Sequence[Fraction], i: int, u: int) -> Fraction:
    row = m.probs[(i, u)]
    return m.costs[(i, u)] + m.discount * sum(p * J[j] for j, p in enumerate(row) if p)


def numeric_greedy(m: NumericMdp, J: Sequence[Fraction]) -> tuple[int, ...]:
    policy = []
    for i in range(m.n):
        best_u, best_q = None, None
        for u in m.controls[i]:
            q = numeric_q(m, J, i, u)
            if best_q is None or q < best_q:
                best_u, best_q = u, q
        policy.append(best_u)
    return tuple(policy)


@dataclass
class NumericSolution:
    J: tuple[Fraction, ...]
    policy: tuple[int, ...]
    iterations: int
    residual: Fraction
    converged: bool = True


def numeric_value_iterate(m: NumericMdp, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, J0=None) -> NumericSolution:
    """Exact-rational value iteration with sup-norm residual stopping."""
    tol = Fraction(tol)
    J = tuple(J0) if J0 is not None else (Fraction(0),) * m.n
    r = Fraction(0)
    for k in range(1, max_iter + 1):
        nxt = tuple(min(numeric_q(m, J, i, u) for u in m.controls[i]) for i in range(m.n))
        r = max(abs(a - b) for a, b in zip(nxt, J))
        J = nxt
        if r <= tol:
            return NumericSolution(J, numeric_greedy(m, J), k, r)
    raise NonConvergenceError(_numeric_report(m, J, max_iter, r))


def _numeric_report(m, J, iterations, r):
    from .qmdp import IterationResult

    return IterationResult(J, iterations, r, Fraction(0), m.discount, "max_iter", [r])


def certified_greedy(m: NumericMdp, tol=Fraction(1, 2**20), max_rounds: int = 40,
                     max_iter: int = DEFAULT_MAX_ITER) -> NumericSolution:
    """Greedy policy whose Q-value ranking is provably that of the exact optimum.

    Iterates with a shrinking tolerance until every state's best Q-value beats
    the runner-up by more than twice the error bound implied by the residual.
    """
    tol = Fraction(tol)
    alpha = m.discount
    sol = numeric_value_iterate(m, tol, max_iter)
    for _ in range(max_rounds):
        err = alpha * alpha / (1 - alpha) * sol.residual
        if _margin(m, sol.J) > 2 * err:
            return sol
        tol /= 2**16
        more = numeric_value_iterate(m, tol, max_iter, sol.J)
        sol = NumericSolution(more.J, more.policy, sol.iterations + more.iterations, more.residual)
    sol.converged = False
    return sol


def _margin(m: NumericMdp, J) -> Fraction | float:
    worst = INF
    for i in range(m.n):
        qs = sorted(numeric_q(m, J, i, u) for u in m.controls[i])
        if len(qs) > 1:
            worst = min(worst, qs[1] - qs[0])
    return worst


def agreement_probes(model: QmdpModel, tol=Fraction(1, 2**20), max_halvings: int = 20):
    """Yield ``(eps0, certified numeric greedy policy)`` for eps0 = 1/4, 1/8, ...

    Probes where some row leaves [0, 1] yield ``(eps0, None)``.
    """
    if not model.is_resolved():
        model = resolve(model)
    eps0 = Fraction(1, 4)
    for _ in range(max_halvings + 1):
        try:
            m = instantiate(model, eps0)
        except EpsilonTooLargeError:
            yield eps0, None
        else:
            yield eps0, certified_greedy(m, tol).policy
        eps0 /= 2


def find_agreement_epsilon(model: QmdpModel, tol=Fraction(1, 2**20), max_halvings: int = 20,
                           target: Sequence[int] | None = None):
    """Halve epsilon from 1/4 until the numeric greedy policy repeats.

    Returns the first epsilon of the stable pair together with its policy.
    With ``target`` (normally the qualitative greedy policy) the repeated
    policy must also equal ``target``; a policy can be stable over several
    halvings and still flip further down when two Q-values are close.
    """
    target = None if target is None else tuple(target)
    prev = None
    for eps0, policy in agreement_probes(model, tol, max_halvings):
        if policy is not None and prev is not None and prev[1] == policy:
            if target is None or policy == target:
                return prev
        prev = None if policy is None else (eps0, policy)
    raise NoAgreementError(f"numeric policy did not stabilize within {max_halvings} halvings")


# Bayesian belief update ------------------------------------------------------

@dataclass(frozen=True)
class PomdpRows:
    """Transition and observation rows for a POMDP over any exact field
    (rationals, or series for the embedded model)."""

    n: int
    n_obs: int
    controls: tuple[tuple[int, ...], ...]
    trans: Mapping[tuple[int, int], tuple]
    obs: Mapping[tuple[int, int], tuple]


def embedded_rows(model: QpomdpModel, eps0=None) -> PomdpRows:
    """Embed every kappa row; optionally evaluate at ``eps0``."""
    D = model.max_degree

    def conv(row):
        dist = tuple(embed(row, D))
        return dist if eps0 is None else tuple(p.evaluate(eps0) for p in dist)

    trans = {k: conv(r) for k, r in model.transitions.items()}
    obs = {k: conv(r) for k, r in model.observations.items()}
    return PomdpRows(model.n, model.n_obs, model.controls, trans, obs)


def bayes_update(rows: PomdpRows, x: Sequence, u: int, o: int):
    """Returns ``(x_u^o, p_{x,u}(o))`` computed exactly."""
    zero = x[0] * 0
    x_u = [zero] * rows.n
    for j, xj in enumerate(x):
        if not xj:
            continue
        if u not in rows.controls[j]:
            raise ValueError(f"control {u} not applicable in state {j}")
        for i, p in enumerate(rows.trans[(j, u)]):
            if p:
                x_u[i] = x_u[i] + xj * p
    p_o = zero
    for i in range(rows.n):
        if x_u[i]:
            p_o = p_o + x_u[i] * rows.obs[(i, u)][o]
    if not p_o:
        raise ImpossibleObservationError(f"observation {o} has probability zero")
    post = []
    for i in range(rows.n):
        post.append(x_u[i] * rows.obs[(i, u)][o] / p_o if x_u[i] else zero)
    return post, p_o


# order-of-magnitude Bellman recursion ------------------------------------------

def oom_bellman_fixpoint(model: QmdpModel, goals: Sequence[int] | None = None, cap: int | None = None):
    """Greatest fixpoint of ``J(i) = min_u max{g°, max_j (p° + J(j))}``.

    The inner max runs over possible successors only.  ``goals`` are pinned
    at 0; finite values are capped at ``cap`` (default: the model's kappa cap).
    """
    goals = tuple(model.goals if goals is None else goals)
    if not goals:
        raise ValueError("at least one zero-anchored goal state is required")
    cap = model.kappa_cap if cap is None else cap
    if not model.is_resolved():
        model = resolve(model)
    ranks = {key: [p.order for p in dist] for key, dist in model.transitions.items()}
    J = [0 if i in goals else INF for i in range(model.n)]
    changed = True
    while changed:
        changed = False
        new = list(J)
        for i in range(model.n):
            if i in goals:
                continue
            best = INF
            for u in model.controls[i]:
                worst = model.costs[(i, u)].order
                for j, r in enumerate(ranks[(i, u)]):
                    if r != INF:
                        worst = max(worst, r + J[j])
                best = min(best, worst)
            if best != INF:
                best = min(best, cap)
            if best != J[i]:
                new[i] = best
                changed = True
        J = new
    return tuple(J)
