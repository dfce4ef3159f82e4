"""Qualitative POMDPs with kappa beliefs: min-plus belief updates, reachable
belief enumeration, and value iteration over the resulting belief MDP."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .kappa import INF, KappaRanking, embed, normalize_ranks
from .qmdp import (
    DEFAULT_KAPPA_CAP,
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    Backup,
    IterationResult,
    ModelError,
    backup_greedy,
    backup_iterate,
)
from .series import DEFAULT_DEGREE, Series

DEFAULT_MAX_BELIEFS = 10_000


class InapplicableControlError(ValueError):
    pass


class ImpossibleObservationError(ValueError):
    pass


class DeadEndError(RuntimeError):
    pass


class BeliefExplosionError(RuntimeError):
    pass


@dataclass(frozen=True)
class QpomdpModel:
    """Order-of-magnitude POMDP.

    ``transitions[(i, u)]`` ranks next states; ``observations[(i, u)]`` ranks
    the global observation list for arriving in state ``i`` after ``u``
    (``INF`` outside ``O(i, u)``).
    """

    n: int
    controls: tuple[tuple[int, ...], ...]
    transitions: Mapping[tuple[int, int], KappaRanking]
    observations: Mapping[tuple[int, int], KappaRanking]
    costs: Mapping[tuple[int, int], Series]
    discount: Fraction
    n_obs: int
    max_degree: int = DEFAULT_DEGREE
    kappa_cap: int = DEFAULT_KAPPA_CAP
    state_names: tuple[str, ...] = ()
    control_names: tuple[str, ...] = ()
    obs_names: tuple[str, ...] = ()
    goals: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.state_names:
            object.__setattr__(self, "state_names", tuple(f"s{i}" for i in range(self.n)))
        if not self.control_names:
            m = 1 + max((u for us in self.controls for u in us), default=-1)
            object.__setattr__(self, "control_names", tuple(f"u{u}" for u in range(m)))
        if not self.obs_names:
            object.__setattr__(self, "obs_names", tuple(f"o{o}" for o in range(self.n_obs)))
        object.__setattr__(self, "discount", Fraction(self.discount))

    def pairs(self):
        for i in range(self.n):
            for u in self.controls[i]:
                yield i, u

    def needed_observation_rows(self) -> set[tuple[int, int]]:
        """``(i, u)`` pairs whose observation ranking can ever be consulted."""
        need = set(self.pairs())
        for (j, u), row in self.transitions.items():
            for i in row.support():
                need.add((i, u))
        return need


def model_problems(model: QpomdpModel) -> list[str]:
    out = []
    if not 0 < model.discount < 1:
        out.append(f"discount {model.discount} outside (0, 1)")
    if model.kappa_cap > model.max_degree:
        out.append(f"kappamax {model.kappa_cap} exceeds degree {model.max_degree}")
    if model.kappa_cap < 0:
        out.append("kappamax must be nonnegative")
    if len(model.controls) != model.n:
        return out + ["controls list length differs from state count"]
    for i, us in enumerate(model.controls):
        if not us:
            out.append(f"state {model.state_names[i]} has no controls")
    expected = set(model.pairs())
    for key in set(model.transitions) ^ expected:
        out.append(f"transition rows do not match controls at {key}")
    for key in set(model.costs) ^ expected:
        out.append(f"costs do not match controls at {key}")
    for key, row in model.transitions.items():
        if not isinstance(row, KappaRanking):
            return out + [f"transition row {key} is not a kappa ranking"]
        if len(row) != model.n:
            out.append(f"transition row {key} has wrong length")
    for key in sorted(model.needed_observation_rows() - set(model.observations)):
        i, u = key
        out.append(
            f"missing observation ranking for ({model.state_names[i]}, {model.control_names[u]})"
        )
    for key, row in model.observations.items():
        if len(row) != model.n_obs:
            out.append(f"observation row {key} has wrong length")
    for key, g in model.costs.items():
        if g.max_degree != model.max_degree:
            out.append(f"cost at {key} has wrong max_degree")
    return out


def check_model(model: QpomdpModel) -> QpomdpModel:
    problems = model_problems(model)
    if problems:
        raise ModelError("; ".join(problems))
    return model


def make_belief(model: QpomdpModel, ranks: Sequence) -> KappaRanking:
    """Normalize and clamp raw ranks into a belief."""
    if len(ranks) != model.n:
        raise ValueError(f"belief has {len(ranks)} entries, expected {model.n}")
    return KappaRanking(normalize_ranks(ranks, model.kappa_cap))


def controls_for(model: QpomdpModel, k: KappaRanking) -> tuple[int, ...]:
    """Controls applicable in every plausible (finite-rank) state."""
    common = None
    for i in k.support():
        us = set(model.controls[i])
        common = us if common is None else common & us
    return tuple(sorted(common or ()))


def _require(model: QpomdpModel, k: KappaRanking, u: int):
    if u not in controls_for(model, k):
        raise InapplicableControlError(
            f"control {model.control_names[u]} is not applicable in every plausible state"
        )


def predict(model: QpomdpModel, k: KappaRanking, u: int) -> KappaRanking:
    """``k_u(i) = min_j k(j) + psi_{j,u}(i)``."""
    _require(model, k, u)
    out = [INF] * model.n
    for j in k.support():
        row = model.transitions[(j, u)]
        for i in row.support():
            out[i] = min(out[i], k[j] + row[i])
    return KappaRanking(tuple(out))


def _obs_row(model: QpomdpModel, i: int, u: int) -> KappaRanking:
    try:
        return model.observations[(i, u)]
    except KeyError:
        raise ModelError(f"no observation ranking for state {i} under control {u}") from None


def obs_rank(model: QpomdpModel, k_u: KappaRanking, u: int) -> KappaRanking:
    """``k^u(o) = min_i k_u(i) + theta_{i,u}(o)`` over the global observations."""
    out = [INF] * model.n_obs
    for i in k_u.support():
        row = _obs_row(model, i, u)
        for o in row.support():
            out[o] = min(out[o], k_u[i] + row[o])
    return KappaRanking(tuple(out))


def observation_support(model: QpomdpModel, k: KappaRanking, u: int) -> tuple[int, ...]:
    return obs_rank(model, predict(model, k, u), u).support()


def update(model: QpomdpModel, k: KappaRanking, u: int, o: int, *, _pred=None, _obs=None) -> KappaRanking:
    """``k_u^o(i) = k_u(i) + theta_{i,u}(o) - k^u(o)``, clamped at the cap."""
    k_u = _pred if _pred is not None else predict(model, k, u)
    k_obs = _obs if _obs is not None else obs_rank(model, k_u, u)
    denom = k_obs[o]
    if denom == INF:
        raise ImpossibleObservationError(
            f"observation {model.obs_names[o]} has rank inf after {model.control_names[u]}"
        )
    out = []
    for i in range(model.n):
        if k_u[i] == INF:
            out.append(INF)
            continue
        t = _obs_row(model, i, u)[o]
        out.append(INF if t == INF else min(k_u[i] + t - denom, model.kappa_cap))
    return KappaRanking(tuple(out))


def belief_cost(model: QpomdpModel, k: KappaRanking, u: int) -> Series:
    """Expected cost of ``u`` under the embedding of ``k``."""
    _require(model, k, u)
    weights = embed(k, model.max_degree)
    acc = Series.zero(model.max_degree)
    for i in k.support():
        acc = acc + model.costs[(i, u)] * weights[i]
    return acc


def observation_probabilities(model: QpomdpModel, k_obs: KappaRanking) -> dict[int, Series]:
    """Embedding of the observation ranking restricted to its support.

    Ranks above the belief cap are clamped so the embedding fits the
    truncation window.
    """
    support = k_obs.support()
    clamped = KappaRanking(tuple(min(k_obs[o], model.kappa_cap) for o in support))
    dist = embed(clamped, model.max_degree)
    return dict(zip(support, dist))


@dataclass
class BeliefSpaceIndex:
    beliefs: list[KappaRanking]
    controls: list[tuple[int, ...]]
    # (belief id, control) -> tuple of (observation, successor id, probability)
    transitions: dict[tuple[int, int], tuple[tuple[int, int, Series], ...]]
    costs: dict[tuple[int, int], Series]
    ids: dict[tuple, int] = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.beliefs)

    def id_of(self, k: KappaRanking | Sequence) -> int:
        ranks = k.ranks if isinstance(k, KappaRanking) else tuple(k)
        return self.ids[ranks]


def reach(model: QpomdpModel, k0: KappaRanking | Sequence, max_beliefs: int = DEFAULT_MAX_BELIEFS) -> BeliefSpaceIndex:
    """Breadth-first closure of ``k0`` under all applicable (control, observation) updates."""
    check_model(model)
    k0 = make_belief(model, k0.ranks if isinstance(k0, KappaRanking) else k0)
    beliefs = [k0]
    ids = {k0.ranks: 0}
    controls: list[tuple[int, ...]] = []
    transitions = {}
    costs = {}
    queue = deque([0])
    while queue:
        b = queue.popleft()
        k = beliefs[b]
        us = controls_for(model, k)
        if not us:
            raise DeadEndError(f"belief {b} ({k.ranks}) has no applicable control")
        controls.append(us)
        for u in us:
            k_u = predict(model, k, u)
            k_obs = obs_rank(model, k_u, u)
            probs = observation_probabilities(model, k_obs)
            row = []
            for o, p in probs.items():
                nxt = update(model, k, u, o, _pred=k_u, _obs=k_obs)
                if nxt.ranks not in ids:
                    if len(beliefs) >= max_beliefs:
                        raise BeliefExplosionError(
                            f"more than {max_beliefs} beliefs; frontier size {len(queue) + 1}"
                        )
                    ids[nxt.ranks] = len(beliefs)
                    beliefs.append(nxt)
                    queue.append(ids[nxt.ranks])
                row.append((o, ids[nxt.ranks], p))
            transitions[(b, u)] = tuple(row)
            costs[(b, u)] = belief_cost(model, k, u)
    return BeliefSpaceIndex(beliefs, controls, transitions, costs, ids)


def as_backup(model: QpomdpModel, index: BeliefSpaceIndex) -> Backup:
    rows = {key: tuple((succ, p) for _, succ, p in row) for key, row in index.transitions.items()}
    return Backup(tuple(index.controls), rows, index.costs, model.discount, model.max_degree)


@dataclass
class BeliefSolution:
    result: IterationResult
    policy: tuple[int, ...]

    @property
    def J(self):
        return self.result.J


def value_iterate_belief(model: QpomdpModel, index: BeliefSpaceIndex, tol=DEFAULT_TOL,
                         max_iter=DEFAULT_MAX_ITER) -> BeliefSolution:
    """Value iteration on the belief MDP.

    The contraction radius is searched over the rows present in ``index``;
    each observation contributes its own norm term.
    """
    bk = as_backup(model, index)
    result = backup_iterate(bk, None, tol, max_iter)
    return BeliefSolution(result, backup_greedy(bk, result.J))
