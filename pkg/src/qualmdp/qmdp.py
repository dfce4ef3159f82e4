"""Qualitative MDPs: model, DP operator, value iteration, greedy policies and a
trajectory-enumeration oracle for finite-horizon costs."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping, Sequence

from .kappa import KappaRanking, QualitativeDistribution, embed
from .series import DEFAULT_DEGREE, Series

DEFAULT_TOL = Fraction(1, 10**9)
DEFAULT_MAX_ITER = 10_000
DEFAULT_KAPPA_CAP = 12
RHO_CAP = 2**64
ORACLE_LIMIT = 10**7

Policy = tuple  # control id per state (or per belief id)
ValueFunction = tuple  # Series per state (or per belief id)


class ModelError(ValueError):
    pass


class NonConvergenceError(RuntimeError):
    """Raised when ``max_iter`` sweeps did not reach the tolerance.

    ``result`` carries the last iterate and its residual history.
    """

    def __init__(self, result: "IterationResult"):
        super().__init__(
            f"no convergence after {result.iterations} sweeps "
            f"(residual {float(result.residual):.3g}, tol not met)"
        )
        self.result = result


class OracleTooLargeError(RuntimeError):
    pass


@dataclass(frozen=True)
class QmdpModel:
    """States ``0..n-1``; controls are global ids indexing ``control_names``.

    ``transitions[(i, u)]`` is either a :class:`KappaRanking` over next states
    or an explicit :class:`QualitativeDistribution`.
    """

    n: int
    controls: tuple[tuple[int, ...], ...]
    transitions: Mapping[tuple[int, int], KappaRanking | QualitativeDistribution]
    costs: Mapping[tuple[int, int], Series]
    discount: Fraction
    max_degree: int = DEFAULT_DEGREE
    state_names: tuple[str, ...] = ()
    control_names: tuple[str, ...] = ()
    goals: tuple[int, ...] = ()
    kappa_cap: int = DEFAULT_KAPPA_CAP

    def __post_init__(self):
        if not self.state_names:
            object.__setattr__(self, "state_names", tuple(f"s{i}" for i in range(self.n)))
        if not self.control_names:
            m = 1 + max((u for us in self.controls for u in us), default=-1)
            object.__setattr__(self, "control_names", tuple(f"u{u}" for u in range(m)))
        object.__setattr__(self, "discount", Fraction(self.discount))

    def pairs(self):
        for i in range(self.n):
            for u in self.controls[i]:
                yield i, u

    def is_resolved(self) -> bool:
        return all(isinstance(t, QualitativeDistribution) for t in self.transitions.values())


def model_problems(model: QmdpModel) -> list[str]:
    out = []
    D = model.max_degree
    if not 0 < model.discount < 1:
        out.append(f"discount {model.discount} outside (0, 1)")
    if len(model.controls) != model.n:
        out.append("controls list length differs from state count")
        return out
    for i, us in enumerate(model.controls):
        if not us:
            out.append(f"state {model.state_names[i]} has no controls")
        if list(us) != sorted(set(us)):
            out.append(f"controls of state {model.state_names[i]} not sorted/unique")
    expected = set(model.pairs())
    for key in set(model.transitions) ^ expected:
        out.append(f"transition rows do not match controls at {key}")
    for key in set(model.costs) ^ expected:
        out.append(f"costs do not match controls at {key}")
    for key in sorted(expected & set(model.transitions)):
        where = f"({model.state_names[key[0]]}, {model.control_names[key[1]]})"
        row = model.transitions[key]
        if isinstance(row, KappaRanking):
            if len(row) != model.n:
                out.append(f"kappa row {where} has wrong length")
            elif row.max_finite() > D:
                out.append(f"kappa row {where} has rank above degree {D}")
        elif isinstance(row, QualitativeDistribution):
            if len(row) != model.n:
                out.append(f"row {where} has wrong length")
            out.extend(f"row {where}: {p}" for p in row.problems())
        else:
            out.append(f"row {where} has unsupported type {type(row).__name__}")
    for key in sorted(expected & set(model.costs)):
        g = model.costs[key]
        if g.max_degree != D:
            out.append(f"cost at {key} has max_degree {g.max_degree}, expected {D}")
    return out


def check_model(model: QmdpModel) -> QmdpModel:
    problems = model_problems(model)
    if problems:
        raise ModelError("; ".join(problems))
    return model


def resolve(model: QmdpModel) -> QmdpModel:
    """Replace every kappa row by its embedding; explicit rows pass through."""
    check_model(model)
    rows = {}
    for key, row in model.transitions.items():
        if isinstance(row, KappaRanking):
            rows[key] = embed(row, model.max_degree)
        else:
            rows[key] = row
    return replace(model, transitions=rows)


# generic finite Bellman system ---------------------------------------------

@dataclass(frozen=True)
class Backup:
    """A finite series-valued Bellman system.

    ``rows[(s, u)]`` lists ``(successor, mass)`` pairs; several pairs may
    share a successor (one per observation in the belief case).
    """

    controls: tuple[tuple[int, ...], ...]
    rows: Mapping[tuple[int, int], tuple[tuple[int, Series], ...]]
    costs: Mapping[tuple[int, int], Series]
    discount: Fraction
    max_degree: int

    @property
    def size(self) -> int:
        return len(self.controls)


def as_backup(model: QmdpModel) -> Backup:
    if not model.is_resolved():
        model = resolve(model)
    rows = {
        key: tuple((j, p) for j, p in enumerate(dist) if p)
        for key, dist in model.transitions.items()
    }
    return Backup(model.controls, rows, dict(model.costs), model.discount, model.max_degree)


def _q(bk: Backup, J: Sequence[Series], s: int, u: int) -> Series:
    acc = Series.zero(bk.max_degree)
    for j, p in bk.rows[(s, u)]:
        acc = acc + p * J[j]
    return bk.costs[(s, u)] + acc.scale(bk.discount)


def _best(bk: Backup, J: Sequence[Series], s: int) -> tuple[int, Series]:
    best_u, best_q = None, None
    for u in bk.controls[s]:
        q = _q(bk, J, s, u)
        if best_q is None or q < best_q:
            best_u, best_q = u, q
    return best_u, best_q


def _check_J(bk: Backup, J: Sequence[Series]):
    if len(J) != bk.size:
        raise ValueError(f"value function has length {len(J)}, expected {bk.size}")
    for v in J:
        if v.max_degree != bk.max_degree:
            raise ValueError("value function max_degree differs from the model")


def backup_apply(bk: Backup, J: Sequence[Series]) -> ValueFunction:
    _check_J(bk, J)
    return tuple(_best(bk, J, s)[1] for s in range(bk.size))


def backup_greedy(bk: Backup, J: Sequence[Series]) -> Policy:
    _check_J(bk, J)
    return tuple(_best(bk, J, s)[0] for s in range(bk.size))


def backup_gamma(bk: Backup, rho) -> Fraction:
    worst = Fraction(0)
    for row in bk.rows.values():
        total = sum((p.norm(rho) for _, p in row), Fraction(0))
        worst = max(worst, total)
    return bk.discount * worst


def backup_choose_rho(bk: Backup) -> tuple[Fraction, Fraction]:
    rho = Fraction(2)
    while rho <= RHO_CAP:
        g = backup_gamma(bk, rho)
        if g < 1:
            return rho, g
        rho *= 2
    raise RuntimeError("no contracting rho found below 2**64")


def distance(J: Sequence[Series], H: Sequence[Series], rho) -> Fraction:
    """Sup over entries of the series norm of ``J - H``."""
    return max(((a - b).norm(rho) for a, b in zip(J, H, strict=True)), default=Fraction(0))


@dataclass
class IterationResult:
    J: ValueFunction
    iterations: int
    residual: Fraction
    rho: Fraction
    gamma: Fraction
    status: str  # "exact", "tolerance" or "max_iter"
    residuals: list[Fraction] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status != "max_iter"


def backup_iterate(bk: Backup, J0=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER) -> IterationResult:
    tol = Fraction(tol)
    if tol <= 0:
        raise ValueError("tol must be positive")
    rho, gamma = backup_choose_rho(bk)
    J = tuple(J0) if J0 is not None else (Series.zero(bk.max_degree),) * bk.size
    _check_J(bk, J)
    residuals = []
    for k in range(1, max_iter + 1):
        nxt = backup_apply(bk, J)
        if nxt == J:
            residuals.append(Fraction(0))
            return IterationResult(nxt, k, Fraction(0), rho, gamma, "exact", residuals)
        r = distance(nxt, J, rho)
        residuals.append(r)
        J = nxt
        if r <= tol:
            return IterationResult(J, k, r, rho, gamma, "tolerance", residuals)
    raise NonConvergenceError(
        IterationResult(J, max_iter, residuals[-1] if residuals else Fraction(0), rho, gamma, "max_iter", residuals)
    )


# QMDP surface ----------------------------------------------------------------

def zero_values(model: QmdpModel) -> ValueFunction:
    return (Series.zero(model.max_degree),) * model.n


def q_value(model: QmdpModel, J: Sequence[Series], i: int, u: int) -> Series:
    return _q(as_backup(model), J, i, u)


def bellman_apply(model: QmdpModel, J: Sequence[Series]) -> ValueFunction:
    return backup_apply(as_backup(model), J)


def greedy_policy(model: QmdpModel, J: Sequence[Series]) -> Policy:
    """Compare-minimal control per state; ties go to the lowest control id."""
    return backup_greedy(as_backup(model), J)


def contraction_factor(model: QmdpModel, rho) -> Fraction:
    return backup_gamma(as_backup(model), rho)


def choose_rho(model: QmdpModel) -> tuple[Fraction, Fraction]:
    """First ``rho`` in 2, 4, 8, ... whose contraction factor is below 1."""
    return backup_choose_rho(as_backup(model))


def value_iterate(model: QmdpModel, J0=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER) -> IterationResult:
    return backup_iterate(as_backup(model), J0, tol, max_iter)


def policy_evaluate(model: QmdpModel, mu: Sequence[int]) -> ValueFunction:
    """Exact ``J_mu`` inside the window: solves ``(I - alpha P_mu) J = g_mu``.

    Gaussian elimination over series, pivoting on the entry of lowest order.
    The constant-term matrix is strictly diagonally dominant, so a pivot of
    order 0 always exists.  Exact when every cost has nonnegative order.
    """
    bk = as_backup(model)
    D, n = bk.max_degree, bk.size
    one, zero = Series.const(1, D), Series.zero(D)
    A = [[zero] * n for _ in range(n)]
    b = []
    for i in range(n):
        u = mu[i]
        if u not in bk.controls[i]:
            raise ModelError(f"control {u} not applicable in state {i}")
        A[i][i] = one
        for j, p in bk.rows[(i, u)]:
            A[i][j] = A[i][j] - p.scale(bk.discount)
        b.append(bk.costs[(i, u)])
    for c in range(n):
        r = min(range(c, n), key=lambda k: A[k][c].order)
        if A[r][c].order != 0:
            raise ModelError("policy evaluation system is singular at epsilon = 0")
        A[c], A[r], b[c], b[r] = A[r], A[c], b[r], b[c]
        inv = A[c][c].inverse()
        for k in range(c + 1, n):
            if A[k][c]:
                f = A[k][c] * inv
                A[k] = [x - f * y for x, y in zip(A[k], A[c])]
                b[k] = b[k] - f * b[c]
    J = [zero] * n
    for c in reversed(range(n)):
        acc = b[c]
        for k in range(c + 1, n):
            if A[c][k]:
                acc = acc - A[c][k] * J[k]
        J[c] = acc * A[c][c].inverse()
    return tuple(J)


def policy_iterate(model: QmdpModel, mu0: Sequence[int] | None = None, max_iter: int = 100):
    """Howard's policy iteration with exact evaluation.

    A state switches control only on a strict improvement.  Returns
    ``(J, mu, iterations)`` where ``mu`` is the lowest-id greedy policy of
    the final ``J``.
    """
    bk = as_backup(model)
    mu = tuple(mu0) if mu0 is not None else tuple(us[0] for us in bk.controls)
    for k in range(1, max_iter + 1):
        J = policy_evaluate(model, mu)
        nxt = []
        for s in range(bk.size):
            best_u, best_q = _best(bk, J, s)
            nxt.append(best_u if best_q < _q(bk, J, s, mu[s]) else mu[s])
        if tuple(nxt) == mu:
            return J, backup_greedy(bk, J), k
        mu = tuple(nxt)
    raise RuntimeError(f"policy iteration did not settle in {max_iter} rounds")


def suboptimality_bound(model: QmdpModel, residual, rho) -> Fraction:
    gamma = contraction_factor(model, rho)
    return gamma / (1 - gamma) * Fraction(residual)


def restrict_to_policy(model: QmdpModel, mu: Sequence[int]) -> QmdpModel:
    """The single-control model that always applies ``mu``."""
    keys = [(i, mu[i]) for i in range(model.n)]
    for i, u in keys:
        if u not in model.controls[i]:
            raise ModelError(f"control {u} not applicable in state {i}")
    return replace(
        model,
        controls=tuple((u,) for _, u in keys),
        transitions={k: model.transitions[k] for k in keys},
        costs={k: model.costs[k] for k in keys},
    )


def trajectory_expected_cost(model: QmdpModel, mu: Sequence[int], start: int, N: int,
                             limit: int = ORACLE_LIMIT) -> Series:
    """Sum of P(tau) * g(tau) over every N-stage mu-trajectory from ``start``.

    Brute-force enumeration, kept independent of the DP operator.
    """
    if N < 1:
        raise ValueError("horizon must be >= 1")
    if not model.is_resolved():
        model = resolve(model)
    D = model.max_degree
    succ = {}
    for i in range(model.n):
        u = mu[i]
        if u not in model.controls[i]:
            raise ModelError(f"control {u} not applicable in state {i}")
        succ[i] = [(j, p) for j, p in enumerate(model.transitions[(i, u)]) if p.sign() > 0]
    branching = max(len(v) for v in succ.values())
    if branching**N > limit:
        raise OracleTooLargeError(f"{branching}^{N} trajectories exceeds the limit {limit}")
    alpha = model.discount
    total = Series.zero(D)
    one = Series.const(1, D)
    stack = [(start, 0, one, Series.zero(D))]
    while stack:
        x, k, prob, cost = stack.pop()
        if k == N:
            total = total + prob * cost
            continue
        cost = cost + model.costs[(x, mu[x])].scale(alpha**k)
        for j, p in succ[x]:
            stack.append((j, k + 1, prob * p, cost))
    return total
