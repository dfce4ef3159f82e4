"""Hand-built models used across the suites."""

from fractions import Fraction

from qualmdp.kappa import INF, KappaRanking, QualitativeDistribution, order_of
from qualmdp.qmdp import QmdpModel
from qualmdp.qpomdp import QpomdpModel
from qualmdp.series import Series, make_series

D = 16
HALF = Fraction(1, 2)


def c(q, degree=D):
    return Series.const(q, degree)


def two_state(with_b=False, alpha=HALF, degree=D):
    """State 0 ('s1'): control a reaches goal (rank 0) or stays (rank 1);
    control b stays (rank 0) or reaches goal (rank 1).  State 1 is the goal."""
    controls = ((0, 1) if with_b else (0,), (2,))
    trans = {(0, 0): KappaRanking((1, 0)), (1, 2): KappaRanking((INF, 0))}
    costs = {(0, 0): c(1, degree), (1, 2): c(0, degree)}
    if with_b:
        trans[(0, 1)] = KappaRanking((0, 1))
        costs[(0, 1)] = c(1, degree)
    return QmdpModel(2, controls, trans, costs, alpha, degree,
                     state_names=("s1", "goal"), control_names=("a", "b", "stay"), goals=(1,))


def single_state(cost=1, alpha=HALF, degree=D):
    dist = QualitativeDistribution((c(1, degree),), degree)
    return QmdpModel(1, ((0,),), {(0, 0): dist}, {(0, 0): c(cost, degree)}, alpha, degree)


def deterministic_chain(alpha=HALF):
    rows = {(0, 0): KappaRanking((INF, 0)), (1, 0): KappaRanking((INF, 0))}
    costs = {(0, 0): c(1), (1, 0): c(0)}
    return QmdpModel(2, ((0,), (0,)), rows, costs, alpha, D, goals=(1,))


def small_pomdp(cap=12):
    """States 1,2 (indices 0,1), one control, observations o1,o2."""
    trans = {(0, 0): KappaRanking((0, 1)), (1, 0): KappaRanking((INF, 0))}
    obs = {(0, 0): KappaRanking((0, 1)), (1, 0): KappaRanking((1, 0))}
    costs = {(0, 0): c(1), (1, 0): c(0)}
    return QpomdpModel(2, ((0,), (0,)), trans, obs, costs, HALF, 2, D, cap)


def fully_observable(model: QmdpModel) -> QpomdpModel:
    """Wrap a kappa-specified QMDP with observations that reveal the state."""
    n = model.n
    trans = {k: r if isinstance(r, KappaRanking) else order_of(r) for k, r in model.transitions.items()}
    obs = {}
    for u in range(len(model.control_names)):
        for i in range(n):
            obs[(i, u)] = KappaRanking(tuple(0 if o == i else INF for o in range(n)))
    return QpomdpModel(n, model.controls, trans, obs, dict(model.costs),
                       model.discount, n, model.max_degree, model.kappa_cap,
                       model.state_names, model.control_names,
                       tuple(f"at_{s}" for s in model.state_names), model.goals)


def geometric(ratio, degree=D):
    return make_series([(k, ratio**k) for k in range(degree + 1)], degree)
