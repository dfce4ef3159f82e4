"""Count how often the DP operator fails the per-sweep contraction bound.

The min over controls uses the lexicographic series order while distances use
the rho-norm; when the argmin flips between two value functions the change in
the minimum can exceed gamma times their distance.  Prints the violations on
random models and on a three-state fork where the ratio is unbounded.
"""

import argparse
import random
import sys
from fractions import Fraction
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from gen import random_qmdp  # noqa: E402
from qualmdp.kappa import INF, KappaRanking  # noqa: E402
from qualmdp.qmdp import (  # noqa: E402
    NonConvergenceError,
    QmdpModel,
    bellman_apply,
    choose_rho,
    distance,
    value_iterate,
)
from qualmdp.series import Series, make_series  # noqa: E402

D = 16


def fork() -> QmdpModel:
    rows = {(0, 0): KappaRanking((INF, 0, INF)), (0, 1): KappaRanking((INF, INF, 0)),
            (1, 0): KappaRanking((INF, 0, INF)), (2, 0): KappaRanking((INF, INF, 0))}
    costs = {k: Series.zero(D) for k in rows}
    return QmdpModel(3, ((0, 1), (0,), (0,)), rows, costs, Fraction(1, 2), D)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--models", type=int, default=200)
    ap.add_argument("--sweeps", type=int, default=12)
    ap.add_argument("--seed", type=int, default=4)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    bad = []
    worst = Fraction(0)
    for t in range(args.models):
        m = random_qmdp(rng)
        try:
            res = value_iterate(m, max_iter=args.sweeps)
        except NonConvergenceError as exc:
            res = exc.result
        r = res.residuals
        ratios = [b / a for a, b in zip(r, r[1:]) if a]
        if any(x > res.gamma for x in ratios):
            bad.append(t)
            worst = max(worst, max(ratios) / res.gamma)
    print(f"residual growth above gamma on {len(bad)} of {args.models} models {bad}")
    if bad:
        print(f"worst ratio / gamma = {float(worst):.3f}")

    m = fork()
    rho, gamma = choose_rho(m)
    e = Series.monomial(1, 1, D)
    zero = Series.zero(D)
    for tail in (1, 100, 10**4):
        t = make_series([(2, -tail)], D)
        J, H = (zero, zero, e + t), (zero, zero, -e + t)
        ratio = distance(bellman_apply(m, J), bellman_apply(m, H), rho) / distance(J, H, rho)
        print(f"fork rho={rho} gamma={gamma} tail={tail}: dist(TJ,TH)/dist(J,H) = {ratio}")


if __name__ == "__main__":
    main()
