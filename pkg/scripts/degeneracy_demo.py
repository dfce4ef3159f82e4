"""Raw order-of-magnitude Bellman recursion next to the series solution.

On the shipped chain every cost has order 0, so the rank recursion gives both
non-goal states the same value and both controls in s1 the same score, while
the series solution separates them.
"""

import argparse
from pathlib import Path

from qualmdp.baseline import oom_bellman_fixpoint
from qualmdp.kappa import INF, format_rank
from qualmdp.modelio import load
from qualmdp.qmdp import greedy_policy, q_value, resolve, value_iterate
from qualmdp.series import render

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("model", nargs="?", type=Path, default=ROOT / "models" / "chain.qmdp")
    args = ap.parse_args()
    m = load(args.model)
    flat = oom_bellman_fixpoint(m)
    res = value_iterate(m)
    rm = resolve(m)
    S, U = m.state_names, m.control_names
    print(f"{'state':8s} {'oom':>4s}  series")
    for i in range(m.n):
        print(f"{S[i]:8s} {format_rank(flat[i]):>4s}  {render(res.J[i])}")
    print()
    for i in range(m.n):
        if i in m.goals or len(m.controls[i]) < 2:
            continue
        for u in m.controls[i]:
            ranks = [p.order for p in rm.transitions[(i, u)]]
            score = max([m.costs[(i, u)].order] + [r + flat[j] for j, r in enumerate(ranks) if r != INF])
            print(f"{S[i]} {U[u]}: oom score {format_rank(score)}   Q = {render(q_value(m, res.J, i, u))}")
    mu = greedy_policy(m, res.J)
    print("\nseries greedy policy:", " ".join(f"{S[i]}:{U[u]}" for i, u in enumerate(mu)))


if __name__ == "__main__":
    main()
