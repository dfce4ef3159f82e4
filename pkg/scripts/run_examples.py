"""Validate and solve every shipped model, printing a one-line summary each."""

import argparse
import time
from pathlib import Path

from qualmdp import qmdp, qpomdp
from qualmdp.kappa import INF
from qualmdp.modelio import load
from qualmdp.qpomdp import QpomdpModel
from qualmdp.series import render

ROOT = Path(__file__).resolve().parents[1]


def summarize(path: Path) -> str:
    model = load(path)
    start = time.perf_counter()
    if isinstance(model, QpomdpModel):
        # uniform over the non-goal states
        k0 = tuple(INF if i in model.goals else 0 for i in range(model.n))
        index = qpomdp.reach(model, k0)
        sol = qpomdp.value_iterate_belief(model, index)
        res, value = sol.result, sol.J[0]
        extra = f"beliefs={len(index)}"
    else:
        res = qmdp.value_iterate(model)
        value = res.J[0]
        extra = "policy=" + ",".join(model.control_names[u] for u in qmdp.greedy_policy(model, res.J))
    took = time.perf_counter() - start
    return (f"{path.name:24s} {res.status:9s} sweeps={res.iterations:4d} rho={res.rho} "
            f"{extra}  J0={render(value)[:60]}  ({took:.2f}s)")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("models", nargs="*", type=Path)
    args = ap.parse_args()
    paths = args.models or sorted((ROOT / "models").glob("*.q*"))
    for path in paths:
        print(summarize(path))


if __name__ == "__main__":
    main()
