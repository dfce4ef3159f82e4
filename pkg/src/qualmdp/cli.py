"""Command-line driver.

Exit codes: 0 success, 2 validation error, 3 non-convergence, 4 belief
explosion, 1 anything else.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction

from . import baseline, qmdp, qpomdp
from .kappa import KappaError, KappaRanking, embed, format_rank
from .modelio import (
    ParseError,
    belief_names,
    format_belief,
    load,
    parse_belief,
    parse_policy,
    serialize_index,
    serialize_policy,
    serialize_values,
)
from .qmdp import ModelError, NonConvergenceError, QmdpModel
from .qpomdp import BeliefExplosionError, QpomdpModel
from .series import SeriesError, format_rational, parse_rational, render

EXIT_OK, EXIT_ERROR, EXIT_INVALID, EXIT_NONCONVERGENCE, EXIT_EXPLOSION = 0, 1, 2, 3, 4


def _rational(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _need_qmdp(model, cmd):
    if not isinstance(model, QmdpModel):
        raise ModelError(f"'{cmd}' needs a qmdp file")
    return model


def cmd_validate(args, out):
    model = load(args.file)
    kind = "qpomdp" if isinstance(model, QpomdpModel) else "qmdp"
    print(f"ok {kind} states={model.n} controls={len(model.control_names)}", file=out)


def _print_row(out, label, ranking: KappaRanking, names, degree):
    dist = embed(ranking, degree)
    for j, p in enumerate(dist):
        if p:
            print(f"zeta {label} {names[j]} = {render(p)}", file=out)
    print(f"sum {label} = {render(dist.total())}", file=out)


def cmd_embed(args, out):
    model = load(args.file)
    S, U = model.state_names, model.control_names
    for (i, u), row in sorted(model.transitions.items()):
        if isinstance(row, KappaRanking):
            _print_row(out, f"{S[i]} {U[u]}", row, S, model.max_degree)
    if isinstance(model, QpomdpModel):
        for (i, u), row in sorted(model.observations.items()):
            _print_row(out, f"obs {S[i]} {U[u]}", row, model.obs_names, model.max_degree)


def _report(out, res: qmdp.IterationResult):
    print(f"status {res.status}", file=out)
    print(f"iterations {res.iterations}", file=out)
    print(f"residual {format_rational(res.residual)}", file=out)
    print(f"rho {format_rational(res.rho)}", file=out)
    print(f"gamma {format_rational(res.gamma)}", file=out)
    bound = res.gamma / (1 - res.gamma) * res.residual
    print(f"bound {format_rational(bound)}", file=out)


def cmd_solve(args, out):
    model = _need_qmdp(load(args.file), "solve")
    res = qmdp.value_iterate(model, None, args.tol, args.max_iter)
    mu = qmdp.greedy_policy(model, res.J)
    out.write(serialize_values(res.J, model.state_names))
    out.write(serialize_policy(mu, model.state_names, model.control_names))
    _report(out, res)


def cmd_solve_belief(args, out):
    model = load(args.file)
    if not isinstance(model, QpomdpModel):
        raise ModelError("'solve-belief' needs a qpomdp file")
    k0 = parse_belief(args.init, model.state_names)
    index = qpomdp.reach(model, k0, args.max_beliefs)
    sol = qpomdp.value_iterate_belief(model, index, args.tol, args.max_iter)
    out.write(serialize_index(model, index))
    names = belief_names(index)
    out.write(serialize_values(sol.J, names))
    out.write(serialize_policy(sol.policy, names, model.control_names))
    _report(out, sol.result)


def cmd_instantiate(args, out):
    model = _need_qmdp(load(args.file), "instantiate")
    m = baseline.instantiate(model, args.epsilon)
    S, U = model.state_names, model.control_names
    print(f"epsilon {format_rational(args.epsilon)}", file=out)
    for (i, u) in sorted(m.probs):
        print(f"cost {S[i]} {U[u]} {format_rational(m.costs[(i, u)])}", file=out)
        for j, p in enumerate(m.probs[(i, u)]):
            if p:
                print(f"prob {S[i]} {U[u]} {S[j]} {format_rational(p)}", file=out)
    sol = baseline.numeric_value_iterate(m, args.tol, args.max_iter)
    for s, v in zip(S, sol.J):
        print(f"J {s} = {format_rational(v)}", file=out)
    out.write(serialize_policy(sol.policy, S, U))
    print(f"iterations {sol.iterations}", file=out)
    print(f"residual {format_rational(sol.residual)}", file=out)


def cmd_agree(args, out):
    model = _need_qmdp(load(args.file), "agree")
    res = qmdp.value_iterate(model, None, args.tol, args.max_iter)
    qual_mu = qmdp.greedy_policy(model, res.J)
    target = None if args.unanchored else qual_mu
    eps0, num_mu = baseline.find_agreement_epsilon(model, max_halvings=args.max_halvings, target=target)
    S, U = model.state_names, model.control_names
    print(f"epsilon {format_rational(eps0)}", file=out)
    for i, s in enumerate(S):
        print(f"mu {s} numeric={U[num_mu[i]]} qualitative={U[qual_mu[i]]}", file=out)
    print(f"agree {'yes' if num_mu == qual_mu else 'no'}", file=out)


def cmd_oom(args, out):
    model = _need_qmdp(load(args.file), "oom")
    flat = baseline.oom_bellman_fixpoint(model)
    res = qmdp.value_iterate(model, None, args.tol, args.max_iter)
    S = model.state_names
    for i, s in enumerate(S):
        print(f"Jo {s} = {format_rank(flat[i])}    J {s} = {render(res.J[i])}", file=out)
    non_goal = [i for i in range(model.n) if i not in model.goals]
    print(f"distinct oom values (non-goal) {len({flat[i] for i in non_goal})}", file=out)
    print(f"distinct series values (non-goal) {len({res.J[i] for i in non_goal})}", file=out)


def cmd_oracle(args, out):
    model = _need_qmdp(load(args.file), "oracle")
    mu = parse_policy(args.policy, model)
    S = model.state_names
    starts = range(model.n) if args.start is None else [S.index(args.start)]
    for i in starts:
        v = qmdp.trajectory_expected_cost(model, mu, i, args.horizon)
        print(f"E {S[i]} N={args.horizon} = {render(v)}", file=out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qualmdp", description="Qualitative MDP/POMDP solver")
    sub = p.add_subparsers(dest="cmd", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("file")
        sp.set_defaults(fn=fn)
        return sp

    def solver_opts(sp):
        sp.add_argument("--tol", type=_rational, default=qmdp.DEFAULT_TOL)
        sp.add_argument("--max-iter", type=int, default=qmdp.DEFAULT_MAX_ITER)

    add("validate", cmd_validate, "parse and validate a model file")
    add("embed", cmd_embed, "print the embedding of every kappa row")
    sp = add("solve", cmd_solve, "value iteration on a qmdp")
    solver_opts(sp)
    sp.add_argument("--j0", choices=["zero"], default="zero")
    sp = add("solve-belief", cmd_solve_belief, "value iteration over reachable kappa beliefs")
    solver_opts(sp)
    sp.add_argument("--init", required=True, help="belief such as 's1:0 s2:1 s3:inf'")
    sp.add_argument("--max-beliefs", type=int, default=qpomdp.DEFAULT_MAX_BELIEFS)
    sp = add("instantiate", cmd_instantiate, "evaluate at a concrete epsilon and solve numerically")
    solver_opts(sp)
    sp.add_argument("--epsilon", type=_rational, required=True)
    sp = add("agree", cmd_agree, "find an epsilon where numeric and qualitative policies agree")
    solver_opts(sp)
    sp.add_argument("--max-halvings", type=int, default=20)
    sp.add_argument("--unanchored", action="store_true",
                    help="stop at the first repeated numeric policy, ignoring the qualitative one")
    sp = add("oom", cmd_oom, "raw order-of-magnitude Bellman fixpoint next to the series solution")
    solver_opts(sp)
    sp = add("oracle", cmd_oracle, "trajectory-enumeration expected cost of a policy")
    sp.add_argument("--policy", required=True, help="e.g. 's1:a goal:stay'")
    sp.add_argument("--horizon", type=int, required=True)
    sp.add_argument("--start", default=None)
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        args.fn(args, out)
    except (ParseError, ModelError, KappaError, SeriesError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NonConvergenceError, baseline.NoAgreementError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except BeliefExplosionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EXPLOSION
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
