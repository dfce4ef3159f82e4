"""Line-oriented model files and canonical text output.

One record per line, ``#`` starts a comment::

    qmdp                      # or qpomdp
    states s1 goal
    controls s1 a b           # one line per state
    observations o1 o2        # qpomdp only
    discount 1/2
    degree 16                 # optional, default 16
    kappamax 12               # optional, default 12
    goal goal                 # zero or more
    cost s1 a 1 + 1/2*e
    ktrans s1 a goal 0        # kappa row entry; unlisted successors are inf
    ptrans s1 a goal 1 - 1*e  # explicit series row entry (qmdp only)
    kobs s1 a o1 0            # qpomdp only

Costs may also be written ``(<series>) / (<series>)``; the quotient is
expanded into a truncated series when loaded.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .kappa import INF, KappaError, KappaRanking, QualitativeDistribution, format_rank, parse_rank
from .qmdp import DEFAULT_KAPPA_CAP, QmdpModel, check_model as check_qmdp
from .qpomdp import BeliefSpaceIndex, QpomdpModel, check_model as check_qpomdp
from .series import DEFAULT_DEGREE, Series, SeriesError, format_rational, parse_rational, parse_series, render


class ParseError(ValueError):
    def __init__(self, msg: str, line: int | None = None, col: int | None = None):
        where = f"line {line}" + (f", column {col}" if col else "") + ": " if line else ""
        super().__init__(where + msg)
        self.line = line
        self.col = col


HEADER = {"states", "controls", "observations", "discount", "degree", "kappamax"}
BODY = {"goal", "cost", "ktrans", "ptrans", "kobs"}


@dataclass
class _Record:
    line: int
    key: str
    args: list[str]
    rest: str  # raw text after the keyword
    raw: str

    def col_of(self, idx: int) -> int:
        # 1-based column of the idx-th argument
        pos = self.raw.index(self.key) + len(self.key)
        for i, a in enumerate(self.args):
            pos = self.raw.index(a, pos)
            if i == idx:
                return pos + 1
            pos += len(a)
        return 1


def _records(text: str) -> list[_Record]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0]
        if not body.strip():
            continue
        parts = body.split()
        key = parts[0]
        rest = body[body.index(key) + len(key):]
        out.append(_Record(lineno, key, parts[1:], rest, raw))
    return out


def _series_field(rec: _Record, skip: int, degree: int) -> Series:
    """Parse the text after the first ``skip`` arguments as a series expression."""
    text = rec.rest
    for a in rec.args[:skip]:
        text = text[text.index(a) + len(a):]
    text = text.strip()
    if not text:
        raise ParseError("missing series value", rec.line)
    try:
        m = re.fullmatch(r"\((.*)\)\s*/\s*\((.*)\)", text)
        if m:
            num = parse_series(m.group(1), degree)
            den = parse_series(m.group(2), degree)
            return num / den
        return parse_series(text, degree)
    except (SeriesError, ZeroDivisionError) as exc:
        raise ParseError(f"bad series {text!r}: {exc}", rec.line, rec.col_of(skip)) from None


def parse(text: str) -> QmdpModel | QpomdpModel:
    recs = _records(text)
    if not recs or recs[0].key not in ("qmdp", "qpomdp") or recs[0].args:
        raise ParseError("file must start with 'qmdp' or 'qpomdp'", recs[0].line if recs else 1)
    kind = recs[0].key
    recs = recs[1:]

    states: list[str] = []
    obs: list[str] = []
    per_state: dict[str, list[str]] = {}
    discount = None
    degree = DEFAULT_DEGREE
    kappa_cap = DEFAULT_KAPPA_CAP
    seen_header: set[str] = set()

    def names(rec, kind_):
        if not rec.args:
            raise ParseError(f"'{rec.key}' needs at least one name", rec.line)
        if len(set(rec.args)) != len(rec.args):
            raise ParseError(f"duplicate {kind_} name", rec.line)
        return list(rec.args)

    for rec in recs:
        if rec.key in ("qmdp", "qpomdp"):
            raise ParseError("model kind declared twice", rec.line)
        if rec.key not in HEADER and rec.key not in BODY:
            raise ParseError(f"unknown record {rec.key!r}", rec.line, 1)
        if rec.key not in HEADER:
            continue
        if rec.key != "controls":
            if rec.key in seen_header:
                raise ParseError(f"duplicate '{rec.key}' record", rec.line)
            seen_header.add(rec.key)
        try:
            if rec.key == "states":
                states = names(rec, "state")
            elif rec.key == "observations":
                if kind != "qpomdp":
                    raise ParseError("'observations' only allowed in qpomdp files", rec.line)
                obs = names(rec, "observation")
            elif rec.key == "controls":
                if len(rec.args) < 2:
                    raise ParseError("'controls' needs a state and at least one control", rec.line)
                s, us = rec.args[0], rec.args[1:]
                if s in per_state:
                    raise ParseError(f"duplicate controls for state {s!r}", rec.line)
                if len(set(us)) != len(us):
                    raise ParseError(f"duplicate control for state {s!r}", rec.line)
                per_state[s] = us
            elif len(rec.args) != 1:
                raise ParseError(f"'{rec.key}' takes exactly one value", rec.line)
            elif rec.key == "discount":
                discount = parse_rational(rec.args[0])
            elif rec.key == "degree":
                degree = int(rec.args[0])
            elif rec.key == "kappamax":
                kappa_cap = int(rec.args[0])
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(str(exc), rec.line, rec.col_of(0)) from None

    if not states:
        raise ParseError("missing 'states' record")
    if discount is None:
        raise ParseError("missing 'discount' record")
    if kind == "qpomdp" and not obs:
        raise ParseError("qpomdp file needs an 'observations' record")
    if degree < 0:
        raise ParseError("degree must be nonnegative")
    sidx = {s: i for i, s in enumerate(states)}
    for s in per_state:
        if s not in sidx:
            raise ParseError(f"controls declared for undeclared state {s!r}")
    control_names: list[str] = []
    for s in states:
        if s not in per_state:
            raise ParseError(f"state {s!r} has no 'controls' record")
        for u in per_state[s]:
            if u not in control_names:
                control_names.append(u)
    uidx = {u: i for i, u in enumerate(control_names)}
    oidx = {o: i for i, o in enumerate(obs)}
    controls = tuple(tuple(sorted(uidx[u] for u in per_state[s])) for s in states)

    def lookup(table, name, what, rec, pos):
        if name not in table:
            raise ParseError(f"undeclared {what} {name!r}", rec.line, rec.col_of(pos))
        return table[name]

    def pair(rec):
        i = lookup(sidx, rec.args[0], "state", rec, 0)
        u = lookup(uidx, rec.args[1], "control", rec, 1)
        return i, u

    goals: list[int] = []
    costs: dict = {}
    kt: dict = {}
    pt: dict = {}
    ko: dict = {}
    for rec in recs:
        if rec.key in HEADER:
            continue
        if rec.key == "goal":
            if len(rec.args) != 1:
                raise ParseError("'goal' takes one state", rec.line)
            g = lookup(sidx, rec.args[0], "state", rec, 0)
            if g in goals:
                raise ParseError(f"duplicate goal {rec.args[0]!r}", rec.line)
            goals.append(g)
            continue
        if len(rec.args) < 3:
            raise ParseError(f"'{rec.key}' record is too short", rec.line)
        key = pair(rec)
        if rec.key == "cost":
            if key in costs:
                raise ParseError(f"duplicate cost for ({rec.args[0]}, {rec.args[1]})", rec.line)
            costs[key] = _series_field(rec, 2, degree)
            continue
        if rec.key == "ptrans":
            if kind != "qmdp":
                raise ParseError("'ptrans' only allowed in qmdp files", rec.line)
            j = lookup(sidx, rec.args[2], "state", rec, 2)
            row = pt.setdefault(key, {})
            if j in row:
                raise ParseError("duplicate ptrans entry", rec.line)
            row[j] = _series_field(rec, 3, degree)
            continue
        if len(rec.args) != 4:
            raise ParseError(f"'{rec.key}' takes state, control, target and rank", rec.line)
        try:
            r = parse_rank(rec.args[3])
        except KappaError as exc:
            raise ParseError(str(exc), rec.line, rec.col_of(3)) from None
        if rec.key == "ktrans":
            j = lookup(sidx, rec.args[2], "state", rec, 2)
            row = kt.setdefault(key, {})
        elif rec.key == "kobs":
            if kind != "qpomdp":
                raise ParseError("'kobs' only allowed in qpomdp files", rec.line)
            j = lookup(oidx, rec.args[2], "observation", rec, 2)
            row = ko.setdefault(key, {})
        if j in row:
            raise ParseError(f"duplicate {rec.key} entry", rec.line)
        row[j] = r

    for key in set(kt) & set(pt):
        raise ParseError(
            f"row ({states[key[0]]}, {control_names[key[1]]}) mixes ktrans and ptrans"
        )

    def kappa_row(key, entries, size, what):
        ranks = tuple(entries.get(j, INF) for j in range(size))
        try:
            return KappaRanking(ranks)
        except KappaError as exc:
            raise ParseError(
                f"{what} row ({states[key[0]]}, {control_names[key[1]]}): {exc}"
            ) from None

    transitions = {key: kappa_row(key, e, len(states), "ktrans") for key, e in kt.items()}
    for key, entries in pt.items():
        zero = Series.zero(degree)
        transitions[key] = QualitativeDistribution(
            tuple(entries.get(j, zero) for j in range(len(states))), degree
        )
    for key in costs.keys() | transitions.keys():
        if key[1] not in controls[key[0]]:
            raise ParseError(
                f"control {control_names[key[1]]!r} not declared for state {states[key[0]]!r}"
            )

    if kind == "qmdp":
        model = QmdpModel(
            n=len(states), controls=controls, transitions=transitions, costs=costs,
            discount=discount, max_degree=degree, state_names=tuple(states),
            control_names=tuple(control_names), goals=tuple(goals), kappa_cap=kappa_cap,
        )
        check_qmdp(model)
        return model
    observations = {key: kappa_row(key, e, len(obs), "kobs") for key, e in ko.items()}
    model = QpomdpModel(
        n=len(states), controls=controls, transitions=transitions, observations=observations,
        costs=costs, discount=discount, n_obs=len(obs), max_degree=degree, kappa_cap=kappa_cap,
        state_names=tuple(states), control_names=tuple(control_names), obs_names=tuple(obs),
        goals=tuple(goals),
    )
    check_qpomdp(model)
    return model


def load(path) -> QmdpModel | QpomdpModel:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


# serialization -----------------------------------------------------------------

def serialize_model(model: QmdpModel | QpomdpModel) -> str:
    qp = isinstance(model, QpomdpModel)
    S, U = model.state_names, model.control_names
    lines = ["qpomdp" if qp else "qmdp", "states " + " ".join(S)]
    for i, us in enumerate(model.controls):
        lines.append(f"controls {S[i]} " + " ".join(U[u] for u in us))
    if qp:
        lines.append("observations " + " ".join(model.obs_names))
    lines.append(f"discount {format_rational(model.discount)}")
    lines.append(f"degree {model.max_degree}")
    lines.append(f"kappamax {model.kappa_cap}")
    for g in model.goals:
        lines.append(f"goal {S[g]}")
    for key in sorted(model.costs):
        i, u = key
        lines.append(f"cost {S[i]} {U[u]} {render(model.costs[key])}")
    for key in sorted(model.transitions):
        i, u = key
        row = model.transitions[key]
        if isinstance(row, KappaRanking):
            for j, r in enumerate(row):
                if r != INF:
                    lines.append(f"ktrans {S[i]} {U[u]} {S[j]} {format_rank(r)}")
        else:
            for j, p in enumerate(row):
                if p:
                    lines.append(f"ptrans {S[i]} {U[u]} {S[j]} {render(p)}")
    if qp:
        for key in sorted(model.observations):
            i, u = key
            for o, r in enumerate(model.observations[key]):
                if r != INF:
                    lines.append(f"kobs {S[i]} {U[u]} {model.obs_names[o]} {format_rank(r)}")
    return "\n".join(lines) + "\n"


def serialize_values(J: Sequence[Series], names: Sequence[str]) -> str:
    return "".join(f"J {n} = {render(v)}\n" for n, v in zip(names, J))


def serialize_policy(mu: Sequence[int], names: Sequence[str], control_names: Sequence[str]) -> str:
    return "".join(f"mu {n} = {control_names[u]}\n" for n, u in zip(names, mu))


def format_belief(k: KappaRanking | Sequence, state_names: Sequence[str]) -> str:
    return " ".join(f"{s}:{format_rank(r)}" for s, r in zip(state_names, k))


def parse_belief(text: str, state_names: Sequence[str]) -> tuple:
    """``s1:0 s2:1 s3:inf``; states left out get rank inf."""
    idx = {s: i for i, s in enumerate(state_names)}
    ranks = [INF] * len(state_names)
    seen = set()
    for tok in text.split():
        if ":" not in tok:
            raise ParseError(f"belief entry {tok!r} is not 'state:rank'")
        s, r = tok.split(":", 1)
        if s not in idx:
            raise ParseError(f"undeclared state {s!r} in belief")
        if s in seen:
            raise ParseError(f"state {s!r} repeated in belief")
        seen.add(s)
        try:
            ranks[idx[s]] = parse_rank(r)
        except KappaError as exc:
            raise ParseError(str(exc)) from None
    if all(r == INF for r in ranks):
        raise ParseError("belief gives every state rank inf")
    return tuple(ranks)


def parse_policy(text: str, model: QmdpModel) -> tuple[int, ...]:
    """``s1:a goal:stay``; unlisted states use their first control."""
    sidx = {s: i for i, s in enumerate(model.state_names)}
    uidx = {u: i for i, u in enumerate(model.control_names)}
    mu = [us[0] for us in model.controls]
    for tok in text.split():
        if ":" not in tok:
            raise ParseError(f"policy entry {tok!r} is not 'state:control'")
        s, u = tok.split(":", 1)
        if s not in sidx or u not in uidx:
            raise ParseError(f"unknown state or control in {tok!r}")
        if uidx[u] not in model.controls[sidx[s]]:
            raise ParseError(f"control {u!r} not available in state {s!r}")
        mu[sidx[s]] = uidx[u]
    return tuple(mu)


def serialize_index(model: QpomdpModel, index: BeliefSpaceIndex) -> str:
    U, O = model.control_names, model.obs_names
    lines = []
    for b, k in enumerate(index.beliefs):
        lines.append(f"belief b{b} = {format_belief(k, model.state_names)}")
    for (b, u) in sorted(index.transitions):
        lines.append(f"bcost b{b} {U[u]} {render(index.costs[(b, u)])}")
        for o, succ, p in sorted(index.transitions[(b, u)]):
            lines.append(f"btrans b{b} {U[u]} {O[o]} b{succ} {render(p)}")
    return "\n".join(lines) + "\n"


def belief_names(index: BeliefSpaceIndex) -> list[str]:
    return [f"b{b}" for b in range(len(index))]


def serialize(obj, model=None, names=None) -> str:
    """Dispatch on the object kind; value functions and policies need names."""
    if isinstance(obj, (QmdpModel, QpomdpModel)):
        return serialize_model(obj)
    if isinstance(obj, BeliefSpaceIndex):
        return serialize_index(model, obj)
    names = names if names is not None else model.state_names
    if obj and isinstance(obj[0], Series):
        return serialize_values(obj, names)
    return serialize_policy(obj, names, model.control_names)
