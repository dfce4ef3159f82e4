"""Kappa rankings and their maximum-entropy embedding into series-valued
probability distributions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .series import DEFAULT_DEGREE, Series

INF = math.inf

Rank = float | int


class KappaError(ValueError):
    pass


class TruncationTooSmallError(KappaError):
    pass


def is_rank(r) -> bool:
    if r == INF:
        return True
    return isinstance(r, int) and not isinstance(r, bool) and r >= 0


def validate_kappa(ranks: Sequence) -> list[str]:
    """Return a list of violated conditions; an empty list means valid."""
    problems = []
    if not len(ranks):
        problems.append("empty outcome set")
        return problems
    bad = [i for i, r in enumerate(ranks) if not is_rank(r)]
    if bad:
        problems.append(f"ranks at outcomes {bad} are not nonnegative integers or inf")
    finite = [r for r in ranks if is_rank(r) and r != INF]
    if not finite or min(finite) != 0:
        problems.append("no outcome has rank 0")
    return problems


@dataclass(frozen=True)
class KappaRanking:
    """Ranks per outcome index; ``INF`` marks impossible outcomes."""

    ranks: tuple

    def __post_init__(self):
        problems = validate_kappa(self.ranks)
        if problems:
            raise KappaError("; ".join(problems))

    @classmethod
    def of(cls, ranks: Iterable) -> KappaRanking:
        return cls(tuple(ranks))

    def __len__(self) -> int:
        return len(self.ranks)

    def __getitem__(self, i: int) -> Rank:
        return self.ranks[i]

    def __iter__(self):
        return iter(self.ranks)

    def rank_of(self, outcomes: Iterable[int]) -> Rank:
        return min((self.ranks[i] for i in outcomes), default=INF)

    def support(self) -> tuple[int, ...]:
        return tuple(i for i, r in enumerate(self.ranks) if r != INF)

    def max_finite(self) -> int:
        return max(r for r in self.ranks if r != INF)


def normalize_ranks(ranks: Iterable, cap: int | None = None) -> tuple:
    """Shift ranks so the minimum finite rank is 0, then clamp at ``cap``."""
    ranks = tuple(ranks)
    finite = [r for r in ranks if r != INF]
    if not finite:
        raise KappaError("every outcome has rank inf")
    low = min(finite)
    out = []
    for r in ranks:
        if r == INF:
            out.append(INF)
        else:
            r -= low
            out.append(min(r, cap) if cap is not None else r)
    return tuple(out)


def compute_counts(k: KappaRanking | Sequence) -> tuple[dict[int, int], dict[int, int]]:
    """Per-rank outcome counts ``n`` and the integers ``N`` of the embedding.

    ``N_0 = 1`` and ``N_k`` is the sum of ``N_j`` over occupied ranks
    ``j < k``; only occupied ranks are reported.
    """
    n: dict[int, int] = {}
    for r in k:
        if r != INF:
            n[r] = n.get(r, 0) + 1
    N: dict[int, int] = {}
    running = 0
    for r in sorted(n):
        N[r] = 1 if r == 0 else running
        running += N[r]
    return dict(sorted(n.items())), N


@dataclass(frozen=True)
class QualitativeDistribution:
    masses: tuple[Series, ...]
    max_degree: int

    def __len__(self) -> int:
        return len(self.masses)

    def __getitem__(self, i: int) -> Series:
        return self.masses[i]

    def __iter__(self):
        return iter(self.masses)

    def total(self) -> Series:
        return sum(self.masses, Series.zero(self.max_degree))

    def problems(self) -> list[str]:
        out = []
        for i, m in enumerate(self.masses):
            if m.max_degree != self.max_degree:
                out.append(f"mass {i} has max_degree {m.max_degree}")
            elif m.sign() < 0:
                out.append(f"mass {i} is negative: {m}")
        if not out and self.total() != Series.const(1, self.max_degree):
            out.append(f"masses sum to {self.total()}, not 1")
        return out


def embed(k: KappaRanking | Sequence, max_degree: int = DEFAULT_DEGREE) -> QualitativeDistribution:
    """Maximum-entropy qualitative distribution with orders equal to ``k``."""
    if not isinstance(k, KappaRanking):
        k = KappaRanking.of(k)
    top = k.max_finite()
    if max_degree < top:
        raise TruncationTooSmallError(
            f"max_degree {max_degree} below maximum finite rank {top}"
        )
    n, N = compute_counts(k)
    occupied = sorted(n)
    shapes: dict[int, Series] = {}
    for r in occupied:
        terms = {r: Fraction(N[r], n[r])}
        for j in occupied:
            if j > r:
                terms[j] = Fraction(-N[r], n[r])
        shapes[r] = Series(terms, max_degree)
    zero = Series.zero(max_degree)
    return QualitativeDistribution(
        tuple(zero if r == INF else shapes[r] for r in k), max_degree
    )


def order_of(dist: QualitativeDistribution | Sequence[Series]) -> KappaRanking:
    return KappaRanking(tuple(m.order for m in dist))


def format_rank(r: Rank) -> str:
    return "inf" if r == INF else str(r)


def parse_rank(text: str) -> Rank:
    text = text.strip()
    if text == "inf":
        return INF
    if not text.isdigit():
        raise KappaError(f"not a rank: {text!r}")
    return int(text)
