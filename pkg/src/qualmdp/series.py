"""Truncated two-sided formal series in an infinitesimal ``e`` with exact
rational coefficients.

A :class:`Series` stores finitely many nonzero terms ``a_k e^k`` with
``k <= max_degree``.  Everything above ``max_degree`` is dropped, so two
series are equal when all retained coefficients agree.  Negative exponents
are allowed; an operation whose result would have order below
``-2 * max_degree`` raises :class:`SeriesUnderflowError`.
"""

from __future__ import annotations

import math
import re
from enum import IntEnum
from fractions import Fraction
from typing import Iterable, Union

DEFAULT_DEGREE = 16

Rational = Union[int, Fraction]


class SeriesError(ValueError):
    pass


class DegreeMismatchError(SeriesError):
    pass


class ZeroSeriesError(SeriesError, ZeroDivisionError):
    pass


class SeriesUnderflowError(SeriesError):
    pass


class InvalidRhoError(SeriesError):
    pass


class InvalidEpsilonError(SeriesError):
    pass


class Cmp(IntEnum):
    LT = -1
    EQ = 0
    GT = 1


class Series:
    """Immutable truncated series; supports ``+ - * /`` and total ordering."""

    __slots__ = ("_terms", "max_degree")

    def __init__(self, terms: dict[int, Fraction], max_degree: int):
        # trusted constructor: terms must be nonzero and within the window
        self._terms = tuple(sorted(terms.items()))
        self.max_degree = max_degree
        if self._terms and self._terms[0][0] < -2 * max_degree:
            raise SeriesUnderflowError(
                f"order {self._terms[0][0]} below -2*max_degree ({-2 * max_degree})"
            )

    # construction -----------------------------------------------------

    @classmethod
    def zero(cls, max_degree: int = DEFAULT_DEGREE) -> Series:
        return cls({}, max_degree)

    @classmethod
    def const(cls, c: Rational, max_degree: int = DEFAULT_DEGREE) -> Series:
        c = Fraction(c)
        return cls({0: c} if c else {}, max_degree)

    @classmethod
    def monomial(cls, c: Rational, k: int, max_degree: int = DEFAULT_DEGREE) -> Series:
        return make_series([(k, c)], max_degree)

    # access -----------------------------------------------------------

    @property
    def terms(self) -> dict[int, Fraction]:
        return dict(self._terms)

    def items(self) -> tuple[tuple[int, Fraction], ...]:
        return self._terms

    def __getitem__(self, k: int) -> Fraction:
        for e, c in self._terms:
            if e == k:
                return c
        return Fraction(0)

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self) -> bool:
        return bool(self._terms)

    @property
    def order(self) -> float | int:
        return self._terms[0][0] if self._terms else math.inf

    @property
    def leading_coeff(self) -> Fraction:
        if not self._terms:
            raise ZeroSeriesError("leading coefficient of the zero series")
        return self._terms[0][1]

    # arithmetic -------------------------------------------------------

    def _coerce(self, other) -> Series:
        if isinstance(other, Series):
            if other.max_degree != self.max_degree:
                raise DegreeMismatchError(
                    f"max_degree {self.max_degree} vs {other.max_degree}"
                )
            return other
        if isinstance(other, (int, Fraction)):
            return Series.const(other, self.max_degree)
        return NotImplemented

    def __add__(self, other) -> Series:
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for k, c in other._terms:
            v = out.get(k, 0) + c
            if v:
                out[k] = v
            else:
                out.pop(k, None)
        return Series(out, self.max_degree)

    __radd__ = __add__

    def __neg__(self) -> Series:
        return Series({k: -c for k, c in self._terms}, self.max_degree)

    def __sub__(self, other) -> Series:
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other) -> Series:
        return (-self) + other

    def scale(self, q: Rational) -> Series:
        q = Fraction(q)
        if not q:
            return Series.zero(self.max_degree)
        return Series({k: q * c for k, c in self._terms}, self.max_degree)

    def __mul__(self, other) -> Series:
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        D = self.max_degree
        out: dict[int, Fraction] = {}
        for i, a in self._terms:
            for j, b in other._terms:
                k = i + j
                if k > D:
                    break
                out[k] = out.get(k, 0) + a * b
        return Series({k: c for k, c in out.items() if c}, D)

    __rmul__ = __mul__

    def inverse(self) -> Series:
        """Multiplicative inverse within the truncation window.

        Writes ``s = c e^m (1 + r)`` and expands ``(1 + r)^-1`` term by term,
        treating the stored terms of ``s`` as exact.
        """
        if not self._terms:
            raise ZeroSeriesError("the zero series is not invertible")
        m, c = self._terms[0]
        D = self.max_degree
        if -m < -2 * D:
            raise SeriesUnderflowError(f"inverse would have order {-m}")
        # unit part u_j = s(m + j) / c, then w = 1/u via w_j = -sum u_i w_{j-i}
        top = D + m
        u = {k - m: a / c for k, a in self._terms if k - m <= top}
        w = [Fraction(1)]
        for j in range(1, top + 1):
            acc = Fraction(0)
            for i, ui in u.items():
                if 1 <= i <= j:
                    acc += ui * w[j - i]
            w.append(-acc)
        return Series({j - m: wj / c for j, wj in enumerate(w) if wj}, D)

    def __truediv__(self, other) -> Series:
        if isinstance(other, (int, Fraction)):
            return self.scale(1 / Fraction(other))
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __rtruediv__(self, other) -> Series:
        return Series.const(other, self.max_degree) * self.inverse()

    # order ------------------------------------------------------------

    def sign(self) -> int:
        if not self._terms:
            return 0
        return 1 if self._terms[0][1] > 0 else -1

    def compare(self, other) -> Cmp:
        return Cmp((self - other).sign())

    def __eq__(self, other) -> bool:
        if isinstance(other, Series):
            return self.max_degree == other.max_degree and self._terms == other._terms
        if isinstance(other, (int, Fraction)):
            return self._terms == Series.const(other, self.max_degree)._terms
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self._terms, self.max_degree))

    def __lt__(self, other) -> bool:
        return (self - other).sign() < 0

    def __le__(self, other) -> bool:
        return (self - other).sign() <= 0

    def __gt__(self, other) -> bool:
        return (self - other).sign() > 0

    def __ge__(self, other) -> bool:
        return (self - other).sign() >= 0

    # numeric views ----------------------------------------------------

    def norm(self, rho: Rational) -> Fraction:
        rho = Fraction(rho)
        if rho <= 1:
            raise InvalidRhoError(f"rho must exceed 1, got {rho}")
        return sum((abs(c) / rho**k for k, c in self._terms), Fraction(0))

    def evaluate(self, eps0: Rational) -> Fraction:
        eps0 = Fraction(eps0)
        if not 0 < eps0 < 1:
            raise InvalidEpsilonError(f"epsilon must lie in (0, 1), got {eps0}")
        return sum((c * eps0**k for k, c in self._terms), Fraction(0))

    # text -------------------------------------------------------------

    def __str__(self) -> str:
        return render(self)

    def __repr__(self) -> str:
        return f"Series({render(self)!r}, max_degree={self.max_degree})"


def make_series(pairs: Iterable[tuple[int, Rational]], max_degree: int = DEFAULT_DEGREE) -> Series:
    """Build a series from ``(exponent, coefficient)`` pairs.

    Duplicate exponents are summed, zeros dropped, and exponents above
    ``max_degree`` silently truncated.
    """
    if max_degree < 0:
        raise SeriesError(f"max_degree must be >= 0, got {max_degree}")
    out: dict[int, Fraction] = {}
    for k, c in pairs:
        if k > max_degree:
            continue
        out[k] = out.get(k, 0) + Fraction(c)
    return Series({k: c for k, c in out.items() if c}, max_degree)


# functional surface ---------------------------------------------------

def add(s: Series, t: Series) -> Series:
    return s + t


def neg(s: Series) -> Series:
    return -s


def scale(q: Rational, s: Series) -> Series:
    return s.scale(q)


def mul(s: Series, t: Series) -> Series:
    return s * t


def order(s: Series) -> float | int:
    return s.order


def leading_coeff(s: Series) -> Fraction:
    return s.leading_coeff


def compare(s: Series, t: Series) -> Cmp:
    return s.compare(t)


def inverse(s: Series) -> Series:
    return s.inverse()


def norm(s: Series, rho: Rational) -> Fraction:
    return s.norm(rho)


def evaluate(s: Series, eps0: Rational) -> Fraction:
    return s.evaluate(eps0)


# text format ----------------------------------------------------------

def _fmt_rational(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _fmt_term(k: int, c: Fraction) -> str:
    if k == 0:
        return _fmt_rational(c)
    if k == 1:
        return f"{_fmt_rational(c)}*e"
    return f"{_fmt_rational(c)}*e^{k}"


def render(s: Series) -> str:
    """Canonical text, e.g. ``1/2 - 1/2*e - 1/2*e^5``; zero renders as ``0``."""
    if not s._terms:
        return "0"
    parts = []
    for idx, (k, c) in enumerate(s._terms):
        if idx == 0:
            parts.append(_fmt_term(k, c))
        elif c < 0:
            parts.append("- " + _fmt_term(k, -c))
        else:
            parts.append("+ " + _fmt_term(k, c))
    return " ".join(parts)


_TERM = re.compile(
    r"""\s*(?P<sign>[+-])?\s*
        (?:
          (?P<coef>\d+(?:/\d+)?)(?:\s*\*\s*(?P<e1>e)(?:\s*\^\s*(?P<k1>-?\d+))?)?
        | (?P<e2>e)(?:\s*\^\s*(?P<k2>-?\d+))?
        )\s*""",
    re.VERBOSE,
)


def parse_series(text: str, max_degree: int = DEFAULT_DEGREE) -> Series:
    """Parse the canonical rendering (whitespace-insensitive).

    Also accepts a bare ``e``/``e^k`` with implicit coefficient 1.
    """
    src = text.strip()
    if not src:
        raise SeriesError("empty series text")
    pos = 0
    pairs: list[tuple[int, Fraction]] = []
    first = True
    while pos < len(src):
        m = _TERM.match(src, pos)
        if not m or m.end() == pos or (m.group("coef") is None and m.group("e2") is None):
            raise SeriesError(f"cannot parse series {text!r} at offset {pos}")
        if not first and m.group("sign") is None:
            raise SeriesError(f"missing '+' or '-' in series {text!r} at offset {pos}")
        first = False
        sign = -1 if m.group("sign") == "-" else 1
        if m.group("coef") is not None:
            c = Fraction(m.group("coef"))
            if m.group("e1"):
                k = int(m.group("k1")) if m.group("k1") else 1
            else:
                k = 0
        else:
            c = Fraction(1)
            k = int(m.group("k2")) if m.group("k2") else 1
        pairs.append((k, sign * c))
        pos = m.end()
    return make_series(pairs, max_degree)


def parse_rational(text: str) -> Fraction:
    text = text.strip()
    if not re.fullmatch(r"-?\d+(?:/\d+)?", text):
        raise ValueError(f"not a rational: {text!r}")
    return Fraction(text)


def format_rational(q: Rational) -> str:
    return _fmt_rational(Fraction(q))
