"""Branch maps, words and cylinder geometry for the truncated Gauss systems.

Both systems have inverse branches g_k mapping [0, 1] onto [1/(k+1), 1/k]:

* linear:  g_k(x) = 1/k - x/(k(k+1))
* gauss:   g_k(x) = 1/(x + k)

Each branch is a Moebius map with integer coefficients, so every composition
g_w is represented exactly by a 2x2 integer matrix and cylinder endpoints are
exact rationals for both kinds.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import DomainError, EndpointHit

Word = tuple  # tuple[int, ...]; the empty word is the identity map
Number = "Fraction | float"


class SystemKind(enum.Enum):
    LINEAR = "linear"
    GAUSS = "gauss"

    @classmethod
    def parse(cls, value) -> "SystemKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(f"unknown system kind {value!r}") from None


LINEAR = SystemKind.LINEAR
GAUSS = SystemKind.GAUSS


def b(k: int) -> Fraction:
    """Left endpoint table: b_k = 1/k = g_k(0)."""
    return Fraction(1, k)


def a(k: int) -> Fraction:
    """Length of [b_{k+1}, b_k]; also the slope of the linear branch."""
    return Fraction(1, k * (k + 1))


@dataclass(frozen=True)
class Interval:
    """Closed subinterval of [0, 1].

    ``provenance`` is a tuple whose first entry names how the interval was
    built: ``("cylinder", word)``, ``("block", k, l)``, ``("prefix", m)`` or
    ``("raw",)``.
    """

    lo: object
    hi: object
    provenance: tuple = field(default=("raw",), compare=False)

    def __post_init__(self):
        if not (0 <= self.lo <= self.hi <= 1):
            raise DomainError(f"not a subinterval of [0,1]: [{self.lo}, {self.hi}]")

    @property
    def diam(self):
        return self.hi - self.lo

    @property
    def degenerate(self) -> bool:
        return self.hi == self.lo

    def contains(self, x) -> bool:
        return self.lo <= x <= self.hi

    def issubset(self, other: "Interval") -> bool:
        return other.lo <= self.lo and self.hi <= other.hi

    def as_float(self) -> tuple[float, float]:
        return float(self.lo), float(self.hi)

    def __repr__(self):
        return f"Interval({self.lo}, {self.hi}, {self.provenance})"


def check_branch(k) -> int:
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise DomainError(f"branch index must be a positive integer, got {k!r}")
    return k


def check_word(word: Iterable[int], n: int | None = None) -> Word:
    word = tuple(word)
    for k in word:
        check_branch(k)
        if n is not None and k > n:
            raise DomainError(f"symbol {k} exceeds system size n={n}")
    return word


def _check_point(x):
    if not (0 <= x <= 1):
        raise DomainError(f"point {x!r} is outside [0, 1]")
    return x


# -- Moebius representation -------------------------------------------------

def branch_matrix(kind: SystemKind, k: int) -> tuple[int, int, int, int]:
    """Integer matrix (p, q, r, s) with g_k(x) = (p x + q) / (r x + s)."""
    if kind is LINEAR:
        return (-1, k + 1, 0, k * (k + 1))
    return (0, 1, 1, k)


def _matmul(m1, m2):
    p1, q1, r1, s1 = m1
    p2, q2, r2, s2 = m2
    return (p1 * p2 + q1 * r2, p1 * q2 + q1 * s2, r1 * p2 + s1 * r2, r1 * q2 + s1 * s2)


IDENTITY = (1, 0, 0, 1)


def word_matrix(kind: SystemKind, word: Sequence[int]) -> tuple[int, int, int, int]:
    m = IDENTITY
    for k in word:
        m = _matmul(m, branch_matrix(kind, k))
    return m


def mobius(m, x):
    p, q, r, s = m
    if isinstance(x, (Fraction, int)):
        return Fraction(p * x + q) / (r * x + s)
    return (p * x + q) / (r * x + s)


def mobius_derivative_abs(m, x):
    p, q, r, s = m
    det = abs(p * s - q * r)
    if isinstance(x, (Fraction, int)):
        return Fraction(det) / (r * x + s) ** 2
    return det / (r * x + s) ** 2


# -- point maps ---------------------------------------------------------------

def apply_branch(kind, k: int, x):
    """Evaluate g_k(x); exact when ``x`` is a Fraction."""
    kind = SystemKind.parse(kind)
    check_branch(k)
    _check_point(x)
    if kind is LINEAR:
        if isinstance(x, (Fraction, int)):
            return Fraction(1, k) - Fraction(x) / (k * (k + 1))
        return 1.0 / k - x / (k * (k + 1))
    if isinstance(x, (Fraction, int)):
        return 1 / (Fraction(x) + k)
    return 1.0 / (x + k)


def branch_derivative_abs(kind, k: int, x):
    kind = SystemKind.parse(kind)
    check_branch(k)
    _check_point(x)
    exact = isinstance(x, (Fraction, int))
    if kind is LINEAR:
        return a(k) if exact else 1.0 / (k * (k + 1))
    if exact:
        return 1 / (Fraction(x) + k) ** 2
    return 1.0 / (x + k) ** 2


def apply_word(kind, word: Sequence[int], x):
    """g_{w_1} o ... o g_{w_m} (x), applied right to left."""
    kind = SystemKind.parse(kind)
    word = check_word(word)
    _check_point(x)
    for k in reversed(word):
        x = apply_branch(kind, k, x)
    return x


def word_derivative_abs(kind, word: Sequence[int], x):
    """|g_w'(x)| by the chain rule along the orbit of x."""
    kind = SystemKind.parse(kind)
    word = check_word(word)
    _check_point(x)
    der = Fraction(1) if isinstance(x, (Fraction, int)) else 1.0
    for k in reversed(word):
        der = der * branch_derivative_abs(kind, k, x)
        x = apply_branch(kind, k, x)
    return der


def cylinder_interval(kind, word: Sequence[int], n: int | None = None) -> Interval:
    """The cylinder g_w([0, 1]) with exact rational endpoints."""
    kind = SystemKind.parse(kind)
    word = check_word(word, n)
    m = word_matrix(kind, word)
    u, v = mobius(m, Fraction(0)), mobius(m, Fraction(1))
    lo, hi = (u, v) if u <= v else (v, u)
    return Interval(lo, hi, ("cylinder", word))


def orientation(word: Sequence[int]) -> int:
    """+1 if g_w is increasing, -1 if decreasing (every branch reverses)."""
    return -1 if len(word) % 2 else 1


def block_interval(k: int, l: int) -> Interval:
    """[b_{l+1}, b_k], the union of first-generation cylinders k..l."""
    if not 1 <= k <= l:
        raise DomainError(f"need 1 <= k <= l, got k={k}, l={l}")
    return Interval(b(l + 1), b(k), ("block", k, l))


def image_interval(kind, word: Sequence[int], iv: Interval) -> Interval:
    """g_w(F) for an interval F, exact when F has rational endpoints."""
    kind = SystemKind.parse(kind)
    word = check_word(word)
    m = word_matrix(kind, word)
    u, v = mobius(m, Fraction(iv.lo)), mobius(m, Fraction(iv.hi))
    lo, hi = (u, v) if u <= v else (v, u)
    return Interval(lo, hi, ("image", word, iv.provenance))


# -- coding -------------------------------------------------------------------

def inverse_branch(kind: SystemKind, k: int, y: Fraction) -> Fraction:
    """f_k = g_k^{-1} on [b_{k+1}, b_k]."""
    if kind is LINEAR:
        return -k * (k + 1) * y + (k + 1)
    return 1 / y - k


def cf_encode(kind, x, depth: int) -> Word:
    """First ``depth`` digits of x: the indices k with forward orbit in Delta_k.

    The orbit is iterated exactly on the rational value of ``x``. A point
    1/k gets digit k. Raises EndpointHit (carrying the partial word) when the
    orbit reaches 0 before ``depth`` digits are produced.
    """
    kind = SystemKind.parse(kind)
    if depth < 1:
        raise DomainError("depth must be positive")
    if not (0 < x <= 1):
        raise DomainError(f"x must lie in (0, 1], got {x!r}")
    y = Fraction(x)
    word = []
    for _ in range(depth):
        if y == 0:
            raise EndpointHit(word)
        k = math.floor(1 / y)
        word.append(k)
        y = inverse_branch(kind, k, y)
    return tuple(word)


# -- prefix decomposition ------------------------------------------------------

@dataclass(frozen=True)
class PrefixDecomposition:
    r: Fraction
    pieces: tuple  # Interval, adjacent, left to right
    remainder: Interval | None  # cylinder holding r after the last piece
    words: tuple  # word of the cylinder each piece I_m lives in (I'_{m-1})

    @property
    def complete(self) -> bool:
        return self.remainder is None

    def weights(self) -> list[Fraction]:
        """w_m = |I_m| / r."""
        return [p.diam / self.r for p in self.pieces]


def decompose_prefix(kind, r, max_depth: int) -> PrefixDecomposition:
    """Split [0, r] into adjacent pieces I_1, I_2, ... of growing generation.

    I_m is the union of the generation-m cylinders (of the full system) that
    lie in the generation-(m-1) cylinder adjacent to I_{m-1} and inside [0, r].
    Stops when r is an endpoint of the last piece or after ``max_depth``
    pieces, in which case the cylinder still straddling r is returned as the
    remainder.
    """
    kind = SystemKind.parse(kind)
    if not (0 < r <= 1):
        raise DomainError(f"r must lie in (0, 1], got {r!r}")
    if max_depth < 1:
        raise DomainError("max_depth must be positive")
    r = Fraction(r)
    y = r  # g_word^{-1}(r)
    left = Fraction(0)
    word: tuple = ()
    m = IDENTITY
    pieces, words = [], []
    for step in range(1, max_depth + 1):
        if len(word) % 2 == 0:
            # g_word increasing: children accumulate at the left end.
            j = math.ceil(1 / y)
            nxt = j - 1
        else:
            j = math.floor(1 / y)
            nxt = j
        right = mobius(m, Fraction(1, j))
        pieces.append(Interval(left, right, ("prefix", step)))
        words.append(word)
        if right == r:
            return PrefixDecomposition(r, tuple(pieces), None, tuple(words))
        word = word + (nxt,)
        m = _matmul(m, branch_matrix(kind, nxt))
        y = inverse_branch(kind, nxt, y)
        left = right
    return PrefixDecomposition(r, tuple(pieces), cylinder_interval(kind, word), tuple(words))
