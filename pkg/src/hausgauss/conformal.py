"""The h_n-conformal measure m_n on J_n.

Linear kind: m_n(g_w([0,1])) = prod a_{w_i}^{h_n}, exact up to the final rounding.
Gauss kind: m_n(g_w(A)) = int_A |g_w'|^{h_n} dm_n, and integrals of smooth
functions against m_n use the dual eigenvector of the collocation operator
at t = h_n as quadrature weights. Interval masses go through cylinder
refinement so the quadrature only ever sees smooth integrands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .dimension import dimension
from .errors import DepthOverflow, DomainError, StaleDimension
from .ifs_core import (GAUSS, LINEAR, Interval, SystemKind, check_word, mobius,
                       word_matrix)
from .spectral import SpectralData, eigen

STALE_TOL = 1e-10
DEFAULT_DEPTH_CAP = 12


@dataclass(frozen=True)
class MassBracket:
    lower: float
    upper: float
    depth: int = 0

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def exact(self) -> bool:
        return self.upper == self.lower


@dataclass(frozen=True)
class ConformalMeasure:
    kind: SystemKind
    n: int
    h: float
    spectral: SpectralData | None = field(default=None, repr=False)
    depth_cap: int = DEFAULT_DEPTH_CAP
    _memo: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def build(cls, kind, n: int, h: float | None = None, grid_M: int = 48,
              depth_cap: int = DEFAULT_DEPTH_CAP, stale_tol: float = STALE_TOL) -> "ConformalMeasure":
        """Measure at exponent ``h`` (default: the dimension h_n).

        Raises StaleDimension unless h is conformal to 1e-10, i.e. the Moran
        sum (linear) or lambda_{h,n} (Gauss) equals 1.
        """
        kind = SystemKind.parse(kind)
        if n < 2:
            raise DomainError("the conformal measure needs n >= 2")
        if h is None:
            h = dimension(kind, n, grid_M).h
        if kind is LINEAR:
            k = np.arange(1, n + 1, dtype=float)
            total = math.fsum(np.exp(-h * (np.log(k) + np.log1p(k))))
            if abs(total - 1.0) > stale_tol:
                raise StaleDimension(f"Moran sum at h={h} is {total!r}, not 1")
            return cls(kind, n, float(h), None, depth_cap)
        sd = eigen(h, n, grid_M, GAUSS, allow_low_t=True)
        if abs(sd.lam - 1.0) > stale_tol:
            raise StaleDimension(f"lambda_(h, n) = {sd.lam!r} at h={h}, not 1")
        return cls(kind, n, float(h), sd, depth_cap)

    # -- cylinders ------------------------------------------------------------

    def _check(self, word):
        word = check_word(word, self.n)
        if len(word) > self.depth_cap:
            raise DepthOverflow(f"word of length {len(word)} exceeds depth cap {self.depth_cap}")
        return word

    def _mass_from_matrix(self, m) -> float:
        _, _, r, s = m
        if self.kind is LINEAR:
            return math.exp(-self.h * math.log(s))
        # |g_w'(x)| = 1/(r x + s)^2 = s^-2 (1 + (r/s) x)^-2
        sd = self.spectral
        u = float(Fraction(r, s))
        vals = np.exp(-2.0 * self.h * np.log1p(u * sd.grid.nodes))
        return math.exp(-2.0 * self.h * math.log(s)) * sd.integrate(vals)

    def cylinder_mass(self, word) -> float:
        word = self._check(word)
        hit = self._memo.get(word)
        if hit is None:
            hit = self._mass_from_matrix(word_matrix(self.kind, word))
            self._memo[word] = hit  # identical value under concurrent insertion
        return hit

    def children_masses(self, word=()) -> np.ndarray:
        """Masses of the cylinders word + (j,), j = 1..n, vectorised."""
        word = self._check(word)
        if len(word) + 1 > self.depth_cap:
            raise DepthOverflow("children exceed the depth cap")
        _, _, r, s = word_matrix(self.kind, word)
        j = np.arange(1, self.n + 1, dtype=float)
        if self.kind is LINEAR:
            return np.exp(-self.h * (math.log(s) + np.log(j) + np.log1p(j)))
        # child matrix has (r', s') = (s, r + s j): |g'| = (s x + r + s j)^-2
        sd = self.spectral
        u = float(Fraction(r, s))
        base = sd.grid.nodes[:, None] + j[None, :] + u
        return math.exp(-2.0 * self.h * math.log(s)) * (sd.dual_weights @ base ** (-2.0 * self.h))

    def integrate(self, values) -> float:
        """Quadrature of a smooth function sampled at the grid nodes (Gauss only)."""
        if self.spectral is None:
            raise DomainError("quadrature is only available for the Gauss kind")
        return self.spectral.integrate(values)

    # -- intervals ------------------------------------------------------------

    def interval_mass(self, F: Interval, depth: int | None = None) -> MassBracket:
        """Two-sided bracket for m_n(F) by refining cylinders up to ``depth``.

        Cylinders inside F count towards the lower bound; those overlapping F
        in a set of positive length but not contained in it are refined and,
        at the final depth, added to the upper bound only. Single-point
        overlaps carry no mass since m_n has no atoms.
        """
        depth = self.depth_cap if depth is None else depth
        if depth > self.depth_cap:
            raise DepthOverflow(f"depth {depth} exceeds cap {self.depth_cap}")
        if depth < 0:
            raise DomainError("depth must be non-negative")
        lo, hi = Fraction(F.lo), Fraction(F.hi)
        if lo == hi:
            return MassBracket(0.0, 0.0, depth)
        if lo <= 0 and hi >= 1:
            return MassBracket(1.0, 1.0, depth)
        inside = []
        frontier = [()]
        ends = [Fraction(1, j) for j in range(1, self.n + 2)]
        for d in range(depth):
            nxt = []
            for word in frontier:
                m = word_matrix(self.kind, word)
                e = [mobius(m, x) for x in ends]
                masses = None
                for j in range(1, self.n + 1):
                    c_lo, c_hi = min(e[j - 1], e[j]), max(e[j - 1], e[j])
                    if lo <= c_lo and c_hi <= hi:
                        if masses is None:
                            masses = self.children_masses(word)
                        inside.append(masses[j - 1])
                    elif min(c_hi, hi) > max(c_lo, lo):
                        nxt.append(word + (j,))
            frontier = nxt
            if not frontier:
                break
        lower = math.fsum(inside)
        upper = lower + math.fsum(self.cylinder_mass(w) for w in frontier)
        return MassBracket(lower, min(upper, 1.0) if frontier else lower, depth)


# -- distortion -----------------------------------------------------------------

def _abs_derivative_ratio(m, z, w):
    # |g'(z)| / |g'(w)| = ((r w + s) / (r z + s))^2 for a Moebius map
    _, _, r, s = m
    return ((r * w + s) / (r * z + s)) ** 2


def distortion_probe(word, n_pairs: int = 1000, seed: int = 0, pairs=None) -> float:
    """max over pairs of (|g_w'(z)/g_w'(w)| - 1)/|z - w| for the Gauss branch word.

    Pairs default to ``n_pairs`` uniform samples in [0, 1]^2 plus (0, 1).
    """
    word = check_word(word)
    if not word:
        return 0.0
    m = word_matrix(GAUSS, word)
    if pairs is None:
        rng = np.random.default_rng(seed)
        pairs = np.vstack([rng.random((n_pairs, 2)), [[0.0, 1.0], [1.0, 0.0]]])
    pairs = np.asarray(pairs, dtype=float)
    z, w = pairs[:, 0], pairs[:, 1]
    keep = z != w
    z, w = z[keep], w[keep]
    _, _, r, s = m
    u = float(Fraction(r, s))
    ratio = ((1.0 + u * w) / (1.0 + u * z)) ** 2
    return float(np.max((ratio - 1.0) / np.abs(z - w)))


def local_distortion(n: int, word=(1,), m: int = 2) -> float:
    """max over z, w in g_n^m([0, 1]) of |g_w'(z)/g_w'(w)| - 1.

    |g_w'| is monotone on any interval avoiding its pole, so the maximum sits
    at the endpoints; it is evaluated exactly and rounded once.
    """
    if n < 2 or m < 1:
        raise DomainError("need n >= 2 and m >= 1")
    word = check_word(word)
    iv = word_matrix(GAUSS, (n,) * m)
    a, b = mobius(iv, Fraction(0)), mobius(iv, Fraction(1))
    mat = word_matrix(GAUSS, word)
    r1, r2 = _abs_derivative_ratio(mat, a, b), _abs_derivative_ratio(mat, b, a)
    return float(max(r1, r2) - 1)


def loglog_slope(xs, ys) -> float:
    return float(np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)[0])
