"""Density ratios m_n(F)/diam(F)^{h_n}, the interval search bracketing H_n,
and numerical checks of the auxiliary lemmas.

The Hausdorff measure satisfies 1/H_n = sup_F m_n(F)/diam(F)^{h_n} over closed
intervals F. Every candidate interval therefore gives an upper bound on H_n;
the lower bound comes from the analytic cap on the supremum.
"""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .conformal import ConformalMeasure
from .errors import BudgetExceeded, DegenerateInterval, DomainError
from .ifs_core import (GAUSS, LINEAR, Interval, SystemKind, b, block_interval,
                       decompose_prefix, mobius, word_matrix)

DEFAULT_EPS = (0.3, 0.5, 0.7)
DEFAULT_BUDGET = 50_000_000
FAMILY_D_MAX_N = 8
FAMILY_D_MAX_DEPTH = 3
TOP_BASE = 16

# Constants of the analytic cap 1 + (1-h) ln n + C (1-h)^2 ln^2 n + C3 ln ln n / n,
# fitted once with fit_cap_constant() on the linear system, n = 64..1024.
FITTED_C = 0.0
FITTED_C3 = 0.0


# -- ratios ---------------------------------------------------------------------

@dataclass(frozen=True)
class RatioBracket:
    lower: float
    upper: float


def density_ratio_bracket(measure: ConformalMeasure, F: Interval, depth=None) -> RatioBracket:
    diam = F.hi - F.lo
    if diam <= 0:
        raise DegenerateInterval(f"interval [{F.lo}, {F.hi}] has zero diameter")
    mb = measure.interval_mass(F, depth)
    scale = float(diam) ** (-measure.h)
    return RatioBracket(mb.lower * scale, mb.upper * scale)


def density_ratio(measure: ConformalMeasure, F: Interval, depth=None) -> float:
    """m_n(F)/diam(F)^{h_n} using the upper end of the mass bracket."""
    return density_ratio_bracket(measure, F, depth).upper


def f_interval(n: int, eps: float) -> Interval:
    """F_n(eps) = [b_{n+1}, b_{[n - n^(1-eps)] + 1}]."""
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")
    k = f_index(n, eps)
    return Interval(b(n + 1), b(k), ("F", n, eps))


def f_index(n: int, eps: float) -> int:
    k = math.floor(n - n ** (1.0 - eps)) + 1
    if not 1 <= k <= n:
        raise DomainError(f"n={n} too small for eps={eps}")
    return k


# -- candidate families -----------------------------------------------------------

def family_b_words(n: int, max_len: int = 3):
    symbols = sorted({s for s in (1, 2, n - 1, n) if 1 <= s <= n})
    for length in range(1, max_len + 1):
        yield from itertools.product(symbols, repeat=length)


def cylinder_endpoints(kind, n: int, D: int) -> list:
    """Sorted distinct endpoints of all cylinders of depth 1..D."""
    kind = SystemKind.parse(kind)
    pts = set()
    for d in range(1, D + 1):
        for w in itertools.product(range(1, n + 1), repeat=d):
            m = word_matrix(kind, w)
            pts.add(mobius(m, Fraction(0)))
            pts.add(mobius(m, Fraction(1)))
    return sorted(pts)


def candidate_families(kind, n: int, eps_list=DEFAULT_EPS, D: int = 2, families="abcd",
                       budget: int = DEFAULT_BUDGET):
    """Tagged candidate intervals (tag, Interval) in a fixed order.

    a: blocks [b_{l+1}, b_k];  b: images g_w of the blocks, w over {1, 2, n-1, n}
    up to length 3;  c: F_n(eps);  d: all intervals between cylinder endpoints
    of depth <= D (n <= 8, D <= 3 only). Raises BudgetExceeded carrying the
    intervals produced so far once more than ``budget`` would be emitted.
    """
    kind = SystemKind.parse(kind)
    out = []

    def emit(tag, iv):
        if len(out) >= budget:
            raise BudgetExceeded(out, budget)
        out.append((tag, iv))

    blocks = [block_interval(k, l) for k in range(1, n + 1) for l in range(k, n + 1)]
    if "a" in families:
        for iv in blocks:
            emit("a", iv)
    if "b" in families:
        for w in family_b_words(n):
            m = word_matrix(kind, w)
            for iv in blocks:
                u, v = mobius(m, iv.lo), mobius(m, iv.hi)
                emit("b", Interval(min(u, v), max(u, v), ("image", w, iv.provenance)))
    if "c" in families:
        for eps in eps_list:
            emit("c", f_interval(n, eps))
    if "d" in families:
        _check_family_d(n, D)
        pts = cylinder_endpoints(kind, n, D)
        for i, j in itertools.combinations(range(len(pts)), 2):
            emit("d", Interval(pts[i], pts[j], ("endpoints", D)))
    return out


def _check_family_d(n, D):
    if n > FAMILY_D_MAX_N or not 1 <= D <= FAMILY_D_MAX_DEPTH:
        raise DomainError(f"family d needs n <= {FAMILY_D_MAX_N} and 1 <= D <= {FAMILY_D_MAX_DEPTH}")


# -- search -------------------------------------------------------------------

@dataclass(frozen=True)
class MeasureEstimate:
    kind: SystemKind
    n: int
    h: float
    best_interval: Interval
    best_family: str
    sup_ratio: float
    H_lower: float
    H_upper: float
    families_used: tuple
    family_best: dict = field(default_factory=dict, compare=False)
    n_candidates: int = 0
    cap: float = math.nan

    @property
    def cap_violated(self) -> bool:
        """The asymptotic cap is below a ratio actually found, so 1/cap is no bound here."""
        return self.sup_ratio > self.cap

    @property
    def normalized(self) -> float:
        """(1 - H_upper)/((1 - h_n) ln n)."""
        return (1.0 - self.H_upper) / ((1.0 - self.h) * math.log(self.n))


class _Best:
    """Running maximum; ties go to the smallest (family tag, lo, hi)."""

    def __init__(self):
        self.ratio, self.key, self.interval = -math.inf, None, None
        self.per_family = {}
        self.count = 0

    def offer(self, ratio, tag, iv, count=1):
        self.count += count
        key = (tag, iv.lo, iv.hi)
        if ratio > self.ratio or (ratio == self.ratio and key < self.key):
            self.ratio, self.key, self.interval = ratio, key, iv
        if ratio > self.per_family.get(tag, -math.inf):
            self.per_family[tag] = ratio


def _block_ratios(masses, h, k):
    """Ratios of blocks [b_{l+1}, b_k] for l = k..n given depth-1 masses."""
    n = masses.size
    csum = np.concatenate([[0.0], np.cumsum(masses)])
    l = np.arange(k, n + 1)
    mass = csum[l] - csum[k - 1]
    diam = (l + 1.0 - k) / (k * (l + 1.0))
    return mass * np.exp(-h * np.log(diam))


def _best_blocks(measure, top):
    """Best block overall plus the ``top`` best (k, l) pairs, by ratio."""
    masses = measure.children_masses(())
    h, n = measure.h, measure.n
    pool = []
    for k in range(1, n + 1):
        r = _block_ratios(masses, h, k)
        idx = np.argsort(-r, kind="stable")[:top]
        pool.extend((float(r[i]), k, k + int(i)) for i in idx)
    pool.sort(key=lambda t: (-t[0], t[1], t[2]))
    return pool[:top], n * (n + 1) // 2


def _family_b(measure, base, best):
    kind = measure.kind
    for w in family_b_words(measure.n):
        m = word_matrix(kind, w)
        masses = measure.children_masses(w)
        for _, k, l in base:
            u, v = mobius(m, b(l + 1)), mobius(m, b(k))
            lo, hi = min(u, v), max(u, v)
            ratio = math.fsum(masses[k - 1:l]) * float(hi - lo) ** (-measure.h)
            best.offer(ratio, "b", Interval(lo, hi, ("image", w, ("block", k, l))))


def _family_d(measure, D, best):
    n, kind = measure.n, measure.kind
    _check_family_d(n, D)
    pts = cylinder_endpoints(kind, n, D)
    cyl = []
    for w in itertools.product(range(1, n + 1), repeat=D - 1):
        m = word_matrix(kind, w)
        masses = measure.children_masses(w)
        for j in range(1, n + 1):
            u, v = mobius(m, Fraction(1, j)), mobius(m, Fraction(1, j + 1))
            cyl.append((min(u, v), max(u, v), masses[j - 1]))
    cyl.sort(key=lambda c: c[0])
    los = [c[0] for c in cyl]
    his = [c[1] for c in cyl]
    csum = np.concatenate([[0.0], np.cumsum([c[2] for c in cyl])])
    # depth-D cylinders have disjoint interiors, so those inside [p, q] are a
    # contiguous run: lo >= p and hi <= q
    first = [bisect.bisect_left(los, p) for p in pts]
    last = [bisect.bisect_right(his, q) for q in pts]
    for i, j in itertools.combinations(range(len(pts)), 2):
        mass = csum[last[j]] - csum[first[i]] if last[j] > first[i] else 0.0
        ratio = float(max(mass, 0.0)) * float(pts[j] - pts[i]) ** (-measure.h)
        best.offer(ratio, "d", Interval(pts[i], pts[j], ("endpoints", D)))


def sup_ratio_search(measure: ConformalMeasure, families="abc", eps_list=DEFAULT_EPS,
                     D: int = 2, candidates=(), top: int = TOP_BASE,
                     C: float | None = None, C3: float | None = None) -> MeasureEstimate:
    """Largest density ratio over the chosen families.

    The trivial interval [b_{n+1}, 1] (mass 1) is always a candidate, so an
    empty family still yields an estimate. ``candidates`` adds explicit
    (tag, Interval) pairs evaluated through the mass bracket.
    """
    n, h = measure.n, measure.h
    best = _Best()
    fallback = Interval(b(n + 1), Fraction(1), ("fallback",))
    best.offer((n / (n + 1.0)) ** (-h), "fallback", fallback)
    families = "".join(sorted(set(families)))
    base = []
    if "a" in families or "b" in families:
        base, count = _best_blocks(measure, top)
        if "a" in families:
            r, k, l = base[0]
            best.offer(r, "a", block_interval(k, l), count)
    if "b" in families:
        _family_b(measure, base, best)
    if "c" in families:
        masses = measure.children_masses(())
        for eps in eps_list:
            k = f_index(n, eps)
            ratio = math.fsum(masses[k - 1:]) * ((n + 1.0 - k) / (k * (n + 1.0))) ** (-h)
            best.offer(ratio, "c", f_interval(n, eps))
    if "d" in families:
        _family_d(measure, D, best)
    for tag, iv in candidates:
        if iv.hi > iv.lo:
            best.offer(density_ratio(measure, iv), tag, iv)
    cap = asymptotic_cap(measure.kind, n, h, C, C3)
    H_upper = 1.0 / best.ratio
    # the cap only holds for large n; where a candidate beats it fall back to H >= 0
    H_lower = 1.0 / cap if cap >= best.ratio else 0.0
    return MeasureEstimate(measure.kind, n, h, best.interval, best.key[0], best.ratio,
                           H_lower, H_upper, tuple(families), dict(best.per_family),
                           best.count, cap)


def measure_estimate(kind, n: int, families=None, grid_M: int = 48, **kw) -> MeasureEstimate:
    if families is None:
        families = "abcd" if n <= FAMILY_D_MAX_N else "abc"
    return sup_ratio_search(ConformalMeasure.build(kind, n, grid_M=grid_M), families, **kw)


# -- analytic cap -----------------------------------------------------------------

def asymptotic_cap(kind, n: int, h: float, C: float | None = None,
                          C3: float | None = None) -> float:
    """Upper cap 1 + (1-h) ln n + C (1-h)^2 ln^2 n + C3 ln ln n / n on the sup ratio."""
    C = FITTED_C if C is None else C
    C3 = FITTED_C3 if C3 is None else C3
    ln = math.log(n)
    cap = 1.0 + (1.0 - h) * ln + C * ((1.0 - h) * ln) ** 2
    if n >= 3:
        cap += C3 * math.log(ln) / n
    return cap


def fit_cap_constant(ns=(64, 128, 256, 512, 1024)) -> float:
    """Smallest C >= 0 with cap >= sup ratio for the linear system on ``ns`` (C3 = 0)."""
    C = 0.0
    for n in ns:
        est = measure_estimate(LINEAR, n, families="abc", C=0.0, C3=0.0)
        x = (1.0 - est.h) * math.log(n)
        C = max(C, (est.sup_ratio - 1.0 - x) / x ** 2)
    return C


# -- entropy and power sums -----------------------------------------------------------

@dataclass(frozen=True)
class PartitionEntropy:
    k: int
    l: int
    weights: np.ndarray = field(repr=False)
    entropy: float


def partition_weights(k: int, l: int, exact: bool = False):
    """w_j = |Delta_j| / |[b_{l+1}, b_k]| for j = k..l."""
    if not 1 <= k <= l:
        raise DomainError(f"need 1 <= k <= l, got k={k}, l={l}")
    if exact:
        total = Fraction(1, k) - Fraction(1, l + 1)
        return [Fraction(1, j * (j + 1)) / total for j in range(k, l + 1)]
    j = np.arange(k, l + 1, dtype=float)
    return (k * (l + 1.0) / (l + 1.0 - k)) / (j * (j + 1.0))


def entropy_partition(k: int, l: int) -> PartitionEntropy:
    w = partition_weights(k, l)
    H = -math.fsum(w * np.log(w))
    return PartitionEntropy(k, l, w, max(H, 0.0))


def large_entropy_ratio(n: int, eps: float = 0.3) -> float:
    """H(P_{k, n-1}) / ln n with k = [n - n^(1-eps)] + 1."""
    return entropy_partition(f_index(n, eps), n - 1).entropy / math.log(n)


@dataclass(frozen=True)
class PowerSum:
    lhs: float
    empirical_C: float


def power_sum_check(u, t: float, n: int | None = None) -> PowerSum:
    """(sum u_j^t - 1)/(1 - t) and the constant needed for ln n + C (1-t) ln^2 n."""
    u = np.asarray(u, dtype=float)
    if not 0 < t < 1:
        raise DomainError("t must lie in (0, 1)")
    if u.ndim != 1 or np.any(u < 0) or np.any(u > 1) or abs(u.sum() - 1.0) > 1e-12:
        raise DomainError("u must be a probability vector")
    n = u.size if n is None else n
    lhs = (math.fsum(u[u > 0] ** t) - 1.0) / (1.0 - t)
    ln = math.log(n) if n > 1 else 0.0
    emp = 0.0 if n < 2 else max(0.0, (lhs - ln) / ((1.0 - t) * ln ** 2))
    return PowerSum(lhs, emp)


@dataclass(frozen=True)
class SAlpha:
    closed_form: float
    empirical_max: float
    geometric: float
    samples: int


def s_alpha_closed_form(alpha: float, h: float) -> float:
    return (1.0 - alpha) ** h / (1.0 - alpha ** h)


def s_alpha_max(alpha: float, h: float, samples: int = 10_000, seed: int = 0,
                length: int = 64) -> SAlpha:
    """Random feasible sequences x_{j+1} <= alpha x_j with sum 1, against the closed form.

    Sequences are built from ratios x_{j+1}/x_j = alpha * U_j, with U_j drawn
    close to 1 half of the time so near-extremal sequences are well covered,
    then normalised; truncation after ``length`` terms keeps feasibility.
    """
    if not (0 < alpha < 1 and 0 < h < 1):
        raise DomainError("alpha and h must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    U = rng.random((samples, length - 1))
    near = rng.random(samples) < 0.5
    U[near] = 1.0 - U[near] ** 8 * rng.random((int(near.sum()), 1))
    logs = np.concatenate([np.zeros((samples, 1)), np.cumsum(np.log(alpha * U), axis=1)], axis=1)
    x = np.exp(logs)
    x /= x.sum(axis=1, keepdims=True)
    emp = float(np.max(np.sum(x ** h, axis=1)))
    # geometric x_j = (1 - alpha) alpha^(j-1), summed until the tail is negligible
    J = int(math.ceil(math.log(1e-18) / (h * math.log(alpha)))) + 1
    geo = math.fsum(((1.0 - alpha) * alpha ** j) ** h for j in range(J))
    return SAlpha(s_alpha_closed_form(alpha, h), max(emp, geo), geo, samples)


# -- prefix decomposition lemmas ---------------------------------------------------------

@dataclass(frozen=True)
class RnCheck:
    R: float
    bound: float
    even_ok: bool
    odd_ok: bool
    pieces: int

    @property
    def ok(self) -> bool:
        return self.even_ok and self.odd_ok and self.R <= self.bound + 1e-12


def rn_bound(h: float) -> float:
    return 2.0 ** (1.0 - h) / (2.0 ** h - 1.0)


def rn_bound_check(r, h: float, max_depth: int = 40, slack: float = 1e-15) -> RnCheck:
    """R = sum_m w_m^h over the linear prefix decomposition of [0, r], with the
    even-step (w_m <= w_{m-1}) and odd-step (w_{m+2} <= w_m / 4) relations."""
    if not 0 < h < 1:
        raise DomainError("h must lie in (0, 1)")
    dec = decompose_prefix(LINEAR, r, max_depth)
    w = [float(x) for x in dec.weights()]
    R = math.fsum(x ** h for x in w)
    # pieces are indexed from 1
    even = all(w[m - 1] <= w[m - 2] + slack for m in range(2, len(w) + 1, 2))
    odd = all(w[m + 1] <= w[m - 1] / 4 + slack for m in range(1, len(w) - 1, 2))
    return RnCheck(R, rn_bound(h), even, odd, len(w))


# -- witnesses -------------------------------------------------------------------------

@dataclass(frozen=True)
class Witness:
    interval: Interval
    ratio: float
    normalized: float


def lower_bound_witness(kind, n: int, eps: float, measure: ConformalMeasure | None = None) -> Witness:
    """Density ratio on F_n(eps) (linear) or g_n(F_n(eps)) (Gauss), normalised
    as (ratio - 1)/((1 - h_n) ln n)."""
    kind = SystemKind.parse(kind)
    measure = measure or ConformalMeasure.build(kind, n)
    k = f_index(n, eps)
    if kind is LINEAR:
        mass = math.fsum(measure.children_masses(())[k - 1:])
        iv = f_interval(n, eps)
    else:
        m = word_matrix(GAUSS, (n,))
        u, v = mobius(m, b(n + 1)), mobius(m, b(k))
        iv = Interval(min(u, v), max(u, v), ("image", (n,), ("F", n, eps)))
        mass = math.fsum(measure.children_masses((n,))[k - 1:])
    ratio = mass * float(iv.hi - iv.lo) ** (-measure.h)
    return Witness(iv, ratio, (ratio - 1.0) / ((1.0 - measure.h) * math.log(n)))
