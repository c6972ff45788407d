"""Hausdorff dimension h_n of J_n and the dimension asymptotics.

Linear kind: h_n solves the Moran equation sum_{k<=n} (k(k+1))^{-h} = 1.
Gauss kind: h_n is the root in t of lambda_{t,n} = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import BracketFailure, DomainError, NonConvergence
from .ifs_core import GAUSS, LINEAR, SystemKind
from .spectral import HENSLEY_T_MIN, eigen

HENSLEY_LIMIT = 6.0 / math.pi ** 2


@dataclass(frozen=True)
class DimensionResult:
    kind: SystemKind
    n: int
    h: float
    residual: float
    method: str  # "moran-bisection" | "pressure-root" | "degenerate"
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def degenerate(self) -> bool:
        return self.method == "degenerate"


def _degenerate(kind, n=1):
    return DimensionResult(kind, n, 0.0, 0.0, "degenerate",
                           {"note": "single contraction; the limit set is one point"})


def moran_terms(n: int) -> np.ndarray:
    k = np.arange(1, n + 1, dtype=float)
    return -np.log(k) - np.log1p(k)  # log a_k


def moran_residual(n: int, h: float) -> float:
    """sum_{k<=n} (k(k+1))^{-h} - 1, summed with math.fsum."""
    return math.fsum(np.exp(h * moran_terms(n))) - 1.0


def moran_dimension(n: int, tol: float = 1e-13) -> DimensionResult:
    """Bisection on the strictly decreasing map h -> sum a_k^h."""
    if n < 1:
        raise DomainError("n must be positive")
    if tol < 1e-14:
        raise DomainError("tol below 1e-14 is not attainable in double precision")
    if n == 1:
        return _degenerate(LINEAR)
    logs = moran_terms(n)
    lo, hi = 0.0, 1.0
    steps = 0
    while True:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        steps += 1
        if math.fsum(np.exp(mid * logs)) > 1.0:
            lo = mid
        else:
            hi = mid
    res_lo = math.fsum(np.exp(lo * logs)) - 1.0
    res_hi = math.fsum(np.exp(hi * logs)) - 1.0
    h, res = (lo, res_lo) if abs(res_lo) <= abs(res_hi) else (hi, res_hi)
    if abs(res) >= tol:
        raise NonConvergence(f"Moran residual {res:.3e} >= {tol:.1e} at n={n}")
    return DimensionResult(LINEAR, n, h, abs(res), "moran-bisection", {"bisections": steps})


def moran_sweep(n_max: int, block: int = 1024, order: int = 12) -> tuple[np.ndarray, np.ndarray]:
    """h_n and Moran residuals for every n in 2..n_max in O(n_max * n_max / block).

    Within a block of n values the sums are expanded around a reference
    exponent h0:  sum_k a_k^h = sum_j (-(h - h0))^j / j! * P_j(n),  with
    P_j(n) = sum_{k<=n} a_k^{h0} L_k^j and L_k = -log a_k. Newton steps on
    this series converge quadratically. The reported residual is the series
    residual plus the Lagrange bound P_0(n) x^J e^x / J! on the dropped terms,
    x = |h - h0| L_n, so it bounds the true Moran residual up to rounding.
    """
    if n_max < 2:
        raise DomainError("n_max must be at least 2")
    ns = np.arange(2, n_max + 1)
    hs = np.empty(ns.size)
    res = np.empty(ns.size)
    direct = min(n_max, 63)
    for n in range(2, direct + 1):
        r = moran_dimension(n)
        hs[n - 2], res[n - 2] = r.h, r.residual
    logs_all = -moran_terms(n_max)  # L_k
    fact = np.array([math.factorial(j) for j in range(order)], dtype=float)
    start = direct + 1
    while start <= n_max:
        # 1 - h_n ~ 1/(chi n): blocks of size <= start/2 keep |h - h0| L_k small
        stop = min(start + min(block, start // 2), n_max + 1)
        mid = (start + stop) // 2
        h0 = 1.0 - (1.0 - hs[start - 3]) * (start - 1) / mid
        L = logs_all[:stop - 1]
        powers = np.exp(-h0 * L)[None, :] * L[None, :] ** np.arange(order)[:, None]
        head = np.array([math.fsum(row[:start - 1]) for row in powers])
        P = head[:, None] + np.cumsum(powers[:, start - 1:], axis=1)  # (order, block)
        h = np.full(stop - start, h0)
        for _ in range(30):
            dp = (h0 - h)[None, :] ** np.arange(order)[:, None] / fact[:, None]
            step = ((dp * P).sum(axis=0) - 1.0) / -(dp[:-1] * P[1:]).sum(axis=0)
            h = h - step
            if np.max(np.abs(step)) < 1e-17:
                break
        dp = (h0 - h)[None, :] ** np.arange(order)[:, None] / fact[:, None]
        x = np.abs(h - h0) * L[start - 1:stop - 1]
        trunc = P[0] * x ** order * np.exp(x) / math.factorial(order)
        hs[start - 2:stop - 2] = h
        res[start - 2:stop - 2] = np.abs((dp * P).sum(axis=0) - 1.0) + trunc
        start = stop
    return hs, res


def pressure_dimension(kind, n: int, grid_M: int = 48, tol: float = 1e-12,
                       confirm: bool = True) -> DimensionResult:
    """Root in t of lambda_{t,n} = 1 by bracketing plus Brent's secant/IQI steps.

    The bracket starts at [max(1 - 4/n, 0.8), 1] and widens geometrically
    towards t = 0.5; roots below 3/4 are flagged. With ``confirm`` the root is
    recomputed on a grid of 2M nodes and must agree to 10 * tol.
    """
    kind = SystemKind.parse(kind)
    if n < 1:
        raise DomainError("n must be positive")
    if grid_M < 16:
        raise DomainError("grid_M must be at least 16")
    if n == 1:
        return _degenerate(kind)
    h, evals, lo = _pressure_root(kind, n, grid_M)
    lam = eigen(h, n, grid_M, kind, allow_low_t=True).lam
    if abs(lam - 1.0) >= tol:
        raise NonConvergence(f"|lambda - 1| = {abs(lam - 1):.3e} at the root, n={n}")
    diag = {"grid": grid_M, "evaluations": evals, "bracket_lo": lo,
            "below_hensley": h <= HENSLEY_T_MIN}
    if confirm:
        h2, _, _ = _pressure_root(kind, n, 2 * grid_M)
        diag["two_grid_gap"] = abs(h2 - h)
        if diag["two_grid_gap"] > 10 * tol:
            raise NonConvergence(f"grids {grid_M} and {2 * grid_M} disagree by {abs(h2 - h):.2e}")
    return DimensionResult(kind, n, h, abs(lam - 1.0), "pressure-root", diag)


def _pressure_root(kind, n, M):
    evals = 0

    def excess(t):
        nonlocal evals
        evals += 1
        return eigen(t, n, M, kind, allow_low_t=True).lam - 1.0

    lo, hi = max(1.0 - 4.0 / n, 0.8), 1.0
    while excess(lo) < 0:
        if lo <= 0.5:
            raise BracketFailure(f"lambda_(0.5, {n}) < 1: no bracket")
        lo = max(0.5, 1.0 - 2.0 * (1.0 - lo))
    h = brentq(excess, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    return h, evals, lo


def gauss_dimension(n: int, grid_M: int = 48, tol: float = 1e-12) -> DimensionResult:
    return pressure_dimension(GAUSS, n, grid_M, tol)


def dimension(kind, n: int, grid_M: int = 48, tol: float = 1e-12) -> DimensionResult:
    kind = SystemKind.parse(kind)
    if kind is LINEAR:
        return moran_dimension(n)
    return gauss_dimension(n, grid_M, tol)


# -- Lyapunov exponent ---------------------------------------------------------

@dataclass(frozen=True)
class LyapunovConstant:
    """chi = sum_k log(k(k+1)) / (k(k+1)) as partial sum plus a tail bracket."""

    chi: float
    partial: float
    tail_lower: float
    tail_bound: float
    terms_summed: int

    @property
    def lower(self) -> float:
        return self.partial + self.tail_lower

    @property
    def upper(self) -> float:
        return self.partial + self.tail_bound


def _tail_integral(K: float) -> float:
    """int_K^inf log(x(x+1)) / (x(x+1)) dx, via u = 1/x and a series in u."""
    eps = 1.0 / K
    le = math.log(eps)
    total = 0.5 * math.log1p(eps) ** 2
    m, term = 0, math.inf
    while abs(term) > 1e-30 and m < 60:
        p = eps ** (m + 1)
        term = -2.0 * (-1) ** m * p * (le / (m + 1) - 1.0 / (m + 1) ** 2)
        total += term
        m += 1
    return total


def lyapunov_chi(tol: float = 1e-9) -> LyapunovConstant:
    """The summand is decreasing for k >= 2, so the tail after K lies between
    the integrals from K+1 and from K; K is the first size making that gap
    smaller than ``tol``."""
    if tol < 1e-12:
        raise DomainError("tol must be at least 1e-12")
    K = 16
    while _tail_integral(K) - _tail_integral(K + 1) >= tol:
        K *= 2
    lo_k, hi_k = K // 2, K
    while hi_k - lo_k > 1:
        mid = (lo_k + hi_k) // 2
        if _tail_integral(mid) - _tail_integral(mid + 1) < tol:
            hi_k = mid
        else:
            lo_k = mid
    K = hi_k
    parts = []
    for start in range(1, K + 1, 1 << 20):
        k = np.arange(start, min(start + (1 << 20), K + 1), dtype=float)
        kk = k * (k + 1.0)
        parts.append(math.fsum(np.log(kk) / kk))
    partial = math.fsum(parts)
    t_hi, t_lo = _tail_integral(K), _tail_integral(K + 1)
    return LyapunovConstant(partial + 0.5 * (t_lo + t_hi), partial, t_lo, t_hi, K)


# -- sweeps -------------------------------------------------------------------

@dataclass(frozen=True)
class Extrapolation:
    """Least-squares fit  n (1 - h_n) = L + c * ln(n) / n  on the largest n.

    ``limit`` uses the last ``window`` points, ``limit_without_largest`` the
    same window shifted down by one, ``limit_all`` every point supplied.
    """

    limit: float
    slope: float
    limit_without_largest: float | None
    limit_all: float
    window: int
    model: str = "n(1-h_n) = L + c ln(n)/n"


@dataclass(frozen=True)
class DimTable:
    kind: SystemKind
    results: tuple
    extrapolation: Extrapolation | None

    def rows(self):
        for r in self.results:
            yield r.n, r.h, r.n * (1.0 - r.h)


def fit_limit(ns, ys) -> tuple[float, float]:
    ns = np.asarray(ns, dtype=float)
    X = np.column_stack([np.ones_like(ns), np.log(ns) / ns])
    coef, *_ = np.linalg.lstsq(X, np.asarray(ys, dtype=float), rcond=None)
    return float(coef[0]), float(coef[1])


EXTRAPOLATION_WINDOW = 4


def extrapolate(ns, ys, window: int = EXTRAPOLATION_WINDOW) -> Extrapolation | None:
    """Fit on the ``window`` largest n; small n sit outside the asymptotic regime."""
    ns, ys = list(ns), list(ys)
    if len(ns) < 2:
        return None
    w = min(window, len(ns))
    L, c = fit_limit(ns[-w:], ys[-w:])
    L_drop = fit_limit(ns[-w - 1:-1], ys[-w - 1:-1])[0] if len(ns) > w else None
    return Extrapolation(L, c, L_drop, fit_limit(ns, ys)[0], w)


def dim_sweep(kind, n_list, grid_M: int = 48, tol: float = 1e-12, results=None) -> DimTable:
    """Tabulate (n, h_n, n(1 - h_n)) and extrapolate the normalised product.

    ``results`` may carry precomputed DimensionResults (e.g. from a parallel map).
    """
    kind = SystemKind.parse(kind)
    n_list = list(n_list)
    if n_list != sorted(n_list):
        raise DomainError("n_list must be ascending")
    if results is None:
        results = [dimension(kind, n, grid_M, tol) for n in n_list]
    results = tuple(sorted(results, key=lambda r: r.n))
    usable = [r for r in results if not r.degenerate]
    ns = [r.n for r in usable]
    ys = [r.n * (1.0 - r.h) for r in usable]
    return DimTable(kind, results, extrapolate(ns, ys))
