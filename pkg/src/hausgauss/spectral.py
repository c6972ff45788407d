"""Collocation discretisation of the transfer operators L_{t,n} and L_{t,inf}.

Functions on [0, 1] are represented by their values at Chebyshev-Lobatto
nodes and evaluated elsewhere by barycentric interpolation. Row i of the
operator matrix is

    sum_k |g_k'(x_i)|^t * interp_row(g_k(x_i)).

For the Gauss kind the first ``DIRECT_TERMS`` branches are summed directly.
All remaining branches (k up to n, or to infinity) have g_k(x) in
[0, 1/(DIRECT_TERMS+1)], where the interpolant is replaced by its Taylor
polynomial at 0; the sums over k then reduce to Hurwitz zeta values
zeta(2t + j, x + K + 1), so the infinite tail is handled analytically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import zeta

from .errors import DomainError, NonConvergence
from .ifs_core import GAUSS, LINEAR, SystemKind

INF = math.inf
DIRECT_TERMS = 64
TAIL_DEGREE = 8
T_MAX = 4.0
HENSLEY_T_MIN = 0.75


@dataclass(frozen=True)
class CollocationGrid:
    """Chebyshev-Lobatto nodes mapped to [0, 1], increasing."""

    M: int
    nodes: np.ndarray = field(repr=False, compare=False)
    bary: np.ndarray = field(repr=False, compare=False)

    def interp_matrix(self, y) -> np.ndarray:
        """Rows of barycentric weights evaluating the interpolant at ``y``."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        diff = y[:, None] - self.nodes[None, :]
        hit = diff == 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = self.bary[None, :] / diff
            rows = terms / terms.sum(axis=1, keepdims=True)
        exact = hit.any(axis=1)
        if exact.any():
            rows[exact] = hit[exact].astype(float)
        return rows

    def interpolate(self, values, y):
        return self.interp_matrix(y) @ np.asarray(values, dtype=float)

    def sample(self, f) -> np.ndarray:
        return np.asarray(f(self.nodes), dtype=float) * np.ones(self.M)


@lru_cache(maxsize=None)
def chebyshev_grid(M: int) -> CollocationGrid:
    if M < 8:
        raise DomainError(f"grid size must be at least 8, got {M}")
    j = np.arange(M)
    nodes = (1.0 - np.cos(np.pi * j / (M - 1))) / 2.0
    nodes[0], nodes[-1] = 0.0, 1.0
    bary = (-1.0) ** j
    bary[0] *= 0.5
    bary[-1] *= 0.5
    return CollocationGrid(M, nodes, bary)


@dataclass(frozen=True)
class OperatorMatrix:
    entries: np.ndarray = field(repr=False)
    t: float
    n: float  # positive integer or INF
    grid: CollocationGrid
    kind: SystemKind = GAUSS

    def apply(self, values) -> np.ndarray:
        return self.entries @ np.asarray(values, dtype=float)


@dataclass(frozen=True)
class SpectralData:
    """Leading eigen-triple of a discretised operator.

    ``dual_weights`` sum to 1 and act as a quadrature rule for the eigenmeasure
    m_{t,n} on smooth integrands sampled at the grid nodes; ``rho`` is scaled
    so that the pairing with the weights is 1.
    """

    lam: float
    rho: np.ndarray = field(repr=False)
    dual_weights: np.ndarray = field(repr=False)
    grid: CollocationGrid = field(repr=False)
    t: float = float("nan")
    n: float = float("nan")
    kind: SystemKind = GAUSS
    iterations: int = 0
    residual: float = 0.0

    def integrate(self, values) -> float:
        return float(self.dual_weights @ np.asarray(values, dtype=float))

    def pairing(self) -> float:
        return self.integrate(self.rho)


def _check_n(n):
    if n == INF:
        return INF
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer or INF, got {n!r}")
    return int(n)


def _check_t(t, n, allow_low_t):
    if not math.isfinite(t) or t > T_MAX:
        raise DomainError(f"t={t} outside the overflow guard (.., {T_MAX}]")
    if t <= HENSLEY_T_MIN and (n == INF or not allow_low_t):
        raise DomainError(f"t={t} must exceed 3/4")
    if t <= 0:
        raise DomainError(f"t={t} must be positive")


@lru_cache(maxsize=64)
def _gauss_parts(n, M):
    """t-independent pieces of the Gauss operator for (n, grid size)."""
    grid = chebyshev_grid(M)
    x = grid.nodes
    kd = min(n, DIRECT_TERMS)
    ks = np.arange(1, kd + 1, dtype=float)
    shifted = x[None, :] + ks[:, None]  # (kd, M): x_i + k
    rows = np.stack([grid.interp_matrix(1.0 / shifted[k]) for k in range(kd)])
    log_shift = np.log(shifted)
    taylor = None
    if n > DIRECT_TERMS:
        delta = 1.0 / (DIRECT_TERMS + 1)
        deg = TAIL_DEGREE
        s = (1.0 - np.cos(np.pi * (np.arange(deg + 1) + 0.5) / (deg + 1))) / 2.0
        vander = np.vander(s, deg + 1, increasing=True)
        # f(u) ~ sum_j c_j (u/delta)^j on [0, delta]; c = taylor @ f_nodes
        taylor = np.linalg.solve(vander, grid.interp_matrix(delta * s)) / (
            delta ** np.arange(deg + 1)
        )[:, None]
    return rows, log_shift, taylor


def _hurwitz_tail(t, n, x):
    """Z[i, j] = sum_{K < k <= n} (x_i + k)^{-(2t + j)} with K = DIRECT_TERMS."""
    s = 2.0 * t + np.arange(TAIL_DEGREE + 1)[None, :]
    z = zeta(s, x[:, None] + DIRECT_TERMS + 1)
    if n != INF:
        z = z - zeta(s, x[:, None] + n + 1)
    return z


def assemble_operator(t: float, n, grid: CollocationGrid | int, kind=GAUSS,
                      allow_low_t: bool = False) -> OperatorMatrix:
    """Matrix of f -> sum_{k<=n} f(g_k(x)) |g_k'(x)|^t acting on nodal values.

    ``allow_low_t`` admits 0 < t <= 3/4 for finite n (needed when the
    dimension itself is below 3/4); the infinite operator always requires
    t > 3/4.
    """
    kind = SystemKind.parse(kind)
    if isinstance(grid, int):
        grid = chebyshev_grid(grid)
    n = _check_n(n)
    _check_t(t, n, allow_low_t)
    if kind is LINEAR:
        if n == INF:
            raise DomainError("the linear operator is only assembled for finite n")
        entries = _linear_entries(t, n, grid)
    else:
        rows, log_shift, taylor = _gauss_parts(n, grid.M)
        weights = np.exp(-2.0 * t * log_shift)  # (kd, M)
        entries = np.einsum("ki,kij->ij", weights, rows)
        if taylor is not None:
            entries = entries + _hurwitz_tail(t, n, grid.nodes) @ taylor
    if not np.all(np.isfinite(entries)):
        raise DomainError(f"non-finite operator entries at t={t}, n={n}")
    return OperatorMatrix(entries, float(t), n, grid, kind)


def _linear_entries(t, n, grid):
    entries = np.zeros((grid.M, grid.M))
    x = grid.nodes
    for k in range(1, n + 1):
        kk = k * (k + 1)
        entries += kk ** (-t) * grid.interp_matrix(1.0 / k - x / kk)
    return entries


def _power(A, tol, max_iter):
    # Past tol, keep iterating while the residual still drops so the
    # eigenvalue reaches the rounding floor rather than stopping at tol.
    v = np.ones(A.shape[0])
    lam, best = 0.0, math.inf
    for it in range(1, max_iter + 1):
        w = A @ v
        lam = float(w.max())
        if lam <= 0:
            raise NonConvergence("power iteration lost positivity")
        w /= lam
        res = float(np.max(np.abs(A @ w - lam * w))) / (abs(lam) * float(np.max(np.abs(w))))
        v = w
        if res < tol and (res > 0.5 * best or res < 1e-3 * tol):
            return lam, v, it, res
        best = min(best, res)
    raise NonConvergence(f"power iteration residual {res:.3e} after {max_iter} steps")


def leading_eigen(mtx: OperatorMatrix, tol: float = 1e-12, max_iter: int = 20000) -> SpectralData:
    """Perron eigenvalue, eigenfunction and dual weights by power iteration.

    Starts from the all-ones vector on both sides. The dual weights are scaled
    to total mass 1 first, then rho is scaled so the pairing equals 1.
    """
    A = mtx.entries
    lam, rho, it1, res1 = _power(A, tol, max_iter)
    lam_t, dual, it2, res2 = _power(A.T, tol, max_iter)
    if abs(lam - lam_t) > 1e3 * tol * abs(lam):
        raise NonConvergence(f"primal/dual eigenvalues disagree: {lam} vs {lam_t}")
    dual = dual / dual.sum()
    rho = rho / float(dual @ rho)
    if np.any(rho <= 0):
        raise NonConvergence("leading eigenvector is not positive; grid too coarse?")
    return SpectralData(lam, rho, dual, mtx.grid, mtx.t, mtx.n, mtx.kind,
                        max(it1, it2), max(res1, res2))


def eigen(t, n, M=32, kind=GAUSS, allow_low_t=False, tol=1e-12) -> SpectralData:
    return leading_eigen(assemble_operator(t, n, chebyshev_grid(M), kind, allow_low_t), tol=tol)


def gauss_density(x):
    """Invariant density 1/((1+x) ln 2) of the Gauss map: the eigenfunction of L_{1,inf}."""
    return 1.0 / ((1.0 + np.asarray(x, dtype=float)) * math.log(2.0))


def _as_samples(f, grid):
    return grid.sample(f) if callable(f) else np.asarray(f, dtype=float)


def perturbation_probe(t: float, n: int, f, grid: CollocationGrid | int = 32) -> float:
    """sup over nodes of |(L_{t,n} - L_{t,inf}) f|.

    Callers compare against 8|t| n^{1-2t} ||f||_BV; sup norm is dominated by
    the BV norm, so this is a necessary condition for the operator bound.
    """
    if isinstance(grid, int):
        grid = chebyshev_grid(grid)
    fv = _as_samples(f, grid)
    diff = assemble_operator(t, n, grid).apply(fv) - assemble_operator(t, INF, grid).apply(fv)
    return float(np.max(np.abs(diff)))


def hensley_tail_bound(t: float, n: int, bv_norm: float = 1.0) -> float:
    return 8.0 * abs(t) * n ** (1.0 - 2.0 * t) * bv_norm


@dataclass(frozen=True)
class Closeness:
    t: float
    n: float
    dlambda: float
    drho_sup: float


def eigen_closeness_probe(t: float, n, M: int = 32) -> Closeness:
    """Distance of (lambda_{t,n}, rho_{t,n}) from (1, 1/((1+x) ln 2))."""
    sd = eigen(t, n, M)
    ref = gauss_density(sd.grid.nodes)
    return Closeness(t, n, abs(sd.lam - 1.0), float(np.max(np.abs(sd.rho - ref))))
