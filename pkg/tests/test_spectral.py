import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hausgauss.errors import DomainError
from hausgauss.ifs_core import LINEAR
from hausgauss.spectral import (INF, assemble_operator, chebyshev_grid, eigen,
                                eigen_closeness_probe, gauss_density, hensley_tail_bound,
                                perturbation_probe)

# lambda_{t,n}: ratio of sums over all Gauss words of length 18 (n=2) or 12 (n=3),
# see make_oracles.py; the tolerance is the oracle's own convergence error
LAMBDA_ORACLE = {
    (2, 1.0): (0.5613269157220162, 1e-7),
    (3, 1.0): (0.6618415189597244, 3e-5),
    (2, 0.9): (0.6333523817564103, 1e-7),
    (3, 1.2): (0.5065763302890927, 3e-5),
}


def hurwitz_ones(t, n, x):
    """L_{t,n} 1 at x = zeta(2t, x+1) - zeta(2t, x+n+1)."""
    v = mp.zeta(2 * t, x + 1)
    if n != INF:
        v -= mp.zeta(2 * t, x + n + 1)
    return float(v)


def test_grid_nodes():
    g = chebyshev_grid(16)
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 1.0
    assert np.all(np.diff(g.nodes) > 0)
    with pytest.raises(DomainError):
        chebyshev_grid(4)


def test_interpolation_exact_on_polynomials():
    g = chebyshev_grid(20)
    y = np.linspace(0, 1, 37)
    p = lambda x: 3 * x ** 7 - x ** 2 + 0.5
    assert np.max(np.abs(g.interpolate(g.sample(p), y) - p(y))) < 1e-13


def test_telescoping_identity():
    grid = chebyshev_grid(32)
    rho = gauss_density(grid.nodes)
    assert np.max(np.abs(assemble_operator(1.0, INF, grid).apply(rho) - rho)) < 1e-12


def test_two_branch_sum_at_zero():
    grid = chebyshev_grid(32)
    out = assemble_operator(1.0, 2, grid).apply(np.ones(32))
    assert abs(out[0] - 1.25) < 1e-15


@pytest.mark.parametrize("t,n", [(1.0, INF), (0.8, INF), (1.3, INF), (1.0, 7), (0.9, 64),
                                 (0.9, 65), (1.1, 1000), (1.0, 10 ** 5)])
def test_operator_on_constants_matches_hurwitz(t, n):
    grid = chebyshev_grid(32)
    out = assemble_operator(t, n, grid).apply(np.ones(32))
    ref = np.array([hurwitz_ones(t, n, x) for x in grid.nodes])
    assert np.max(np.abs(out - ref)) < 1e-13


@pytest.mark.parametrize("key", sorted(LAMBDA_ORACLE))
def test_eigenvalue_against_word_sum_oracle(key):
    n, t = key
    value, tol = LAMBDA_ORACLE[key]
    assert abs(eigen(t, n, 48).lam - value) < tol


def test_unperturbed_eigen_triple():
    sd = eigen(1.0, INF, 32)
    assert abs(sd.lam - 1.0) < 1e-10
    assert np.max(np.abs(sd.rho - gauss_density(sd.grid.nodes))) < 1e-8
    assert abs(sd.pairing() - 1.0) < 1e-12
    assert abs(sd.dual_weights.sum() - 1.0) < 1e-12


def test_dual_weights_integrate_like_gauss_measure():
    # eigenmeasure of L_{1,inf} is Lebesgue: integral of x^2 is 1/3
    sd = eigen(1.0, INF, 32)
    assert abs(sd.integrate(sd.grid.nodes ** 2) - 1.0 / 3.0) < 1e-10


def test_finite_n_eigenvalue_below_one_and_grid_stable():
    lam24, lam48 = eigen(1.0, 2, 24).lam, eigen(1.0, 2, 48).lam
    assert 0 < lam48 < 1
    assert abs(lam24 - lam48) < 1e-8


def test_linear_operator_eigenvalue_is_moran_sum():
    n, t = 5, 0.8
    k = np.arange(1, n + 1)
    expect = math.fsum((k * (k + 1.0)) ** -t)
    assert abs(eigen(t, n, 32, kind=LINEAR).lam - expect) < 1e-12


def test_domain_guards():
    with pytest.raises(DomainError):
        assemble_operator(0.7, INF, 16)
    with pytest.raises(DomainError):
        assemble_operator(0.7, 5, 16)
    assemble_operator(0.5, 5, 16, allow_low_t=True)
    with pytest.raises(DomainError):
        assemble_operator(1.0, 0, 16)
    with pytest.raises(DomainError):
        assemble_operator(5.0, 3, 16)
    with pytest.raises(DomainError):
        assemble_operator(1.0, INF, 16, kind=LINEAR)


def test_probe_examples():
    tail = perturbation_probe(1.0, 100, lambda x: np.ones_like(x))
    assert tail <= 1 / 100 and tail <= hensley_tail_bound(1.0, 100)
    # f(x) = x: the tail is sum_{k>50} (x+k)^{-1} (x+k)^{-1.9} = zeta(2.9, x+51)
    grid = chebyshev_grid(32)
    probe = perturbation_probe(0.95, 50, lambda x: x, grid)
    ref = max(float(mp.zeta(2.9, x + 51)) for x in grid.nodes)
    assert abs(probe - ref) < 1e-10
    assert probe <= hensley_tail_bound(0.95, 50)
    assert perturbation_probe(1.0, 10 ** 4, lambda x: np.ones_like(x)) <= 1e-4


def test_closeness_unperturbed_and_halving():
    c = eigen_closeness_probe(1.0, INF)
    assert c.dlambda < 1e-10 and c.drho_sup < 1e-8
    d = [eigen_closeness_probe(1.0, n).dlambda for n in (50, 100, 200)]
    for u, v in zip(d, d[1:]):
        assert 1.6 < u / v < 2.4


def test_closeness_symmetric_in_t():
    up, down = (eigen_closeness_probe(1.0 + s, INF).dlambda / 0.01 for s in (0.01, -0.01))
    assert 0.5 < up / down < 2.0


@settings(max_examples=25, deadline=None)
@given(st.floats(0.8, 1.5), st.integers(1, 300))
def test_eigenvalue_monotone(t, n):
    lam = eigen(t, n, 24).lam
    assert eigen(t, n + 1, 24).lam > lam
    assert eigen(t + 0.05, n, 24).lam < lam


@settings(max_examples=25, deadline=None)
@given(st.floats(0.8, 1.5), st.integers(1, 200))
def test_eigenvector_positive_and_paired(t, n):
    sd = eigen(t, n, 24)
    assert np.all(sd.rho > 0)
    assert abs(sd.pairing() - 1.0) < 1e-12
