import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hausgauss.conformal import ConformalMeasure
from hausgauss.density import (BudgetExceeded, candidate_families, cylinder_endpoints, density_ratio,
                               entropy_partition, f_interval, large_entropy_ratio,
                               lower_bound_witness, measure_estimate, asymptotic_cap,
                               partition_weights, power_sum_check, rn_bound, rn_bound_check,
                               s_alpha_closed_form, s_alpha_max, sup_ratio_search)
from hausgauss.dimension import moran_dimension
from hausgauss.errors import DegenerateInterval, DomainError
from hausgauss.ifs_core import GAUSS, LINEAR, Interval, b


@pytest.fixture(scope="module")
def lin2():
    return ConformalMeasure.build(LINEAR, 2)


def test_density_ratio_examples(lin2):
    full = Interval(b(3), Fraction(1))
    assert abs(density_ratio(lin2, full) - (2 / 3) ** -lin2.h) < 1e-14
    assert abs(density_ratio(lin2, full) - 1.276) < 1e-3
    assert density_ratio(lin2, Interval(Fraction(0), b(3))) == 0.0
    with pytest.raises(DegenerateInterval):
        density_ratio(lin2, Interval(Fraction(1, 2), Fraction(1, 2)))


def test_family_a_has_all_blocks():
    blocks = [iv for tag, iv in candidate_families(LINEAR, 4, families="a")]
    assert len(blocks) == 10
    assert {(iv.lo, iv.hi) for iv in blocks} == {(b(l + 1), b(k)) for k in range(1, 5) for l in range(k, 5)}


def test_family_c_interval():
    iv = f_interval(100, 0.5)
    assert (iv.lo, iv.hi) == (Fraction(1, 101), Fraction(1, 91))
    with pytest.raises(DomainError):
        f_interval(10, 1.5)


def test_family_d_endpoints():
    pts = cylinder_endpoints(LINEAR, 2, 2)
    assert len(pts) == 7
    d = [iv for tag, iv in candidate_families(LINEAR, 2, D=2, families="d")]
    assert len(d) == 21
    with pytest.raises(DomainError):
        candidate_families(LINEAR, 9, D=2, families="d")


def test_budget_exceeded_carries_partial():
    with pytest.raises(BudgetExceeded) as info:
        candidate_families(LINEAR, 6, families="ab", budget=30)
    assert len(info.value.partial) == 30


def test_linear_two_branch_upper_bound():
    est = sup_ratio_search(ConformalMeasure.build(LINEAR, 2), "ad", D=3)
    assert est.H_upper < 0.79


def test_empty_family_uses_fallback_only():
    for kind in (LINEAR, GAUSS):
        est = measure_estimate(kind, 4, families="")
        assert est.best_family == "fallback"
        assert abs(est.sup_ratio - (4 / 5) ** -est.h) < 1e-14
        assert est.n_candidates == 1


def test_search_at_least_every_candidate(lin2):
    est = sup_ratio_search(lin2, "abcd", D=2)
    for _, iv in candidate_families(LINEAR, 2, D=2, families="abcd", eps_list=(0.3, 0.5, 0.7)):
        if iv.hi > iv.lo:
            assert density_ratio(lin2, iv, 6) <= est.sup_ratio + 1e-12


def test_search_monotone_in_families(lin2):
    order = ["", "a", "ab", "abc", "abcd"]
    sups = [sup_ratio_search(lin2, f).sup_ratio for f in order]
    assert all(u <= v for u, v in zip(sups, sups[1:]))


def test_explicit_candidates_enter_search(lin2):
    iv = Interval(Fraction(1, 3), Fraction(3, 4))
    est = sup_ratio_search(lin2, "", candidates=[("x", iv)])
    assert est.n_candidates == 2
    assert est.family_best["x"] == density_ratio(lin2, iv)


def test_cap_with_zero_constants():
    h = moran_dimension(1024).h
    cap = asymptotic_cap(LINEAR, 1024, h, C=0.0, C3=0.0)
    assert cap == 1 + (1 - h) * math.log(1024)


def test_linear_1024_estimate_and_cap():
    est = measure_estimate(LINEAR, 1024)
    assert 0.5 < est.normalized < 1.05
    assert not est.cap_violated
    assert est.H_lower <= est.H_upper <= 1


def test_cap_normalised_tends_to_one():
    for n in (10 ** 3, 10 ** 5):
        h = moran_dimension(n).h
        cap = asymptotic_cap(LINEAR, n, h)
        assert abs((cap - 1) / ((1 - h) * math.log(n)) - 1) < 1e-12


def test_entropy_examples():
    e = entropy_partition(2, 3)
    assert np.allclose(e.weights, [2 / 3, 1 / 3])
    assert abs(e.entropy - 0.636514) < 1e-6
    assert entropy_partition(7, 7).entropy == 0.0
    assert large_entropy_ratio(10 ** 5) >= 0.65
    with pytest.raises(DomainError):
        partition_weights(3, 2)


def test_partition_weights_exact():
    w = partition_weights(3, 9, exact=True)
    assert sum(w) == 1


def test_power_sum_examples():
    assert abs(power_sum_check([0.5, 0.5], 0.9).lhs - 0.7177) < 1e-4
    assert power_sum_check([1.0, 0.0, 0.0], 0.5).lhs == 0.0
    n = 10 ** 4
    lhs = power_sum_check(np.full(n, 1.0 / n), 1 - 1 / n).lhs
    assert lhs <= math.log(n) * (1 + 2 * math.log(n) / n)
    with pytest.raises(DomainError):
        power_sum_check([0.5, 0.6], 0.5)


def test_s_alpha_examples():
    assert abs(s_alpha_closed_form(0.5, 0.5) - 2.414214) < 1e-6
    r = s_alpha_max(0.5, 0.7, samples=10 ** 4)
    assert r.empirical_max <= r.closed_form + 1e-9
    assert abs(r.geometric - r.closed_form) < 1e-12


def test_rn_bound_near_one():
    assert abs(rn_bound(1 - 1e-9) - 1) < 1e-8
    r = rn_bound_check(Fraction(3, 7), 1 - 1e-12)
    assert abs(r.R - 1) < 1e-9


def test_witness_examples():
    w = lower_bound_witness(LINEAR, 10 ** 4, 0.3)
    assert w.normalized >= 0.6
    # for eps < 1 the index floor(n - n^(1-eps)) + 1 stops at n - 1: two blocks
    near_one = [lower_bound_witness(LINEAR, n, 0.999) for n in (10 ** 3, 10 ** 4)]
    assert (near_one[1].interval.lo, near_one[1].interval.hi) == (b(10 ** 4 + 1), b(10 ** 4 - 1))
    assert near_one[1].normalized < min(0.1, near_one[0].normalized)
    g = lower_bound_witness(GAUSS, 256, 0.5)
    assert 0.3 < g.normalized < 0.55


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 300), st.integers(0, 300), st.floats(0.05, 0.99))
def test_entropy_bounded_by_power_sum(k, extra, h):
    e = entropy_partition(k, k + extra)
    assert e.entropy <= (math.fsum(e.weights ** h) - 1) / (1 - h) + 1e-12
    assert abs(e.weights.sum() - 1) < 1e-12


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=50), st.floats(0.05, 0.95))
def test_power_sum_bounded_by_log_n(raw, t):
    u = np.array(raw)
    if u.sum() <= 0:
        return
    u = u / u.sum()
    u = u / math.fsum(u)
    if abs(u.sum() - 1) > 1e-12:
        return
    n = max(u.size, 2)
    lhs = power_sum_check(u, t, n).lhs
    # concavity: sum u^t <= n^(1-t), so lhs <= (n^(1-t) - 1)/(1-t)
    assert lhs <= (n ** (1 - t) - 1) / (1 - t) + 1e-9


@settings(max_examples=100, deadline=None)
@given(st.fractions(Fraction(1, 10 ** 6), 1, max_denominator=10 ** 6), st.floats(0.3, 0.999))
def test_prefix_lemmas(r, h):
    assert rn_bound_check(r, h).ok


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([LINEAR, GAUSS]), st.integers(2, 12))
def test_upper_bounds_below_one(kind, n):
    est = measure_estimate(kind, n, grid_M=32)
    assert est.H_upper <= 1 + 1e-9
    if kind is GAUSS:
        assert est.H_upper <= (1 - 1 / (3 * n * n)) ** est.h + 1e-9
