"""Invariant suites run by ``hausgauss verify``.

Each suite returns Check records; a check passes when its measured value is
within its limit. Exceptions inside a check become failed checks so one
broken suite never hides the others.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import NonConvergence, StaleDimension
from .ifs_core import (GAUSS, LINEAR, Interval, b, block_interval, cf_encode, cylinder_interval,
                       image_interval, word_derivative_abs)


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    passed: bool
    value: float
    limit: float


class _Suite:
    def __init__(self, name):
        self.name, self.checks = name, []

    def le(self, check, value, limit):
        value = float(value)
        self.checks.append(Check(self.name, check, bool(value <= limit), value, float(limit)))

    def guard(self, check, fn):
        try:
            fn()
        except (StaleDimension, NonConvergence, ArithmeticError, ValueError) as exc:
            self.checks.append(Check(self.name, f"{check}: {type(exc).__name__}", False, math.nan, 0.0))


def _ifs_suite(cfg, rng):
    s = _Suite("ifs_core")

    def tiling():
        # depth 1 tiles [b_{n+1}, 1]; deeper levels leave gaps, so there only
        # disjoint interiors and containment are required
        bad = 0
        for kind in (LINEAR, GAUSS):
            for n in (2, 3, 4):
                for d in (1, 2, 3):
                    cyl = sorted((cylinder_interval(kind, w) for w in
                                  itertools.product(range(1, n + 1), repeat=d)), key=lambda c: c.lo)
                    bad += sum(cyl[i].hi > cyl[i + 1].lo for i in range(len(cyl) - 1))
                    bad += cyl[0].lo < b(n + 1) or cyl[-1].hi > 1
                    if d == 1:
                        bad += sum(cyl[i].hi != cyl[i + 1].lo for i in range(len(cyl) - 1))
                        bad += (cyl[0].lo, cyl[-1].hi) != (b(n + 1), 1)
        s.le("tiling n<=4 depth<=3", bad, 0)

    def nesting():
        bad = 0
        for _ in range(200):
            kind = (LINEAR, GAUSS)[int(rng.integers(2))]
            w = tuple(int(k) for k in rng.integers(1, 9, size=int(rng.integers(1, 7))))
            bad += not cylinder_interval(kind, w + (int(rng.integers(1, 9)),)).issubset(cylinder_interval(kind, w))
        s.le("nesting depth<=6", bad, 0)

    def chain():
        bad = 0
        for _ in range(100):
            w = tuple(int(k) for k in rng.integers(1, 20, size=int(rng.integers(1, 6))))
            expect = math.prod(Fraction(1, k * (k + 1)) for k in w)
            bad += word_derivative_abs(LINEAR, w, Fraction(int(rng.integers(0, 7)), 7)) != expect
        s.le("linear chain rule exact", bad, 0)

    def coding():
        bad = 0
        for _ in range(200):
            kind = (LINEAR, GAUSS)[int(rng.integers(2))]
            x = Fraction(float(rng.random()) or 0.5)
            d = int(rng.integers(1, 13))
            try:
                w = cf_encode(kind, x, d)
            except ArithmeticError:
                continue
            bad += not cylinder_interval(kind, w).contains(x)
        s.le("coding round trip d<=12", bad, 0)

    def decomposition():
        from .density import rn_bound_check
        from .dimension import moran_dimension
        h = moran_dimension(64).h
        bad = sum(not rn_bound_check(Fraction(float(r)), h).ok for r in rng.random(300) if r > 0)
        s.le("prefix decomposition lemmas, 300 r at h_64", bad, 0)

    for name, fn in [("tiling", tiling), ("nesting", nesting), ("chain", chain),
                     ("coding", coding), ("decomposition", decomposition)]:
        s.guard(name, fn)
    return s.checks


def _spectral_suite(cfg, rng):
    from .spectral import INF, assemble_operator, chebyshev_grid, eigen, gauss_density
    s = _Suite("spectral")
    tol = cfg.tol["eigen"]

    def telescoping():
        grid = chebyshev_grid(32)
        rho = gauss_density(grid.nodes)
        res = assemble_operator(1.0, INF, grid).apply(rho) - rho
        s.le("telescoping L_{1,inf} rho = rho", np.max(np.abs(res)), tol)

    def eigen_inf():
        sd = eigen(1.0, INF, 32, tol=tol)
        s.le("lambda_{1,inf} = 1", abs(sd.lam - 1.0), 1e-10)
        s.le("rho_{1,inf} analytic", np.max(np.abs(sd.rho - gauss_density(sd.grid.nodes))), 1e-8)
        s.le("pairing = 1", abs(sd.pairing() - 1.0), 1e-10)

    def monotone():
        lam_t = [eigen(t, 10, 32).lam for t in np.linspace(0.8, 1.2, 10)]
        s.le("lambda decreasing in t", int(np.sum(np.diff(lam_t) >= 0)), 0)
        lam_n = [eigen(1.0, n, 32).lam for n in (2, 4, 8, 16, 32, 64, 128, 256)]
        s.le("lambda increasing in n", int(np.sum(np.diff(lam_n) <= 0)), 0)

    def grids():
        gap = max(abs(eigen(t, n, 24).lam - eigen(t, n, 48).lam)
                  for t in (0.8, 1.0, 1.2) for n in (2, 50, INF))
        s.le("grid M vs 2M", gap, 1e-8)

    for name, fn in [("telescoping", telescoping), ("eigen_inf", eigen_inf),
                     ("monotone", monotone), ("grids", grids)]:
        s.guard(name, fn)
    return s.checks


def _dimension_suite(cfg, rng):
    from .dimension import (dimension, lyapunov_chi, moran_dimension, moran_residual,
                            pressure_dimension)
    s = _Suite("dimension")

    def moran():
        hs = [moran_dimension(n, cfg.tol["moran"]) for n in range(2, 301)]
        s.le("Moran residual n<=300", max(abs(moran_residual(r.n, r.h)) for r in hs), 1e-12)
        s.le("h_n increasing (linear)", int(np.sum(np.diff([r.h for r in hs]) <= 0)), 0)

    def gauss_monotone():
        hs = [dimension(GAUSS, n, 32, cfg.tol["root"]).h for n in range(2, 13)]
        s.le("h_n increasing (gauss)", int(np.sum(np.diff(hs) <= 0)), 0)

    def agreement():
        gap = max(abs(pressure_dimension(LINEAR, n, 32).h - moran_dimension(n).h) for n in (2, 3, 5, 10))
        s.le("operator root vs Moran (linear)", gap, 1e-9)

    def chi():
        c = lyapunov_chi(cfg.tol["chi"])
        s.le("chi bracket width", c.upper - c.lower, 2 * cfg.tol["chi"])

    for name, fn in [("moran", moran), ("gauss_monotone", gauss_monotone),
                     ("agreement", agreement), ("chi", chi)]:
        s.guard(name, fn)
    return s.checks


def _conformal_suite(cfg, rng):
    from .conformal import ConformalMeasure
    from .dimension import dimension
    s = _Suite("conformal")

    def masses(kind, n):
        h = dimension(kind, n, 48).h + cfg.h_error
        m = ConformalMeasure.build(kind, n, h=h, grid_M=48, stale_tol=cfg.tol["stale"])
        tag = f"{kind.value} n={n}"
        s.le(f"total mass ({tag})", abs(m.children_masses(()).sum() - 1.0), 1e-10)
        worst = 0.0
        for _ in range(30):
            w = tuple(int(k) for k in rng.integers(1, n + 1, size=int(rng.integers(0, 4))))
            worst = max(worst, abs(m.children_masses(w).sum() - m.cylinder_mass(w)))
        s.le(f"additivity depth<=4 ({tag})", worst, 1e-12 if kind is LINEAR else 1e-8)
        F = Interval(Fraction(2, 7), Fraction(5, 7))
        widths = [m.interval_mass(F, d).width for d in range(1, 7)]
        s.le(f"bracket width shrinks ({tag})",
             max(widths[d + 2] - widths[d] for d in range(len(widths) - 2)), 1e-12)
        if kind is GAUSS:
            m2 = ConformalMeasure.build(kind, n, h=m.h, grid_M=96, stale_tol=cfg.tol["stale"])
            gap = max(abs(m.cylinder_mass((j,)) - m2.cylinder_mass((j,))) for j in range(1, n + 1))
            s.le(f"conformality, two quadratures ({tag})", gap, 1e-8)

    for kind in (LINEAR, GAUSS):
        for n in (2, 5):
            s.guard(f"measure {kind.value} n={n}", lambda: masses(kind, n))
    return s.checks


def _density_suite(cfg, rng):
    from .density import (density_ratio, entropy_partition, measure_estimate, power_sum_check,
                          s_alpha_max, sup_ratio_search)
    s = _Suite("density")

    def caps():
        worst, sharp = -math.inf, -math.inf
        for kind in (LINEAR, GAUSS):
            for n in range(2, 11):
                e = measure_estimate(kind, n, D=min(cfg.depth, 3))
                worst = max(worst, e.H_upper - 1.0)
                if kind is GAUSS:
                    sharp = max(sharp, e.H_upper - (1 - 1 / (3 * n * n)) ** e.h)
        s.le("H_upper <= 1", worst, 1e-9)
        s.le("Gauss H_upper <= (1-1/(3n^2))^h", sharp, 1e-9)

    def pushforward():
        from .conformal import ConformalMeasure
        m = ConformalMeasure.build(LINEAR, 6, depth_cap=6)
        worst = 0.0
        for _ in range(20):
            k = int(rng.integers(1, 7))
            F = block_interval(k, int(rng.integers(k, 7)))
            w = tuple(int(x) for x in rng.integers(1, 7, size=int(rng.integers(1, 4))))
            worst = max(worst, abs(density_ratio(m, image_interval(LINEAR, w, F), 5) / density_ratio(m, F, 1) - 1))
        s.le("linear pushforward invariance", worst, 1e-12)

    def duality():
        from .conformal import ConformalMeasure
        from .density import candidate_families
        m = ConformalMeasure.build(LINEAR, 2)
        est = sup_ratio_search(m, "acd", D=2)
        worst = max(density_ratio(m, iv, 4) - est.sup_ratio
                    for _, iv in candidate_families(LINEAR, 2, D=2, families="acd"))
        s.le("candidate ratios <= sup", worst, 1e-12)
        s.le("monotone search", sup_ratio_search(m, "a").sup_ratio - est.sup_ratio, 0.0)

    def entropy():
        worst = -math.inf
        for k, l in [(1, 5), (3, 40), (10, 200)]:
            e = entropy_partition(k, l)
            for h in (0.5, 0.9, 0.99):
                worst = max(worst, e.entropy - (math.fsum(e.weights ** h) - 1) / (1 - h))
        s.le("entropy <= (sum w^h - 1)/(1-h)", worst, 1e-12)
        s.le("power sum (1/2,1/2), t=0.9", abs(power_sum_check([0.5, 0.5], 0.9).lhs - (2 ** 0.1 - 1) / 0.1), 1e-12)

    def s_alpha():
        for a, h in [(0.5, 0.5), (0.3, 0.7)]:
            r = s_alpha_max(a, h, samples=1000, seed=cfg.seed)
            s.le(f"S_alpha max ({a},{h})", r.empirical_max - r.closed_form, 1e-9)
            s.le(f"S_alpha geometric ({a},{h})", abs(r.geometric - r.closed_form), 1e-12)

    for name, fn in [("caps", caps), ("pushforward", pushforward), ("duality", duality),
                     ("entropy", entropy), ("s_alpha", s_alpha)]:
        s.guard(name, fn)
    return s.checks


SUITES = (_ifs_suite, _spectral_suite, _dimension_suite, _conformal_suite, _density_suite)


def run_suites(cfg) -> list:
    rng = np.random.default_rng(cfg.seed)
    out = []
    for suite in SUITES:
        out.extend(suite(cfg, rng))
    return out
