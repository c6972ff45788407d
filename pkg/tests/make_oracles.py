"""Regenerate the frozen oracle values used by the tests.

Every value here is computed without the package: mpmath root solves and
Euler-Maclaurin sums at 30 digits, and brute-force sums over all Gauss words
of a fixed length (powers of the transfer operator applied to 1 at x = 0).
Run:  python tests/make_oracles.py
"""

import mpmath as mp
import numpy as np

mp.mp.dps = 30


def moran_root(n):
    return mp.findroot(lambda h: mp.fsum((k * (k + 1)) ** (-h) for k in range(1, n + 1)) - 1, 0.9)


def chi():
    return mp.nsum(lambda k: mp.log(k * (k + 1)) / (k * (k + 1)), [1, mp.inf], method="euler-maclaurin")


def words(n, depth):
    """Matrices (p, q, r, s) of every Gauss word of the given length."""
    p, q, r, s = (np.array([v], dtype=float) for v in (1, 0, 0, 1))
    j = np.arange(1, n + 1, dtype=float)
    for _ in range(depth):
        p, q, r, s = (np.repeat(q, n), (p[:, None] + q[:, None] * j).ravel(),
                      np.repeat(s, n), (r[:, None] + s[:, None] * j).ravel())
    return p, q, r, s


def gauss_lambda(n, t, depth):
    """Z_{d}/Z_{d-1} with Z_d = sum_{|w|=d} |g_w'(0)|^t = sum s_w^{-2t}."""
    z = [np.sum(words(n, d)[3] ** (-2 * t)) for d in (depth - 2, depth - 1, depth)]
    return z[2] / z[1], abs(z[2] / z[1] - z[1] / z[0])


def gauss_cylinder_mass(n, t, word, depth):
    """m(g_w[0,1]) = lim sum_tau |g_w'(g_tau 0)|^t |g_tau'(0)|^t / sum_tau |g_tau'(0)|^t."""
    _, q, _, s = words(n, depth)
    rw, sw = 0.0, 1.0
    for k in word:
        rw, sw = sw, rw + sw * k
    y = q / s
    return np.sum((rw * y + sw) ** (-2 * t) * s ** (-2 * t)) / np.sum(s ** (-2 * t))


H2_GAUSS_LITERATURE = "0.531280506277205141624468647368"  # dimension of E_2, known to 30+ digits

if __name__ == "__main__":
    for n in (2, 3, 10):
        print("moran", n, mp.nstr(moran_root(n), 25))
    print("chi", mp.nstr(chi(), 25))
    print("chi partial 10", mp.nstr(mp.fsum(mp.log(k * (k + 1)) / (k * (k + 1)) for k in range(1, 11)), 20))
    for n, t in [(2, 1.0), (3, 1.0), (2, 0.9), (3, 1.2)]:
        lam, err = gauss_lambda(n, t, 18 if n == 2 else 12)
        print("lambda", n, t, repr(float(lam)), float(err))
    h2 = float(H2_GAUSS_LITERATURE)
    for w in [(1,), (2,), (1, 2), (2, 2, 1)]:
        print("mass", w, repr(float(gauss_cylinder_mass(2, h2, w, 18))))
