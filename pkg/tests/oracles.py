"""Independent reference computations used by the tests.

Nothing here imports the package: each oracle is built from first principles
(closed forms, a shooting method, dense root finding) so that agreement with
the library is a real check rather than a tautology.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq


def flat_potential_d2(z, w, beta):
    return (np.abs(z) ** (2 * beta) + np.abs(w) ** (2 * beta)) / beta**2


def flat_potential_d3_half(z, w):
    return 8 * np.sqrt(2) * np.sqrt(np.abs(z) + np.abs(w) + np.abs(z - w))


# ----------------------------------------------------------------------------
# football link spectrum by shooting
#
# With f = sin^m1 cos^m2 p the separated equation on [0, pi/2] becomes
#   p'' + ((2 m1 + 1) cot s - (2 m2 + 1) tan s) p' + (lam - M (M + 2)) p = 0,
# M = m1 + m2, regular at both ends with p'(0) = p'(pi/2) = 0.


def _shoot(m_near, m_far, mu, s_mid, s0=1e-4):
    def rhs(s, y):
        p, dp = y
        return [dp, -((2 * m_near + 1) / np.tan(s) - (2 * m_far + 1) * np.tan(s)) * dp - mu * p]

    # two-term Frobenius start at s0
    a = -mu / (4 * (m_near + 1))
    y0 = [1 + a * s0**2, 2 * a * s0]
    sol = solve_ivp(rhs, (s0, s_mid), y0, method="DOP853", rtol=1e-12, atol=1e-14)
    return sol.y[0, -1], sol.y[1, -1]


def _mismatch(m1, m2, lam):
    M = m1 + m2
    mu = lam - M * (M + 2)
    mid = np.pi / 4
    pl, dpl = _shoot(m1, m2, mu, mid)
    pr, dpr = _shoot(m2, m1, mu, mid)
    # the right solution runs in tau = pi/2 - s, so d/ds = -d/dtau
    return pl * (-dpr) - dpl * pr


def shooting_eigenvalues(m1, m2, lam_max, step=0.5):
    """All separated eigenvalues below lam_max for angular weights (m1, m2).

    Consecutive eigenvalues of one weight pair are at least 8 apart, so a
    scan with step 0.5 cannot jump over a sign change.
    """
    M = m1 + m2
    grid = np.arange(M * (M + 2) - 0.3, lam_max + step, step)
    vals = [_mismatch(m1, m2, x) for x in grid]
    out = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa * fb < 0:
            out.append(brentq(lambda x: _mismatch(m1, m2, x), a, b, xtol=1e-12))
    return out


def football_spectrum_oracle(beta, count, lam_max=16.0):
    """Lowest ``count`` eigenvalues of the football link, with multiplicity.

    Weights (k1, k2) and (+-k1, +-k2) share the radial problem, so only
    k1, k2 >= 0 are solved and counted with multiplicity 1, 2 or 4.
    """
    vals = []
    k = 0
    while (k / beta) * (k / beta + 2) <= lam_max:
        k += 1
    for k1 in range(k + 1):
        for k2 in range(k + 1):
            m1, m2 = k1 / beta, k2 / beta
            if (m1 + m2) * (m1 + m2 + 2) > lam_max:
                continue
            mult = (2 if k1 else 1) * (2 if k2 else 1)
            for lam in shooting_eigenvalues(m1, m2, lam_max):
                vals.extend([lam] * mult)
    vals.sort()
    if len(vals) < count:
        raise ValueError("raise lam_max: fewer than count eigenvalues found")
    return np.array(vals[:count])


# ----------------------------------------------------------------------------
# roots of a polynomial in w at fixed z


def dense_roots(coeffs, z):
    """Roots of w -> P(z, w) from the full companion matrix, no continuation."""
    deg = max(j for (_, j) in coeffs)
    c = np.zeros(deg + 1, complex)
    for (i, j), v in coeffs.items():
        c[deg - j] += v * z**i
    return np.roots(c)


def match_to_oracle(tracked_w, oracle_w):
    """max over samples of the distance from each tracked root to the oracle set."""
    worst = 0.0
    for row, ref in zip(tracked_w, oracle_w):
        d = np.abs(row[:, None] - ref[None, :]).min(axis=1)
        worst = max(worst, float(d.max()))
    return worst


# ----------------------------------------------------------------------------
# area of the d = 3, beta = 1/2 metric by high precision quadrature


def triangle_area_mpmath(dps=20):
    """Area of e^{2 phi}|dxi|^2 with e^{2 phi} = 1 / (8 a b (1 + a + b)), a = |xi|, b = |xi - 1|.

    Polar coordinates about 0, split at r = 1 and theta = 0 where the cone
    points sit; the metric is symmetric under conjugation, hence the factor 2.
    """
    import mpmath as mp

    with mp.workdps(dps):
        def f(r, th):
            a = r
            b = abs(r * mp.expj(th) - 1)
            return r / (8 * a * b * (1 + a + b))

        return float(2 * mp.quad(f, [0, 1, mp.inf], [0, mp.pi]))
