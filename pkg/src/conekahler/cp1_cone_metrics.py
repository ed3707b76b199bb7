"""Constant curvature cone metrics on CP^1.

Conventions used throughout:

* ``g0 = |dxi|^2 / (1 + |xi|^2)^2`` is the round metric of curvature 4.
* ``s_j`` is the chordal distance to the cone point ``a_j`` (``s = sin`` of the
  g0 distance), chart independent.
* Every metric is written ``g = e^{2 psi} g0`` with
  ``psi = (beta - 1) sum_j log s_j + v``; the remainder ``v`` is the object the
  solver works with.  Near ``a_j`` it behaves like
  ``v(a_j) + alpha_j s_j^{2 beta} + smooth``.
* In the ``xi`` chart ``g = e^{2 phi} |dxi|^2`` and the regular part is
  ``u = phi - (beta - 1) sum_{finite a_j} log|xi - a_j|``.

With K = 4 the curvature reads ``K = e^{-2 psi} (2c - Lap0 v)`` where
``Lap0 = (1 + |xi|^2)^2 Lap_xi`` and ``c = 2 + d beta - d``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spl
from scipy.interpolate import RectBivariateSpline

from .errors import NewtonDiverged, WindowViolation

Point = complex | None  # None stands for infinity


def chordal(xi, a: Point):
    """Chordal distance on the K=4 sphere between xi and a (None = infinity)."""
    xi = np.asarray(xi, complex)
    if a is None:
        return 1 / np.sqrt(1 + np.abs(xi) ** 2)
    return np.abs(xi - a) / np.sqrt(1 + np.abs(xi) ** 2) / np.sqrt(1 + abs(a) ** 2)


def harmonic_z(q, a: Point, chart: int):
    """Z = zeta / (1 + |zeta|^2) for the g0-isometric coordinate zeta centred at a.

    ``q`` is the xi coordinate (chart 0) or eta = 1/xi (chart 1).  Re(B Z) is a
    first eigenfunction of the g0 Laplacian (eigenvalue 8) for every B.
    """
    q = np.asarray(q, complex)
    if a is None:
        return np.conj(q) / (1 + np.abs(q) ** 2) if chart == 0 else q / (1 + np.abs(q) ** 2)
    a = complex(a)
    den = (1 + abs(a) ** 2) * (1 + np.abs(q) ** 2)
    if chart == 0:
        return (q - a) * (1 + a * np.conj(q)) / den
    return (1 - a * q) * (np.conj(q) + a) / den


def invert_point(a: Point) -> Point:
    """The same point seen from the eta = 1/xi chart."""
    if a is None:
        return 0j
    if a == 0:
        return None
    return 1 / complex(a)


@dataclass(frozen=True)
class ConePointConfig:
    """Marked points (finite values plus None for infinity) sharing one cone angle."""

    points: tuple[Point, ...]
    beta: float
    K: float = 4.0

    def __post_init__(self):
        pts = tuple(None if p is None else complex(p) for p in self.points)
        object.__setattr__(self, "points", pts)
        for i in range(len(pts)):
            for j in range(i):
                a, b = pts[i], pts[j]
                if (a is None and b is None) or (a is not None and b is not None and abs(a - b) < 1e-12):
                    raise ValueError("cone points must be distinct")

    @property
    def d(self) -> int:
        return len(self.points)

    @property
    def c(self) -> float:
        return 2 + self.d * self.beta - self.d

    def in_window(self) -> bool:
        return (self.d - 2) / self.d < self.beta < 1

    def check_window(self) -> None:
        if not self.in_window():
            raise WindowViolation(f"beta={self.beta} outside ((d-2)/d, 1) for d={self.d}")

    @property
    def finite_points(self) -> list[complex]:
        return [p for p in self.points if p is not None]


# ----------------------------------------------------------------------------
# quadrature on the sphere


def _mobius_from_zero(a: Point):
    """Isometry of g0 sending 0 to a (as a map zeta -> xi)."""
    if a is None:
        return lambda q: 1 / q
    a = complex(a)
    return lambda q: (q + a) / (1 - np.conj(a) * q)


def sphere_integral(F: Callable, points: Sequence[Point], beta: float,
                    n_r: int = 160, n_theta: int = 128) -> float:
    """Integral of ``F(xi) dA_{g0}`` for F ~ s^{2 beta - 2} at the points.

    A partition of unity built from s_k^4 splits the sphere into one piece
    per cone point; each piece is integrated in g0-polar coordinates centred
    at its point with the radial substitution sigma ~ tau^(1/beta) that
    removes the cone singularity.
    """
    pts = list(points)
    tau, wt = np.polynomial.legendre.leggauss(n_r)
    tau = 0.5 * (tau + 1)
    wt = 0.5 * wt
    p = 1.0 / beta
    sig = 0.5 * np.pi * tau**p
    dsig = 0.5 * np.pi * p * tau ** (p - 1)
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    S, T = np.meshgrid(sig, th, indexing="ij")
    zeta = np.tan(S) * np.exp(1j * T)
    total = 0.0
    for j, a in enumerate(pts):
        xi = _mobius_from_zero(a)(zeta)
        prods = []
        for m in range(len(pts)):
            pr = np.ones(xi.shape)
            for k, b in enumerate(pts):
                if k != m:
                    pr = pr * chordal(xi, b) ** 4
            prods.append(pr)
        omega = prods[j] / np.sum(prods, axis=0)
        val = F(xi) * omega * np.sin(S) * np.cos(S)
        total += np.sum(val * (dsig * wt)[:, None]) * (2 * np.pi / n_theta)
    return float(total)


# ----------------------------------------------------------------------------
# metric type


class ConformalConeMetric:
    """Cone metric g = e^{2 psi} g0 given through its remainder v on two charts.

    Subclasses implement ``_v_chart(k, q)`` for the xi chart (k=0, |xi| <= 1)
    and the eta = 1/xi chart (k=1).
    """

    kind = "abstract"
    # chordal distance below which derived quantities are not trusted
    resolution = 0.0

    def __init__(self, config: ConePointConfig):
        self.config = config

    # -- scalar fields -----------------------------------------------------
    def _v_chart(self, k: int, q):
        raise NotImplementedError

    def _lap0_v_chart(self, k: int, q):
        """g0-Laplacian of v; default by 4th order differences."""
        return (1 + np.abs(q) ** 2) ** 2 * self._fd_laplacian(lambda x: self._v_chart(k, x), q, k)

    def _fd_laplacian(self, f, q, k):
        q = np.asarray(q, complex)
        pts = self.config.points if k == 0 else [invert_point(a) for a in self.config.points]
        dist = np.full(q.shape, 1.0)
        for a in pts:
            if a is not None:
                dist = np.minimum(dist, np.abs(q - a))
        h = np.maximum(0.02 * dist, 1e-7)
        c = [(-2, -1 / 12), (-1, 4 / 3), (1, 4 / 3), (2, -1 / 12)]
        acc = -5.0 * f(q)
        for m, cm in c:
            acc = acc + cm * (f(q + m * h) + f(q + 1j * m * h))
        return acc / h**2

    @property
    def points(self):
        return self.config.points

    @property
    def beta(self):
        return self.config.beta

    @property
    def c(self):
        return self.config.c

    def _split(self, xi):
        xi = np.asarray(xi, complex)
        inner = np.abs(xi) <= 1
        safe = np.where(inner, 1.0, xi)
        return xi, inner, 1 / safe

    def v(self, xi):
        xi, inner, eta = self._split(xi)
        return np.where(inner, self._v_chart(0, np.where(inner, xi, 0.123 + 0.456j)), self._v_chart(1, np.where(inner, 0.123 + 0.456j, eta)))

    def v_hom(self, z, w):
        """v at the point [z : w] of CP^1 (w = 0 is xi = infinity)."""
        z = np.asarray(z, complex)
        w = np.asarray(w, complex)
        small = np.abs(z) <= np.abs(w)
        xi = np.where(small, z / np.where(small, w, 1), 0.123 + 0.456j)
        eta = np.where(small, 0.123 + 0.456j, w / np.where(small, 1, z))
        return np.where(small, self._v_chart(0, xi), self._v_chart(1, eta))

    def psi_hom(self, z, w):
        """psi at [z : w]; chordal distances come from the unit linear forms."""
        z = np.asarray(z, complex)
        w = np.asarray(w, complex)
        nx = np.sqrt(np.abs(z) ** 2 + np.abs(w) ** 2)
        logs = 0.0
        for a in self.points:
            if a is None:
                logs = logs + np.log(np.abs(w) / nx)
            else:
                logs = logs + np.log(np.abs(z - a * w) / (np.sqrt(1 + abs(a) ** 2) * nx))
        return (self.beta - 1) * logs + self.v_hom(z, w)

    def lap0_v(self, xi):
        xi, inner, eta = self._split(xi)
        return np.where(inner, self._lap0_v_chart(0, np.where(inner, xi, 0.123 + 0.456j)),
                        self._lap0_v_chart(1, np.where(inner, 0.123 + 0.456j, eta)))

    def log_s_sum(self, xi):
        xi = np.asarray(xi, complex)
        return sum(np.log(chordal(xi, a)) for a in self.points)

    def psi(self, xi):
        return (self.beta - 1) * self.log_s_sum(xi) + self.v(xi)

    def e2psi(self, xi):
        return np.exp(2 * self.psi(xi))

    def phi(self, xi):
        """log conformal factor in the xi chart: g = e^{2 phi} |dxi|^2."""
        xi = np.asarray(xi, complex)
        return self.psi(xi) - np.log(1 + np.abs(xi) ** 2)

    def e2phi(self, xi):
        return np.exp(2 * self.phi(xi))

    def curvature(self, xi):
        """Gaussian curvature from K = e^{-2 psi} (2c - Lap0 v)."""
        return np.exp(-2 * self.psi(xi)) * (2 * self.c - self.lap0_v(xi))

    def regular_part(self, xi):
        xi = np.asarray(xi, complex)
        u = self.phi(xi)
        for a in self.config.finite_points:
            u = u - (self.beta - 1) * np.log(np.abs(xi - a))
        return u

    # -- global quantities ---------------------------------------------------
    def area(self, n_r: int = 160, n_theta: int = 128) -> float:
        return sphere_integral(self.e2psi, self.points, self.beta, n_r, n_theta)

    def gauss_bonnet(self, n_r: int = 160, n_theta: int = 128) -> float:
        """(1/2pi) * integral of K dV_g."""
        f = lambda xi: self.curvature(xi) * self.e2psi(xi)
        return sphere_integral(f, self.points, self.beta, n_r, n_theta) / (2 * np.pi)

    def to_csv(self, path: str | Path, n: int = 41, extent: float = 2.0) -> None:
        x = np.linspace(-extent, extent, n)
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["xi_re", "xi_im", "e2phi"])
            for a in x:
                for b in x:
                    xi = complex(a, b)
                    if any(p is not None and abs(xi - p) < 1e-12 for p in self.points):
                        continue
                    wr.writerow([repr(float(a)), repr(float(b)), repr(float(self.e2phi(xi)))])


class ClosedFormConeMetric(ConformalConeMetric):
    """Metric given by an explicit log conformal factor in each chart."""

    def __init__(self, config: ConePointConfig, phi_xi: Callable, phi_eta: Callable, kind: str):
        super().__init__(config)
        self._phi = (phi_xi, phi_eta)
        self.kind = kind

    def _v_chart(self, k, q):
        q = np.asarray(q, complex)
        pts = self.points if k == 0 else [invert_point(a) for a in self.points]
        logs = sum(np.log(chordal(q, a)) for a in pts)
        return self._phi[k](q) + np.log(1 + np.abs(q) ** 2) - (self.beta - 1) * logs


def football_metric(beta: float, exponent: str = "2beta-2") -> ClosedFormConeMetric:
    """Two antipodal cone points 0 and infinity, curvature 4.

    ``exponent="2beta"`` switches to the variant with numerator |xi|^{2 beta};
    it is kept only for comparison and is not a constant curvature metric.
    """
    if not 0 < beta <= 1:
        raise WindowViolation("football needs 0 < beta <= 1")
    cfg = ConePointConfig((0j, None), beta)
    if exponent == "2beta-2":
        def ph(q):
            r = np.abs(q)
            return np.log(beta) + (beta - 1) * np.log(r) - np.log(1 + r ** (2 * beta))
        return ClosedFormConeMetric(cfg, ph, ph, "football")
    if exponent == "2beta":
        def ph0(q):
            r = np.abs(q)
            return np.log(beta) + beta * np.log(r) - np.log(1 + r ** (2 * beta))

        def ph1(q):
            return ph0(1 / np.asarray(q, complex)) - 2 * np.log(np.abs(q))
        return ClosedFormConeMetric(cfg, ph0, ph1, "football-printed-exponent")
    raise ValueError(f"unknown exponent variant {exponent!r}")


def triangle_metric_d3_half() -> ClosedFormConeMetric:
    """d = 3, beta = 1/2 metric with cone points 0, 1, infinity."""
    cfg = ConePointConfig((0j, 1 + 0j, None), 0.5)

    def ph(q):
        a = np.abs(q)
        b = np.abs(q - 1)
        return 0.5 * np.log(0.125 / (a * b + a * a * b + a * b * b))

    # the metric is invariant under xi -> 1/xi, so both charts share the formula
    return ClosedFormConeMetric(cfg, ph, ph, "triangle-d3-half")


def triangle_cover(eta):
    """The branched cover F(eta) = (eta^2 + 1)^2 / (eta^2 - 1)^2."""
    eta = np.asarray(eta, complex)
    return (eta**2 + 1) ** 2 / (eta**2 - 1) ** 2


# ----------------------------------------------------------------------------
# Liouville solver


def _lagrange_w(t):
    """Cubic Lagrange weights at offsets -1, 0, 1, 2 for fractional t."""
    return np.array([-t * (t - 1) * (t - 2) / 6, (t + 1) * (t - 1) * (t - 2) / 2,
                     -(t + 1) * t * (t - 2) / 2, (t + 1) * t * (t - 1) / 6])


class _Composite:
    """Two square cell-centred grids on [-R, R]^2 glued by xi = 1/eta.

    The outermost ring of each grid is a fringe whose values are interpolated
    (bicubic) from the other chart; the remaining cells carry the 5-point
    Laplacian.
    """

    def __init__(self, points, N: int, R: float, order: int = 4):
        self.N, self.R = N, R
        h = 2 * R / N
        self.h = h
        self.x = -R + h * (np.arange(N) + 0.5)
        X, Y = np.meshgrid(self.x, self.x, indexing="ij")
        self.xi = X + 1j * Y
        self.pts = [list(points), [invert_point(a) for a in points]]
        width = 1 if order == 2 else 2
        fr = np.zeros((N, N), bool)
        fr[:width, :] = fr[-width:, :] = fr[:, :width] = fr[:, -width:] = True
        n = N * N
        self.n = n
        fi = np.flatnonzero(fr.ravel())
        rows, cols, vals = [], [], []
        for k in (0, 1):
            W, I = self.interp_rows(1 / self.xi.ravel()[fi])
            r = k * n + fi
            rows.append(r)
            cols.append(r)
            vals.append(np.ones(len(fi)))
            for q in range(16):
                rows.append(r)
                cols.append((1 - k) * n + I[:, q])
                vals.append(-W[:, q])
        self.I = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(2 * n, 2 * n))
        e = np.ones(N)
        if order == 2:
            D = sp.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1]) / h**2
        else:
            D = sp.diags([-e[:-2] / 12, 4 * e[:-1] / 3, -2.5 * e, 4 * e[:-1] / 3, -e[:-2] / 12], [-2, -1, 0, 1, 2]) / h**2
        L = sp.kron(D, sp.eye(N)) + sp.kron(sp.eye(N), D)
        inner = (~fr).ravel().astype(float)
        self.inner = np.concatenate([inner, inner])
        self.L = (sp.diags(self.inner) @ sp.block_diag([L, L])).tocsr()
        self.w0 = np.concatenate([((1 + np.abs(self.xi) ** 2) ** -2).ravel()] * 2)
        for k in (0, 1):
            for a in self.pts[k]:
                if a is not None and np.abs(self.xi - a).min() < 1e-9:
                    raise ValueError("a cone point sits on a grid node; change N")

    def interp_rows(self, q):
        R, h, N = self.R, self.h, self.N
        fx = (q.real + R) / h - 0.5
        fy = (q.imag + R) / h - 0.5
        ix = np.floor(fx).astype(int)
        iy = np.floor(fy).astype(int)
        wx = _lagrange_w(fx - ix)
        wy = _lagrange_w(fy - iy)
        W = np.einsum("ak,bk->kab", wx, wy).reshape(len(q), 16)
        off = np.arange(4)[None, :] - 1
        I = ((ix[:, None] + off)[:, :, None] * N + (iy[:, None] + off)[:, None, :]).reshape(len(q), 16)
        return W, I

    def field(self, f):
        return np.concatenate([f(self.pts[0], self.xi).ravel(), f(self.pts[1], self.xi).ravel()])


@dataclass
class LiouvilleGrid:
    """Grid settings for the two-chart Liouville solve."""

    N: int = 96
    R: float = 2.0
    max_newton: int = 40
    initial_step: float = 0.1
    min_step: float = 1e-4
    tol: float = 1e-9
    order: int = 4
    max_b_updates: int = 30
    b_tol: float = 1e-8


class _Newton:
    def __init__(self, C: _Composite, points, loc):
        self.C, self.points, self.loc = C, points, loc
        self.mu = 0.0
        self.B = np.zeros(len(points), complex)
        self.Z = [np.concatenate([harmonic_z(C.xi, a, 0).ravel(), harmonic_z(C.xi, a, 1).ravel()]) for a in points]

    def _interp_w(self, w, k, q):
        W, I = self.C.interp_rows(np.atleast_1d(np.asarray(q, complex)))
        return np.sum(W * w[k * self.C.n + I], axis=1)

    def update_B(self, b, w, al):
        """New first-harmonic coefficients from the local matching condition."""
        pts = self.points
        d = len(pts)
        newB = np.zeros(d, complex)
        hq = 1e-4
        for j, a in enumerate(pts):
            k = 0 if (a is not None and abs(a) <= 1) else 1
            qa = complex(a) if k == 0 else complex(invert_point(a))
            ptsk = pts if k == 0 else [invert_point(p) for p in pts]

            def F(q):
                val = 2 * self._interp_w(w, k, q)
                for m in range(d):
                    if m == j:
                        continue
                    sm = chordal(q, ptsk[m])
                    val = val + (2 * b - 2) * np.log(sm)
                    val = val + 2 * (al[m] * sm ** (2 * b) + np.real(self.B[m] * harmonic_z(q, pts[m], k)) * sm ** (2 * b))
                return val

            fx = (F(qa + hq) - F(qa - hq)) / (2 * hq)
            fy = (F(qa + 1j * hq) - F(qa - 1j * hq)) / (2 * hq)
            dq = 0.5 * (fx - 1j * fy)[0]
            if a is None:
                dqdz = 1.0
            elif k == 0:
                dqdz = 1 + abs(a) ** 2
            else:
                dqdz = -(1 + abs(a) ** 2) / complex(a) ** 2
            ell = 2 * dqdz * dq
            A = -al[j] * b * b
            newB[j] = -A * ell / (b * (b + 1))
        return newB

    def run(self, b, w, al, maxit, tol):
        C, points, loc = self.C, self.points, self.loc
        d = len(points)
        n = C.n
        c = 2 + d * b - d
        s = [C.field(lambda P, xi, j=j: chordal(xi, P[j])) for j in range(d)]
        sig = [sj ** (2 * b) for sj in s]
        ssing = [sj ** (2 * b - 2) for sj in s]
        S = np.prod(ssing, axis=0)
        lapsig = [4 * b * b * ssing[j] - 4 * b * (b + 1) * sig[j] for j in range(d)]
        harm = sum(np.real(self.B[j] * self.Z[j]) * sig[j] for j in range(d))
        lapharm = sum(4 * np.real(self.B[j] * self.Z[j]) * (b * (b + 1) * ssing[j] - (b + 1) * (b + 2) * sig[j])
                      for j in range(d))
        # values at the cone points of the other chordal factors
        Ga, sa = [], np.zeros((d, d))
        for j, a in enumerate(points):
            g = 1.0
            for k, other in enumerate(points):
                if k == j:
                    continue
                if a is None:
                    skj = float(chordal(0j, invert_point(other)))
                else:
                    skj = float(chordal(a, other))
                g *= skj ** (2 * b - 2)
                sa[j, k] = skj ** (2 * b)
            Ga.append(g)
        # first-harmonic terms of the other points, evaluated at each cone point
        ha = np.zeros(d)
        for j, a in enumerate(points):
            kj = 0 if (a is not None and abs(a) <= 1) else 1
            qa = complex(a) if kj == 0 else complex(invert_point(a))
            ptsk = points if kj == 0 else [invert_point(p) for p in points]
            ha[j] = sum(np.real(self.B[m] * harmonic_z(qa, points[m], kj)) * float(chordal(qa, ptsk[m])) ** (2 * b)
                        for m in range(d) if m != j)
        Ga = np.array(Ga)
        gauge = d == 2
        height = C.inner * C.w0 * (s[0] ** 2 - s[1] ** 2) if gauge else None
        mu = self.mu

        def resid(w, al, mu):
            v = w + sum(al[j] * sig[j] for j in range(d)) + harm
            E = np.exp(2 * v)
            F = C.L @ w + C.inner * C.w0 * (sum(al[j] * lapsig[j] for j in range(d)) + lapharm - 2 * c + 4 * S * E) + C.I @ w
            if gauge:
                F = F + mu * height
            va = np.array([loc[j][1] @ w[loc[j][2]] + sum(al[k] * sa[j, k] for k in range(d) if k != j) + ha[j]
                           for j in range(d)])
            Fa = al * b * b + Ga * np.exp(2 * va)
            extra = [al[0] - al[1]] if gauge else []
            return F, Fa, np.array(extra), E, va

        def norm(F, Fa, Fg):
            return float(np.sqrt(np.sum(F**2) + np.sum(Fa**2) + np.sum(Fg**2)))

        for _ in range(maxit):
            F, Fa, Fg, E, va = resid(w, al, mu)
            nF = norm(F, Fa, Fg)
            J = C.L + sp.diags(C.inner * C.w0 * 8 * S * E) + C.I
            B = np.stack([C.inner * C.w0 * (lapsig[j] + 8 * S * E * sig[j]) for j in range(d)], 1)
            Crow = sp.lil_matrix((d, 2 * n))
            for j in range(d):
                Crow[j, loc[j][2]] = Ga[j] * np.exp(2 * va[j]) * 2 * loc[j][1]
            Dm = np.diag([b * b] * d) + np.array([[Ga[j] * np.exp(2 * va[j]) * 2 * sa[j, k] if k != j else 0.0
                                                   for k in range(d)] for j in range(d)])
            if gauge:
                Big = sp.bmat([[J, sp.csr_matrix(B), sp.csr_matrix(height[:, None])],
                               [Crow.tocsr(), sp.csr_matrix(Dm), None],
                               [None, sp.csr_matrix([[1.0, -1.0]]), None]]).tocsc()
                dx = spl.spsolve(Big, -np.concatenate([F, Fa, Fg]))
            else:
                Big = sp.bmat([[J, sp.csr_matrix(B)], [Crow.tocsr(), sp.csr_matrix(Dm)]]).tocsc()
                dx = spl.spsolve(Big, -np.concatenate([F, Fa]))
            if not np.all(np.isfinite(dx)):
                return False, w, al, nF
            lam = 1.0
            while True:
                w2 = w + lam * dx[:2 * n]
                al2 = al + lam * dx[2 * n:2 * n + d]
                mu2 = mu + lam * dx[-1] if gauge else 0.0
                with np.errstate(all="ignore"):
                    F2, Fa2, Fg2, _, _ = resid(w2, al2, mu2)
                n2 = norm(F2, Fa2, Fg2)
                if np.isfinite(n2) and n2 < nF:
                    break
                lam /= 2
                if lam < 1e-3:
                    return False, w, al, nF
            w, al, mu = w2, al2, mu2
            self.mu = mu
            if n2 < tol or np.abs(lam * dx).max() < 1e-11:
                return True, w, al, n2
        return False, w, al, nF


class LiouvilleConeMetric(ConformalConeMetric):
    """Numerical solution on two charts.

    ``v = w + sum_j (alpha_j + Re(B_j Z_j)) s_j^{2 beta}`` with w smooth; the
    B_j terms carry the first angular harmonic of the cone expansion.
    """

    kind = "liouville"

    def __init__(self, config, grid: LiouvilleGrid, C: _Composite, w: np.ndarray, alpha: np.ndarray,
                 B: np.ndarray, history: list):
        super().__init__(config)
        self.grid = grid
        self.alpha = np.asarray(alpha, float)
        self.B = np.asarray(B, complex)
        self.history = history
        self.w_grid = w
        # three cells at the equator, where a chart cell has chordal size h/2
        self.resolution = 1.5 * C.h
        N, n = C.N, C.n
        self._pts = C.pts
        self._spl = [RectBivariateSpline(C.x, C.x, w[k * n:(k + 1) * n].reshape(N, N), kx=5, ky=5, s=0) for k in (0, 1)]

    def _sing(self, k, q):
        b = self.beta
        out = 0.0
        for a, B, p, p0 in zip(self.alpha, self.B, self._pts[k], self.points):
            out = out + (a + np.real(B * harmonic_z(q, p0, k))) * chordal(q, p) ** (2 * b)
        return out

    def _v_chart(self, k, q):
        q = np.asarray(q, complex)
        sh = q.shape
        q1 = q.ravel()
        wv = self._spl[k].ev(q1.real, q1.imag).reshape(sh)
        return wv + self._sing(k, q)

    def _lap0_v_chart(self, k, q):
        q = np.asarray(q, complex)
        sh = q.shape
        q1 = q.ravel()
        lap = (self._spl[k].ev(q1.real, q1.imag, dx=2) + self._spl[k].ev(q1.real, q1.imag, dy=2)).reshape(sh)
        b = self.beta
        sing = 0.0
        for a, B, p, p0 in zip(self.alpha, self.B, self._pts[k], self.points):
            s = chordal(q, p)
            sing = sing + a * (4 * b * b * s ** (2 * b - 2) - 4 * b * (b + 1) * s ** (2 * b))
            Y = np.real(B * harmonic_z(q, p0, k))
            sing = sing + 4 * Y * (b * (b + 1) * s ** (2 * b - 2) - (b + 1) * (b + 2) * s ** (2 * b))
        return (1 + np.abs(q) ** 2) ** 2 * lap + sing


def solve_liouville(config: ConePointConfig, grid: LiouvilleGrid | None = None) -> LiouvilleConeMetric:
    """Curvature-4 metric with cone angle 2 pi beta at the configured points.

    Newton on the smooth remainder w with the singular coefficients alpha_j as
    extra unknowns, continued in beta from the round metric (beta = 1, where
    w = sum s_j^2 and alpha_j = -1 is exact).  For two points the dilation
    freedom is removed by alpha_1 = alpha_2 and a Lagrange multiplier.
    """
    config.check_window()
    grid = grid or LiouvilleGrid()
    pts = list(config.points)
    d = len(pts)
    C = _Composite(pts, grid.N, grid.R, grid.order)
    n = C.n
    loc = []
    for a in pts:
        if a is not None and abs(a) <= 1:
            k, q = 0, complex(a)
        else:
            k, q = 1, complex(invert_point(a))
        W, I = C.interp_rows(np.array([q]))
        loc.append((k, W[0], k * n + I[0]))
    newton = _Newton(C, pts, loc)
    w = sum(C.field(lambda P, xi, j=j: chordal(xi, P[j]) ** 2) for j in range(d))
    al = -np.ones(d)
    bb = 1.0
    step = min(grid.initial_step, 1 - config.beta) if config.beta < 1 else 0.0
    history = []
    while bb > config.beta + 1e-14:
        bt = max(config.beta, bb - step)
        ok, w2, al2, res = newton.run(bt, w, al, grid.max_newton, grid.tol)
        history.append({"beta": float(bt), "accepted": bool(ok), "residual": float(res)})
        if ok:
            w, al, bb = w2, al2, bt
            step *= 1.5
        else:
            step /= 2
            if step < grid.min_step:
                raise NewtonDiverged(f"continuation stalled at beta={bb:.5f}")
    # first-harmonic coefficients: fixed point at the target beta
    for _ in range(grid.max_b_updates):
        newB = newton.update_B(config.beta, w, al)
        change = np.abs(newB - newton.B).max()
        newton.B = newB
        ok, w, al, res = newton.run(config.beta, w, al, grid.max_newton, grid.tol)
        history.append({"beta": float(config.beta), "B_change": float(change), "residual": float(res)})
        if not ok:
            raise NewtonDiverged("Newton failed while updating first-harmonic terms")
        if change < grid.b_tol:
            break
    return LiouvilleConeMetric(config, grid, C, w, al, newton.B, history)
