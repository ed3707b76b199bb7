"""The link of the flat cone: a circle bundle over (CP^1, g) with metric

    gbar = g + (c^2/4) alpha^2,    alpha = dt + alpha_0,   t in [0, 2 pi),

so every fibre has length pi c.  Functions e^{i m t} f on the link have
``Lap gbar = Lap_{m alpha_0} - 4 m^2 / c^2`` where the first term is the magnetic
Laplacian of g with connection ``m alpha_0``.  Since the Dirichlet form is
conformally invariant in two dimensions, the finite element stiffness is
assembled on the round unit sphere and only the mass sees e^{2 psi}.

Gauges: alpha_0 is written in the xi gauge for |xi| <= 1 and in the eta gauge
(``alpha_0 - d arg xi``) for |xi| > 1; fields transform by e^{-i m arg xi}.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spl
from numpy.polynomial import legendre as npleg
from scipy.spatial import ConvexHull
from scipy.linalg import eigh
from scipy.special import roots_jacobi

from .cp1_cone_metrics import ConformalConeMetric, invert_point
from .errors import DiscretizationUnstable

_GL4 = np.polynomial.legendre.leggauss(4)


# ----------------------------------------------------------------------------
# connection form


@dataclass(frozen=True)
class ConnectionForm:
    """alpha_0 = -(1/c) * du on CP^1, evaluated chartwise.

    In the chart q (xi for k = 0, eta for k = 1) the form is
    ``|q|^2/(1+|q|^2) d arg q - (1/c) * dv``.
    """

    base: ConformalConeMetric
    fd_step: float = 1e-6

    @property
    def c(self) -> float:
        return self.base.c

    def grad_v(self, k: int, q):
        q = np.asarray(q, complex)
        h = self.fd_step * np.maximum(1.0, np.abs(q))
        f = lambda x: self.base._v_chart(k, x)
        vx = (8 * (f(q + h) - f(q - h)) - (f(q + 2 * h) - f(q - 2 * h))) / (12 * h)
        vy = (8 * (f(q + 1j * h) - f(q - 1j * h)) - (f(q + 2j * h) - f(q - 2j * h))) / (12 * h)
        return vx, vy

    def components(self, k: int, q):
        """(A_x, A_y) with alpha_0 = A_x dx + A_y dy in chart k."""
        q = np.asarray(q, complex)
        x, y = q.real, q.imag
        vx, vy = self.grad_v(k, q)
        den = 1 + x * x + y * y
        return -y / den + vy / self.c, x / den - vx / self.c

    def line_integral(self, k: int, q0, q1):
        """Integral of alpha_0 over the chart segment q0 -> q1 (vectorised)."""
        q0 = np.asarray(q0, complex)
        q1 = np.asarray(q1, complex)
        t, wt = _GL4
        t = 0.5 * (t + 1)
        dq = q1 - q0
        total = 0.0
        for ti, wi in zip(t, wt):
            ax, ay = self.components(k, q0 + ti * dq)
            total = total + 0.5 * wi * (ax * dq.real + ay * dq.imag)
        return total

    def loop_integral(self, a, radius: float, n: int = 256) -> float:
        """Integral of alpha_0 over a small chart circle around a cone point."""
        k = 0 if (a is not None and abs(a) <= 1) else 1
        qa = complex(a) if k == 0 else complex(invert_point(a))
        th = 2 * np.pi * np.arange(n + 1) / n
        q = qa + radius * np.exp(1j * th)
        return float(np.sum(self.line_integral(k, q[:-1], q[1:])))

    def curvature_density(self, k: int, q, h: float = 1e-4):
        """dalpha_0 / (dx ^ dy) in chart k, by central differences."""
        q = np.asarray(q, complex)
        ax_p, _ = self.components(k, q + 1j * h)
        ax_m, _ = self.components(k, q - 1j * h)
        _, ay_p = self.components(k, q + h)
        _, ay_m = self.components(k, q - h)
        return (ay_p - ay_m) / (2 * h) - (ax_p - ax_m) / (2 * h)

    def expected_density(self, k: int, q):
        """(1/c) K dV_g / (dx ^ dy) with K = 4."""
        q = np.asarray(q, complex)
        xi = q if k == 0 else 1 / q
        return 4 / self.c * self.base.e2psi(xi) / (1 + np.abs(q) ** 2) ** 2

    def total_flux(self) -> float:
        """(1/2pi) * integral of dalpha_0 by Stokes on the two unit discs."""
        q = np.exp(1j * np.linspace(0, 2 * np.pi, 4097))
        # both discs are traversed counterclockwise in their own chart
        inside = sum(np.sum(self.line_integral(k, q[:-1], q[1:])) for k in (0, 1))
        return float(inside / (2 * np.pi))


def connection_form(base: ConformalConeMetric) -> ConnectionForm:
    return ConnectionForm(base)


# ----------------------------------------------------------------------------
# link metric and volume


@dataclass(frozen=True)
class LinkMetric:
    base: ConformalConeMetric

    @property
    def c(self) -> float:
        return self.base.c

    @property
    def beta(self) -> float:
        return self.base.beta

    @property
    def d(self) -> int:
        return self.base.config.d

    @property
    def fiber_length(self) -> float:
        return float(np.pi * self.c)

    @property
    def connection(self) -> ConnectionForm:
        return ConnectionForm(self.base)


def link_volume(link: LinkMetric, n_r: int = 160, n_theta: int = 128) -> float:
    """Vol(gbar) = Area(g) * fibre length."""
    return link.base.area(n_r, n_theta) * link.fiber_length


def expected_link_volume(c: float) -> float:
    return float(np.pi**2 / 2 * c * c)


# ----------------------------------------------------------------------------
# spectra


@dataclass
class LinkSpectrum:
    """Sorted link eigenvalues with their fibre weight m and index n within the weight."""

    eigenvalues: np.ndarray
    m: np.ndarray
    n: np.ndarray
    method: str
    functions: list = field(default_factory=list, repr=False)
    info: dict = field(default_factory=dict)

    def lowest(self, k: int) -> np.ndarray:
        return self.eigenvalues[:k]


@dataclass(frozen=True)
class FEMSettings:
    n_vertices: int = 1200
    refine_factor: float = 2.0
    refine_tol: float = 0.05
    check_refinement: bool = True
    quad_order: int = 6


def _to_sphere(xi):
    xi = np.asarray(xi, complex)
    d = 1 + np.abs(xi) ** 2
    return np.stack([2 * xi.real / d, 2 * xi.imag / d, (np.abs(xi) ** 2 - 1) / d], axis=-1)


def _point_to_sphere(a):
    return np.array([0.0, 0.0, 1.0]) if a is None else _to_sphere(complex(a))


def _sphere_to_hom(X):
    """Homogeneous coordinates [z : w] with xi = z / w, stable near both poles."""
    x, y, zc = X[..., 0], X[..., 1], X[..., 2]
    south = zc <= 0
    z = np.where(south, x + 1j * y, 1 + zc)
    w = np.where(south, 1 - zc, x - 1j * y)
    return z, w


def _sphere_to_chart(X, k):
    x, y, zc = X[..., 0], X[..., 1], X[..., 2]
    if k == 0:
        return (x + 1j * y) / (1 - zc)
    return (x - 1j * y) / (1 + zc)


class _SphereMesh:
    def __init__(self, points, n: int):
        cones = np.array([_point_to_sphere(a) for a in points])
        i = np.arange(n) + 0.5
        ph = np.arccos(1 - 2 * i / n)
        th = np.pi * (1 + 5**0.5) * i
        P = np.stack([np.cos(th) * np.sin(ph), np.sin(th) * np.sin(ph), np.cos(ph)], axis=1)
        h = np.sqrt(4 * np.pi / n)
        keep = np.min(np.linalg.norm(P[:, None, :] - cones[None, :, :], axis=2), axis=1) > 0.5 * h
        V = np.vstack([cones, P[keep]])
        self.V = V
        self.n_cone = len(cones)
        self.T = ConvexHull(V).simplices
        self.h = h


def _fem_setup(base: ConformalConeMetric, n: int, quad_order: int):
    mesh = _SphereMesh(base.points, n)
    V, T = mesh.V, mesh.T
    nv = len(V)
    # edges and cotangent weights
    E = np.sort(np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]]), axis=1)
    E, inv = np.unique(E, axis=0, return_inverse=True)
    inv = inv.ravel()
    w = np.zeros(len(E))
    nt = len(T)
    # the edge opposite corner o sits in block (o + 1) % 3 of the stacked edge list
    for o in range(3):
        a, b = (o + 1) % 3, (o + 2) % 3
        e1 = V[T[:, a]] - V[T[:, o]]
        e2 = V[T[:, b]] - V[T[:, o]]
        cot = np.sum(e1 * e2, axis=1) / np.linalg.norm(np.cross(e1, e2), axis=1)
        blk = (o + 1) % 3
        np.add.at(w, inv[blk * nt:(blk + 1) * nt], 0.5 * cot)
    # lumped mass: (1/4) * integral of lambda_i e^{2 psi} dA_unit, Duffy rule graded at cone vertices
    apex = np.zeros(len(T), int)
    cone_tri = np.zeros(len(T), bool)
    for corner in range(3):
        isc = T[:, corner] < mesh.n_cone
        apex[isc] = corner
        cone_tri |= isc
    Tr = np.stack([T[np.arange(len(T)), (apex + s) % 3] for s in range(3)], axis=1)
    g, gw = np.polynomial.legendre.leggauss(quad_order)
    g = 0.5 * (g + 1)
    gw = 0.5 * gw
    p = np.where(cone_tri, 1 / base.beta, 1.0)
    A, B, C = V[Tr[:, 0]], V[Tr[:, 1]], V[Tr[:, 2]]
    nrm = np.cross(B - A, C - A)
    area2 = np.linalg.norm(nrm, axis=1)
    nrm = nrm / area2[:, None]
    M = np.zeros(nv)
    for tau, wt in zip(g, gw):
        u = tau ** p
        du = p * tau ** (p - 1)
        for s, ws in zip(g, gw):
            X = A + u[:, None] * ((B - A) + s * (C - B))
            r = np.linalg.norm(X, axis=1)
            jac = area2 * u * du * np.abs(np.sum(X * nrm, axis=1)) / r**3
            z, ww = _sphere_to_hom(X / r[:, None])
            f = np.exp(2 * base.psi_hom(z, ww)) * jac * wt * ws / 4
            np.add.at(M, Tr[:, 0], f * (1 - u))
            np.add.at(M, Tr[:, 1], f * u * (1 - s))
            np.add.at(M, Tr[:, 2], f * u * s)
    # gauges and edge holonomies
    xi_v = np.where(V[:, 2] < 1 - 1e-14, (V[:, 0] + 1j * V[:, 1]) / np.maximum(1 - V[:, 2], 1e-300), np.inf)
    gauge_v = (np.abs(xi_v) > 1).astype(int)
    arg_v = np.angle(np.where(np.isfinite(xi_v), xi_v, 1.0))
    mid = V[E[:, 0]] + V[E[:, 1]]
    mid /= np.linalg.norm(mid, axis=1)[:, None]
    gauge_e = (mid[:, 2] > 0).astype(int)
    conn = ConnectionForm(base)
    theta = np.zeros(len(E))
    for k in (0, 1):
        sel = gauge_e == k
        q0 = _sphere_to_chart(V[E[sel, 0]], k)
        q1 = _sphere_to_chart(V[E[sel, 1]], k)
        theta[sel] = conn.line_integral(k, q0, q1)
    chi = np.zeros((len(E), 2))
    for end in (0, 1):
        gv = gauge_v[E[:, end]]
        av = arg_v[E[:, end]]
        chi[:, end] = np.where((gauge_e == 0) & (gv == 1), av, 0.0) + np.where((gauge_e == 1) & (gv == 0), -av, 0.0)
    return dict(V=V, T=T, E=E, w=w, M=M, theta=theta, chi=chi, gauge_v=gauge_v, n_cone=mesh.n_cone, h=mesh.h)


def _fem_mode(setup, m: int, k: int):
    E, w = setup["E"], setup["w"]
    nv = len(setup["V"])
    Th = m * (setup["theta"] + setup["chi"][:, 0] - setup["chi"][:, 1])
    ph = np.exp(1j * Th)
    i, j = E[:, 0], E[:, 1]
    rows = np.concatenate([i, j, j, i])
    cols = np.concatenate([i, j, i, j])
    vals = np.concatenate([w, w, -w * ph, -w * np.conj(ph)])
    K = sp.csc_matrix((vals.astype(complex), (rows, cols)), shape=(nv, nv))
    M = sp.diags(setup["M"].astype(complex)).tocsc()
    vals, vecs = spl.eigsh(K, k=k, M=M, sigma=-0.5, which="LM")
    order = np.argsort(vals.real)
    return vals.real[order], vecs[:, order]


def _fem_spectrum(base: ConformalConeMetric, m_max: int, n_per_mode: int, settings: FEMSettings):
    c = base.c
    levels = [settings.n_vertices]
    if settings.check_refinement:
        levels.insert(0, int(settings.n_vertices / settings.refine_factor))
    results = []
    for n in levels:
        setup = _fem_setup(base, n, settings.quad_order)
        lam, ms, ns, funcs = [], [], [], []
        for m in range(-m_max, m_max + 1):
            vals, vecs = _fem_mode(setup, m, n_per_mode)
            tot = vals + 4 * m * m / c**2
            tot[np.abs(tot) < 1e-10] = 0.0
            lam.extend(tot)
            ms.extend([m] * len(vals))
            ns.extend(range(len(vals)))
            # normalise so that the lifted function has unit L^2 norm on the link
            norms = np.sqrt(np.real(np.sum(np.conj(vecs) * setup["M"][:, None] * vecs, axis=0)) * np.pi * c)
            funcs.extend(list((vecs / norms).T))
        results.append((np.array(lam), np.array(ms), np.array(ns), funcs, setup))
    lam, ms, ns, funcs, setup = results[-1]
    info = {"n_vertices": len(setup["V"]), "mesh_h": float(setup["h"])}
    if settings.check_refinement:
        coarse = results[0][0]
        scale = np.maximum(np.abs(lam), 1.0)
        change = np.abs(lam - coarse) / scale
        info["refinement_change"] = float(change.max())
        if change.max() > settings.refine_tol:
            raise DiscretizationUnstable(f"eigenvalue moved by {change.max():.2%} under refinement")
    order = np.lexsort((ns, ms, lam))
    return LinkSpectrum(lam[order], ms[order], ns[order], "fem", [funcs[i] for i in order], info)


def jacobi_mode_eigenvalues(mu1: float, mu2: float, n_modes: int, n_basis: int | None = None) -> np.ndarray:
    """Lowest radial eigenvalues of the separated football link problem.

    With x = cos 2 sigma and f = (1-x)^a (1+x)^b p, a = mu1/2, b = mu2/2, the
    radial equation becomes a Jacobi-type problem for p, which is discretised
    by a Legendre-Galerkin method with Gauss-Jacobi quadrature.
    """
    a, b = mu1 / 2, mu2 / 2
    nb = n_basis or n_modes + 6
    x, wq = roots_jacobi(nb + 4, 2 * a, 2 * b)
    P = np.stack([npleg.legval(x, np.eye(nb)[i]) for i in range(nb)])
    dP = np.stack([npleg.legval(x, npleg.legder(np.eye(nb)[i])) for i in range(nb)])
    Mm = (P * wq) @ P.T
    S = (dP * wq * (1 - x * x)) @ dP.T + (a + b) * (a + b + 1) * Mm
    vals = eigh(S, Mm, eigvals_only=True)
    return 4 * np.sort(vals)[:n_modes]


def _football_spectrum(beta: float, m_max: int, n_per_mode: int) -> LinkSpectrum:
    lam, ms, ns, labels = [], [], [], []
    kmax = int(np.ceil(beta * (2 * n_per_mode + 2 * m_max + 4))) + m_max + 2
    for m in range(-m_max, m_max + 1):
        cand = []
        for k1 in range(-kmax, kmax + 1):
            k2 = m - k1
            vals = jacobi_mode_eigenvalues(abs(k1) / beta, abs(k2) / beta, n_per_mode)
            cand.extend((float(v), k1, k2, j) for j, v in enumerate(vals))
        cand.sort()
        for j, (v, k1, k2, nr) in enumerate(cand[:n_per_mode]):
            lam.append(0.0 if abs(v) < 1e-10 else v)
            ms.append(m)
            ns.append(j)
            labels.append((k1, k2, nr))
    lam, ms, ns = np.array(lam), np.array(ms), np.array(ns)
    order = np.lexsort((ns, ms, lam))
    return LinkSpectrum(lam[order], ms[order], ns[order], "separable", [],
                        {"labels": [labels[i] for i in order]})


def football_eigenvalue(n: int, k1: int, k2: int, beta: float) -> float:
    """Closed form (2n + mu1 + mu2)(2n + mu1 + mu2 + 2), mu_i = |k_i| / beta."""
    s = 2 * n + (abs(k1) + abs(k2)) / beta
    return s * (s + 2)


def spectrum(link: LinkMetric, m_max: int = 4, n_per_mode: int = 8, method: str = "auto",
             fem: FEMSettings | None = None) -> LinkSpectrum:
    """Link eigenvalues for fibre weights |m| <= m_max, n_per_mode per weight."""
    if method == "auto":
        method = "separable" if link.base.kind == "football" else "fem"
    if method == "separable":
        if link.base.kind != "football":
            raise ValueError("the separable path needs the two-point football metric")
        return _football_spectrum(link.beta, m_max, n_per_mode)
    if method == "fem":
        return _fem_spectrum(link.base, m_max, n_per_mode, fem or FEMSettings())
    raise ValueError(f"unknown method {method!r}")


# ----------------------------------------------------------------------------
# indicial roots


@dataclass
class IndicialRoots:
    eigenvalues: np.ndarray
    m: np.ndarray
    n: np.ndarray
    plus: np.ndarray
    minus: np.ndarray

    def in_gap(self, lo: float = -2.0, hi: float = 0.0) -> np.ndarray:
        """Roots lying strictly inside (lo, hi)."""
        allr = np.concatenate([self.plus, self.minus])
        return allr[(allr > lo) & (allr < hi)]

    def gap_is_empty(self) -> bool:
        return len(self.in_gap()) == 0

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["m", "n", "lambda", "delta_plus", "delta_minus"])
            for row in zip(self.m, self.n, self.eigenvalues, self.plus, self.minus):
                wr.writerow([int(row[0]), int(row[1])] + [repr(float(x)) for x in row[2:]])


def indicial_roots(spec: LinkSpectrum | np.ndarray) -> IndicialRoots:
    """delta^{+-} = -1 +- sqrt(1 + lambda), the solutions of s(s+2) = lambda."""
    if isinstance(spec, LinkSpectrum):
        lam, m, n = spec.eigenvalues, spec.m, spec.n
    else:
        lam = np.asarray(spec, float)
        m = np.zeros(len(lam), int)
        n = np.arange(len(lam))
    lam = np.where(np.abs(lam) < 1e-10, 0.0, lam)
    root = np.sqrt(1 + lam)
    return IndicialRoots(lam, m, n, -1 + root, -1 - root)


def mode_table(spec: LinkSpectrum, count: int) -> list[tuple[int, float]]:
    """The first ``count`` link modes as (index, lambda), counted with multiplicity."""
    return list(enumerate(spec.eigenvalues[:count].tolist()))


__all__ = [
    "ConnectionForm", "connection_form", "LinkMetric", "link_volume", "expected_link_volume",
    "LinkSpectrum", "FEMSettings", "spectrum", "jacobi_mode_eigenvalues", "football_eigenvalue",
    "IndicialRoots", "indicial_roots", "mode_table",
]
