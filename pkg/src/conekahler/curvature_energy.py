"""Curvature sampling from Kahler potentials and the energy (1/8 pi^2) int |Rm|^2.

Curvature uses g_{i jbar} = d_i dbar_j phi and

    R_{i jbar k lbar} = -g_{i jbar, k lbar} + g^{s tbar} g_{i tbar, k} g_{s jbar, lbar},

with all derivatives by nested 4th order finite differences.  |Rm|^2 is the
sum of |R_{a bbar c dbar}|^2 in a unitary frame and the energy integrates it
against omega^2 / 2.  With these conventions Fubini-Study on CP^2 has
|Rm|^2 = 12, volume 2 pi^2 and energy 3.

For the Gibbons-Hawking metrics |Rm|^2 = (1/16) V^-1 Lap^2 (V^-1) on the flat
base and omega^2 / 2 = 4 V d^3x dtheta, so the energy is
(1/16 pi) int Lap^2 (V^-1) d^3x.  Since Lap (1/V) =
2 |grad V|^2 / V^3 away from the sources, the integral reduces by Stokes to
fluxes through a large sphere, a small sphere about the nut and a thin tube
about the cone axis, each extrapolated in its radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import ConfigInvalid, NonConvergentTail, StencilCrossesSingularSet
from .gibbons_hawking import harmonic_V

_D1 = [(-2, 1 / 12), (-1, -2 / 3), (1, 2 / 3), (2, -1 / 12)]
_D2 = [(-2, -1 / 12), (-1, 4 / 3), (1, 4 / 3), (2, -1 / 12)]


# ----------------------------------------------------------------------------
# batched real derivatives


def _offsets():
    """Stencil offsets (in units of h) in the real coordinates (x1, y1, x2, y2)."""
    offs = [np.zeros(4)]
    for k in range(4):
        for m, _ in _D2:
            e = np.zeros(4)
            e[k] = m
            offs.append(e)
    for k in range(4):
        for l in range(k + 1, 4):
            for t in (1, 2):
                for a, b in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                    e = np.zeros(4)
                    e[k] = a * t
                    e[l] = b * t
                    offs.append(e)
    return np.array(offs)


_OFFS = _offsets()


def _shifted(z, w, h):
    """All stencil points, shape (n_offsets, *z.shape)."""
    o = _OFFS.reshape((len(_OFFS),) + (1,) * z.ndim + (4,))
    hh = h[None, ..., None] * o
    return z[None] + hh[..., 0] + 1j * hh[..., 1], w[None] + hh[..., 2] + 1j * hh[..., 3]


def real_derivatives(F: Callable, z, w, h):
    """First derivatives and real Hessian of a (possibly tensor valued) F.

    F maps arrays z, w of any shape to arrays of shape z.shape + tail.  It is
    called once on the whole stencil.  Returns (D, H) with D[k] and H[k, l]
    of shape z.shape + tail; mixed terms use a Richardson combination of the
    4-point cross at h and 2h.
    """
    zz, ww = _shifted(z, w, h)
    vals = F(zz.reshape(-1), ww.reshape(-1))
    vals = vals.reshape(zz.shape + vals.shape[1:])
    tail = vals.ndim - zz.ndim
    hb = h.reshape(h.shape + (1,) * tail)
    f0 = vals[0]
    D = [None] * 4
    H = [[None] * 4 for _ in range(4)]
    idx = 1
    for k in range(4):
        block = vals[idx:idx + 4]
        idx += 4
        D[k] = sum(c * block[i] for i, (_, c) in enumerate(_D1)) / hb
        H[k][k] = (sum(c * block[i] for i, (_, c) in enumerate(_D2)) - 2.5 * f0) / hb**2
    for k in range(4):
        for l in range(k + 1, 4):
            cr = []
            for t in (1, 2):
                b = vals[idx:idx + 4]
                idx += 4
                cr.append((b[0] - b[1] - b[2] + b[3]) / (4 * (t * hb) ** 2))
            H[k][l] = H[l][k] = (4 * cr[0] - cr[1]) / 3
    return np.array(D), np.array(H)


def _complex_parts(D, H):
    """d_k F, and d_k dbar_l F from real first derivatives and Hessian."""
    dk = np.array([(D[0] - 1j * D[1]) / 2, (D[2] - 1j * D[3]) / 2])
    ddb = np.empty((2, 2) + D.shape[1:], complex)
    for k in range(2):
        for l in range(2):
            xk, yk, xl, yl = 2 * k, 2 * k + 1, 2 * l, 2 * l + 1
            ddb[k, l] = ((H[xk, xl] + H[yk, yl]) + 1j * (H[xk, yl] - H[yk, xl])) / 4
    return dk, ddb


def metric_from_potential(phi: Callable, z, w, h):
    """g_{i jbar} = d_i dbar_j phi, shape z.shape + (2, 2)."""
    D, H = real_derivatives(phi, z, w, h)
    _, ddb = _complex_parts(D, H)
    return np.moveaxis(ddb, (0, 1), (-2, -1))


# ----------------------------------------------------------------------------
# curvature samples


@dataclass
class CurvatureSample:
    z: np.ndarray
    w: np.ndarray
    metric: np.ndarray
    R: np.ndarray            # coordinate components R[..., i, j, k, l]
    R_frame: np.ndarray      # unitary-frame components
    frame: np.ndarray        # columns are unit (1,0)-vectors
    symmetry_residual: np.ndarray

    @property
    def norm2(self) -> np.ndarray:
        return np.sum(np.abs(self.R_frame) ** 2, axis=(-4, -3, -2, -1))

    @property
    def ricci(self) -> np.ndarray:
        """Ricci components in the unitary frame, Ric_{c dbar} = sum_a R_{a abar c dbar}."""
        return np.einsum("...aacd->...cd", self.R_frame)

    def bisectional(self, v, u) -> np.ndarray:
        """R(v, vbar, u, ubar) for frame-coordinate unit vectors v, u."""
        return np.real(np.einsum("...abcd,a,b,c,d->...", self.R_frame, v, np.conj(v), u, np.conj(u)))


def riemann_at(phi: Callable, z, w, h=None, h_metric=None,
               singular_distance: Callable | None = None) -> CurvatureSample:
    """Riemann tensor of i ddbar phi at the given points.

    ``h`` is the outer step (derivatives of g), ``h_metric`` the inner one.
    When ``singular_distance`` is given, points whose stencil reaches the
    singular set raise StencilCrossesSingularSet.
    """
    z = np.atleast_1d(np.asarray(z, complex))
    w = np.atleast_1d(np.asarray(w, complex))
    z, w = np.broadcast_arrays(z, w)
    h = np.broadcast_to(np.asarray(2e-2 if h is None else h, float), z.shape).copy()
    hm = np.broadcast_to(np.asarray(h / 2 if h_metric is None else h_metric, float), z.shape).copy()
    if singular_distance is not None:
        width = 2 * np.sqrt(2) * (2 * h + 2 * hm)
        dist = np.asarray(singular_distance(z, w))
        if np.any(dist <= width):
            raise StencilCrossesSingularSet(f"stencil of width {width.max():.3g} reaches the singular set")

    def g_flat(zz, ww):
        # zz is the flattened stencil of shape (n_offsets * n_points,)
        hh = np.tile(hm.reshape(-1), len(_OFFS))
        return metric_from_potential(phi, zz, ww, hh)

    D, H = real_derivatives(g_flat, z.reshape(-1), w.reshape(-1), h.reshape(-1))
    dk, ddb = _complex_parts(D, H)
    # dk[k, n, i, j] = d_k g_{i jbar};  ddb[k, l, n, i, j] = d_k dbar_l g_{i jbar}
    g = metric_from_potential(phi, z.reshape(-1), w.reshape(-1), hm.reshape(-1))
    gi = np.linalg.inv(g)            # gi[n, t, s] = g^{s tbar}
    d2 = np.einsum("klnij->nijkl", ddb)
    dkn = np.einsum("knij->nkij", dk)
    # g_{s jbar, lbar} = conj(d_l g_{j sbar})
    quad = np.einsum("nts,nkit,nljs->nijkl", gi, dkn, np.conj(dkn))
    R = -d2 + quad
    L = np.linalg.cholesky(g)
    E = np.swapaxes(np.linalg.inv(L), -1, -2)    # E^T g conj(E) = 1
    Rf = np.einsum("nijkl,nia,njb,nkc,nld->nabcd", R, E, np.conj(E), E, np.conj(E))
    scale = 1 + np.max(np.abs(Rf), axis=(1, 2, 3, 4))
    s1 = np.max(np.abs(Rf - np.einsum("nijkl->nkjil", Rf)), axis=(1, 2, 3, 4))
    s2 = np.max(np.abs(Rf - np.einsum("nijkl->nilkj", Rf)), axis=(1, 2, 3, 4))
    shp = z.shape
    return CurvatureSample(z, w, g.reshape(shp + (2, 2)), R.reshape(shp + (2,) * 4),
                           Rf.reshape(shp + (2,) * 4), E.reshape(shp + (2, 2)),
                           (np.maximum(s1, s2) / scale).reshape(shp))


def direction_grid(n_theta: int = 6, n_phi: int = 8) -> np.ndarray:
    """Unit vectors (cos t, sin t e^{i p}) covering CP^1."""
    out = [np.array([1.0, 0.0], complex)]
    for t in np.linspace(0, np.pi / 2, n_theta + 1)[1:]:
        for p in np.linspace(0, 2 * np.pi, n_phi, endpoint=False):
            out.append(np.array([np.cos(t), np.sin(t) * np.exp(1j * p)]))
            if t == np.pi / 2:
                break
    return np.array(out)


def bisectional_values(sample: CurvatureSample, directions: np.ndarray | None = None) -> np.ndarray:
    """Bisec over all direction pairs, shape (n_points, n_dir, n_dir)."""
    d = direction_grid() if directions is None else directions
    Rf = sample.R_frame.reshape((-1,) + (2,) * 4)
    return np.real(np.einsum("nabcd,pa,pb,qc,qd->npq", Rf, d, np.conj(d), d, np.conj(d)))


def bisectional_scan(phi: Callable, z, w, directions: np.ndarray | None = None, **kw) -> float:
    """max of R(v, vbar, u, ubar) over unit directions and points."""
    return float(bisectional_values(riemann_at(phi, z, w, **kw), directions).max())


def model_family_potential(beta: float, eps: float) -> Callable:
    """beta^-2 |z|^{2 beta} + |w|^2 + eps log(1 + |z|^2 + |w|^2)."""
    def phi(z, w):
        a, b = np.abs(z) ** 2, np.abs(w) ** 2
        return a**beta / beta**2 + b + eps * np.log1p(a + b)
    return phi


def fubini_study_potential(z, w):
    return np.log1p(np.abs(z) ** 2 + np.abs(w) ** 2)


# ----------------------------------------------------------------------------
# closed-form energy bookkeeping


def euler_characteristic_curve(d: int) -> int:
    """chi of a smooth affine curve of degree d with distinct asymptotic lines."""
    genus = (d - 1) * (d - 2) // 2
    return 2 - 2 * genus - d


def expected_link_volume(c: float) -> float:
    return math.pi**2 / 2 * c**2


def exact(beta) -> Fraction:
    """beta as a Fraction; floats are read through their shortest decimal repr."""
    if isinstance(beta, Fraction):
        return beta
    if isinstance(beta, (int, np.integer)):
        return Fraction(int(beta))
    return Fraction(repr(float(beta)))


def energy_formula(d: int, beta, vol_link: float | None = None):
    """E = 1 + (beta - 1) chi(C) - Vol(link) / (2 pi^2).

    With ``vol_link`` omitted the closed form (pi^2/2) c^2 is used and the
    result is an exact Fraction; otherwise a float.
    """
    if d < 1:
        raise ConfigInvalid("degree must be positive")
    if not (d - 2) / d < float(beta) <= 1:
        raise ConfigInvalid(f"beta={beta} outside ((d-2)/d, 1]")
    chi = euler_characteristic_curve(d)
    if vol_link is None:
        b = exact(beta)
        c = 2 + d * b - d
        return 1 + (b - 1) * chi - c * c / 4
    return 1 + (float(beta) - 1) * chi - vol_link / (2 * math.pi**2)


def compact_energy(chi_X, chi_C, beta) -> Fraction:
    """E = chi(X) + (beta - 1) chi(C) for an Einstein metric with cone angle 2 pi beta."""
    return chi_X + (exact(beta) - 1) * chi_C


@dataclass(frozen=True)
class FamilyEnergies:
    smooth: object
    limit: object
    lost: object
    bubbles: int
    bubble_energy: object
    conjectural: bool = False


def elliptic_family(beta) -> FamilyEnergies:
    """Cubics degenerating to three lines in CP^2."""
    b = exact(beta)
    e_eps = compact_energy(3, 0, b)
    e_0 = 3 * b * b
    return FamilyEnergies(e_eps, e_0, e_eps - e_0, 3, 1 - b * b)


def quartic_family(beta) -> FamilyEnergies:
    """Quartics degenerating to a double conic; the limit angle is 2 pi (2 beta - 1)."""
    b = exact(beta)
    e_eps = compact_energy(3, -4, b)
    e_0 = compact_energy(3, 2, 2 * b - 1)
    return FamilyEnergies(e_eps, e_0, e_eps - e_0, 8, parabola_energy(b), conjectural=True)


def parabola_energy(beta):
    """Bubble along w = z^2 asymptotic to C_gamma x C with gamma = 2 beta - 1 (conjectural)."""
    b = exact(beta)
    gamma = 2 * b - 1
    return 1 + (b - 1) - gamma


# ----------------------------------------------------------------------------
# numeric energy for the Gibbons-Hawking solutions


_C4 = [(-2, 1 / 12), (-1, -2 / 3), (1, 2 / 3), (2, -1 / 12)]


class _GHField:
    """V and Lap(1/V) in unfolded flat coordinates around a reference angle.

    A base point (x, rho, psi) with psi near psi_c has local Cartesian
    coordinates (x, rho cos(beta (psi - psi_c)), rho sin(beta (psi - psi_c))).
    The metric a g corresponds to V_a(p) = V(p / a) / a on the base scaled by a.
    """

    def __init__(self, beta: float, scale: float = 1.0):
        self.beta = beta
        self.scale = scale

    def V(self, P, psic):
        a = self.scale
        rho = np.hypot(P[..., 1], P[..., 2]) / a
        psi = psic + np.arctan2(P[..., 2], P[..., 1]) / self.beta
        return harmonic_V(P[..., 0] / a, rho, psi, self.beta) / a

    def W(self, P, psic, h):
        g2 = 0.0
        for i in range(3):
            acc = 0.0
            for m, c in _C4:
                Q = P.copy()
                Q[..., i] += m * h
                acc = acc + c * self.V(Q, psic)
            g2 = g2 + (acc / h) ** 2
        return 2 * g2 / self.V(P, psic) ** 3

    def normal_derivative(self, P, n, psic, h):
        acc = 0.0
        for m, c in _C4:
            acc = acc + c * self.W(P + (m * h)[..., None] * n, psic, h)
        return acc / h


@dataclass
class FluxSettings:
    n_theta: int = 48
    n_psi: int = 32
    n_nut_theta: int = 24
    n_nut_phi: int = 48
    n_tube_x: int = 80
    n_tube_psi: int = 16


def outer_flux(field_: _GHField, radius: float, st: FluxSettings) -> float:
    """Outward flux of grad Lap(1/V) through the sphere |(x, rho)| = radius."""
    b = field_.beta
    t, wt = np.polynomial.legendre.leggauss(st.n_theta)
    th = np.pi * (t + 1) / 2
    wt = wt * np.pi / 2
    ps = -np.pi + 2 * np.pi * (np.arange(st.n_psi) + 0.5) / st.n_psi
    TH, PS = np.meshgrid(th, ps, indexing="ij")
    rho, x = radius * np.sin(TH), radius * np.cos(TH)
    P = np.stack([x, rho, 0 * x], -1)
    n = np.stack([np.cos(TH), np.sin(TH), 0 * x], -1)
    h = np.minimum(0.01 * radius, 0.2 * np.maximum(rho, 1e-3 * radius))
    f = field_.normal_derivative(P, n, PS, h)
    return float(np.sum(f * radius**2 * b * np.sin(TH) * wt[:, None]) * 2 * np.pi / st.n_psi)


def nut_flux(field_: _GHField, radius: float, st: FluxSettings) -> float:
    """Flux out of the region through a small sphere about the nut."""
    t, wt = np.polynomial.legendre.leggauss(st.n_nut_theta)
    th = np.arccos(t)
    ph = 2 * np.pi * (np.arange(st.n_nut_phi) + 0.5) / st.n_nut_phi
    TH, PH = np.meshgrid(th, ph, indexing="ij")
    u = np.stack([np.cos(TH), np.sin(TH) * np.cos(PH), np.sin(TH) * np.sin(PH)], -1)
    P = np.array([0.0, field_.scale / field_.beta, 0.0]) + radius * u
    h = np.full(TH.shape, 0.05 * radius)
    f = field_.normal_derivative(P, -u, np.zeros(TH.shape), h)
    return float(np.sum(f * radius**2 * wt[:, None]) * 2 * np.pi / st.n_nut_phi)


def tube_flux(field_: _GHField, radius: float, outer: float, st: FluxSettings) -> float:
    """Flux out of the region through the tube rho = radius inside the outer sphere."""
    b = field_.beta
    X = np.sqrt(outer**2 - radius**2)
    sc = 0.5 * field_.scale
    umax = np.arcsinh(X / sc)
    t, wt = np.polynomial.legendre.leggauss(st.n_tube_x)
    u = umax * t
    x = sc * np.sinh(u)
    wx = wt * umax * sc * np.cosh(u)
    ps = -np.pi + 2 * np.pi * (np.arange(st.n_tube_psi) + 0.5) / st.n_tube_psi
    XX, PS = np.meshgrid(x, ps, indexing="ij")
    P = np.stack([XX, np.full(XX.shape, radius), 0 * XX], -1)
    n = np.stack([0 * XX, -np.ones(XX.shape), 0 * XX], -1)
    h = np.full(XX.shape, 0.2 * radius)
    f = field_.normal_derivative(P, n, PS, h)
    return float(np.sum(f * b * radius * wx[:, None]) * 2 * np.pi / st.n_tube_psi)


@dataclass
class Extrapolation:
    """Limit of F(t) ~ F_inf + C t^p from three values at t, t/2, t/4 (or P, 2P, 4P)."""
    values: list
    limit: float
    exponent: float
    uncertainty: float


def richardson_geometric(values, tol: float = 1e-10) -> Extrapolation:
    """Fitted-exponent extrapolation of a geometric sequence of evaluations.

    Sequences already flat to ``tol`` (relative) are returned as they are.
    """
    f1, f2, f3 = values[-3:]
    d1, d2 = f2 - f1, f3 - f2
    if max(abs(d1), abs(d2)) <= tol * (1 + abs(f3)):
        return Extrapolation(list(values), f3, np.inf, max(abs(d1), abs(d2)))
    ratio = d2 / d1 if d1 else np.inf
    if not 0 < ratio < 1:
        raise NonConvergentTail(f"successive differences {d1:.3e}, {d2:.3e} do not contract")
    p = -np.log2(ratio)
    lim = f3 + d2 * ratio / (1 - ratio)
    return Extrapolation(list(values), float(lim), float(p), float(abs(d2)))


@dataclass
class EnergyReport:
    beta: float
    numeric: float
    uncertainty: float
    formula: float
    chi: int
    vol_link: float
    parts: dict = field(default_factory=dict)
    r_excise: float = 0.0
    r_outer: float = 0.0
    scale: float = 1.0

    @property
    def relative_gap(self) -> float:
        return abs(self.numeric - self.formula) / max(abs(self.formula), 1e-300)

    def agrees(self, rel_tol: float = 0.15) -> bool:
        return abs(self.numeric - self.formula) <= rel_tol * abs(self.formula) + self.uncertainty


def energy_numeric(beta: float, r_excise: float = 0.04, r_outer: float = 10.0, scale: float = 1.0,
                   settings: FluxSettings | None = None) -> EnergyReport:
    """E of the Ricci-flat metric along zw = 1 by flux integrals.

    Nut spheres use radii 4 r_excise, 2 r_excise, r_excise; tubes about the
    axis use 8 r_excise down to r_excise; outer spheres r_outer, 2 r_outer,
    4 r_outer.  Each family is extrapolated with a fitted power law.
    Lengths are in units of the (scaled) metric.
    """
    if not 0 < beta <= 1:
        raise ConfigInvalid("need 0 < beta <= 1")
    st = settings or FluxSettings()
    fld = _GHField(beta, scale)
    norm = 16 * np.pi
    a = scale
    outer = [outer_flux(fld, a * r_outer * 2**k, st) / norm for k in range(3)]
    nut = [nut_flux(fld, a * r_excise * 2 ** (2 - k), st) / norm for k in range(3)]
    if beta == 1:
        tube = [0.0, 0.0, 0.0]
    else:
        tube = [tube_flux(fld, a * r_excise * 2 ** (2 - k), a * r_outer, st) / norm for k in range(3)]
    eo = richardson_geometric(outer)
    en = richardson_geometric(nut)
    et = richardson_geometric(tube)
    total = eo.limit + en.limit + et.limit
    unc = eo.uncertainty + en.uncertainty + et.uncertainty
    vol = expected_link_volume(2 * beta)
    return EnergyReport(beta, float(total), float(unc), float(energy_formula(2, beta)),
                        euler_characteristic_curve(2), vol,
                        {"outer": eo, "nut": en, "tube": et}, r_excise, r_outer, scale)


def curvature_norm_gh_identity(beta: float, x, zp, h: float = 0.02):
    """(1/16) V^-1 Lap^2 (V^-1) at base points (x, zp), zp = (zw - 1)^beta / beta."""
    b = beta

    def Vb(xx, zz):
        rho = np.abs(zz)
        psi = np.angle(zz) / b - np.pi
        return harmonic_V(xx, rho, psi, b)

    def lap(f, xx, zz):
        s = -3 * 2.5 * f(xx, zz)
        for k, c in _D2:
            s = s + c * (f(xx + k * h, zz) + f(xx, zz + k * h) + f(xx, zz + 1j * k * h))
        return s / h**2

    def inv(xx, zz):
        return 1 / Vb(xx, zz)

    return lap(lambda xx, zz: lap(inv, xx, zz), x, zp) / Vb(x, zp) / 16
