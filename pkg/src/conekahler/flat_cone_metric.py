"""Flat Kahler cone metrics on C^2 minus the asymptotic lines.

The potential is written without reference to a chart:

    r^2 = (2/c) * |s|^(beta-1) * |x|^c * exp(-v([z:w]))

where ``P_d = s * prod(unit linear forms)`` and v is the smooth remainder of
the CP^1 metric (see ``cp1_cone_metrics``).  With this constant the volume
form is exactly ``|P_d|^(2 beta - 2) Omega ^ conj(Omega)``, i.e.
``det g = |P_d|^(2 beta - 2)`` for ``g_{i jbar} = d_i dbar_j r^2``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cp1_cone_metrics import (ConePointConfig, ConformalConeMetric, LiouvilleGrid, football_metric,
                               solve_liouville, triangle_metric_d3_half)
from .curve_geometry import ConeCurveProblem, eval_poly, factor_homogeneous
from .errors import ConfigInvalid, TooCloseToSingularSet

PRESETS = ("d2", "d3-half", "d3-general")

_D1 = [(-2, 1 / 12), (-1, -2 / 3), (1, 2 / 3), (2, -1 / 12)]
_D2 = [(-2, -1 / 12), (-1, 4 / 3), (0, -5 / 2), (1, 4 / 3), (2, -1 / 12)]


def _as_points(z, w):
    z = np.atleast_1d(np.asarray(z, complex))
    w = np.atleast_1d(np.asarray(w, complex))
    return np.broadcast_arrays(z, w)


def _shift(z, w, k, t):
    if k == 0:
        return z + t, w
    if k == 1:
        return z + 1j * t, w
    if k == 2:
        return z, w + t
    return z, w + 1j * t


def real_hessian(f, z, w, h):
    """4x4 real Hessian of f in (x1, y1, x2, y2); 4th order, step h per point."""
    H = np.zeros(np.shape(z) + (4, 4))
    f0 = f(z, w)
    for k in range(4):
        acc = -2.5 * f0
        for m, cm in _D2:
            if m:
                acc = acc + cm * f(*_shift(z, w, k, m * h))
        H[..., k, k] = acc / h**2
    for k in range(4):
        for l in range(k + 1, 4):
            def cross(t):
                out = 0.0
                for a, b, sg in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)):
                    zz, ww = _shift(z, w, k, a * t)
                    zz, ww = _shift(zz, ww, l, b * t)
                    out = out + sg * f(zz, ww)
                return out / (4 * t**2)
            # Richardson on the 4-point cross stencil
            H[..., k, l] = H[..., l, k] = (4 * cross(h) - cross(2 * h)) / 3
    return H


def hermitian_from_real(H):
    """g_{i jbar} = d_i dbar_j f from the real Hessian."""
    g = np.zeros(H.shape[:-2] + (2, 2), complex)
    g[..., 0, 0] = (H[..., 0, 0] + H[..., 1, 1]) / 4
    g[..., 1, 1] = (H[..., 2, 2] + H[..., 3, 3]) / 4
    g[..., 0, 1] = ((H[..., 0, 2] + H[..., 1, 3]) + 1j * (H[..., 0, 3] - H[..., 1, 2])) / 4
    g[..., 1, 0] = np.conj(g[..., 0, 1])
    return g


class FlatConeMetric:
    """The cone metric g_F built from a curve problem and a CP^1 cone metric."""

    def __init__(self, problem: ConeCurveProblem, base: ConformalConeMetric, fd_step: float = 2e-3):
        scale, lines = factor_homogeneous(problem)
        slopes = [ln.slope for ln in lines]
        if len(slopes) != base.config.d:
            raise ConfigInvalid("base metric has the wrong number of cone points")

        def same(a, b):
            return (a is None and b is None) or (a is not None and b is not None and abs(a - b) < 1e-9)

        for a in slopes:
            if not any(same(a, b) for b in base.points):
                raise ConfigInvalid(f"asymptotic line slope {a} is not a cone point of the base metric")
        if abs(problem.beta - base.beta) > 1e-12:
            raise ConfigInvalid("problem and base metric disagree on beta")
        self.problem = problem
        self.base = base
        self.lines = lines
        self.scale = scale
        self.fd_step = fd_step

    @property
    def beta(self) -> float:
        return self.base.beta

    @property
    def c(self) -> float:
        return self.base.c

    @property
    def constant(self) -> float:
        return 2 / self.c * abs(self.scale) ** (self.beta - 1)

    # -- potential --------------------------------------------------------
    def potential(self, z, w):
        z, w = _as_points(z, w)
        nx2 = np.abs(z) ** 2 + np.abs(w) ** 2
        return self.constant * nx2 ** (self.c / 2) * np.exp(-self.base.v_hom(z, w))

    def r(self, z, w):
        return np.sqrt(self.potential(z, w))

    def dilation(self, lam: float) -> float:
        """Factor of the complex scaling D_lam with r o D_lam = lam * r."""
        return lam ** (2 / self.c)

    def chordal_to_lines(self, z, w):
        """Chordal distance of [z:w] to the nearest cone point."""
        z, w = _as_points(z, w)
        nx = np.sqrt(np.abs(z) ** 2 + np.abs(w) ** 2)
        return np.min([np.abs(ln.form(z, w)) / nx for ln in self.lines], axis=0)

    def check_resolved(self, z, w):
        dist = self.chordal_to_lines(z, w)
        bad = dist <= max(self.base.resolution, 1e-6)
        if np.any(bad):
            raise TooCloseToSingularSet(
                f"{int(bad.sum())} point(s) within chordal distance {max(self.base.resolution, 1e-6):.3g} of L")
        return dist

    # -- derivatives ------------------------------------------------------
    def _steps(self, z, w):
        nx = np.sqrt(np.abs(z) ** 2 + np.abs(w) ** 2)
        return self.fd_step * nx * np.minimum(1.0, self.chordal_to_lines(z, w) * 4)

    def real_hessian(self, z, w):
        """4x4 real Hessian of r^2 in (x1, y1, x2, y2) by 4th order differences."""
        z, w = _as_points(z, w)
        return real_hessian(self.potential, z, w, self._steps(z, w))

    def metric_tensor(self, z, w, check: bool = True):
        """Hermitian matrices g_{i jbar} = d_i dbar_j r^2, shape (..., 2, 2)."""
        z, w = _as_points(z, w)
        if check:
            self.check_resolved(z, w)
        return hermitian_from_real(self.real_hessian(z, w))

    def dbar_potential(self, z, w):
        """(d_z r^2, d_w r^2) by 4th order differences."""
        z, w = _as_points(z, w)
        h = self._steps(z, w)
        grads = []
        for k in range(4):
            acc = 0.0
            for m, cm in _D1:
                acc = acc + cm * self.potential(*_shift(z, w, k, m * h))
            grads.append(acc / h)
        return np.stack([(grads[0] - 1j * grads[1]) / 2, (grads[2] - 1j * grads[3]) / 2], axis=-1)

    def volume_density(self, z, w):
        """|P_d|^(2 beta - 2), the prescribed density of omega_F^2 / (Omega ^ conj Omega)."""
        z, w = _as_points(z, w)
        return np.abs(eval_poly(self.problem.top, z, w)) ** (2 * self.beta - 2)

    def volume_identity_residual(self, z, w) -> tuple[float, float]:
        """(max |det g / |P_d|^(2b-2) - 1|, median ratio) over the samples."""
        g = self.metric_tensor(z, w)
        det = np.real(np.linalg.det(g))
        ratio = det / self.volume_density(z, w)
        return float(np.max(np.abs(ratio - 1))), float(np.median(ratio))

    def coframe(self) -> "ConeCoframe":
        return ConeCoframe(self)

    def sample_sphere(self, n: int, seed: int = 0, margin: float | None = None):
        """n points on the unit sphere of C^2 at chordal distance > margin from L."""
        rng = np.random.default_rng(seed)
        margin = max(2 * self.base.resolution, 0.02) if margin is None else margin
        out_z, out_w = [], []
        while len(out_z) < n:
            v = rng.normal(size=(4 * n, 4))
            v /= np.linalg.norm(v, axis=1)[:, None]
            z = v[:, 0] + 1j * v[:, 1]
            w = v[:, 2] + 1j * v[:, 3]
            keep = self.chordal_to_lines(z, w) > margin
            out_z.extend(z[keep])
            out_w.extend(w[keep])
        return np.array(out_z[:n]), np.array(out_w[:n])

    def to_csv(self, path: str | Path, z, w) -> None:
        z, w = _as_points(z, w)
        r2 = self.potential(z, w)
        g = self.metric_tensor(z, w)
        cols = ["z_re", "z_im", "w_re", "w_im", "r2", "g11", "g12_re", "g12_im", "g22"]
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(cols)
            for i in range(len(z)):
                row = [z[i].real, z[i].imag, w[i].real, w[i].imag, r2[i], g[i, 0, 0].real,
                       g[i, 0, 1].real, g[i, 0, 1].imag, g[i, 1, 1].real]
                wr.writerow([repr(float(x)) for x in row])


@dataclass(frozen=True)
class ConeCoframe:
    """tau1 = e^psi r (w dz - z dw)/|x|^2 and tau2 = 2 d r (both (1,0)-forms).

    Up to phases these agree with e^phi r dxi and dr + i (c r / 2) alpha, and
    g_{i jbar} = tau1_i conj(tau1_j) + tau2_i conj(tau2_j).
    """

    metric: FlatConeMetric

    def tau1(self, z, w):
        z, w = _as_points(z, w)
        nx2 = np.abs(z) ** 2 + np.abs(w) ** 2
        amp = np.exp(self.metric.base.psi_hom(z, w)) * self.metric.r(z, w) / nx2
        return np.stack([amp * w, -amp * z], axis=-1)

    def tau2(self, z, w):
        z, w = _as_points(z, w)
        return self.metric.dbar_potential(z, w) / self.metric.r(z, w)[..., None]

    def gram(self, z, w):
        t1, t2 = self.tau1(z, w), self.tau2(z, w)
        return (np.einsum("...i,...j->...ij", t1, np.conj(t1))
                + np.einsum("...i,...j->...ij", t2, np.conj(t2)))

    def norms(self, z, w, g=None):
        """Riemannian squared norms |tau1|^2, |tau2|^2 and the cross term (expected 2, 2, 0)."""
        g = self.metric.metric_tensor(z, w) if g is None else g
        gi = np.linalg.inv(g)
        t1, t2 = self.tau1(z, w), self.tau2(z, w)
        n11 = 2 * np.real(np.einsum("...i,...ij,...j->...", t1, np.swapaxes(gi, -1, -2), np.conj(t1)))
        n22 = 2 * np.real(np.einsum("...i,...ij,...j->...", t2, np.swapaxes(gi, -1, -2), np.conj(t2)))
        n12 = 2 * np.einsum("...i,...ij,...j->...", t1, np.swapaxes(gi, -1, -2), np.conj(t2))
        return n11, n22, n12

    def reconstruction_residual(self, z, w) -> float:
        g = self.metric.metric_tensor(z, w)
        diff = self.gram(z, w) - g
        return float(np.max(np.linalg.norm(diff, axis=(-2, -1)) / np.linalg.norm(g, axis=(-2, -1))))


# ----------------------------------------------------------------------------
# presets


def preset_problem(name: str, beta: float, check_window: bool = True) -> ConeCurveProblem:
    """The curve behind each named preset (P_d has unit scale in all of them)."""
    if name == "d2":
        return ConeCurveProblem({(1, 1): 1, (0, 0): -1}, beta, check_window)
    if name in ("d3-half", "d3-general"):
        # P_d = z (z - w) w, lines through the cone points 0, 1, infinity
        return ConeCurveProblem({(2, 1): 1, (1, 2): -1, (0, 0): -1}, beta, check_window)
    raise ConfigInvalid(f"unknown preset {name!r}; expected one of {PRESETS}")


def preset_base(name: str, beta: float, grid: LiouvilleGrid | None = None) -> ConformalConeMetric:
    if name == "d2":
        return football_metric(beta)
    if name == "d3-half":
        if abs(beta - 0.5) > 1e-12:
            raise ConfigInvalid("the d3-half preset is fixed at beta = 1/2")
        return triangle_metric_d3_half()
    if name == "d3-general":
        return solve_liouville(ConePointConfig((0j, 1 + 0j, None), beta), grid)
    raise ConfigInvalid(f"unknown preset {name!r}; expected one of {PRESETS}")


def preset_flat_metric(name: str, beta: float, grid: LiouvilleGrid | None = None) -> FlatConeMetric:
    # beta = 1 is the smooth limit; it is allowed for d = 2 only
    problem = preset_problem(name, beta, check_window=not (name == "d2" and beta == 1.0))
    return FlatConeMetric(problem, preset_base(name, beta, grid))
