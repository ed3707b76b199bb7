"""Weighted norms and the mode-by-mode Laplace solver on the cone.

A field is stored as radial coefficients u_i(r) of link eigenfunctions phi_i
on a log-uniform grid s = log r.  Per mode the cone Laplacian is

    Lap u = r^-2 (u_ss + 2 u_s - lambda_i u),

an Euler operator with constant coefficients in s.  Homogeneous solutions are
r^{delta_i^+} and r^{delta_i^-} with delta(delta + 2) = lambda_i.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spl

from .errors import IndicialResonance

# fourth order stencils on a uniform grid; rows are offsets -> weights
_C1 = {-2: 1 / 12, -1: -2 / 3, 1: 2 / 3, 2: -1 / 12}
_C2 = {-2: -1 / 12, -1: 4 / 3, 0: -5 / 2, 1: 4 / 3, 2: -1 / 12}
# six point off-centred stencils at grid index 1 (offsets -1 .. 4)
_C1_OFF = {-1: -1 / 4, 0: -5 / 6, 1: 3 / 2, 2: -1 / 2, 3: 1 / 12}
_C2_OFF = {-1: 5 / 6, 0: -5 / 4, 1: -1 / 3, 2: 7 / 6, 3: -1 / 2, 4: 1 / 12}
# one-sided at the end point (offsets 0 .. 5)
_C1_END = {0: -25 / 12, 1: 4, 2: -3, 3: 4 / 3, 4: -1 / 4}
_C2_END = {0: 15 / 4, 1: -77 / 6, 2: 107 / 6, 3: -13, 4: 61 / 12, 5: -5 / 6}


@dataclass(frozen=True)
class RadialGrid:
    r_min: float = 1e-2
    r_max: float = 1e3
    n: int = 512

    @property
    def s(self) -> np.ndarray:
        return np.linspace(np.log(self.r_min), np.log(self.r_max), self.n)

    @property
    def r(self) -> np.ndarray:
        return np.exp(self.s)

    @property
    def h(self) -> float:
        return float((np.log(self.r_max) - np.log(self.r_min)) / (self.n - 1))


@dataclass
class WeightedField:
    """Mode coefficients u_i(r) with link data.

    ``link_values[i, p]`` is phi_i at link sample point p; when omitted the
    field is purely radial (one mode with phi_0 = 1).
    """

    grid: RadialGrid
    coeffs: np.ndarray
    eigenvalues: np.ndarray
    link_values: np.ndarray | None = None
    delta: float | None = None
    a: float | None = None
    link_distance: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.coeffs = np.atleast_2d(np.asarray(self.coeffs, float))
        self.eigenvalues = np.atleast_1d(np.asarray(self.eigenvalues, float))
        if self.link_values is None:
            self.link_values = np.ones((len(self.eigenvalues), 1))
        self.link_values = np.atleast_2d(np.asarray(self.link_values, float))
        if self.coeffs.shape != (len(self.eigenvalues), self.grid.n):
            raise ValueError("coeffs must have shape (n_modes, n_r)")

    @property
    def r(self) -> np.ndarray:
        return self.grid.r

    @property
    def n_modes(self) -> int:
        return len(self.eigenvalues)

    def values(self) -> np.ndarray:
        """Reconstructed samples, shape (n_r, n_link_points)."""
        return self.coeffs.T @ self.link_values

    def with_coeffs(self, coeffs) -> "WeightedField":
        return replace(self, coeffs=np.asarray(coeffs, float))

    @classmethod
    def radial(cls, grid: RadialGrid, u, lam: float = 0.0, **kw) -> "WeightedField":
        u = u(grid.r) if callable(u) else np.asarray(u, float)
        return cls(grid, u[None, :], np.array([lam]), **kw)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["mode", "r", "value"])
            for i in range(self.n_modes):
                for rv, uv in zip(self.r, self.coeffs[i]):
                    wr.writerow([i, repr(float(rv)), repr(float(uv))])


@dataclass(frozen=True)
class WeightedNormReport:
    sup: float
    seminorm: float
    gamma: float
    a: float
    n_pairs: int
    seed: int

    @property
    def combined(self) -> float:
        return self.sup + self.seminorm


def weighted_sup(field: WeightedField, gamma: float) -> float:
    """max over the grid of r^-gamma |f|."""
    vals = np.abs(field.values())
    return float(np.max(field.r[:, None] ** (-gamma) * vals))


def weighted_holder(field: WeightedField, a: float, gamma: float, n_pairs: int = 20000,
                    seed: int = 0, ratio: float = 2.0) -> WeightedNormReport:
    """Sampled weighted Holder norm.

    Pairs are drawn within annuli r_y / r_x <= ratio (pairs further apart are
    controlled by the sup term).  The weight is min(r_x, r_y)^(a - gamma) for
    gamma < 0 and the max for gamma >= 0.  Cone distances use
    d^2 = (r_x - r_y)^2 + r_x r_y theta^2 with theta the link distance.
    """
    rng = np.random.default_rng(seed)
    vals = field.values()
    r = field.r
    n_r, n_p = vals.shape
    span = max(1, int(np.floor(np.log(ratio) / field.grid.h)))
    i = rng.integers(0, n_r, n_pairs)
    j = np.clip(i + rng.integers(-span, span + 1, n_pairs), 0, n_r - 1)
    p = rng.integers(0, n_p, n_pairs)
    q = rng.integers(0, n_p, n_pairs) if field.link_distance is not None else p
    theta = field.link_distance[p, q] if field.link_distance is not None else np.zeros(n_pairs)
    dist = np.sqrt((r[i] - r[j]) ** 2 + r[i] * r[j] * theta**2)
    ok = dist > 0
    i, j, p, q, dist = i[ok], j[ok], p[ok], q[ok], dist[ok]
    diff = np.abs(vals[i, p] - vals[j, q])
    pick = np.minimum if gamma < 0 else np.maximum
    wt = pick(r[i], r[j]) ** (a - gamma)
    semi = float(np.max(wt * diff / dist**a)) if len(dist) else 0.0
    return WeightedNormReport(weighted_sup(field, gamma), semi, gamma, a, int(len(dist)), seed)


# ----------------------------------------------------------------------------
# operator


def _stencil_rows(n: int, h: float):
    """Sparse matrices for d/ds and d^2/ds^2 (4th order everywhere)."""
    D1 = sp.lil_matrix((n, n))
    D2 = sp.lil_matrix((n, n))
    for i in range(n):
        if 2 <= i <= n - 3:
            c1, c2, sgn, base = _C1, _C2, 1, i
        elif i == 1 or i == n - 2:
            c1, c2, base = _C1_OFF, _C2_OFF, i
            sgn = 1 if i == 1 else -1
        else:
            c1, c2, base = _C1_END, _C2_END, i
            sgn = 1 if i == 0 else -1
        for off, wgt in c1.items():
            D1[i, base + sgn * off] += sgn * wgt / h
        for off, wgt in c2.items():
            D2[i, base + sgn * off] += wgt / h**2
    return D1.tocsr(), D2.tocsr()


_STENCIL_CACHE: dict = {}


def _stencils(grid: RadialGrid):
    key = (grid.n, grid.h)
    if key not in _STENCIL_CACHE:
        _STENCIL_CACHE[key] = _stencil_rows(grid.n, grid.h)
    return _STENCIL_CACHE[key]


def apply_laplacian(field: WeightedField) -> WeightedField:
    """Per mode r^-2 (u_ss + 2 u_s - lambda u)."""
    D1, D2 = _stencils(field.grid)
    r2 = field.r**2
    out = np.empty_like(field.coeffs)
    for i, lam in enumerate(field.eigenvalues):
        u = field.coeffs[i]
        out[i] = (D2 @ u + 2 * (D1 @ u) - lam * u) / r2
    return field.with_coeffs(out)


def indicial_pair(lam: float) -> tuple[float, float]:
    root = np.sqrt(1 + max(lam, 0.0))
    return -1 + root, -1 - root


def solve_linear(f: WeightedField, delta: float, tol: float = 1e-8) -> WeightedField:
    """Solve Lap u = f mode by mode with decay r^delta.

    Boundary rows are Robin conditions selecting r^{delta^+} at r_min and
    r^{delta^-} at r_max.  Where f does not vanish at an end it is continued
    as f_end (r / r_end)^(delta - 2), whose particular solution p r^delta adds
    an inhomogeneous term to the Robin row.
    """
    g = f.grid
    D1, D2 = _stencils(g)
    n = g.n
    r = g.r
    coeffs = np.empty_like(f.coeffs)
    for i, lam in enumerate(f.eigenvalues):
        dp, dm = indicial_pair(lam)
        for root in (dp, dm):
            if abs(delta - root) < tol:
                raise IndicialResonance(f"delta={delta} hits indicial root {root:.6g} of mode {i}")
        A = (D2 + 2 * D1 - lam * sp.eye(n)).tolil()
        rhs = r**2 * f.coeffs[i]
        denom = (delta + 2) * delta - lam
        for end, dh in ((0, dp), (n - 1, dm)):
            p = f.coeffs[i, end] * r[end] ** (2 - delta) / denom
            A[end, :] = D1[end, :] - dh * sp.eye(n, format="csr")[end, :]
            rhs[end] = p * (delta - dh) * r[end] ** delta
        coeffs[i] = spl.spsolve(A.tocsc(), rhs)
    return replace(f, coeffs=coeffs, delta=delta)


def decay_constant(delta: float) -> float:
    """c_delta = -1 / ((delta + 2) delta) of the mode-zero decay estimate."""
    return -1.0 / ((delta + 2) * delta)


def round_trip_residual(f: WeightedField, u: WeightedField, delta: float, interior: int = 1) -> float:
    """|| Lap u - f ||_{0, delta - 2} relative to || f ||_{0, delta - 2}.

    The first and last ``interior`` rows are skipped; with the default 1 these
    are exactly the rows that carry the Robin conditions instead of the
    equation.
    """
    res = apply_laplacian(u).coeffs - f.coeffs
    if interior:
        res = res[:, interior:-interior]
    sl = slice(interior, f.grid.n - interior) if interior else slice(None)
    diff = WeightedField(f.grid, np.zeros_like(f.coeffs), f.eigenvalues, f.link_values)
    diff.coeffs[:, sl] = res
    return weighted_sup(diff, delta - 2) / max(weighted_sup(f, delta - 2), 1e-300)


def random_compact_source(grid: RadialGrid, rng: np.random.Generator, n_bumps: int = 4,
                          r_lo: float = 0.1, r_hi: float = 100.0, n_modes: int = 1) -> np.ndarray:
    """Smooth compactly supported radial profiles (sums of C-infinity bumps in log r)."""
    s = grid.s
    out = np.zeros((n_modes, grid.n))
    for m in range(n_modes):
        for _ in range(n_bumps):
            c = rng.uniform(np.log(r_lo), np.log(r_hi))
            w = rng.uniform(0.3, 1.5)
            t = (s - c) / w
            bump = np.where(np.abs(t) < 1, np.exp(-1 / np.maximum(1 - t * t, 1e-300)), 0.0)
            out[m] += rng.normal() * bump * np.exp(1)
    return out


def rescale(field: WeightedField, lam: float, gamma: float) -> WeightedField:
    """f_{lam,gamma}(x) = lam^-gamma f(lam x) on the rescaled grid."""
    g = field.grid
    grid = RadialGrid(g.r_min / lam, g.r_max / lam, g.n)
    return replace(field, grid=grid, coeffs=field.coeffs * lam ** (-gamma))
