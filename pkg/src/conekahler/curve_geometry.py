"""Plane curves C = {P = 0} with distinct asymptotic lines.

Polynomials are stored as coefficient maps ``{(i, j): a_ij}`` for the monomial
``z**i * w**j``.  A line through the origin is stored by a unit direction
vector ``e``; the orthonormal partner ``n`` completes a unitary frame in which
the line is ``{w' = 0}`` and its sector is ``{|w'| < delta |z'|, |z'| > R}``.

The asymptotic diffeomorphism pushes the branch of C near each line onto the
line itself by subtracting the bounded root function inside the sector, with
a smooth cutoff that switches it off outside.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import LabelAmbiguity, RepeatedLine, RootCollision, SectorOverlap, WindowViolation

Coeffs = Mapping[tuple[int, int], complex]


# ----------------------------------------------------------------------------
# polynomial helpers


def _as_array(coeffs: Coeffs) -> np.ndarray:
    deg = max(i + j for (i, j) in coeffs)
    a = np.zeros((deg + 1, deg + 1), complex)
    for (i, j), v in coeffs.items():
        a[i, j] += v
    return a


def _from_array(a: np.ndarray, tol: float = 0.0) -> dict[tuple[int, int], complex]:
    out = {}
    for (i, j), v in np.ndenumerate(a):
        if abs(v) > tol:
            out[(int(i), int(j))] = complex(v)
    return out


def compose_linear(coeffs: Coeffs, S: np.ndarray) -> dict[tuple[int, int], complex]:
    """Coefficients of ``P(S @ (z', w'))`` for a 2x2 complex matrix ``S``."""
    a = _as_array(coeffs)
    deg = a.shape[0] - 1
    # powers of the two linear forms as 2D coefficient arrays
    lz = np.zeros((2, 2), complex)
    lz[1, 0], lz[0, 1] = S[0, 0], S[0, 1]
    lw = np.zeros((2, 2), complex)
    lw[1, 0], lw[0, 1] = S[1, 0], S[1, 1]

    def mul(p, q):
        out = np.zeros((p.shape[0] + q.shape[0] - 1,) * 2, complex)
        for (i, j), v in np.ndenumerate(p):
            if v != 0:
                out[i:i + q.shape[0], j:j + q.shape[1]] += v * q
        return out

    pz = [np.ones((1, 1), complex)]
    pw = [np.ones((1, 1), complex)]
    for _ in range(deg):
        pz.append(mul(pz[-1], lz))
        pw.append(mul(pw[-1], lw))
    out = np.zeros((deg + 1, deg + 1), complex)
    for (i, j), v in np.ndenumerate(a):
        if v != 0:
            term = v * mul(pz[i], pw[j])
            out[:term.shape[0], :term.shape[1]] += term[:deg + 1, :deg + 1]
    scale = np.abs(a).max()
    return _from_array(out, tol=1e-15 * scale)


def eval_poly(coeffs: Coeffs, z, w):
    z = np.asarray(z, complex)
    w = np.asarray(w, complex)
    out = np.zeros(np.broadcast(z, w).shape, complex)
    for (i, j), v in coeffs.items():
        out = out + v * z**i * w**j
    return out


def _w_coeffs(coeffs: Coeffs, z: complex) -> np.ndarray:
    """Coefficients of P_z(w) in numpy.roots order (highest power first)."""
    deg = max(j for (_, j) in coeffs)
    c = np.zeros(deg + 1, complex)
    for (i, j), v in coeffs.items():
        c[deg - j] += v * z**i
    return c


def _trim_leading(c: np.ndarray, rel: float = 1e-13) -> np.ndarray:
    scale = np.abs(c).max()
    k = 0
    while k < len(c) - 1 and abs(c[k]) <= rel * scale:
        k += 1
    return c[k:]


# ----------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class Line:
    """Complex line C*e through the origin with unit direction ``e``."""

    e: tuple[complex, complex]

    @property
    def frame(self) -> np.ndarray:
        p, q = self.e
        return np.array([[p, -np.conj(q)], [q, np.conj(p)]], complex)

    def form(self, z, w):
        """Linear form vanishing on the line, normalised to unit coefficients."""
        p, q = self.e
        return q * np.asarray(z) - p * np.asarray(w)

    @property
    def slope(self) -> complex | None:
        """The a in z = a w, or None for the line w = 0."""
        p, q = self.e
        return None if abs(q) < 1e-15 else complex(p / q)


def _line_from_point(t: complex | None) -> Line:
    if t is None:
        return Line((1.0 + 0j, 0j))
    v = np.array([t, 1.0], complex)
    v /= np.linalg.norm(v)
    return Line((complex(v[0]), complex(v[1])))


@dataclass(frozen=True)
class ConeCurveProblem:
    """Degree d curve P = P_d + Q with cone angle 2*pi*beta along it."""

    coeffs: Mapping[tuple[int, int], complex]
    beta: float
    check_window: bool = True

    def __post_init__(self):
        cleaned = {(int(i), int(j)): complex(v) for (i, j), v in self.coeffs.items() if v != 0}
        object.__setattr__(self, "coeffs", cleaned)
        if self.d < 2:
            raise ValueError("degree must be at least 2")
        if self.check_window and not ((self.d - 2) / self.d < self.beta < 1):
            raise WindowViolation(f"beta={self.beta} outside ((d-2)/d, 1) for d={self.d}")
        factor_homogeneous(self)  # raises RepeatedLine

    @property
    def d(self) -> int:
        return max(i + j for (i, j) in self.coeffs)

    @property
    def c(self) -> float:
        return 2 + self.d * self.beta - self.d

    def __call__(self, z, w):
        return eval_poly(self.coeffs, z, w)

    def part(self, k: int) -> dict[tuple[int, int], complex]:
        return {m: v for m, v in self.coeffs.items() if sum(m) == k}

    @property
    def top(self) -> dict[tuple[int, int], complex]:
        return self.part(self.d)

    @property
    def lower(self) -> dict[tuple[int, int], complex]:
        return {m: v for m, v in self.coeffs.items() if sum(m) < self.d}

    def with_beta(self, beta: float) -> "ConeCurveProblem":
        return ConeCurveProblem(self.coeffs, beta, self.check_window)

    def rotated(self, S: np.ndarray) -> "ConeCurveProblem":
        """The same curve in coordinates x' with x = S x'."""
        return ConeCurveProblem(compose_linear(self.coeffs, S), self.beta, self.check_window)

    # JSON format: {"i,j": [re, im]}
    def to_json(self) -> dict:
        return {f"{i},{j}": [v.real, v.imag] for (i, j), v in sorted(self.coeffs.items())}

    @classmethod
    def from_json(cls, data: Mapping | str | Path, beta: float) -> "ConeCurveProblem":
        if isinstance(data, (str, Path)):
            data = json.loads(Path(data).read_text())
        coeffs = {}
        for key, val in data.items():
            i, j = (int(s) for s in key.split(","))
            coeffs[(i, j)] = complex(val[0], val[1]) if isinstance(val, (list, tuple)) else complex(val)
        return cls(coeffs, beta)


# ----------------------------------------------------------------------------
# operations


def factor_homogeneous(problem_or_coeffs, tol: float = 1e-7) -> tuple[complex, list[Line]]:
    """Split P_d into d pairwise distinct lines.

    Returns ``(scale, lines)`` with ``P_d = scale * prod(line.form)``.  The
    line ``w = 0``, when present, is listed last.
    """
    coeffs = problem_or_coeffs.coeffs if isinstance(problem_or_coeffs, ConeCurveProblem) else problem_or_coeffs
    d = max(i + j for (i, j) in coeffs)
    top = {m: v for m, v in coeffs.items() if sum(m) == d}
    # P_d(t, 1) = sum_k c_k t^k
    c = np.zeros(d + 1, complex)
    for (i, j), v in top.items():
        c[d - i] += v
    ct = _trim_leading(c)
    mult_w = len(c) - len(ct)  # degree drop = multiplicity of the line w = 0
    if mult_w > 1:
        raise RepeatedLine(f"line w=0 has multiplicity {mult_w}")
    roots = np.roots(ct) if len(ct) > 1 else np.array([], complex)
    pts = [complex(t) for t in roots] + ([None] * mult_w)
    lines = [_line_from_point(t) for t in pts]
    for a in range(len(lines)):
        for b in range(a):
            if abs(np.vdot(lines[a].e, lines[b].e)) > 1 - tol:
                raise RepeatedLine("two asymptotic lines coincide")
    x = np.array([0.37 + 0.81j, -0.55 + 0.23j])
    prod = np.prod([ln.form(*x) for ln in lines])
    scale = complex(eval_poly(top, *x) / prod)
    return scale, lines


def angular_separation(lines: Sequence[Line]) -> float:
    """Smallest Fubini-Study angle between two of the lines."""
    best = np.pi / 2
    for a in range(len(lines)):
        for b in range(a):
            best = min(best, float(np.arccos(min(1.0, abs(np.vdot(lines[a].e, lines[b].e))))))
    return best


def default_delta(lines: Sequence[Line]) -> float:
    """Sector slope for half the minimal angular separation."""
    return float(np.tan(angular_separation(lines) / 2))


def _fibonacci_cp1(n: int) -> np.ndarray:
    """Roughly uniform unit vectors representing points of CP^1."""
    k = np.arange(n) + 0.5
    zc = 1 - 2 * k / n
    phi = np.pi * (1 + 5**0.5) * k
    theta = np.arccos(zc)
    # Hopf section: (cos(theta/2), e^{i phi} sin(theta/2))
    return np.stack([np.cos(theta / 2) + 0j, np.exp(1j * phi) * np.sin(theta / 2)], 1)


def in_sector(line: Line, delta: float, R: float, z, w):
    F = line.frame
    zp = np.conj(F[0, 0]) * z + np.conj(F[1, 0]) * w
    wp = np.conj(F[0, 1]) * z + np.conj(F[1, 1]) * w
    return (np.abs(wp) < delta * np.abs(zp)) & (np.abs(zp) > R)


def default_radius(problem: ConeCurveProblem, delta: float | None = None, n: int = 4000) -> float:
    """Radius beyond which |Q| < |P_d| / 2 outside the sectors."""
    _, lines = factor_homogeneous(problem)
    delta = default_delta(lines) if delta is None else delta
    u = _fibonacci_cp1(n)
    outside = np.ones(n, bool)
    for ln in lines:
        F = ln.frame
        zp = u @ np.conj(F[:, 0])
        wp = u @ np.conj(F[:, 1])
        outside &= ~(np.abs(wp) < delta * np.abs(zp))
    if not outside.any():
        return 1.0
    m = np.abs(eval_poly(problem.top, u[outside, 0], u[outside, 1])).min()
    Mk = {k: 1.05 * np.abs(eval_poly(problem.part(k), u[:, 0], u[:, 1])).max() for k in range(problem.d)}

    def ratio(R):
        return sum(Mk[k] * R ** (k - problem.d) for k in Mk) / m

    R = 1.0
    while ratio(R) >= 0.5:
        R *= 1.25
    return R


@dataclass(frozen=True)
class TrackedBranches:
    """Root branches w = h_j(z) of P_z(w) along a path of z samples."""

    z: np.ndarray
    w: np.ndarray            # (n_samples, n_branches)
    labels: tuple[int, ...]  # index into the line list of each branch
    n_steps: int             # accepted continuation steps incl. refinements

    def rows(self):
        for k, zk in enumerate(self.z):
            for b, lab in enumerate(self.labels):
                wk = self.w[k, b]
                yield zk.real, zk.imag, lab, wk.real, wk.imag

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["z_re", "z_im", "branch", "w_re", "w_im"])
            for row in self.rows():
                wr.writerow([repr(float(x)) if not isinstance(x, (int, np.integer)) else int(x) for x in row])


def _newton_w(coeffs, z, w, iters=12):
    """Polish roots w of P_z at fixed z."""
    c = _trim_leading(_w_coeffs(coeffs, z))
    dc = np.polyder(c)
    for _ in range(iters):
        step = np.polyval(c, w) / np.polyval(dc, w)
        w = w - step
        if np.all(np.abs(step) <= 1e-16 * (1 + np.abs(w))):
            break
    return w


def _dwdz(coeffs, z, w):
    pz = np.zeros_like(w)
    pw = np.zeros_like(w)
    for (i, j), v in coeffs.items():
        if i:
            pz = pz + v * i * z ** (i - 1) * w**j
        if j:
            pw = pw + v * j * z**i * w ** (j - 1)
    return -pz / pw


def track_roots(problem: ConeCurveProblem, z_samples, *, delta: float | None = None,
                R: float | None = None, collision_tol: float = 1e-8,
                max_depth: int = 40) -> TrackedBranches:
    """Continue the roots of P_z(w) along the ordered samples ``z_samples``.

    Euler predictor plus Newton corrector; a step is accepted only when every
    corrected root is much closer to its own prediction than to any other
    root, otherwise the step is halved.  Labels come from the sector that
    contains each branch at the first sample.
    """
    z_samples = np.asarray(z_samples, complex)
    _, lines = factor_homogeneous(problem)
    delta = default_delta(lines) if delta is None else delta
    R = default_radius(problem, delta) if R is None else R
    co = problem.coeffs
    c0 = _trim_leading(_w_coeffs(co, z_samples[0]))
    w0 = _newton_w(co, z_samples[0], np.roots(c0))

    def check_sep(w, where):
        if len(w) > 1:
            diff = np.abs(w[:, None] - w[None, :])
            np.fill_diagonal(diff, np.inf)
            if diff.min() < collision_tol * (1 + np.abs(w).max()):
                raise RootCollision(f"roots within {diff.min():.3g} at z={where}")

    check_sep(w0, z_samples[0])
    labels = []
    for wb in w0:
        hits = [k for k, ln in enumerate(lines) if in_sector(ln, delta, R, z_samples[0], wb)]
        if len(hits) != 1:
            raise LabelAmbiguity(f"branch w={wb:.6g} at z={z_samples[0]:.6g} lies in {len(hits)} sectors")
        labels.append(hits[0])
    if len(set(labels)) != len(labels):
        raise LabelAmbiguity("two branches share one sector")

    n_steps = 0

    def advance(za, zb, wa, depth):
        nonlocal n_steps
        if depth > max_depth:
            raise RootCollision(f"step refinement exhausted near z={za:.6g}")
        pred = wa + (zb - za) * _dwdz(co, za, wa)
        wb = _newton_w(co, zb, pred, iters=8)
        ok = np.all(np.isfinite(wb))
        if ok and len(wb) > 1:
            sep = np.abs(wb[:, None] - wb[None, :])
            np.fill_diagonal(sep, np.inf)
            ok = np.all(np.abs(wb - pred) < sep.min(axis=1) / 3)
        if ok:
            # the assignment must be the identity
            cost = np.abs(wb[:, None] - pred[None, :])
            r, cidx = linear_sum_assignment(cost)
            ok = np.array_equal(cidx, np.arange(len(wb)))
        if not ok:
            zm = 0.5 * (za + zb)
            wm = advance(za, zm, wa, depth + 1)
            return advance(zm, zb, wm, depth + 1)
        check_sep(wb, zb)
        n_steps += 1
        return wb

    out = [w0]
    for k in range(1, len(z_samples)):
        out.append(advance(z_samples[k - 1], z_samples[k], out[-1], 0))
    W = np.array(out)
    # final polish at every sample
    W = np.array([_newton_w(co, zk, wk, iters=4) for zk, wk in zip(z_samples, W)])
    for k, zk in enumerate(z_samples):
        for b, lab in enumerate(labels):
            if not in_sector(lines[lab], delta, R, zk, W[k, b]):
                raise LabelAmbiguity(f"branch {lab} left its sector at z={zk:.6g}")
    return TrackedBranches(z_samples, W, tuple(labels), n_steps)


def factorization_residual(problem: ConeCurveProblem, z, w) -> float:
    """max |P(z, w) - a(z) prod_j (w - h_j(z))| / |z|^d over samples."""
    z = np.atleast_1d(np.asarray(z, complex))
    w = np.atleast_1d(np.asarray(w, complex))
    worst = 0.0
    for zk, wk in zip(z, w):
        c = _trim_leading(_w_coeffs(problem.coeffs, zk))
        roots = _newton_w(problem.coeffs, zk, np.roots(c))
        approx = c[0] * np.prod(wk - roots)
        worst = max(worst, abs(problem(zk, wk) - approx) / abs(zk) ** problem.d)
    return worst


# ----------------------------------------------------------------------------
# cutoff and diffeomorphism


def _smooth_step(s):
    s = np.asarray(s, float)
    return np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)


def chi(t):
    """Smooth cutoff: 1 for t <= 1, 0 for t >= 2, built from exp(-1/t)."""
    a = _smooth_step(2.0 - np.asarray(t, float))
    b = _smooth_step(np.asarray(t, float) - 1.0)
    return a / (a + b)


@dataclass(frozen=True)
class AsymptoticChart:
    """Sector around one asymptotic line and its bounded root branch."""

    delta: float
    R: float
    line_index: int
    line: Line
    local_coeffs: Mapping[tuple[int, int], complex]  # P in the line's frame

    def root_fn(self, zp: complex) -> complex:
        """The unique root w' of P(z', .) inside the sector (the function Phi)."""
        c = _trim_leading(_w_coeffs(self.local_coeffs, zp))
        roots = _newton_w(self.local_coeffs, zp, np.roots(c))
        inside = roots[np.abs(roots) < self.delta * abs(zp)]
        if len(inside) != 1:
            raise LabelAmbiguity(f"{len(inside)} roots in sector {self.line_index} at z'={zp:.6g}")
        return complex(inside[0])

    def local(self, x):
        F = self.line.frame
        return np.conj(F.T) @ x

    def cutoff(self, zp, wp):
        return float(chi(2 * abs(wp) / (self.delta * abs(zp))) * (1 - chi(abs(zp) / self.R))) if zp != 0 else 0.0

    def apply(self, x: np.ndarray) -> np.ndarray:
        zp, wp = self.local(x)
        h = self.cutoff(zp, wp)
        if h == 0.0:
            return x
        wp = wp - h * self.root_fn(zp)
        return self.line.frame @ np.array([zp, wp])


@dataclass(frozen=True)
class AsymptoticDiffeo:
    """H = H_1 o ... o H_d and its numerical inverse G."""

    charts: tuple[AsymptoticChart, ...]
    delta: float
    R: float

    def H(self, x) -> np.ndarray:
        x = np.asarray(x, complex)
        for ch in reversed(self.charts):
            x = ch.apply(x)
        return x

    def G(self, y, tol: float = 1e-14, maxit: int = 200) -> np.ndarray:
        y = np.asarray(y, complex)
        x = y.copy()
        for _ in range(maxit):
            r = self.H(x) - y
            x = x - r
            if np.abs(r).max() <= tol * (1 + np.abs(y).max()):
                break
        return x

    def jacobian(self, x, rel_step: float = 1e-5) -> np.ndarray:
        """Real 4x4 Jacobian of H by central differences with step 1e-5|x|."""
        x = np.asarray(x, complex)
        h = rel_step * max(np.linalg.norm(x), 1e-300)
        J = np.zeros((4, 4))
        for k in range(4):
            e = np.zeros(2, complex)
            e[k // 2] = h if k % 2 == 0 else 1j * h
            d = (self.H(x + e) - self.H(x - e)) / (2 * h)
            J[:, k] = [d[0].real, d[0].imag, d[1].real, d[1].imag]
        return J

    def is_identity_at(self, x) -> bool:
        x = np.asarray(x, complex)
        for ch in self.charts:
            zp, wp = ch.local(x)
            if ch.cutoff(zp, wp) != 0.0:
                return False
        return True


def build_diffeo(problem: ConeCurveProblem, delta: float | None = None, R: float | None = None) -> AsymptoticDiffeo:
    _, lines = factor_homogeneous(problem)
    cap = default_delta(lines)
    delta = cap if delta is None else float(delta)
    if delta > cap * (1 + 1e-12):
        raise SectorOverlap(f"delta={delta:.4g} exceeds half-separation slope {cap:.4g}")
    R = default_radius(problem, delta) if R is None else float(R)
    charts = tuple(
        AsymptoticChart(delta, R, k, ln, compose_linear(problem.coeffs, ln.frame))
        for k, ln in enumerate(lines)
    )
    return AsymptoticDiffeo(charts, delta, R)


def decay_scan(diffeo: AsymptoticDiffeo, radii: Sequence[float], n_dirs: int = 24, seed: int = 0) -> dict:
    """sup |x| |DH - Id| and |x|^2 |D^2 H| over sampled directions per radius."""
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(n_dirs, 4))
    # include points deep inside each sector, where H actually moves points
    sect = []
    for ch in diffeo.charts:
        F = ch.line.frame
        for t in np.linspace(-0.4, 0.4, 3):
            v = F @ np.array([1.0, t * ch.delta])
            sect.append([v[0].real, v[0].imag, v[1].real, v[1].imag])
    dirs = np.vstack([dirs, np.array(sect)])
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    first, second = [], []
    for rad in radii:
        m1 = m2 = 0.0
        for u in dirs:
            x = rad * (u[0::2] + 1j * u[1::2])
            J = diffeo.jacobian(x)
            m1 = max(m1, rad * np.linalg.norm(J - np.eye(4), 2))
            hh = 1e-3 * rad
            e = np.array([hh, 0], complex)
            d2 = (diffeo.jacobian(x + e) - diffeo.jacobian(x - e)) / (2 * hh)
            m2 = max(m2, rad**2 * np.linalg.norm(d2, 2))
        first.append(m1)
        second.append(m2)
    return {"radii": list(map(float, radii)), "first": first, "second": second}


def normalizing_rotation(problem: ConeCurveProblem) -> tuple[np.ndarray, int] | None:
    """Unitary S sending one asymptotic line to {w = 0} with all other a_j != 0.

    Among the d choices of line, picks the one minimising max_j |a_j|.
    Returns ``(S, index)`` or None when every choice leaves some a_j = 0
    (two orthogonal lines, e.g. zw - 1).
    """
    _, lines = factor_homogeneous(problem)
    best = None
    for k, ln in enumerate(lines):
        S = ln.frame
        worst = 0.0
        ok = True
        for j, other in enumerate(lines):
            if j == k:
                continue
            p, q = np.conj(S.T) @ np.array(other.e)
            if abs(p) < 1e-12:
                ok = False
                break
            worst = max(worst, abs(p / q))
        if ok and (best is None or worst < best[0]):
            best = (worst, S, k)
    return None if best is None else (best[1], best[2])
