"""Reference metrics, the continuity path and the Ricci-flat solve for d = 2.

Two solvers live here.

* A torus-invariant reduction.  Potentials depending only on
  s = (log|z|, log|w|) turn the complex Monge-Ampere operator into the real
  one, det(i ddbar phi) = det(D^2_s phi) / (16 |z|^2 |w|^2).  The flat model
  phi_0 = beta^-2 (|z|^{2 beta} + |w|^{2 beta}) has D^2_s phi_0 =
  diag(4 e^{2 beta s_1}, 4 e^{2 beta s_2}), so the log grid is exactly the
  stretched coordinate in which the cone model is uniform.  The continuity
  path (omega_0 + i ddbar u_t)^2 = e^{t f} omega_0^2 is solved there by damped
  Newton with the exact discrete Jacobian.

* The curve zw = 1 is not torus invariant; only a circle acts.  Its
  Ricci-flat metric is solved through the Gibbons-Hawking ansatz
  (``gibbons_hawking``) and exposed as :class:`RicciFlatD2` with pointwise
  Monge-Ampere residuals and the asymptotic decay fit against the flat cone.
"""

from __future__ import annotations

import time
from fractions import Fraction
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spl

from .curve_geometry import ConeCurveProblem, build_diffeo
from .errors import (ConfigInvalid, CorrectionDiverged, InsufficientOuterDomain, NewtonStall,
                     PositivityLoss)
from .flat_cone_metric import hermitian_from_real, real_hessian
from .gibbons_hawking import GibbonsHawkingD2


# ----------------------------------------------------------------------------
# torus-invariant reduction


@dataclass(frozen=True)
class ReducedPotentialProblem:
    """Square grid on s in [-L, L]^2 with Dirichlet data on the boundary.

    ``kappa`` sets the reference metric psi_0 + kappa log(1 + e^{2 beta s_1}
    + e^{2 beta s_2}); it is switched off at beta = 1.
    """

    beta: float = 0.8
    N: int = 256
    L: float = 3.0
    kappa: float = 0.5
    support_radius: float = 2.0

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ConfigInvalid("need 0 < beta <= 1")
        if self.N < 8:
            raise ConfigInvalid("grid too small")

    @property
    def h(self) -> float:
        return 2 * self.L / (self.N - 1)

    @property
    def s(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.N)

    def mesh(self):
        return np.meshgrid(self.s, self.s, indexing="ij")

    def flat_potential(self):
        s1, s2 = self.mesh()
        b = self.beta
        return (np.exp(2 * b * s1) + np.exp(2 * b * s2)) / b**2

    def r(self):
        return np.sqrt(self.flat_potential())

    def flat_hessian(self):
        s1, s2 = self.mesh()
        H = np.zeros(s1.shape + (2, 2))
        H[..., 0, 0] = 4 * np.exp(2 * self.beta * s1)
        H[..., 1, 1] = 4 * np.exp(2 * self.beta * s2)
        return H

    @property
    def effective_kappa(self) -> float:
        return 0.0 if self.beta == 1 else self.kappa

    def reference_potential(self):
        s1, s2 = self.mesh()
        b = self.beta
        return self.flat_potential() + self.effective_kappa * np.log1p(np.exp(2 * b * s1) + np.exp(2 * b * s2))

    def reference_hessian(self):
        """Analytic D^2_s of the glued reference potential."""
        s1, s2 = self.mesh()
        b = self.beta
        a1, a2 = np.exp(2 * b * s1), np.exp(2 * b * s2)
        q = 1 + a1 + a2
        k = self.effective_kappa
        H = self.flat_hessian()
        H[..., 0, 0] += k * 4 * b**2 * a1 * (1 + a2) / q**2
        H[..., 1, 1] += k * 4 * b**2 * a2 * (1 + a1) / q**2
        H[..., 0, 1] += -k * 4 * b**2 * a1 * a2 / q**2
        H[..., 1, 0] = H[..., 0, 1]
        return H

    def cutoff(self):
        """1 on r < support_radius, 0 on r > 2 support_radius, smooth between."""
        t = np.clip(self.r() / self.support_radius - 1, 0, 1)
        out = np.ones_like(t)
        mid = (t > 0) & (t < 1)
        a = np.exp(-1 / np.where(mid, t, 1))
        bb = np.exp(-1 / np.where(mid, 1 - t, 1))
        out[mid] = (bb / (a + bb))[mid]
        out[t >= 1] = 0.0
        return out


def discrete_hessian(u: np.ndarray, h: float) -> np.ndarray:
    """Second order central D^2 u on interior nodes, shape (N-2, N-2, 2, 2)."""
    H = np.empty((u.shape[0] - 2, u.shape[1] - 2, 2, 2))
    c = u[1:-1, 1:-1]
    H[..., 0, 0] = (u[2:, 1:-1] - 2 * c + u[:-2, 1:-1]) / h**2
    H[..., 1, 1] = (u[1:-1, 2:] - 2 * c + u[1:-1, :-2]) / h**2
    H[..., 0, 1] = (u[2:, 2:] - u[2:, :-2] - u[:-2, 2:] + u[:-2, :-2]) / (4 * h**2)
    H[..., 1, 0] = H[..., 0, 1]
    return H


def _det(H):
    return H[..., 0, 0] * H[..., 1, 1] - H[..., 0, 1] * H[..., 1, 0]


def _min_eig(H):
    tr = H[..., 0, 0] + H[..., 1, 1]
    disc = np.sqrt(np.maximum((H[..., 0, 0] - H[..., 1, 1]) ** 2 / 4 + H[..., 0, 1] ** 2, 0))
    return tr / 2 - disc


def _operator_blocks(n: int):
    """Interior second-difference operators on an n x n interior block (h = 1)."""
    I = sp.identity(n, format="csr")
    d2 = sp.diags([1, -2, 1], [-1, 0, 1], shape=(n, n), format="csr")
    d1 = sp.diags([-0.5, 0.5], [-1, 1], shape=(n, n), format="csr")
    return sp.kron(d2, I, "csr"), sp.kron(I, d2, "csr"), sp.kron(d1, d1, "csr")


class MongeAmpereOperator:
    """F(u) = log det(A + D^2 u) - log det A on interior nodes.

    ``A`` is the interior background Hessian; ``u`` holds all nodes and its
    boundary values are the Dirichlet data.
    """

    def __init__(self, problem: ReducedPotentialProblem, A: np.ndarray):
        self.problem = problem
        self.A = A
        self.logdetA = np.log(_det(A))
        n = problem.N - 2
        self._Dxx, self._Dyy, self._Dxy = _operator_blocks(n)

    def metric(self, u):
        return self.A + discrete_hessian(u, self.problem.h)

    def __call__(self, u):
        M = self.metric(u)
        d = _det(M)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(d > 0, np.log(np.abs(d)), np.nan) - self.logdetA

    def jacobian(self, u):
        M = self.metric(u)
        inv = np.linalg.inv(M)
        h2 = self.problem.h**2
        a11 = inv[..., 0, 0].ravel()
        a22 = inv[..., 1, 1].ravel()
        a12 = inv[..., 0, 1].ravel()
        return (sp.diags(a11) @ self._Dxx + sp.diags(a22) @ self._Dyy + 2 * sp.diags(a12) @ self._Dxy) / h2

    def positive(self, u) -> bool:
        return bool(np.all(_min_eig(self.metric(u)) > 0))


@dataclass
class NewtonSettings:
    tol: float = 1e-10
    max_iter: int = 40
    min_step: float = 2.0**-20
    stall_factor: float = 0.999


@dataclass
class NewtonResult:
    u: np.ndarray
    residual: float
    iterations: int
    history: list


def newton_solve(op: MongeAmpereOperator, rhs: np.ndarray, u0: np.ndarray,
                 settings: NewtonSettings | None = None) -> NewtonResult:
    """Damped Newton for F(u) = rhs; each accepted step lowers the sup residual."""
    st = settings or NewtonSettings()
    u = u0.copy()
    res = op(u) - rhs
    rn = float(np.max(np.abs(res)))
    hist = [rn]
    it = 0
    while rn > st.tol:
        if it >= st.max_iter:
            raise NewtonStall(f"no convergence after {it} Newton steps (residual {rn:.3e})")
        J = op.jacobian(u)
        du = spl.spsolve(J.tocsc(), -res.ravel()).reshape(res.shape)
        step = 1.0
        lost_positivity = False
        while True:
            trial = u.copy()
            trial[1:-1, 1:-1] += step * du
            if op.positive(trial):
                rt = op(trial) - rhs
                rtn = float(np.max(np.abs(rt)))
                if rtn < rn * st.stall_factor or rtn <= st.tol:
                    break
            else:
                lost_positivity = True
            step /= 2
            if step < st.min_step:
                if lost_positivity:
                    raise PositivityLoss("damping floor reached with a non-positive metric")
                raise NewtonStall(f"damping floor reached at residual {rn:.3e}")
        u, res, rn = trial, rt, rtn
        hist.append(rn)
        it += 1
    return NewtonResult(u, rn, it, hist)


# ----------------------------------------------------------------------------
# initial metric


@dataclass
class InitialMetric:
    problem: ReducedPotentialProblem
    u0: np.ndarray
    f0: np.ndarray
    f: np.ndarray
    tail: float
    iterations: int
    f_decay_exponent: float

    @property
    def A(self) -> np.ndarray:
        """Interior Hessian of omega_0."""
        return self.problem.reference_hessian()[1:-1, 1:-1] + discrete_hessian(self.u0, self.problem.h)


def fit_decay(r: np.ndarray, values: np.ndarray, n_shells: int = 12, floor: float = 1e-13) -> float:
    """Slope of log max|values| against log r over log-spaced shells."""
    r = np.ravel(r)
    v = np.abs(np.ravel(values))
    edges = np.geomspace(r.min(), r.max(), n_shells + 1)
    x, y = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        m = (r >= lo) & (r < hi)
        if m.any() and v[m].max() > floor:
            x.append(np.log(np.sqrt(lo * hi)))
            y.append(np.log(v[m].max()))
    if len(x) < 2:
        return -np.inf
    return float(np.polyfit(x, y, 1)[0])


def build_initial(problem: ReducedPotentialProblem, tol: float = 1e-8,
                  settings: NewtonSettings | None = None) -> InitialMetric:
    """omega_0 = omega_ref + i ddbar u_0 with density defect supported near the origin.

    f = log(omega_F^2 / omega_ref^2).  The tail (1 - chi) f is absorbed into
    u_0 by solving log(omega_0^2 / omega_ref^2) = (1 - chi) f with damped
    Newton, each step a linearized solve at the current metric.  The
    remaining defect f_0 = f - log(omega_0^2 / omega_ref^2) equals chi f up
    to the solver tolerance.
    """
    Aref = problem.reference_hessian()[1:-1, 1:-1]
    A0 = problem.flat_hessian()[1:-1, 1:-1]
    f = np.log(_det(A0)) - np.log(_det(Aref))
    r_int = problem.r()[1:-1, 1:-1]
    decay = fit_decay(r_int, f) if problem.effective_kappa else -np.inf
    op = MongeAmpereOperator(problem, Aref)
    chi_tail = 1 - problem.cutoff()[1:-1, 1:-1]
    st = settings or NewtonSettings(tol=tol / 10)
    try:
        res = newton_solve(op, chi_tail * f, np.zeros((problem.N, problem.N)), st)
    except (NewtonStall, PositivityLoss) as exc:
        raise CorrectionDiverged(f"tail correction failed: {exc}") from exc
    defect = f - op(res.u)
    outside = chi_tail == 1
    tail = float(np.max(np.abs(defect[outside]))) if outside.any() else 0.0
    if tail > tol:
        raise CorrectionDiverged(f"tail {tail:.3e} above tolerance {tol:.1e}")
    return InitialMetric(problem, res.u, defect, f, tail, res.iterations, decay)


# ----------------------------------------------------------------------------
# continuity path


@dataclass
class Monitors:
    t: float
    sup: float
    weighted: float
    trace_min: float
    trace_max: float
    residual: float
    newton_iterations: int


@dataclass
class ContinuityState:
    t: float
    u: np.ndarray
    delta: float
    history: list[Monitors] = field(default_factory=list)
    moser: dict = field(default_factory=dict)
    volume_change: float = 0.0
    volume_expected: float = 0.0
    runtime: float = 0.0

    @property
    def residual(self) -> float:
        return self.history[-1].residual if self.history else 0.0

    @property
    def max_sup(self) -> float:
        return max((m.sup for m in self.history), default=0.0)


def moser_constants(u: np.ndarray, weight: np.ndarray, ps=(4, 8)) -> dict:
    """Fitted C in ||u||_{2p}^p <= C p ||u||_{p-1}^{p-1} for each p."""
    out = {}
    a = np.abs(u)
    for p in ps:
        lhs = np.sqrt(np.sum(a ** (2 * p) * weight))
        rhs = p * np.sum(a ** (p - 1) * weight)
        out[p] = float(lhs / rhs) if rhs > 0 else 0.0
    return out


def continuity_run(initial: InitialMetric, delta: float = -1.0, t_steps: int = 10,
                   settings: NewtonSettings | None = None, max_bisections: int = 8) -> ContinuityState:
    """(omega_0 + i ddbar u_t)^2 = e^{t f_0} omega_0^2 for t on a uniform grid.

    A failed Newton solve halves the step in t (up to ``max_bisections`` times).
    """
    if not -2 < delta < 0:
        raise ConfigInvalid("delta must lie in (-2, 0)")
    t0 = time.perf_counter()
    prob = initial.problem
    A = initial.A
    op = MongeAmpereOperator(prob, A)
    f0 = initial.f0
    u = np.zeros((prob.N, prob.N))
    r_int = prob.r()[1:-1, 1:-1]
    weight = _det(A) * prob.h**2
    state = ContinuityState(0.0, u, delta)
    state.history.append(Monitors(0.0, 0.0, 0.0, 2.0, 2.0, 0.0, 0))
    t, dt = Fraction(0), Fraction(1, t_steps)
    bis = 0
    while t < 1:
        tn = min(Fraction(1), t + dt)
        try:
            res = newton_solve(op, float(tn) * f0, u, settings)
        except (NewtonStall, PositivityLoss):
            bis += 1
            if bis > max_bisections:
                raise
            dt /= 2
            continue
        t, u = tn, res.u
        M = op.metric(u)
        tr = np.einsum("...ij,...ji->...", np.linalg.inv(M), A)
        ui = u[1:-1, 1:-1]
        state.history.append(Monitors(float(t), float(np.max(np.abs(ui))),
                                      float(np.max(r_int ** (-delta) * np.abs(ui))),
                                      float(tr.min()), float(tr.max()), res.residual, res.iterations))
    t = float(t)
    state.t, state.u = t, u
    ui = u[1:-1, 1:-1]
    state.moser = moser_constants(ui, weight)
    state.volume_change = float(np.sum(_det(op.metric(u)) - _det(A)) * prob.h**2)
    state.volume_expected = float(np.sum((np.exp(t * f0) - 1) * _det(A)) * prob.h**2)
    state.runtime = time.perf_counter() - t0
    return state


def volume_form_residual(initial: InitialMetric, state: ContinuityState) -> float:
    """max |log(omega_t^2 / omega_F^2)| on the interior (t = 1 gives the target)."""
    prob = initial.problem
    M = initial.A + discrete_hessian(state.u, prob.h)
    A0 = prob.flat_hessian()[1:-1, 1:-1]
    return float(np.max(np.abs(np.log(_det(M)) - np.log(_det(A0)) - (state.t - 1) * initial.f0)))


# ----------------------------------------------------------------------------
# manufactured solutions


def manufactured_solution(problem: ReducedPotentialProblem, eps: float = 0.2, eps_mix: float = 0.05) -> np.ndarray:
    """A smooth u* with A + D^2 u* comfortably positive on the flat background."""
    s1, s2 = problem.mesh()
    b = problem.beta
    L = problem.L
    bump = lambda s: np.cos(np.pi * s / (2 * L)) ** 2
    return (eps * (np.exp(2 * b * s1) * bump(s1) + np.exp(2 * b * s2) * bump(s2))
            + eps_mix * np.exp(b * (s1 + s2)) * bump(s1) * bump(s2)) / b**2


@dataclass
class ManufacturedResult:
    sup_error: float
    residual: float
    iterations: int
    runtime: float


def manufactured_recovery(problem: ReducedPotentialProblem, u_star: np.ndarray | None = None,
                          settings: NewtonSettings | None = None) -> ManufacturedResult:
    """Forward-map u* to its density, solve back from u = 0 with u*'s boundary data."""
    t0 = time.perf_counter()
    if u_star is None:
        u_star = manufactured_solution(problem)
    A = problem.flat_hessian()[1:-1, 1:-1]
    op = MongeAmpereOperator(problem, A)
    if not op.positive(u_star):
        raise ConfigInvalid("manufactured u* gives a non-positive metric")
    rhs = op(u_star)
    start = u_star.copy()
    start[1:-1, 1:-1] = 0.0
    res = newton_solve(op, rhs, start, settings or NewtonSettings(tol=1e-12))
    err = float(np.max(np.abs(res.u - u_star)))
    return ManufacturedResult(err, res.residual, res.iterations, time.perf_counter() - t0)


# ----------------------------------------------------------------------------
# the explicit solution for zw = 1


def realify(g: np.ndarray) -> np.ndarray:
    """Hermitian 2x2 -> real symmetric 4x4 in coordinates (x1, y1, x2, y2)."""
    M = np.zeros(g.shape[:-2] + (4, 4))
    for i in range(2):
        for j in range(2):
            a, b = g[..., i, j].real, g[..., i, j].imag
            M[..., 2 * i, 2 * j] = a
            M[..., 2 * i, 2 * j + 1] = b
            M[..., 2 * i + 1, 2 * j] = -b
            M[..., 2 * i + 1, 2 * j + 1] = a
    return M


@dataclass
class DecayFit:
    gamma: float
    window: tuple[float, float]
    r: np.ndarray
    norms: np.ndarray
    gamma_check: float | None = None

    @property
    def decades(self) -> float:
        return float(np.log10(self.r.max() / self.r.min())) if len(self.r) else 0.0

    @property
    def in_window(self) -> bool:
        lo, hi = self.window
        return lo - 0.3 <= self.gamma < hi


class RicciFlatD2:
    """omega_RF for C = {zw = 1} with its residual and decay diagnostics."""

    def __init__(self, beta: float, fd_rel: float = 3e-3):
        self.beta = beta
        self.gh = GibbonsHawkingD2(beta)
        self.problem = ConeCurveProblem({(1, 1): 1, (0, 0): -1}, beta, check_window=beta < 1)
        self.fd_rel = fd_rel

    @property
    def c(self) -> float:
        return 2 * self.beta

    def _steps(self, z, w, rel):
        nx = np.sqrt(np.abs(z) ** 2 + np.abs(w) ** 2)
        return rel * nx * np.minimum(1.0, np.abs(z * w - 1) / np.sqrt(nx**2 + 1))

    def metric(self, z, w, rel: float | None = None):
        z = np.atleast_1d(np.asarray(z, complex))
        w = np.atleast_1d(np.asarray(w, complex))
        h = self._steps(z, w, self.fd_rel if rel is None else rel)
        return hermitian_from_real(real_hessian(self.gh.potential, z, w, h))

    def residual(self, z, w) -> np.ndarray:
        """|log(omega^2 / (|zw - 1|^{2 beta - 2} Omega ^ Omega-bar))| pointwise."""
        g = self.metric(z, w)
        det = np.real(g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0])
        return np.abs(np.log(det / self.gh.volume_density(np.atleast_1d(z), np.atleast_1d(w))))

    def sample_points(self, n: int = 200, seed: int = 0, r_lo: float = 0.3, r_hi: float = 6.0,
                      margin: float = 0.05):
        """Random points in a shell, kept at distance > margin from C."""
        rng = np.random.default_rng(seed)
        out = []
        while len(out) < n:
            v = rng.normal(size=4)
            v *= rng.uniform(r_lo, r_hi) / np.linalg.norm(v)
            z, w = v[0] + 1j * v[1], v[2] + 1j * v[3]
            if abs(z * w - 1) > margin * (1 + abs(z) + abs(w)):
                out.append((z, w))
        a = np.array(out)
        return a[:, 0], a[:, 1]

    def predicted_window(self) -> tuple[float, float]:
        return (max(-2 / self.c, -4.0), 0.0)

    def decay_norms(self, radii, n_dirs: int = 48, seed: int = 0, margin: float = 0.03,
                    rel: float | None = None):
        """|(H^-1)^* g_RF - g_F|_{g_F} sampled on spheres |y| = radius."""
        D = build_diffeo(self.problem)
        b = self.beta
        rng = np.random.default_rng(seed)
        dirs = rng.normal(size=(n_dirs, 4))
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
        U = dirs[:, 0::2] + 1j * dirs[:, 1::2]
        U = U[np.minimum(np.abs(U[:, 0]), np.abs(U[:, 1])) > margin]
        rs, ns = [], []
        for rad in radii:
            Y = rad * U
            X = np.array([D.G(y) for y in Y])
            JG = np.array([np.linalg.inv(D.jacobian(x)) for x in X])
            gR = realify(self.metric(X[:, 0], X[:, 1], rel))
            pull = np.einsum("nki,nkl,nlj->nij", JG, gR, JG)
            gF = np.zeros((len(Y), 2, 2), complex)
            gF[:, 0, 0] = np.abs(Y[:, 0]) ** (2 * b - 2)
            gF[:, 1, 1] = np.abs(Y[:, 1]) ** (2 * b - 2)
            gF = realify(gF)
            Li = np.linalg.inv(np.linalg.cholesky(gF))
            Dm = np.einsum("nij,njk,nlk->nil", Li, pull - gF, Li)
            nrm = np.abs(np.linalg.eigvalsh((Dm + np.swapaxes(Dm, 1, 2)) / 2)).max(axis=1)
            r = np.sqrt(self.gh.flat_potential(Y[:, 0], Y[:, 1]))
            rs.append(float(np.exp(np.mean(np.log(r)))))
            ns.append(float(nrm.max()))
        return np.array(rs), np.array(ns)

    def decay_diagnostics(self, radii=(4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048), n_dirs: int = 48,
                          seed: int = 0, check: bool = True) -> DecayFit:
        """Least-squares slope of log|difference| against log r (flat cone distance)."""
        if self.beta == 1:
            return DecayFit(-np.inf, self.predicted_window(), np.array([]), np.array([]))
        r, n = self.decay_norms(radii, n_dirs, seed)
        if np.log10(r.max() / r.min()) < 2:
            raise InsufficientOuterDomain(f"outer annuli span {np.log10(r.max() / r.min()):.2f} decades of r")
        gamma = float(np.polyfit(np.log(r), np.log(n), 1)[0])
        fit = DecayFit(gamma, self.predicted_window(), r, n)
        if check:
            r2, n2 = self.decay_norms(radii, n_dirs, seed, rel=self.fd_rel / 2)
            fit.gamma_check = float(np.polyfit(np.log(r2), np.log(n2), 1)[0])
        return fit
