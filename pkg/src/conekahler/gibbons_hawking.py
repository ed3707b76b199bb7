"""Explicit Ricci-flat metric for C = {zw = 1} by the Gibbons-Hawking ansatz.

The circle action (z, w) -> (e^{it} z, e^{-it} w) preserves zw.  Its quotient
is parametrised by the moment coordinate x and zeta = zw; the base metric

    dx^2 + |zeta - 1|^{2 beta - 2} |dzeta|^2 = dx^2 + drho^2 + beta^2 rho^2 dpsi^2,
    rho = |zeta - 1|^beta / beta,   psi = arg(zeta - 1) - pi,

is a flat cone of angle 2 pi beta around the axis rho = 0 (the image of C).
A Ricci-flat Kahler metric with cone angle 2 pi beta along C comes from a
positive harmonic V on this base with one unit source at the fixed point
z = w = 0, which sits at the nut (x, rho, psi) = (0, 1/beta, 0).

V = V_F + V_1 with V_F = 1/(2 beta R), R = |(x, rho)|, the potential of the
flat cone (nut on the axis), and V_1 the correction for moving the source off
the axis, written as a one dimensional integral of an explicit kernel.  The
companion functions Y (with dY/dx = V) and F (with dF/dx = Y) give the Kahler
potential ``Phi = 4 (x log|z| - F(x, zw))`` where x solves Y(x, zw) = log|z|.
"""

from __future__ import annotations

import numpy as np


def _expsinh(n: int = 161, h: float = 0.06):
    t = h * np.arange(-(n // 2), n // 2 + 1)
    q = np.exp(np.pi / 2 * np.sinh(t))
    return q, h * q * np.pi / 2 * np.cosh(t)


def _tanhsinh(n: int = 121, h: float = 0.05):
    t = h * np.arange(-(n // 2), n // 2 + 1)
    u = np.tanh(np.pi / 2 * np.sinh(t))
    w = h * np.pi / 2 * np.cosh(t) / np.cosh(np.pi / 2 * np.sinh(t)) ** 2
    return (u + 1) / 2, w / 2


_Q, _WQ = _expsinh()
_T, _WT = _tanhsinh()


def _kernel(X, rho, psi, beta, rho0):
    """Integrand of V_1 in the radial variable X (distance-like)."""
    S = np.sqrt((X**2 + (rho + rho0) ** 2) * (X**2 + (rho - rho0) ** 2))
    d = 2 * X * rho0**2 * (2 * rho**2 - 2 * X**2 - rho0**2) / (S * (X**2 + rho**2) * (X**2 + rho**2 + S))
    mr = 2 * X / S
    es = 2 * rho * rho0 / (X**2 + rho**2 + rho0**2 + S)
    e = es ** (1 / beta)
    km1 = (2 * np.cos(psi) * e - 2 * e * e) / (1 - 2 * np.cos(psi) * e + e * e)
    return d + mr * km1


def correction_parts(x, rho, psi, beta):
    """V_1, Y_1, F_1 (broadcast over the input arrays)."""
    rho0 = 1 / beta
    x = np.asarray(x, float)[..., None]
    rho = np.asarray(rho, float)[..., None]
    psi = np.asarray(psi, float)[..., None]
    ax = np.abs(x)
    sc = np.sqrt(rho * rho0) + ax
    q = sc * _Q
    X = np.sqrt(x**2 + q**2)
    m = _kernel(X, rho, psi, beta, rho0)
    jac = q / X * sc * _WQ
    V1 = np.sum(m / X * sc * _WQ, -1)
    B = np.arccos(np.clip(x / X, -1, 1))
    Y1 = -np.sum(m * B * jac, -1)
    F1 = np.sum(m * (q - x * B) * jac, -1)
    # for x < 0 the range X < |x| contributes as well
    mi = _kernel(np.maximum(ax * _T, 1e-300), rho, psi, beta, rho0)
    inner = np.sum(mi * ax * _WT, -1)
    neg = x[..., 0] < 0
    Y1 = Y1 - np.where(neg, np.pi * inner, 0.0)
    F1 = F1 - np.where(neg, np.pi * x[..., 0] * inner, 0.0)
    k = 1 / (2 * np.pi * beta)
    return k * V1, k * Y1, k * F1


def base_coords(zeta, beta):
    d = np.asarray(zeta, complex) - 1
    return np.abs(d) ** beta / beta, np.angle(d) - np.pi


def harmonic_V(x, rho, psi, beta):
    """V on the cone base in (x, rho, psi) coordinates."""
    V1, _, _ = correction_parts(x, rho, psi, beta)
    return 1 / (2 * beta * np.hypot(x, rho)) + V1


def VYF(x, zeta, beta):
    rho, psi = base_coords(zeta, beta)
    x = np.asarray(x, float)
    R = np.hypot(x, rho)
    # R + x without cancellation for x < 0
    spx = np.where(x >= 0, R + x, rho**2 / np.maximum(R - x, 1e-300))
    V1, Y1, F1 = correction_parts(x, rho, psi, beta)
    Y = np.log(beta * spx) / (2 * beta) + Y1
    F = (x * np.log(beta * spx) - R) / (2 * beta) + F1
    V = 1 / (2 * beta * R) + V1
    return V, Y, F


class GibbonsHawkingD2:
    """The Ricci-flat metric on C^2 with cone angle 2 pi beta along zw = 1."""

    def __init__(self, beta: float, newton_tol: float = 1e-14, max_newton: int = 60):
        if not 0 < beta <= 1:
            raise ValueError("need 0 < beta <= 1")
        self.beta = beta
        self.newton_tol = newton_tol
        self.max_newton = max_newton

    @property
    def c(self) -> float:
        return 2 * self.beta

    def moment(self, z, w):
        """x(z, w): solves Y(x, zw) = log|z| by Newton from the flat-cone value."""
        b = self.beta
        z = np.asarray(z, complex)
        w = np.asarray(w, complex)
        zeta = z * w
        L = np.log(np.abs(z))
        x = (np.abs(z) ** (2 * b) - np.abs(w) ** (2 * b)) / (2 * b)
        for _ in range(self.max_newton):
            V, Y, _ = VYF(x, zeta, b)
            dx = np.clip((L - Y) / V, -1 - np.abs(x), 1 + np.abs(x))
            x = x + dx
            if np.all(np.abs(dx) < self.newton_tol * (1 + np.abs(x))):
                break
        return x

    def potential(self, z, w):
        z = np.asarray(z, complex)
        w = np.asarray(w, complex)
        x = self.moment(z, w)
        _, _, F = VYF(x, z * w, self.beta)
        return 4 * (x * np.log(np.abs(z)) - F)

    def flat_potential(self, z, w):
        b = self.beta
        return (np.abs(z) ** (2 * b) + np.abs(w) ** (2 * b)) / b**2

    def volume_density(self, z, w):
        return np.abs(np.asarray(z) * np.asarray(w) - 1) ** (2 * self.beta - 2)
