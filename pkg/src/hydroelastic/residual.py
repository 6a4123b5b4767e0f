"""The reduced surface equation F(lambda, gamma, (theta, w)) and its linearisation.

Unknowns are ordered ``(theta, a_1, ..., a_N)`` with ``w = sum a_k cos(kx)``;
the residual vector is the cosine coefficients ``0..N`` of F, so theta pairs
with the constant mode and the system is square at fixed (lambda, gamma).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elasticity import EnergyModel, energy_fields, stretch_bend
from .spectral import (
    PeriodicField,
    StripGeometry,
    coth,
    differentiate,
    hilbert_strip,
    multiply,
)

MEAN_TOL = 1e-13


@dataclass(frozen=True)
class SurfaceState:
    theta: float
    w: PeriodicField
    lam: float
    gamma: float

    def __post_init__(self):
        if self.w.parity != "even":
            raise ValueError("surface displacement w must be even")
        if abs(self.w.mean()) > MEAN_TOL:
            raise ValueError(f"surface displacement must have zero mean, got {self.w.mean():.3e}")

    @classmethod
    def trivial(cls, lam, gamma, N):
        return cls(0.0, PeriodicField.zeros(N), float(lam), float(gamma))

    @classmethod
    def from_vector(cls, u, lam, gamma):
        """Build a state from the unknown vector ``(theta, a_1..a_N)``."""
        u = np.asarray(u, dtype=float)
        a = u.copy()
        a[0] = 0.0
        return cls(float(u[0]), PeriodicField.cosine(a), float(lam), float(gamma))

    def vector(self):
        u = self.w.a.copy()
        u[0] = self.theta
        return u

    @property
    def N(self):
        return self.w.N


def evaluate_F(state: SurfaceState, model: EnergyModel, geom: StripGeometry) -> PeriodicField:
    """Residual of the reduced hydroelastic equation as an even field.

    All nonlinear terms are formed on the ``geom.M`` collocation grid and the
    result is truncated to ``geom.N`` modes.
    """
    w, lam, gam, theta = state.w, state.lam, state.gamma, state.theta
    h, g, N, M = geom.h, geom.g, geom.N, geom.M
    prof = stretch_bend(w, geom)
    e1, e2 = energy_fields(prof, model, M)

    w1 = differentiate(w, 1)
    cw1 = hilbert_strip(w1, h)
    mean_w2 = w.a[0] ** 2 + 0.5 * (np.sum(w.a[1:] ** 2) + np.sum(w.b[1:] ** 2))
    c_ww1 = hilbert_strip(multiply(w, w1, M), h)

    wg = w.to_grid(M)
    A = mean_w2 / (2.0 * h) - wg + c_ww1.to_grid(M) - wg * cw1.to_grid(M)
    nu = prof.nu.to_grid(M)
    terms = (
        lam ** 2 * nu,
        gam ** 2 * A ** 2 * nu,
        -2.0 * lam * gam * A * nu,
        -(theta + lam ** 2 - 2.0 * g * wg) * nu ** 3,
        differentiate(e2, 2).to_grid(M) * nu,
        -differentiate(e2, 1).to_grid(M) * prof.nu_prime.to_grid(M),
        -prof.bend_numerator.to_grid(M) * e1.to_grid(M),
    )
    scale = sum(np.max(np.abs(t)) for t in terms)
    return PeriodicField.from_grid(sum(terms), N, "even", scale)


def residual_vector(u, lam, gamma, model, geom):
    """Cosine coefficients ``0..N`` of F at the unknown vector ``u``."""
    return evaluate_F(SurfaceState.from_vector(u, lam, gamma), model, geom).a.copy()


def dispersion(n, lam, gamma, model, geom):
    """D_n = 2n coth(nh) lam^2 - 2 lam gamma - (2g + n^4 E22(1,0))."""
    n = np.asarray(n)
    if np.any(n < 1):
        raise ValueError("dispersion is defined for modes n >= 1")
    return (2.0 * n * coth(n * geom.h) * lam ** 2 - 2.0 * lam * gamma
            - (2.0 * geom.g + n ** 4 * model.e22_rest))


def linearized_trivial(lam, gamma, model, geom, f: PeriodicField, zeta: float) -> PeriodicField:
    """Derivative of F at the flat state in direction (zeta, f): -zeta - sum D_k a_k cos(kx)."""
    if f.parity != "even":
        raise ValueError("direction f must be even")
    a = np.zeros(f.N + 1)
    k = np.arange(1, f.N + 1)
    a[1:] = -dispersion(k, lam, gamma, model, geom) * f.a[1:]
    a[0] = -zeta
    return PeriodicField(a, np.zeros(f.N + 1), "even")


def trivial_jacobian(lam, gamma, model, geom):
    k = np.arange(1, geom.N + 1)
    return np.diag(np.concatenate([[-1.0], -dispersion(k, lam, gamma, model, geom)]))


def fd_jacobian(fun, x, rel_step=1e-6):
    """Central-difference Jacobian of ``fun`` at ``x``; one step size for all columns."""
    x = np.asarray(x, dtype=float)
    step = rel_step * max(1.0, float(np.max(np.abs(x))))
    if x.size and np.any(x + step == x):
        raise FloatingPointError("finite-difference step underflows against the unknowns")
    cols = []
    for j in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[j] += step
        xm[j] -= step
        cols.append((fun(xp) - fun(xm)) / (xp[j] - xm[j]))
    return np.column_stack(cols)


def jacobian(state: SurfaceState, model, geom, mode="finite-difference"):
    """Dense Jacobian of the residual vector with respect to ``(theta, a_1..a_N)``."""
    if mode == "analytic-trivial":
        return trivial_jacobian(state.lam, state.gamma, model, geom)
    if mode != "finite-difference":
        raise ValueError(f"unknown jacobian mode {mode!r}")
    lam, gam = state.lam, state.gamma
    return fd_jacobian(lambda u: residual_vector(u, lam, gam, model, geom), state.vector())


def to_physical(state: SurfaceState, geom: StripGeometry):
    """Mass flux m and Bernoulli constant Q of a state."""
    h = geom.h
    m = h * (state.lam - state.gamma * h / 2.0)
    Q = state.theta + 2.0 * geom.g * h + state.lam ** 2
    return m, Q


def from_physical(m, Q, gamma, geom):
    """Inverse of :func:`to_physical`: returns (lambda, theta)."""
    h = geom.h
    lam = m / h + gamma * h / 2.0
    theta = Q - 2.0 * geom.g * h - lam ** 2
    return lam, theta
