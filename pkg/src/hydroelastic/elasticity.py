"""Stored-energy models and the membrane geometry of a surface profile."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .spectral import (
    GridEvaluationError,
    PeriodicField,
    StripGeometry,
    compose_pointwise,
    differentiate,
    hilbert_strip,
)

# smallest admissible stretch on the collocation grid
MIN_STRETCH = 1e-8

REST_TOL = 1e-10
FD_REL_TOL = 1e-6


class EnergyHypothesisError(ValueError):
    """The stored energy violates the rest-state / local convexity conditions."""


class DegenerateProfileError(ValueError):
    """The stretch vanishes (or nearly so) somewhere on the grid."""


@dataclass(frozen=True)
class EnergyModel:
    """Stored energy E(nu, mu) with its first and second partial derivatives.

    All callables must accept numpy arrays.  The rest-state and convexity
    conditions are checked on construction; pass ``validate=False`` only to
    build deliberately invalid models for testing.
    """

    E: Callable
    E1: Callable
    E2: Callable
    E11: Callable
    E12: Callable
    E22: Callable
    label: str = "custom"
    params: dict = field(default_factory=dict)
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        if self.validate:
            report = check_hypotheses(self)
            failed = [name for name, ok, _ in report if not ok]
            if failed:
                raise EnergyHypothesisError(f"model {self.label!r} fails: {', '.join(failed)}")

    @property
    def e11_rest(self):
        return float(self.E11(1.0, 0.0))

    @property
    def e22_rest(self):
        return float(self.E22(1.0, 0.0))

    def describe(self):
        return {"name": self.label, **self.params}


def check_hypotheses(model, fd_step=1e-4, sample=None):
    """Numerical check of the rest-state and convexity conditions.

    Returns a list of ``(name, passed, value)`` rows.  Also checks that the
    supplied partial derivatives agree with central differences of E on a
    small grid around (1, 0).
    """
    rows = []
    for name, fn in (("E(1,0)=0", model.E), ("E1(1,0)=0", model.E1),
                     ("E2(1,0)=0", model.E2), ("E12(1,0)=0", model.E12)):
        v = float(fn(1.0, 0.0))
        rows.append((name, abs(v) <= REST_TOL, v))
    for name, fn in (("E11(1,0)>0", model.E11), ("E22(1,0)>0", model.E22)):
        v = float(fn(1.0, 0.0))
        rows.append((name, v > REST_TOL, v))

    if sample is None:
        nus = np.array([0.9, 1.0, 1.1])
        mus = np.array([-0.1, 0.0, 0.1])
        nu, mu = (a.ravel() for a in np.meshgrid(nus, mus))
    else:
        nu, mu = (np.asarray(s, dtype=float) for s in sample)
    d = fd_step

    def central(f, dn, dm):
        return (f(nu + dn, mu + dm) - f(nu - dn, mu - dm)) / (2 * d)

    pairs = [
        ("E1~dE/dnu", model.E1, central(model.E, d, 0.0)),
        ("E2~dE/dmu", model.E2, central(model.E, 0.0, d)),
        ("E11~dE1/dnu", model.E11, central(model.E1, d, 0.0)),
        ("E12~dE1/dmu", model.E12, central(model.E1, 0.0, d)),
        ("E22~dE2/dmu", model.E22, central(model.E2, 0.0, d)),
    ]
    for name, exact, approx in pairs:
        exact = np.broadcast_to(np.asarray(exact(nu, mu), dtype=float), nu.shape)
        err = np.max(np.abs(exact - approx) / np.maximum(1.0, np.abs(exact)))
        rows.append((name, bool(err <= FD_REL_TOL), float(err)))
    return rows


def quadratic_model(alpha: float, beta: float) -> EnergyModel:
    """E = alpha/2 (nu - 1)^2 + beta/2 mu^2."""
    if not (alpha > 0 and beta > 0):
        raise ValueError(f"quadratic model needs alpha>0, beta>0, got {alpha}, {beta}")
    alpha = float(alpha)
    beta = float(beta)

    def zero(nu, mu):
        return np.zeros(np.broadcast(nu, mu).shape)

    return EnergyModel(
        E=lambda nu, mu: 0.5 * alpha * (nu - 1.0) ** 2 + 0.5 * beta * mu ** 2,
        E1=lambda nu, mu: alpha * (nu - 1.0) + 0.0 * mu,
        E2=lambda nu, mu: beta * mu + 0.0 * nu,
        E11=lambda nu, mu: alpha + zero(nu, mu),
        E12=zero,
        E22=lambda nu, mu: beta + zero(nu, mu),
        label="quadratic",
        params={"alpha": alpha, "beta": beta},
    )


MODELS = {"quadratic": quadratic_model}


def model_from_config(options: dict) -> EnergyModel:
    options = dict(options)
    name = options.pop("name", "quadratic")
    if name not in MODELS:
        raise ValueError(f"unknown energy model {name!r}; available: {sorted(MODELS)}")
    return MODELS[name](**options)


@dataclass(frozen=True)
class ProfileGeometry:
    nu: PeriodicField
    mu: PeriodicField
    nu_prime: PeriodicField
    mu_prime: PeriodicField
    # curvature numerator w'' + C(w')w'' - w'C(w''), equal to mu * nu^2
    bend_numerator: PeriodicField
    nu_min: float

    @property
    def curvature(self):
        return compose_pointwise(lambda m, n: m / n, self.mu, self.nu)


def _profile_grids(w: PeriodicField, geom: StripGeometry):
    """Grid samples of w', w'', C_h(w'), C_h(w'')."""
    w1 = differentiate(w, 1)
    w2 = differentiate(w, 2)
    cw1 = hilbert_strip(w1, geom.h)
    cw2 = hilbert_strip(w2, geom.h)
    M = geom.M
    return w1.to_grid(M), w2.to_grid(M), cw1.to_grid(M), cw2.to_grid(M)


def stretch_bend(w: PeriodicField, geom: StripGeometry) -> ProfileGeometry:
    """Stretch nu and bend rate mu of the surface x -> (x + C_h(w), h + w)."""
    if w.N != geom.N:
        raise ValueError(f"field truncation {w.N} does not match geometry N={geom.N}")
    w1, w2, cw1, cw2 = _profile_grids(w, geom)
    nu2 = (1.0 + cw1) ** 2 + w1 ** 2
    nu_grid = np.sqrt(nu2)
    j = int(np.argmin(nu_grid))
    if not nu_grid[j] >= MIN_STRETCH:
        raise DegenerateProfileError(f"stretch {nu_grid[j]:.3e} below {MIN_STRETCH} at grid index {j}")
    K = w2 + cw1 * w2 - w1 * cw2
    parity = "even" if w.parity == "even" else "none"
    N = geom.N
    scale = max(np.max(np.abs(g)) for g in (w1, w2, cw1, cw2))
    scale = scale * (1.0 + scale)
    nu = PeriodicField.from_grid(nu_grid, N, parity)
    mu = PeriodicField.from_grid(K / nu2, N, parity, scale)
    return ProfileGeometry(
        nu=nu,
        mu=mu,
        nu_prime=differentiate(nu, 1),
        mu_prime=differentiate(mu, 1),
        bend_numerator=PeriodicField.from_grid(K, N, parity, scale),
        nu_min=float(nu_grid[j]),
    )


def energy_fields(profile: ProfileGeometry, model: EnergyModel, M: int):
    """E1 and E2 composed with (nu, mu) as periodic fields."""
    try:
        e1 = compose_pointwise(model.E1, profile.nu, profile.mu, M=M)
        e2 = compose_pointwise(model.E2, profile.nu, profile.mu, M=M)
    except GridEvaluationError as exc:
        raise DegenerateProfileError(str(exc)) from exc
    return e1, e2


def pressure(w: PeriodicField, model: EnergyModel, geom: StripGeometry) -> PeriodicField:
    """Deformation pressure ((E2)'/nu)'/nu - (mu/nu) E1 along the profile."""
    prof = stretch_bend(w, geom)
    M = geom.M
    e1, e2 = energy_fields(prof, model, M)
    nu = prof.nu.to_grid(M)
    odd = "odd" if prof.nu.parity == "even" else "none"
    inner = PeriodicField.from_grid(differentiate(e2, 1).to_grid(M) / nu, geom.N, odd)
    bend = differentiate(inner, 1).to_grid(M) / nu
    tension = prof.mu.to_grid(M) / nu * e1.to_grid(M)
    scale = np.max(np.abs(bend)) + np.max(np.abs(tension))
    return PeriodicField.from_grid(bend - tension, geom.N, prof.nu.parity, scale)


def tangential_balance_residual(w: PeriodicField, model: EnergyModel, geom: StripGeometry) -> PeriodicField:
    """nu (E1)' + mu (E2)', reported as a diagnostic only."""
    prof = stretch_bend(w, geom)
    M = geom.M
    e1, e2 = energy_fields(prof, model, M)
    t1 = prof.nu.to_grid(M) * differentiate(e1, 1).to_grid(M)
    t2 = prof.mu.to_grid(M) * differentiate(e2, 1).to_grid(M)
    parity = "odd" if prof.nu.parity == "even" else "none"
    scale = np.max(np.abs(t1)) + np.max(np.abs(t2))
    return PeriodicField.from_grid(t1 + t2, geom.N, parity, scale)
