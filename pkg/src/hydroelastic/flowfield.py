"""Conformal map, stream function and velocity field below a solved surface.

The fluid domain is the image of the strip ``[0, 2pi) x [-h, 0]`` under
``(x, y) -> (U, V)``; the bed is ``V = 0`` and the surface ``V = h + w``.
Vertical dependence is evaluated mode by mode in closed form.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from .continuation import atomic_write_text, default_tol, residual_norm
from .elasticity import pressure
from .residual import SurfaceState, to_physical
from .spectral import PeriodicField, StripGeometry, collocation_size, multiply

DET_MIN = 1e-10
DEFAULT_NY = 129
STAGNATION_LEVELS = 10
STAGNATION_TOL = 1e-8


class DegenerateMapError(RuntimeError):
    """The conformal map has (numerically) vanishing Jacobian somewhere."""


def vertical_factors(k, y, h):
    """sinh(k(y+h))/sinh(kh) and cosh(k(y+h))/sinh(kh) for k >= 1, y in [-h, 0].

    Written with exp(k y) factored out so large kh cannot overflow.
    """
    k = np.asarray(k, dtype=float)
    y = np.asarray(y, dtype=float)
    ky = np.multiply.outer(y, k)
    decay = np.exp(np.multiply.outer(-2.0 * (y + h), k))
    denom = -np.expm1(-2.0 * k * h)
    lead = np.exp(ky) / denom
    return lead * (1.0 - decay), lead * (1.0 + decay)


@dataclass(frozen=True)
class HarmonicExtension:
    """Harmonic function on the strip equal to ``boundary`` at y=0 and its mean-part linear profile.

    Each mode ``c cos(kx) + s sin(kx)`` extends with factor sinh(k(y+h))/sinh(kh);
    the mean extends as [f](y+h)/h, so the function vanishes at y=-h.
    """

    boundary: PeriodicField
    h: float

    def _parts(self, x, y):
        f = self.boundary
        k = np.arange(1, f.N + 1)
        S, C = vertical_factors(k, y, self.h)
        kx = np.multiply.outer(np.asarray(x, dtype=float), k)
        cos, sin = np.cos(kx), np.sin(kx)
        a, b = f.a[1:], f.b[1:]
        return k, S, C, cos, sin, a, b

    def value(self, x, y):
        """Evaluate at matched arrays of points (x, y)."""
        k, S, C, cos, sin, a, b = self._parts(x, y)
        return self.boundary.a[0] * (np.asarray(y) + self.h) / self.h + np.sum(S * (cos * a + sin * b), axis=-1)

    def dx(self, x, y):
        k, S, C, cos, sin, a, b = self._parts(x, y)
        return np.sum(S * k * (-sin * a + cos * b), axis=-1)

    def dy(self, x, y):
        k, S, C, cos, sin, a, b = self._parts(x, y)
        return self.boundary.a[0] / self.h + np.sum(C * k * (cos * a + sin * b), axis=-1)

    def conjugate(self, x, y):
        """Harmonic conjugate without its linear part: cos -> C sin, sin -> -C cos."""
        k, S, C, cos, sin, a, b = self._parts(x, y)
        return np.sum(C * (sin * a - cos * b), axis=-1)

    def on_grid(self, x, y):
        X, Y = np.meshgrid(x, y)
        return self.value(X, Y)


def harmonic_extension(boundary: PeriodicField, h, x=None, y=None):
    """Grid values (rows = y, columns = x) of the harmonic extension of ``boundary``.

    Defaults: x on the collocation grid of the field, 129 rows over [-h, 0].
    """
    x = 2.0 * np.pi * np.arange(collocation_size(boundary.N)) / collocation_size(boundary.N) if x is None else x
    y = np.linspace(-h, 0.0, DEFAULT_NY) if y is None else y
    return HarmonicExtension(boundary, h).on_grid(x, y)


def squared_exactly(v: PeriodicField):
    """v^2 with all 2N modes kept."""
    wide = v.truncate(2 * v.N)
    return multiply(wide, wide, collocation_size(2 * v.N))


@dataclass(frozen=True)
class FlowModel:
    """Pointwise evaluators of U, V, psi and the physical velocity."""

    Vext: HarmonicExtension
    eta: HarmonicExtension
    gamma: float
    m: float

    def map(self, x, y):
        x = np.asarray(x, dtype=float)
        return x + self.Vext.conjugate(x, y), self.Vext.value(x, y)

    def map_derivatives(self, x, y):
        # U_x = V_y and U_y = -V_x
        return self.Vext.dy(x, y), self.Vext.dx(x, y)

    def psi(self, x, y):
        V = self.Vext.value(x, y)
        return self.eta.value(x, y) + 0.5 * self.gamma * V ** 2 - self.m

    def psi_gradient(self, x, y):
        V = self.Vext.value(x, y)
        Vx, Vy = self.Vext.dx(x, y), self.Vext.dy(x, y)
        return (self.eta.dx(x, y) + self.gamma * V * Vx,
                self.eta.dy(x, y) + self.gamma * V * Vy)

    def velocity(self, x, y):
        """Physical (Psi_X, Psi_Y) and det J = U_x^2 + V_x^2."""
        Ux, Vx = self.map_derivatives(x, y)
        px, py = self.psi_gradient(x, y)
        det = Ux ** 2 + Vx ** 2
        return (Ux * px - Vx * py) / det, (Vx * px + Ux * py) / det, det


@dataclass(frozen=True)
class FlowField:
    """Samples on an (n_y, n_x) grid, y outer."""

    x: np.ndarray
    y: np.ndarray
    U: np.ndarray
    V: np.ndarray
    psi: np.ndarray
    psi_X: np.ndarray
    psi_Y: np.ndarray
    jacobian_det: np.ndarray
    m: float
    Q: float
    h: float
    gamma: float
    lam: float
    model: FlowModel = field(repr=False)

    def quantities(self):
        return {"U": self.U, "V": self.V, "psi": self.psi, "psi_X": self.psi_X,
                "psi_Y": self.psi_Y, "jacobian_det": self.jacobian_det}


def build_flow_model(state: SurfaceState, geom: StripGeometry) -> FlowModel:
    h = geom.h
    m, _ = to_physical(state, geom)
    v = state.w + PeriodicField.constant(h, state.N)
    v2 = squared_exactly(v)
    eta_boundary = PeriodicField.constant(m, v2.N) - 0.5 * state.gamma * v2
    return FlowModel(HarmonicExtension(v, h), HarmonicExtension(eta_boundary, h), state.gamma, m)


def reconstruct(state: SurfaceState, model, geom: StripGeometry, n_y=DEFAULT_NY, n_x=None,
                check_residual=True) -> FlowField:
    """Flow below ``state`` sampled on n_x (default M) columns and n_y rows."""
    if check_residual:
        r = residual_norm(state, model, geom)
        if r > default_tol(state.lam):
            warnings.warn(f"state residual {r:.3e} exceeds the Newton tolerance", RuntimeWarning, stacklevel=2)
    h = geom.h
    n_x = geom.M if n_x is None else n_x
    x = 2.0 * np.pi * np.arange(n_x) / n_x
    y = np.linspace(-h, 0.0, n_y)
    X, Y = np.meshgrid(x, y)
    fm = build_flow_model(state, geom)
    U, V = fm.map(X, Y)
    # exact boundary rows
    V[0] = 0.0
    V[-1] = (state.w + PeriodicField.constant(h, state.N)).evaluate(x)
    psi = fm.psi(X, Y)
    psi_X, psi_Y, det = fm.velocity(X, Y)
    bad = np.argwhere(~(det >= DET_MIN))
    if bad.size:
        i, j = bad[0]
        raise DegenerateMapError(f"Jacobian determinant {det[i, j]:.3e} at node (x={x[j]:.4f}, y={y[i]:.4f})")
    m, Q = to_physical(state, geom)
    return FlowField(x, y, U, V, psi, psi_X, psi_Y, det, m, Q, h, state.gamma, state.lam, fm)


# critical layers and stagnation points --------------------------------------------

@dataclass(frozen=True)
class FlowPoint:
    x: float
    y: float
    X: float
    Y: float


@dataclass
class CriticalReport:
    critical_points: list
    stagnation_points: list
    laminar_critical_depth: float | None


def laminar_critical_depth(lam, gamma, h):
    """Height h - lam/gamma of the line where a laminar flow is at rest, when inside [0, h]."""
    if gamma == 0.0:
        return None
    r = lam / gamma
    return h - r if 0.0 <= r <= h else None


def _bisect_column(fm, x, y0, y1, f0, iters=52):
    for _ in range(iters):
        ym = 0.5 * (y0 + y1)
        fmid = fm.velocity(np.array([x]), np.array([ym]))[1][0]
        if fmid == 0.0:
            return ym
        if np.sign(fmid) == np.sign(f0):
            y0, f0 = ym, fmid
        else:
            y1 = ym
    return 0.5 * (y0 + y1)


def _changes(values, noise=0.0):
    """True if ``values`` straddle zero; entries within ``noise`` of zero count as either sign."""
    return np.min(values) <= noise and np.max(values) >= -noise and np.ptp(values) > 0.0


def _refine_cell(fm, x0, x1, y0, y1, levels):
    """Quadrisect towards a common zero of both velocity components, then polish by Newton."""
    bounds = (x0, x1, y0, y1)
    for _ in range(levels):
        xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        for cx0, cx1, cy0, cy1 in ((x0, xm, y0, ym), (xm, x1, y0, ym), (x0, xm, ym, y1), (xm, x1, ym, y1)):
            cx = np.array([cx0, cx1, cx0, cx1])
            cy = np.array([cy0, cy0, cy1, cy1])
            u, v, _ = fm.velocity(cx, cy)
            if _changes(u) and _changes(v):
                x0, x1, y0, y1 = cx0, cx1, cy0, cy1
                break
        else:
            break
    return _polish(fm, 0.5 * (x0 + x1), 0.5 * (y0 + y1), bounds)


def _polish(fm, x, y, bounds, iters=8):
    """Newton on (Psi_X, Psi_Y) = 0 in conformal coordinates, clamped to ``bounds``."""
    x0, x1, y0, y1 = bounds
    e = 1e-7 * max(x1 - x0, y1 - y0)

    def vel(x, y):
        u, v, _ = fm.velocity(np.array([x]), np.array([y]))
        return np.array([u[0], v[0]])

    r = vel(x, y)
    for _ in range(iters):
        J = np.column_stack([(vel(x + e, y) - vel(x - e, y)) / (2 * e),
                             (vel(x, y + e) - vel(x, y - e)) / (2 * e)])
        try:
            dx, dy = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            break
        # zeros on the bed lie on the cell boundary, so clamp rather than stop
        xn, yn = min(max(x + dx, x0), x1), min(max(y + dy, y0), y1)
        rn = vel(xn, yn)
        if np.max(np.abs(rn)) >= np.max(np.abs(r)):
            break
        x, y, r = xn, yn, rn
    return x, y


def _periodic_gap(a, b):
    d = abs(a - b) % (2.0 * np.pi)
    return min(d, 2.0 * np.pi - d)


def _point(fm, x, y):
    U, V = fm.map(np.array([x]), np.array([y]))
    return FlowPoint(float(x), float(y), float(U[0]), float(V[0]))


def critical_layers(field: FlowField, state: SurfaceState | None = None) -> CriticalReport:
    """Points where the horizontal velocity vanishes, and stagnation points.

    Critical points: sign changes of Psi_Y between vertically adjacent nodes,
    refined by bisection along the column.  Stagnation points: grid cells in
    which both velocity components change sign, refined by repeated
    quadrisection (down to 1/2^10 of the cell diameter) and a Newton polish
    that may not leave the cell.
    """
    fm = field.model
    crit = []
    PY, PX = field.psi_Y, field.psi_X
    for j, x in enumerate(field.x):
        col = PY[:, j]
        for i in range(len(field.y) - 1):
            if col[i] == 0.0:
                crit.append(_point(fm, x, field.y[i]))
            elif col[i] * col[i + 1] < 0.0:
                crit.append(_point(fm, x, _bisect_column(fm, x, field.y[i], field.y[i + 1], col[i])))
        if col[-1] == 0.0:
            crit.append(_point(fm, x, field.y[-1]))

    stag = []
    vscale = 1.0 + max(np.max(np.abs(PX)), np.max(np.abs(PY)))
    noise = 1e-12 * vscale
    nx = len(field.x)
    xs = np.append(field.x, 2.0 * np.pi)
    for i in range(len(field.y) - 1):
        for j in range(nx):
            jj = (j + 1) % nx
            u = np.array([PX[i, j], PX[i, jj], PX[i + 1, j], PX[i + 1, jj]])
            v = np.array([PY[i, j], PY[i, jj], PY[i + 1, j], PY[i + 1, jj]])
            if _changes(u, noise) and _changes(v, noise):
                xr, yr = _refine_cell(fm, xs[j], xs[j + 1], field.y[i], field.y[i + 1], STAGNATION_LEVELS)
                ur, vr, _ = fm.velocity(np.array([xr]), np.array([yr]))
                # the bed is a streamline, so Psi_X there is pure roundoff and
                # passes the sign test; keep only genuine common zeros
                if abs(ur[0]) + abs(vr[0]) > STAGNATION_TOL * vscale:
                    continue
                xr = float(np.mod(xr, 2.0 * np.pi))
                if xr > 2.0 * np.pi - 1e-12:
                    xr = 0.0
                if any(_periodic_gap(xr, q.x) + abs(yr - q.y) <= 1e-8 for q in stag):
                    continue
                stag.append(_point(fm, xr, yr))

    lam = field.lam if state is None else state.lam
    return CriticalReport(crit, stag, laminar_critical_depth(lam, field.gamma, field.h))


# Bernoulli balance on the surface --------------------------------------------------

def bernoulli_residual(state: SurfaceState, model, geom: StripGeometry, field: FlowField | None = None):
    """|grad Psi|^2 + 2g V + P - Q along the surface row.

    P is :func:`hydroelastic.elasticity.pressure`, the deformation term as it
    enters the reduced equation; the fluid pressure jump is its negative.
    """
    field = reconstruct(state, model, geom, check_residual=False) if field is None else field
    if len(field.x) != geom.M:
        raise ValueError("Bernoulli check needs the field on the collocation columns")
    speed2 = field.psi_X[-1] ** 2 + field.psi_Y[-1] ** 2
    P = pressure(state.w, model, geom).to_grid(geom.M)
    return speed2 + 2.0 * geom.g * field.V[-1] + P - field.Q


# export --------------------------------------------------------------------------

def field_csv_text(field: FlowField, values):
    lines = ["x,y,value"]
    fmt = lambda v: format(float(v), ".17g")
    for i, y in enumerate(field.y):
        for j, x in enumerate(field.x):
            lines.append(f"{fmt(x)},{fmt(y)},{fmt(values[i, j])}")
    return "\n".join(lines) + "\n"


def export_field(field: FlowField, directory, prefix="flow", metadata=None, quantities=None):
    """One CSV per quantity plus ``<prefix>.json``; returns the written paths."""
    directory = os.fspath(directory)
    data = field.quantities()
    names = list(data) if quantities is None else list(quantities)
    paths = []
    for name in names:
        path = os.path.join(directory, f"{prefix}_{name}.csv")
        atomic_write_text(path, field_csv_text(field, data[name]))
        paths.append(path)
    meta = {"quantities": names, "n_x": len(field.x), "n_y": len(field.y), "h": field.h,
            "gamma": field.gamma, "lambda": field.lam, "m": field.m, "Q": field.Q,
            **(metadata or {})}
    path = os.path.join(directory, f"{prefix}.json")
    atomic_write_text(path, json.dumps(meta, indent=2, sort_keys=True) + "\n")
    paths.append(path)
    return paths
