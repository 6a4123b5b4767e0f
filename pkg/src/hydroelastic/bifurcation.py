"""Bifurcation thresholds of the flat state, resonances and the nondegeneracy tests."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .residual import SurfaceState, dispersion, evaluate_F
from .spectral import PeriodicField, coth, grid_points

MATCH_TOL = 1e-9
DEGENERATE_TOL = 1e-10


class KernelInconsistencyError(RuntimeError):
    """More than two dispersion roots coincide, which the theory rules out."""


class PrecisionError(RuntimeError):
    """Finite-difference estimate is dominated by noise."""


class DegenerateConfigurationWarning(UserWarning):
    pass


def sign_value(sign) -> int:
    if sign in ("+", 1, "plus"):
        return 1
    if sign in ("-", -1, "minus"):
        return -1
    raise ValueError(f"sign must be '+' or '-', got {sign!r}")


def sign_label(sign) -> str:
    return "+" if sign_value(sign) > 0 else "-"


def T(n, h):
    """tanh(nh)/n, strictly decreasing in n."""
    n = np.asarray(n, dtype=float)
    return np.tanh(n * h) / n


def lambda_star(n, sign, gamma, model, geom):
    """Root of D_n(., gamma) with the given sign (the + root is positive)."""
    if np.any(np.asarray(n) < 1):
        raise ValueError("mode index must be >= 1")
    Tn = T(n, geom.h)
    root = np.sqrt(gamma ** 2 * Tn ** 2 / 4.0 + (geom.g + n ** 4 * model.e22_rest / 2.0) * Tn)
    return gamma / 2.0 * Tn + sign_value(sign) * root


def _restoring(n, model, geom):
    return 2.0 * geom.g + n ** 4 * model.e22_rest


def gamma_star_squared(n, m, model, geom):
    """Squared vorticity at which modes n and m share a bifurcation value."""
    if n == m:
        raise ValueError("resonance needs two distinct modes")
    if n < 1 or m < 1:
        raise ValueError("mode indices must be >= 1")
    Tn, Tm = T(n, geom.h), T(m, geom.h)
    e22 = model.e22_rest
    num = (_restoring(n, model, geom) * Tn - _restoring(m, model, geom) * Tm) ** 2
    den = 2.0 * Tn * Tm * (Tn - Tm) * (m ** 4 - n ** 4) * e22
    return float(num / den)


def resonant_gamma(n, m, sign, model, geom):
    """Vorticity, of squared size gamma_star_squared(n, m), at which lambda*_{n,sign} = lambda*_{m,sign}."""
    # at gamma > 0 the matching roots have the sign of c_m T_m - c_n T_n (c_k = 2g + k^4 E22)
    Tn, Tm = T(n, geom.h), T(m, geom.h)
    orient = np.sign(_restoring(m, model, geom) * Tm - _restoring(n, model, geom) * Tn)
    if m < n:
        orient = -orient
    orient = orient if orient != 0 else 1.0
    return float(sign_value(sign) * orient * np.sqrt(gamma_star_squared(n, m, model, geom)))


@dataclass(frozen=True)
class KernelClass:
    kind: str  # "invertible" | "simple" | "double"
    modes: tuple = ()
    sign: str | None = None

    def __str__(self):
        if self.kind == "invertible":
            return "invertible"
        return f"{self.kind}({','.join(map(str, self.modes))},{self.sign})"


def dispersion_scale(k, lam, gamma, model, geom):
    k = np.asarray(k, dtype=float)
    return (1.0 + 2.0 * k * coth(k * geom.h) * lam ** 2 + abs(2.0 * lam * gamma)
            + _restoring(k, model, geom))


def classify_kernel(lam, gamma, model, geom, n_max, tol=MATCH_TOL):
    """Dimension of the kernel of the linearised operator at the flat state."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    k = np.arange(1, n_max + 1)
    D = dispersion(k, lam, gamma, model, geom)
    hits = k[np.abs(D) <= tol * dispersion_scale(k, lam, gamma, model, geom)]
    sign = "+" if lam > 0 else "-"
    if hits.size == 0:
        return KernelClass("invertible")
    if hits.size == 1:
        return KernelClass("simple", (int(hits[0]),), sign)
    if hits.size == 2:
        return KernelClass("double", tuple(int(x) for x in hits), sign)
    raise KernelInconsistencyError(f"{hits.size} dispersion roots coincide at lambda={lam}: modes {hits.tolist()}")


def transversality(n, sign, gamma, model, geom):
    """2 lambda*/T_n - gamma; half the lambda-derivative of D_n at its root."""
    lam = lambda_star(n, sign, gamma, model, geom)
    return float(2.0 * lam / T(n, geom.h) - gamma)


def period_integral(fn, M=256):
    """Integral over [-pi, pi) by the periodic trapezoid rule (exact for low-degree trig polynomials)."""
    x = grid_points(M) - np.pi
    return float(np.sum(fn(x)) * 2.0 * np.pi / M)


@dataclass(frozen=True)
class NondegeneracyReport:
    n: int
    sign: str
    gamma: float
    lam: float
    det_b8a: float
    det_b8b: float
    M: float
    triple_integral: float


def nondegeneracy_m(n, lam, gamma, model, geom):
    """Closed-form coefficient M of the cos(nx)cos(2nx) terms of the second derivative."""
    h, g = geom.h, geom.g
    c1, c2 = coth(n * h), coth(2 * n * h)
    e11, e22 = model.e11_rest, model.e22_rest
    return float(lam ** 2 * (n * c1 - 4 * n ** 2 * c1 * c2) + 8 * n * lam * gamma * c1
                 + 12 * g * n * c1 - 6 * lam ** 2 * n ** 2 * c1 * c2
                 + 16 * e22 * n ** 5 * c1 + 8 * e11 * n ** 3 * c1)


def nondegeneracy_determinants(n, sign, model, geom):
    """The two 2x2 determinants of the secondary-bifurcation test at the n:2n resonance.

    ``det_b8b`` carries the factor  int cos(nx) cos^2(2nx) dx,  which vanishes by
    orthogonality; it is evaluated by quadrature and a warning is issued when
    either determinant is numerically zero.
    """
    gamma = resonant_gamma(n, 2 * n, sign, model, geom)
    lam = float(lambda_star(n, sign, gamma, model, geom))
    Tn, T2n = T(n, geom.h), T(2 * n, geom.h)
    det_a = 8.0 * np.pi ** 2 * lam ** 2 * (1.0 / T2n - 1.0 / Tn)
    Mval = nondegeneracy_m(n, lam, gamma, model, geom)
    integral = period_integral(lambda x: np.cos(n * x) * np.cos(2 * n * x) ** 2)
    det_b = Mval * (-4.0 * lam / Tn + 2.0 * gamma) * integral
    scale_b = abs(Mval * (-4.0 * lam / Tn + 2.0 * gamma)) * 2.0 * np.pi
    if abs(det_a) < DEGENERATE_TOL * 8.0 * np.pi ** 2 * lam ** 2 / T2n:
        warnings.warn(f"first determinant is numerically zero ({det_a:.3e})", DegenerateConfigurationWarning)
    if abs(det_b) < DEGENERATE_TOL * max(scale_b, 1.0):
        warnings.warn(f"second determinant is numerically zero ({det_b:.3e}); "
                      f"int cos(nx)cos^2(2nx) dx = {integral:.3e}", DegenerateConfigurationWarning)
    return NondegeneracyReport(int(n), sign_label(sign), gamma, lam, float(det_a), float(det_b),
                               Mval, integral)


def b8a_matrix(n, sign, model, geom):
    """The first 2x2 matrix assembled entry by entry from the mixed derivatives."""
    gamma = resonant_gamma(n, 2 * n, sign, model, geom)
    lam = float(lambda_star(n, sign, gamma, model, geom))
    Tn, T2n = T(n, geom.h), T(2 * n, geom.h)
    return np.array([[(-4 * lam / Tn + 2 * gamma) * np.pi, 2 * lam * np.pi],
                     [(-4 * lam / T2n + 2 * gamma) * np.pi, 2 * lam * np.pi]])


# second derivatives at the flat state ------------------------------------------

def pairing(f: PeriodicField, k: int) -> float:
    """<f | cos(kx)> over one period [-pi, pi]."""
    return float(2.0 * np.pi * f.a[0]) if k == 0 else float(np.pi * f.a[k])


def _second_difference(y1, y2, t, lam, gamma, model, geom):
    t1 = t / max(np.max(np.abs(y1.a)), 1e-300)
    t2 = t / max(np.max(np.abs(y2.a)), 1e-300)

    def F(c1, c2):
        w = PeriodicField.cosine(c1 * t1 * y1.a + c2 * t2 * y2.a)
        return evaluate_F(SurfaceState(0.0, w, lam, gamma), model, geom).a

    return (F(1, 1) - F(1, -1) - F(-1, 1) + F(-1, -1)) / (4.0 * t1 * t2)


def second_derivative_field(y1: PeriodicField, y2: PeriodicField, lam, gamma, model, geom,
                            step=1e-4, rel_tol=1e-3) -> PeriodicField:
    """F_ww at the flat state applied to (y1, y2), by Richardson-extrapolated central differences."""
    for y in (y1, y2):
        if y.parity != "even" or abs(y.mean()) > 1e-13 or y.N != geom.N:
            raise ValueError("directions must be even, zero-mean fields on the geometry's truncation")
    coarse = _second_difference(y1, y2, step, lam, gamma, model, geom)
    fine = _second_difference(y1, y2, step / 2.0, lam, gamma, model, geom)
    scale = max(np.max(np.abs(fine)), 1e-300)
    if np.max(np.abs(fine - coarse)) > rel_tol * scale:
        raise PrecisionError("second-difference estimates disagree beyond tolerance")
    return PeriodicField.cosine((4.0 * fine - coarse) / 3.0)


def second_derivative_pairing(y1, y2, k, lam, gamma, model, geom, **kw):
    """<F_ww(lam, gamma, 0)[y1, y2] | cos(kx)>."""
    return pairing(second_derivative_field(y1, y2, lam, gamma, model, geom, **kw), k)


def reference_second_derivative(which, n, lam, gamma, model, geom) -> PeriodicField:
    """Reference closed forms of F_ww[x1,x1] (``which="11"``) and F_ww[x1,x2] (``"12"``).

    Kept only as a cross-check against :func:`second_derivative_field`; the
    finite-difference value is authoritative.
    """
    h, g = geom.h, geom.g
    e11, e22 = model.e11_rest, model.e22_rest
    c1, c2, c3 = coth(n * h), coth(2 * n * h), coth(3 * n * h)
    x = grid_points(geom.M)
    cn, sn = np.cos(n * x), np.sin(n * x)
    c2n, s2n, c3n = np.cos(2 * n * x), np.sin(2 * n * x), np.cos(3 * n * x)
    if which == "11":
        v = (lam ** 2 * (n * c1 * cn ** 2 - 2 * n ** 2 * c1 ** 2 * cn ** 2 - 2 * n ** 2 * sn ** 2)
             + 2 * gamma ** 2 * cn ** 2
             - 2 * lam * gamma * (n * c2 * c2n - 4 * n * c1 * cn ** 2)
             + 12 * g * n * c1 * cn ** 2 - 6 * lam ** 2 * n ** 2 * c1 ** 2 * cn ** 2
             + e22 * n ** 5 * c1 + 2 * e11 * n ** 3 * c1 * cn ** 2)
    elif which == "12":
        v = (lam ** 2 * ((n * c1 - 4 * n ** 2 * c1 * c2) * cn * c2n - 4 * n ** 2 * sn * s2n)
             - 2 * lam * gamma * (n * c3 * c3n - n * c1 * cn - 4 * n * c1 * cn * c2n)
             + 12 * g * n * c1 * cn * c2n - 6 * lam ** 2 * n ** 2 * c1 * c2 * cn * c2n
             + 16 * e22 * n ** 5 * (c1 * cn * c2n + c2 * sn * s2n)
             + 2 * gamma ** 2 * c2n ** 2 + 8 * e11 * n ** 3 * c1 * cn * c2n)
    else:
        raise ValueError("which must be '11' or '12'")
    return PeriodicField.from_grid(v, geom.N, "even")


def compare_m_with_fd(n, sign, model, geom):
    """Closed-form M against twice the cos(nx) coefficient of the FD value of F_ww[x1, x2].

    Returns ``(M, fd_value, relative_discrepancy)``; the two agree only if the
    cos(nx)cos(2nx) terms were the sole source of the cos(nx) component.
    """
    gamma = resonant_gamma(n, 2 * n, sign, model, geom)
    lam = float(lambda_star(n, sign, gamma, model, geom))
    x1 = PeriodicField.mode(n, geom.N)
    x2 = PeriodicField.mode(2 * n, geom.N)
    fd = 2.0 * second_derivative_field(x1, x2, lam, gamma, model, geom).a[n]
    Mval = nondegeneracy_m(n, lam, gamma, model, geom)
    return Mval, float(fd), float(abs(Mval - fd) / max(abs(Mval), abs(fd), 1e-300))
