"""Truncated Fourier fields on [0, 2pi) and the strip Fourier multipliers.

A :class:`PeriodicField` stores

    f(x) = a_0 + sum_{k=1}^N a_k cos(kx) + b_k sin(kx)

as two length ``N + 1`` arrays (``b[0]`` is always zero).  Nonlinear operations
go through a uniform collocation grid ``x_j = 2 pi j / M`` with ``M >= 3N``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

PARITIES = ("even", "odd", "none")

# coth(x) == 1 to double precision beyond this
COTH_CUTOFF = 36.0

PARITY_TOL = 1e-13
GRID_PARITY_TOL = 1e-12


class ParityError(ValueError):
    """A field carries opposite-parity content above tolerance."""


class GridEvaluationError(ValueError):
    """A pointwise function produced a non-finite value on the collocation grid."""

    def __init__(self, message, index):
        super().__init__(message)
        self.index = index


def coth(x):
    """coth for x > 0, overflow free."""
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    small = x < COTH_CUTOFF
    xs = x[small]
    # coth x = 1 + 2 / (e^{2x} - 1)
    out[small] = 1.0 + 2.0 / np.expm1(2.0 * xs)
    return out


def collocation_size(N):
    """Default grid size: 3N rounded up to even."""
    M = 3 * N
    return M + (M % 2)


@dataclass(frozen=True)
class StripGeometry:
    h: float
    g: float
    N: int
    M: int | None = None

    def __post_init__(self):
        if not (np.isfinite(self.h) and self.h > 0):
            raise ValueError(f"depth h must be positive, got {self.h}")
        if not (np.isfinite(self.g) and self.g > 0):
            raise ValueError(f"gravity g must be positive, got {self.g}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"truncation N must be a positive integer, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        M = collocation_size(self.N) if self.M is None else int(self.M)
        if M < 3 * self.N or M % 2:
            raise ValueError(f"collocation size M={M} must be even and >= 3N={3 * self.N}")
        object.__setattr__(self, "M", M)


@dataclass(frozen=True, eq=False)
class PeriodicField:
    """Immutable truncated Fourier series with a declared parity."""

    a: np.ndarray
    b: np.ndarray
    parity: str = "none"
    N: int = field(init=False)

    def __post_init__(self):
        a = np.array(self.a, dtype=float).ravel()
        b = np.array(self.b, dtype=float).ravel()
        if b.size == a.size - 1:
            b = np.concatenate([[0.0], b])
        if a.size != b.size or a.size < 1:
            raise ValueError("cosine and sine coefficient arrays must both have length N+1")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("non-finite Fourier coefficient")
        if self.parity not in PARITIES:
            raise ValueError(f"parity must be one of {PARITIES}")
        b[0] = 0.0
        scale = np.abs(a).sum() + np.abs(b).sum()
        if self.parity == "even" and np.max(np.abs(b)) > PARITY_TOL * scale:
            raise ParityError("even field has sine content")
        if self.parity == "odd" and np.max(np.abs(a)) > PARITY_TOL * scale:
            raise ParityError("odd field has cosine content")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "N", a.size - 1)

    # constructors -----------------------------------------------------------

    @classmethod
    def zeros(cls, N, parity="even"):
        return cls(np.zeros(N + 1), np.zeros(N + 1), parity)

    @classmethod
    def constant(cls, c, N):
        a = np.zeros(N + 1)
        a[0] = c
        return cls(a, np.zeros(N + 1), "even")

    @classmethod
    def cosine(cls, coeffs, N=None):
        """Even field from cosine coefficients ``a_0, a_1, ...``."""
        coeffs = np.asarray(coeffs, dtype=float)
        N = coeffs.size - 1 if N is None else N
        a = np.zeros(N + 1)
        n = min(coeffs.size, N + 1)
        a[:n] = coeffs[:n]
        return cls(a, np.zeros(N + 1), "even")

    @classmethod
    def sine(cls, coeffs, N=None):
        """Odd field from sine coefficients ``b_1, b_2, ...``."""
        coeffs = np.asarray(coeffs, dtype=float)
        N = coeffs.size if N is None else N
        b = np.zeros(N + 1)
        n = min(coeffs.size, N)
        b[1:n + 1] = coeffs[:n]
        return cls(np.zeros(N + 1), b, "odd")

    @classmethod
    def mode(cls, k, N, kind="cos", amplitude=1.0):
        f = np.zeros(N + 1)
        f[k] = amplitude
        if kind == "cos":
            return cls(f, np.zeros(N + 1), "even")
        if k == 0:
            raise ValueError("sin(0x) is not a mode")
        return cls(np.zeros(N + 1), f, "odd")

    @classmethod
    def from_grid(cls, values, N, parity="none", scale=0.0):
        """Project grid samples onto modes ``0..N``.

        Opposite-parity content below ``GRID_PARITY_TOL * max(max|values|, scale)``
        is transform roundoff and is dropped; anything larger raises.  Pass
        ``scale`` when the values come out of a cancellation of larger terms.
        """
        values = np.asarray(values, dtype=float)
        M = values.size
        if N >= M // 2:
            raise ValueError(f"grid of size {M} cannot resolve {N} modes")
        c = np.fft.rfft(values)
        a = np.empty(N + 1)
        b = np.zeros(N + 1)
        a[0] = c[0].real / M
        a[1:] = 2.0 * c[1:N + 1].real / M
        b[1:] = -2.0 * c[1:N + 1].imag / M
        scale = max(np.max(np.abs(values)) if M else 0.0, scale, np.finfo(float).tiny)
        if parity == "even":
            if np.max(np.abs(b)) > GRID_PARITY_TOL * scale:
                raise ParityError(f"expected even grid function, sine content {np.max(np.abs(b)):.3e}")
            b[:] = 0.0
        elif parity == "odd":
            if np.max(np.abs(a)) > GRID_PARITY_TOL * scale:
                raise ParityError(f"expected odd grid function, cosine content {np.max(np.abs(a)):.3e}")
            a[:] = 0.0
        return cls(a, b, parity)

    # basic queries ----------------------------------------------------------

    def to_grid(self, M=None):
        M = collocation_size(self.N) if M is None else M
        if self.N >= M // 2:
            raise ValueError(f"grid of size {M} cannot resolve {self.N} modes")
        c = np.zeros(M // 2 + 1, dtype=complex)
        c[0] = self.a[0] * M
        c[1:self.N + 1] = 0.5 * M * (self.a[1:] - 1j * self.b[1:])
        return np.fft.irfft(c, M)

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        k = np.arange(self.N + 1)
        kx = np.multiply.outer(x, k)
        return np.cos(kx) @ self.a + np.sin(kx) @ self.b

    def mean(self):
        return float(self.a[0])

    def norm(self):
        """Coefficient 1-norm, the scale used by parity checks."""
        return float(np.abs(self.a).sum() + np.abs(self.b).sum())

    def max_coeff(self):
        return float(max(np.max(np.abs(self.a)), np.max(np.abs(self.b))))

    def truncate(self, N):
        a = np.zeros(N + 1)
        b = np.zeros(N + 1)
        n = min(N, self.N) + 1
        a[:n] = self.a[:n]
        b[:n] = self.b[:n]
        return PeriodicField(a, b, self.parity)

    def with_parity(self, parity):
        return PeriodicField(self.a, self.b, parity)

    def __repr__(self):
        return f"PeriodicField(N={self.N}, parity={self.parity}, mean={self.a[0]:.6g})"

    # linear algebra ---------------------------------------------------------

    def _check(self, other):
        if self.N != other.N:
            raise ValueError(f"truncation mismatch: {self.N} vs {other.N}")

    def __add__(self, other):
        if isinstance(other, PeriodicField):
            self._check(other)
            return PeriodicField(self.a + other.a, self.b + other.b, _sum_parity(self.parity, other.parity))
        a = self.a.copy()
        a[0] += other
        return PeriodicField(a, self.b, "even" if self.parity == "even" else "none")

    __radd__ = __add__

    def __neg__(self):
        return PeriodicField(-self.a, -self.b, self.parity)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, PeriodicField):
            return multiply(self, other)
        return PeriodicField(other * self.a, other * self.b, self.parity)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return PeriodicField(self.a / c, self.b / c, self.parity)


def _sum_parity(p, q):
    if p == q:
        return p
    return "none"


def product_parity(*parities):
    if "none" in parities:
        return "none"
    return "odd" if sum(p == "odd" for p in parities) % 2 else "even"


def _flip(parity):
    return {"even": "odd", "odd": "even", "none": "none"}[parity]


# Fourier multipliers ---------------------------------------------------------

def hilbert_strip(f: PeriodicField, h: float) -> PeriodicField:
    """Periodic Hilbert transform of the strip of depth ``h``.

    cos(kx) -> coth(kh) sin(kx), sin(kx) -> -coth(kh) cos(kx); the mean is dropped.
    """
    if not h > 0:
        raise ValueError(f"depth must be positive, got {h}")
    k = np.arange(1, f.N + 1)
    ck = coth(k * h)
    a = np.zeros(f.N + 1)
    b = np.zeros(f.N + 1)
    a[1:] = -ck * f.b[1:]
    b[1:] = ck * f.a[1:]
    return PeriodicField(a, b, _flip(f.parity))


def differentiate(f: PeriodicField, order: int = 1) -> PeriodicField:
    if order not in (1, 2, 3, 4):
        raise ValueError(f"derivative order must be 1..4, got {order}")
    k = np.arange(f.N + 1, dtype=float)
    a, b = f.a, f.b
    for _ in range(order):
        a, b = k * b, -k * a
    parity = f.parity if order % 2 == 0 else _flip(f.parity)
    return PeriodicField(a, b, parity)


def dirichlet_neumann(f: PeriodicField, h: float) -> PeriodicField:
    """Dirichlet-Neumann operator of the strip: [f]/h + C_h(f')."""
    if not h > 0:
        raise ValueError(f"depth must be positive, got {h}")
    out = hilbert_strip(differentiate(f, 1), h)
    a = out.a.copy()
    a[0] = f.a[0] / h
    return PeriodicField(a, out.b, f.parity)


def multiply(f: PeriodicField, g: PeriodicField, M: int | None = None) -> PeriodicField:
    """Pointwise product on the collocation grid, truncated to N modes."""
    f._check(g)
    M = collocation_size(f.N) if M is None else M
    fg, gg = f.to_grid(M), g.to_grid(M)
    scale = np.max(np.abs(fg)) * np.max(np.abs(gg))
    return PeriodicField.from_grid(fg * gg, f.N, product_parity(f.parity, g.parity), scale)


def mean(f: PeriodicField) -> float:
    return f.mean()


def evaluate(f: PeriodicField, x):
    return f.evaluate(x)


def compose_pointwise(fn: Callable, *fields: PeriodicField, parity: str | None = None,
                      M: int | None = None) -> PeriodicField:
    """Evaluate ``fn`` on collocation values of ``fields`` and re-transform.

    Output parity defaults to even when every input is even, otherwise none.
    """
    if not fields:
        raise ValueError("compose_pointwise needs at least one field")
    N = fields[0].N
    for f in fields[1:]:
        fields[0]._check(f)
    M = collocation_size(N) if M is None else M
    grids = [f.to_grid(M) for f in fields]
    with np.errstate(all="ignore"):
        values = np.asarray(fn(*grids), dtype=float)
    if values.shape != (M,):
        values = np.broadcast_to(values, (M,)).copy()
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise GridEvaluationError(f"function undefined at collocation index {bad[0]}", int(bad[0]))
    if parity is None:
        parity = "even" if all(f.parity == "even" for f in fields) else "none"
    scale = max(np.max(np.abs(gr)) for gr in grids)
    return PeriodicField.from_grid(values, N, parity, scale)


def grid_points(M):
    return 2.0 * np.pi * np.arange(M) / M
