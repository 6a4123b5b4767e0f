"""Newton corrector, pseudo-arclength continuation and branch switching.

A branch is traced in the extended unknown ``X = (theta, a_1..a_N, lambda)``
at fixed vorticity.  Arclength is the cumulative Euclidean chord length in X.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .bifurcation import (
    classify_kernel,
    lambda_star,
    resonant_gamma,
    sign_label,
    sign_value,
)
from .elasticity import DegenerateProfileError
from .residual import SurfaceState, fd_jacobian, residual_vector
from .spectral import PeriodicField, hilbert_strip

log = logging.getLogger(__name__)


class NewtonError(RuntimeError):
    """The corrector failed to converge."""


class SelfIntersectionError(RuntimeError):
    """The surface curve x -> (x + C_h(w), h + w) is not injective on the grid."""


def default_tol(lam):
    return 1e-10 * (1.0 + lam ** 2)


def default_ds(lam_star):
    return 1e-3 * max(1.0, abs(lam_star))


@dataclass(frozen=True)
class ArclengthConstraint:
    """<X - origin, tangent> = ds, with ``tangent`` a unit vector in X space."""

    origin: np.ndarray
    tangent: np.ndarray
    ds: float

    def __call__(self, X):
        return float(self.tangent @ (X - self.origin) - self.ds)


@dataclass
class NewtonInfo:
    iterations: int
    residuals: list
    condition: float
    jacobian: np.ndarray | None = None


def _split(X):
    return X[:-1], float(X[-1])


def state_from_extended(X, gamma):
    u, lam = _split(np.asarray(X, dtype=float))
    return SurfaceState.from_vector(u, lam, gamma)


def extended_vector(state: SurfaceState):
    return np.append(state.vector(), state.lam)


def extended_jacobian(X, gamma, model, geom):
    """FD Jacobian of the residual vector with respect to (theta, a, lambda)."""

    def R(Y):
        u, lam = _split(Y)
        return residual_vector(u, lam, gamma, model, geom)

    return fd_jacobian(R, X)


def newton_correct(guess: SurfaceState, model, geom, constraint: ArclengthConstraint | None = None,
                   tol=None, max_iter=25, max_halvings=8, full_output=False):
    """Damped Newton iteration on F = 0.

    Without ``constraint`` lambda stays at ``guess.lam``.  With one, lambda is
    an unknown and the arclength equation closes the system.
    """
    gamma = guess.gamma
    tol = default_tol(guess.lam) if tol is None else tol
    X = extended_vector(guess)

    def G(X):
        u, lam = _split(X)
        r = residual_vector(u, lam, gamma, model, geom)
        if constraint is not None:
            r = np.append(r, constraint(X))
        return r

    def measure(r):
        return float(np.max(np.abs(r))) if r.size else 0.0

    try:
        r = G(X)
    except DegenerateProfileError as exc:
        raise NewtonError(f"degenerate initial guess: {exc}") from exc
    history = [measure(r)]
    J = None
    for it in range(max_iter + 1):
        if history[-1] <= tol:
            break
        if it == max_iter:
            raise NewtonError(f"no convergence in {max_iter} iterations (residual {history[-1]:.3e})")
        try:
            Jr = extended_jacobian(X, gamma, model, geom)
        except DegenerateProfileError as exc:
            raise NewtonError(f"degenerate profile while probing: {exc}") from exc
        if constraint is None:
            J = Jr[:, :-1]
        else:
            J = np.vstack([Jr, constraint.tangent])
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise NewtonError("singular Newton system") from exc
        if constraint is None:
            step = np.append(step, 0.0)
        scale = 1.0
        for _ in range(max_halvings + 1):
            trial = X + scale * step
            try:
                r_trial = G(trial)
            except DegenerateProfileError:
                r_trial = None
            if r_trial is not None and measure(r_trial) < history[-1]:
                break
            scale *= 0.5
        else:
            raise NewtonError(f"damping failed after {max_halvings} halvings (residual {history[-1]:.3e})")
        X, r = trial, r_trial
        history.append(measure(r))

    state = state_from_extended(X, gamma)
    if not full_output:
        return state
    cond = float(np.linalg.cond(J)) if J is not None else 1.0
    return state, NewtonInfo(len(history) - 1, history, cond, J)


# branches ----------------------------------------------------------------------

@dataclass
class BranchPoint:
    state: SurfaceState
    arclength: float
    residual_norm: float
    amplitude: float
    dominant_modes: list

    @property
    def X(self):
        return extended_vector(self.state)


@dataclass
class Branch:
    id: str
    kind: str  # "trivial", "primary" or "secondary"
    gamma: float
    n: int | None = None
    sign: str | None = None
    points: list = field(default_factory=list)
    parent: tuple | None = None
    meta: dict = field(default_factory=dict)

    @property
    def label(self):
        if self.kind == "trivial":
            return "trivial"
        return f"{self.kind}({self.n},{self.sign})"

    def __len__(self):
        return len(self.points)

    def coefficients(self):
        return np.array([p.state.w.a[1:] for p in self.points]).reshape(len(self.points), -1)

    def arclengths(self):
        return np.array([p.arclength for p in self.points])

    def lambdas(self):
        return np.array([p.state.lam for p in self.points])


def make_point(state: SurfaceState, s, residual_norm, geom, n_dominant=3):
    a = np.abs(state.w.a[1:])
    order = np.argsort(-a, kind="stable")[:n_dominant]
    return BranchPoint(
        state=state,
        arclength=float(s),
        residual_norm=float(residual_norm),
        amplitude=float(np.max(np.abs(state.w.to_grid(geom.M)))),
        dominant_modes=[(int(k + 1), float(a[k])) for k in order],
    )


def residual_norm(state, model, geom):
    return float(np.max(np.abs(residual_vector(state.vector(), state.lam, state.gamma, model, geom))))


def check_injective(state: SurfaceState, geom):
    """Raise if x + C_h(w)(x) fails to increase strictly over the grid."""
    M = geom.M
    x = 2.0 * np.pi * np.arange(M + 1) / M
    u = x + np.append(hilbert_strip(state.w, geom.h).to_grid(M), 0.0)
    u[-1] = u[0] + 2.0 * np.pi
    if np.any(np.diff(u) <= 0.0):
        raise SelfIntersectionError("surface profile folds over itself")


def bordered_determinant(X, tangent, gamma, model, geom):
    """Sign and log|det| of the Jacobian bordered with the tangent row."""
    J = np.vstack([extended_jacobian(X, gamma, model, geom), tangent])
    sign, logdet = np.linalg.slogdet(J)
    return float(sign), float(logdet)


def _unit(v):
    return v / np.linalg.norm(v)


def _correct_step(X0, tangent, ds, gamma, model, geom, tol, max_iter):
    guess = state_from_extended(X0 + ds * tangent, gamma)
    cons = ArclengthConstraint(X0, tangent, ds)
    state = newton_correct(guess, model, geom, constraint=cons, tol=tol, max_iter=max_iter)
    check_injective(state, geom)
    return state


def continue_branch(branch: Branch, model, geom, ds, n_steps, tol=None, max_iter=25,
                    monitor=False, max_step_halvings=6, stop=None):
    """Extend ``branch`` (at least two points) by secant pseudo-arclength steps.

    With ``monitor`` the bordered-Jacobian determinant sign is stored in
    ``branch.meta['det_signs']`` for every new point.  ``stop(branch)`` may
    return True to end the trace early.  Failures end the trace and are
    recorded in ``branch.meta['status']``.
    """
    gamma = branch.gamma
    if monitor:
        branch.meta.setdefault("det_signs", [None] * len(branch.points))
    for _ in range(n_steps):
        X1 = branch.points[-1].X
        X0 = branch.points[-2].X
        tangent = _unit(X1 - X0)
        step = ds
        tol_k = default_tol(X1[-1]) if tol is None else tol
        for attempt in range(max_step_halvings + 1):
            try:
                state = _correct_step(X1, tangent, step, gamma, model, geom, tol_k, max_iter)
                break
            except SelfIntersectionError as exc:
                branch.meta["status"] = f"aborted: {exc}"
                return branch
            except NewtonError as exc:
                log.debug("step %.3e failed: %s", step, exc)
                step *= 0.5
        else:
            branch.meta["status"] = f"aborted: Newton failed after {max_step_halvings} step halvings"
            return branch
        X = extended_vector(state)
        s = branch.points[-1].arclength + float(np.linalg.norm(X - X1))
        branch.points.append(make_point(state, s, residual_norm(state, model, geom), geom))
        if monitor:
            sgn, _ = bordered_determinant(X, _unit(X - X1), gamma, model, geom)
            branch.meta["det_signs"].append(sgn)
        if stop is not None and stop(branch):
            break
    branch.meta.setdefault("status", "ok")
    return branch


def trace_primary(n, sign, gamma, model, geom, ds=None, n_steps=200, tol=None, max_iter=25,
                  monitor=False, stop=None, branch_id=None):
    """Primary branch bifurcating from the flat state at lambda*_{n,sign}.

    The first point is the flat state itself at arclength 0; the second is
    obtained by fixing the projection onto cos(nx) at ``ds``.
    """
    lam0 = float(lambda_star(n, sign, gamma, model, geom))
    kernel = classify_kernel(lam0, gamma, model, geom, geom.N)
    if kernel.kind != "simple" or kernel.modes != (n,):
        raise ValueError(f"expected a simple kernel spanned by cos({n}x), found {kernel}")
    ds = default_ds(lam0) if ds is None else ds
    tol_k = default_tol(lam0) if tol is None else tol
    branch = Branch(
        id=branch_id or f"primary_n{n}{'p' if sign_value(sign) > 0 else 'm'}",
        kind="primary", gamma=float(gamma), n=int(n), sign=sign_label(sign),
        meta={"lambda_star": lam0, "ds": ds},
    )
    trivial = SurfaceState.trivial(lam0, gamma, geom.N)
    branch.points.append(make_point(trivial, 0.0, residual_norm(trivial, model, geom), geom))
    X0 = extended_vector(trivial)
    kernel_dir = np.zeros_like(X0)
    kernel_dir[n] = 1.0
    try:
        state = _correct_step(X0, kernel_dir, ds, gamma, model, geom, tol_k, max_iter)
    except (NewtonError, SelfIntersectionError) as exc:
        branch.meta["status"] = f"aborted: {exc}"
        return branch
    X = extended_vector(state)
    branch.points.append(make_point(state, np.linalg.norm(X - X0), residual_norm(state, model, geom), geom))
    if monitor:
        sgn, _ = bordered_determinant(X, _unit(X - X0), gamma, model, geom)
        branch.meta["det_signs"] = [None, sgn]
    return continue_branch(branch, model, geom, ds, n_steps - 1, tol=tol, max_iter=max_iter,
                           monitor=monitor, stop=stop)


# secondary bifurcation -----------------------------------------------------------

def _locate_sign_change(X0, X1, gamma, model, geom, tol, max_iter, max_bisect=40, rel_width=1e-8):
    """Bisect in arclength between two branch points whose bordered determinants differ in sign.

    Returns ``(state, tangent, logdet, width)`` for the bracket end nearer the
    sign change, or None when the signs agree with a common bordering row.
    Newton may stall very close to the singular point; bisection then stops
    at the last bracket it could resolve.
    """
    tangent = _unit(X1 - X0)
    length = float(tangent @ (X1 - X0))
    sign0, log0 = bordered_determinant(X0, tangent, gamma, model, geom)
    sign1, log1 = bordered_determinant(X1, tangent, gamma, model, geom)
    if sign0 == sign1:
        return None
    lo = (0.0, X0, log0)
    hi = (length, X1, log1)
    for _ in range(max_bisect):
        if hi[0] - lo[0] <= rel_width * length:
            break
        sm = 0.5 * (lo[0] + hi[0])
        try:
            state = _correct_step(X0, tangent, sm, gamma, model, geom, tol, max_iter)
        except NewtonError as exc:
            log.debug("bisection stopped at width %.3e: %s", hi[0] - lo[0], exc)
            break
        Xm = extended_vector(state)
        sgn, logdet = bordered_determinant(Xm, tangent, gamma, model, geom)
        if sgn == sign0:
            lo = (sm, Xm, logdet)
        else:
            hi = (sm, Xm, logdet)
    best = lo if lo[2] <= hi[2] else hi
    return state_from_extended(best[1], gamma), tangent, best[2], (hi[0] - lo[0]) / length


def branch_direction(X, tangent, gamma, model, geom):
    """Unit null direction of the bordered Jacobian, orthogonal to ``tangent``.

    Oriented so that its largest component is positive.
    """
    A = np.vstack([extended_jacobian(X, gamma, model, geom), tangent])
    _, svals, vt = np.linalg.svd(A)
    phi = vt[-1]
    phi = phi - (phi @ tangent) * tangent
    phi = _unit(phi)
    if phi[np.argmax(np.abs(phi))] < 0:
        phi = -phi
    return phi, float(svals[-1] / svals[0])


def mode_ratio(state, n):
    a_n = abs(state.w.a[n])
    a_2n = abs(state.w.a[2 * n]) if 2 * n <= state.N else 0.0
    return np.inf if a_n == 0.0 else a_2n / a_n


def trace_secondary(n, sign, delta, model, geom, ds=None, n_steps=200, secondary_steps=20,
                    tol=None, max_iter=25, delta_max=None):
    """Primary branch near the n:2n resonance and the branch crossing it.

    The primary branch is traced at gamma = gamma* + delta, where gamma* is the
    resonant vorticity for ``sign``.  The first sign change of the bordered
    determinant is refined by bisection; the crossing branch is then followed
    in both directions from that point.  Returns ``(primary, secondary)``;
    ``secondary.meta['found']`` is False (and the branch empty) when no sign
    change occurs within ``n_steps``.
    """
    gstar = resonant_gamma(n, 2 * n, sign, model, geom)
    delta_max = 0.1 * abs(gstar) if delta_max is None else delta_max
    if not 0.0 < abs(delta) <= delta_max:
        raise ValueError(f"|delta| must lie in (0, {delta_max:.4g}], got {delta}")
    lam_res = float(lambda_star(n, sign, gstar, model, geom))
    kernel = classify_kernel(lam_res, gstar, model, geom, geom.N)
    if kernel.kind != "double" or kernel.modes != (n, 2 * n):
        raise ValueError(f"no double kernel (n, 2n) at the resonance: found {kernel}")
    gamma = gstar + delta
    lam0 = float(lambda_star(n, sign, gamma, model, geom))
    ds = default_ds(lam0) if ds is None else ds
    tag = f"n{n}{'p' if sign_value(sign) > 0 else 'm'}"

    def crossed(br):
        signs = br.meta["det_signs"]
        return len(signs) >= 3 and signs[-1] is not None and signs[-2] is not None and signs[-1] != signs[-2]

    primary = trace_primary(n, sign, gamma, model, geom, ds=ds, n_steps=n_steps, tol=tol,
                            max_iter=max_iter, monitor=True, stop=crossed,
                            branch_id=f"primary_{tag}")
    primary.meta.update({"gamma_star": gstar, "delta": delta})
    secondary = Branch(id=f"secondary_{tag}", kind="secondary", gamma=float(gamma), n=int(n),
                       sign=sign_label(sign), meta={"found": False, "gamma_star": gstar, "delta": delta})
    if not crossed(primary):
        secondary.meta["reason"] = "no sign change of the bordered determinant"
        return primary, secondary

    tol_k = default_tol(lam0) if tol is None else tol
    last = len(primary.points) - 1
    # a point landing almost on the branch point has an unreliable sign;
    # widen the bracket by one step before giving up
    for k in (last - 1, last - 2):
        if k < 1:
            located = None
            break
        X0, X1 = primary.points[k].X, primary.points[last].X
        located = _locate_sign_change(X0, X1, gamma, model, geom, tol_k, max_iter)
        if located is not None:
            break
    if located is None:
        secondary.meta["reason"] = "sign change not reproduced with a common bordering row"
        return primary, secondary
    bif_state, tangent, logdet, width = located
    Xb = extended_vector(bif_state)
    phi, sv_ratio = branch_direction(Xb, tangent, gamma, model, geom)

    step0 = ds / 10.0
    halves = []
    for direction in (1.0, -1.0):
        half = Branch(id="half", kind="secondary", gamma=float(gamma))
        half.points.append(make_point(bif_state, 0.0, residual_norm(bif_state, model, geom), geom))
        try:
            st = _correct_step(Xb, direction * phi, step0, gamma, model, geom, tol_k, max_iter)
        except (NewtonError, SelfIntersectionError) as exc:
            half.meta["status"] = f"aborted: {exc}"
            halves.append(half)
            continue
        X = extended_vector(st)
        half.points.append(make_point(st, np.linalg.norm(X - Xb), residual_norm(st, model, geom), geom))
        continue_branch(half, model, geom, ds, secondary_steps, tol=tol, max_iter=max_iter)
        halves.append(half)

    plus, minus = halves
    b = make_point(bif_state, 0.0, residual_norm(bif_state, model, geom), geom)
    mirrored = []
    for p in reversed(minus.points[1:]):
        mirrored.append(BranchPoint(p.state, -p.arclength, p.residual_norm, p.amplitude, p.dominant_modes))
    secondary.points = mirrored + [b] + plus.points[1:]

    ref = _correct_step(Xb, tangent, step0, gamma, model, geom, tol_k, max_iter)
    first = plus.points[1].state if len(plus.points) > 1 else None
    secondary.parent = (primary.id, k)
    secondary.meta.update({
        "found": True,
        "parent_arclength": primary.points[k].arclength + float(np.linalg.norm(Xb - X0)),
        "intersection_lambda": bif_state.lam,
        "intersection_amplitude": b.amplitude,
        "bordered_logdet": logdet,
        "bisection_width": width,
        "singular_value_ratio": sv_ratio,
        "branch_point_index": len(mirrored),
        "primary_ratio_at_equal_arclength": float(mode_ratio(ref, n)),
        "secondary_first_ratio": float(mode_ratio(first, n)) if first is not None else None,
        "status": "; ".join(h.meta.get("status", "ok") for h in halves),
    })
    return primary, secondary


# file i/o -------------------------------------------------------------------------

def _fmt(x):
    return format(float(x), ".17g")


def atomic_write_text(path, text):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def branch_csv_text(branch: Branch, N):
    header = ["s", "lambda", "gamma", "theta", "residual_norm", "amplitude"] + [f"a_{k}" for k in range(1, N + 1)]
    lines = [",".join(header)]
    for p in branch.points:
        st = p.state
        row = [p.arclength, st.lam, st.gamma, st.theta, p.residual_norm, p.amplitude, *st.w.a[1:]]
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def branch_metadata(branch: Branch, geom, model, config=None, status=None):
    meta = {
        "branch": {"id": branch.id, "kind": branch.kind, "label": branch.label, "n": branch.n,
                   "sign": branch.sign, "gamma": branch.gamma,
                   "parent": list(branch.parent) if branch.parent else None,
                   "points": len(branch.points)},
        "geometry": {"h": geom.h, "g": geom.g, "N": geom.N, "M": geom.M},
        "model": model.describe(),
        "diagnostics": {k: v for k, v in branch.meta.items() if k != "det_signs"},
        "tool": {"name": "hydroelastic", "version": __version__},
        "config": config,
        "status": status or branch.meta.get("status", "ok"),
    }
    return _jsonable(meta)


def export_branch(branch: Branch, path, geom, model=None, config=None, status=None):
    """Write ``path`` (CSV) and ``path`` with suffix .json (metadata sidecar)."""
    path = os.fspath(path)
    atomic_write_text(path, branch_csv_text(branch, geom.N))
    if model is not None:
        meta = branch_metadata(branch, geom, model, config, status)
        atomic_write_text(os.path.splitext(path)[0] + ".json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def load_branch(path):
    """Read a branch CSV; metadata is taken from the sidecar when present."""
    path = os.fspath(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    if header[:6] != ["s", "lambda", "gamma", "theta", "residual_norm", "amplitude"]:
        raise ValueError(f"{path}: not a branch file")
    N = len(header) - 6
    sidecar = os.path.splitext(path)[0] + ".json"
    meta = {}
    if os.path.exists(sidecar):
        with open(sidecar) as fh:
            meta = json.load(fh)
    info = meta.get("branch", {})
    gamma = rows[0][2] if rows else info.get("gamma", 0.0)
    branch = Branch(id=info.get("id", os.path.basename(path)), kind=info.get("kind", "primary"),
                    gamma=float(gamma), n=info.get("n"), sign=info.get("sign"),
                    parent=tuple(info["parent"]) if info.get("parent") else None,
                    meta=meta.get("diagnostics", {}))
    for row in rows:
        a = np.zeros(N + 1)
        a[1:] = row[6:]
        st = SurfaceState(row[3], PeriodicField.cosine(a), row[1], row[2])
        order = np.argsort(-np.abs(a[1:]), kind="stable")[:3]
        branch.points.append(BranchPoint(st, row[0], row[4], row[5],
                                         [(int(k + 1), float(abs(a[k + 1]))) for k in order]))
    return branch, meta
