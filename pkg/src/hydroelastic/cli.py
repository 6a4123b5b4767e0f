"""Command-line entry point: ``hydroelastic <command> [--config run.json] [flags]``.

Exit codes: 0 success (including a benign secondary-branch miss), 2 bad
configuration, 3 numerical failure, 4 violated invariant.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import os
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .bifurcation import (
    KernelInconsistencyError,
    PrecisionError,
    gamma_star_squared,
    lambda_star,
)
from .continuation import (
    NewtonError,
    atomic_write_text,
    default_tol,
    export_branch,
    load_branch,
    residual_norm,
    trace_primary,
    trace_secondary,
)
from .elasticity import DegenerateProfileError, EnergyHypothesisError, check_hypotheses, model_from_config
from .flowfield import DegenerateMapError, critical_layers, export_field, reconstruct
from .residual import dispersion
from .spectral import StripGeometry

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_INVARIANT = 0, 2, 3, 4

log = logging.getLogger("hydroelastic")


class ConfigError(ValueError):
    pass


class InvariantError(RuntimeError):
    pass


@dataclass
class GeometryConfig:
    h: float = 1.0
    g: float = 1.0
    N: int = 32
    M: int | None = None


@dataclass
class ModelConfig:
    name: str = "quadratic"
    params: dict = field(default_factory=lambda: {"alpha": 1.0, "beta": 1.0})


@dataclass
class TaskConfig:
    n: int = 1
    sign: str = "+"
    gamma: float = 0.0
    delta: float | None = None
    ds: float | None = None
    n_steps: int = 200
    secondary_steps: int = 20
    tol: float | None = None
    n_values: list | None = None
    lambda_values: list | None = None
    gamma_values: list | None = None
    n_max: int = 8
    branch: str | None = None
    point: int = -1
    n_y: int = 129


@dataclass
class RunConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    task: TaskConfig = field(default_factory=TaskConfig)
    out: str = "out"

    def to_dict(self):
        return dataclasses.asdict(self)

    def geometry_obj(self):
        g = self.geometry
        try:
            return StripGeometry(g.h, g.g, g.N, g.M)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"geometry: {exc}") from exc

    def model_obj(self):
        try:
            return model_from_config({"name": self.model.name, **self.model.params})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"model: {exc}") from exc


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    return cls(**data)


def config_from_dict(data: dict) -> RunConfig:
    data = dict(data)
    unknown = sorted(set(data) - {"geometry", "model", "task", "out"})
    if unknown:
        raise ConfigError(f"unknown top-level keys {unknown}")
    cfg = RunConfig(
        geometry=_build(GeometryConfig, data.get("geometry", {}), "geometry"),
        model=_build(ModelConfig, data.get("model", {}), "model"),
        task=_build(TaskConfig, data.get("task", {}), "task"),
        out=data.get("out", "out"),
    )
    validate(cfg)
    return cfg


def _positive(value, name, integer=False):
    kind = int if integer else (int, float)
    if isinstance(value, bool) or not isinstance(value, kind) or not np.isfinite(value) or value <= 0:
        raise ConfigError(f"{name} must be a positive {'integer' if integer else 'number'}, got {value!r}")


def validate(cfg: RunConfig):
    g, t = cfg.geometry, cfg.task
    _positive(g.h, "geometry.h")
    _positive(g.g, "geometry.g")
    _positive(g.N, "geometry.N", integer=True)
    if g.M is not None:
        _positive(g.M, "geometry.M", integer=True)
    if not isinstance(cfg.model.params, dict):
        raise ConfigError("model.params must be an object")
    _positive(t.n, "task.n", integer=True)
    if t.sign not in ("+", "-"):
        raise ConfigError(f"task.sign must be '+' or '-', got {t.sign!r}")
    for name in ("gamma", "delta"):
        v = getattr(t, name)
        if v is not None and (isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v)):
            raise ConfigError(f"task.{name} must be a finite number")
    for name in ("ds", "tol"):
        if getattr(t, name) is not None:
            _positive(getattr(t, name), f"task.{name}")
    _positive(t.n_steps, "task.n_steps", integer=True)
    _positive(t.secondary_steps, "task.secondary_steps", integer=True)
    _positive(t.n_max, "task.n_max", integer=True)
    _positive(t.n_y, "task.n_y", integer=True)
    for name in ("n_values", "lambda_values", "gamma_values"):
        v = getattr(t, name)
        if v is not None and not isinstance(v, list):
            raise ConfigError(f"task.{name} must be a list")
    if not isinstance(cfg.out, str) or not cfg.out:
        raise ConfigError("out must be a non-empty path")
    cfg.geometry_obj()
    cfg.model_obj()


def load_config(path, overrides: dict) -> RunConfig:
    data = {}
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    data.setdefault("task", {})
    data["task"] = dict(data["task"])
    for key, value in overrides.items():
        if key == "out":
            data["out"] = value
        else:
            data["task"][key] = value
    return config_from_dict(data)


# output helpers ---------------------------------------------------------------------

def _fmt(v):
    return format(float(v), ".17g")


def write_table(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    atomic_write_text(path, buf.getvalue())
    return path


def write_run_metadata(cfg, command, status, extra=None):
    meta = {"command": command, "status": status, "config": cfg.to_dict(),
            "tool": {"name": "hydroelastic", "version": __version__}, **(extra or {})}
    path = os.path.join(cfg.out, f"{command}.json")
    atomic_write_text(path, json.dumps(meta, indent=2, sort_keys=True, default=float) + "\n")
    return path


# commands ---------------------------------------------------------------------------

def cmd_dispersion(cfg):
    geom, model, t = cfg.geometry_obj(), cfg.model_obj(), cfg.task
    ns = t.n_values if t.n_values is not None else list(range(1, t.n_max + 1))
    lams = t.lambda_values if t.lambda_values is not None else list(np.linspace(-4.0, 4.0, 9))
    gams = t.gamma_values if t.gamma_values is not None else [t.gamma]
    rows = [(str(int(n)), lam, gam, dispersion(int(n), lam, gam, model, geom))
            for n in ns for gam in gams for lam in lams]
    write_table(os.path.join(cfg.out, "dispersion.csv"), ["n", "lambda", "gamma", "D"], rows)
    write_run_metadata(cfg, "dispersion", "ok")
    return EXIT_OK


def cmd_bifpoints(cfg):
    geom, model, t = cfg.geometry_obj(), cfg.model_obj(), cfg.task
    gams = t.gamma_values if t.gamma_values is not None else [t.gamma]
    rows = []
    for gam in gams:
        for n in range(1, t.n_max + 1):
            for s in ("+", "-"):
                lam = float(lambda_star(n, s, gam, model, geom))
                rows.append((str(n), s, gam, lam, dispersion(n, lam, gam, model, geom)))
    write_table(os.path.join(cfg.out, "bifpoints.csv"), ["n", "sign", "gamma", "lambda_star", "D"], rows)
    write_run_metadata(cfg, "bifpoints", "ok")
    return EXIT_OK


def cmd_resonance(cfg):
    geom, model, t = cfg.geometry_obj(), cfg.model_obj(), cfg.task
    rows = []
    for n in range(1, t.n_max + 1):
        for m in range(n + 1, 2 * t.n_max + 1):
            g2 = float(gamma_star_squared(n, m, model, geom))
            if g2 <= 0.0:
                raise InvariantError(f"non-positive resonant vorticity squared for ({n},{m}): {g2}")
            rows.append((str(n), str(m), g2, np.sqrt(g2)))
    write_table(os.path.join(cfg.out, "resonance.csv"), ["n", "m", "gamma_star_squared", "gamma_star"], rows)
    write_run_metadata(cfg, "resonance", "ok")
    return EXIT_OK


def _check_branch(branch, tol_fn, model, geom):
    bad = [i for i, p in enumerate(branch.points)
           if residual_norm(p.state, model, geom) > tol_fn(p.state.lam)]
    if bad:
        raise InvariantError(f"branch {branch.id}: residual above tolerance at points {bad[:5]}")


def _tol_fn(cfg):
    return (lambda lam: cfg.task.tol) if cfg.task.tol is not None else default_tol


def cmd_trace(cfg):
    geom, model, t = cfg.geometry_obj(), cfg.model_obj(), cfg.task
    br = trace_primary(t.n, t.sign, t.gamma, model, geom, ds=t.ds, n_steps=t.n_steps, tol=t.tol)
    status = br.meta.get("status", "ok")
    failed = status != "ok"
    path = os.path.join(cfg.out, f"{br.id}.csv")
    export_branch(br, path, geom, model, cfg.to_dict(), status=("FAILED: " + status) if failed else status)
    _check_branch(br, _tol_fn(cfg), model, geom)
    log.info("wrote %d points to %s", len(br.points), path)
    return EXIT_NUMERICAL if failed else EXIT_OK


def cmd_wilton(cfg):
    geom, model, t = cfg.geometry_obj(), cfg.model_obj(), cfg.task
    if t.delta is None:
        raise ConfigError("wilton needs task.delta (or --delta)")
    primary, secondary = trace_secondary(t.n, t.sign, t.delta, model, geom, ds=t.ds, n_steps=t.n_steps,
                                         secondary_steps=t.secondary_steps, tol=t.tol)
    for br in (primary, secondary):
        export_branch(br, os.path.join(cfg.out, f"{br.id}.csv"), geom, model, cfg.to_dict())
    _check_branch(primary, _tol_fn(cfg), model, geom)
    if not secondary.meta.get("found"):
        log.info("no secondary bifurcation found: %s", secondary.meta.get("reason"))
    return EXIT_OK


def cmd_flow(cfg):
    geom, model, t = cfg.geometry_obj(), cfg.model_obj(), cfg.task
    if not t.branch:
        raise ConfigError("flow needs task.branch (or --branch)")
    try:
        branch, _ = load_branch(t.branch)
    except (OSError, ValueError, StopIteration) as exc:
        raise ConfigError(f"cannot read branch {t.branch}: {exc}") from exc
    if not branch.points:
        raise ConfigError(f"branch {t.branch} has no points")
    try:
        point = branch.points[t.point]
    except IndexError as exc:
        raise ConfigError(f"point {t.point} out of range for {len(branch.points)} points") from exc
    if point.state.N != geom.N:
        raise ConfigError(f"branch has N={point.state.N} but geometry.N={geom.N}")
    fld = reconstruct(point.state, model, geom, n_y=t.n_y)
    rep = critical_layers(fld, point.state)
    write_table(os.path.join(cfg.out, "critical_points.csv"), ["x", "y", "X", "Y"],
                [(p.x, p.y, p.X, p.Y) for p in rep.critical_points])
    write_table(os.path.join(cfg.out, "stagnation_points.csv"), ["x", "y", "X", "Y"],
                [(p.x, p.y, p.X, p.Y) for p in rep.stagnation_points])
    export_field(fld, cfg.out, metadata={"branch": t.branch, "point": t.point,
                                         "laminar_critical_depth": rep.laminar_critical_depth})
    write_run_metadata(cfg, "flow", "ok")
    return EXIT_OK


def cmd_check_energy(cfg):
    model_cfg = {"name": cfg.model.name, **cfg.model.params}
    try:
        model = model_from_config(model_cfg)
        rows = check_hypotheses(model)
    except EnergyHypothesisError as exc:
        write_run_metadata(cfg, "check-energy", f"FAILED: {exc}")
        raise InvariantError(str(exc)) from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model: {exc}") from exc
    write_table(os.path.join(cfg.out, "energy_check.csv"), ["check", "passed", "value"],
                [(name, "true" if ok else "false", v) for name, ok, v in rows])
    ok = all(r[1] for r in rows)
    write_run_metadata(cfg, "check-energy", "ok" if ok else "FAILED")
    return EXIT_OK if ok else EXIT_INVARIANT


COMMANDS = {
    "dispersion": cmd_dispersion,
    "bifpoints": cmd_bifpoints,
    "resonance": cmd_resonance,
    "trace": cmd_trace,
    "wilton": cmd_wilton,
    "flow": cmd_flow,
    "check-energy": cmd_check_energy,
}


def build_parser():
    p = argparse.ArgumentParser(prog="hydroelastic", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON run configuration")
        s.add_argument("--out", help="output directory")
        s.add_argument("--n", type=int)
        s.add_argument("--sign", choices=["+", "-"])
        s.add_argument("--gamma", type=float)
        s.add_argument("--delta", type=float)
        s.add_argument("--ds", type=float)
        s.add_argument("--steps", type=int, dest="n_steps")
        s.add_argument("--tol", type=float)
        if name == "flow":
            s.add_argument("--branch")
            s.add_argument("--point", type=int)
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    keys = ("out", "n", "sign", "gamma", "delta", "ds", "n_steps", "tol", "branch", "point")
    overrides = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    try:
        cfg = load_config(args.config, overrides)
        os.makedirs(cfg.out, exist_ok=True)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvariantError, KernelInconsistencyError) as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (NewtonError, DegenerateProfileError, DegenerateMapError, PrecisionError,
            FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        # precondition failures such as a non-simple kernel at the requested point
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
