"""Flow beneath a traced wave: stream function, critical layer, stagnation points.

    python scripts/flow_field.py --gamma -2 --sign - --steps 30 --out runs/flow
"""

import argparse
import os
from dataclasses import dataclass

import numpy as np

from hydroelastic.continuation import trace_primary
from hydroelastic.elasticity import quadratic_model
from hydroelastic.flowfield import bernoulli_residual, critical_layers, export_field, reconstruct
from hydroelastic.spectral import StripGeometry


@dataclass
class FlowConfig:
    h: float = 1.0
    g: float = 1.0
    N: int = 16
    n: int = 1
    sign: str = "-"
    gamma: float = -2.0
    ds: float = 5e-3
    steps: int = 30
    n_y: int = 65
    out: str = "runs/flow"


def run(cfg: FlowConfig):
    geom = StripGeometry(cfg.h, cfg.g, cfg.N)
    model = quadratic_model(1.0, 1.0)
    br = trace_primary(cfg.n, cfg.sign, cfg.gamma, model, geom, ds=cfg.ds, n_steps=cfg.steps)
    state = br.points[-1].state
    f = reconstruct(state, model, geom, n_y=cfg.n_y)
    rep = critical_layers(f, state)
    os.makedirs(cfg.out, exist_ok=True)
    export_field(f, cfg.out, metadata={"config": vars(cfg)})
    print(f"amplitude {br.points[-1].amplitude:.4f}, lambda {state.lam:+.6f}, m {f.m:+.6f}, Q {f.Q:.6f}")
    print(f"surface |psi| max {np.max(np.abs(f.psi[-1])):.1e}, "
          f"Bernoulli residual max {np.max(np.abs(bernoulli_residual(state, model, geom, f))):.1e}")
    if rep.critical_points:
        Y = np.array([p.Y for p in rep.critical_points])
        print(f"critical layer: {len(Y)} points, height {Y.min():.4f}..{Y.max():.4f}")
    for p in rep.stagnation_points:
        print(f"stagnation point at X={p.X:.4f}, Y={p.Y:.4f}")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    d = FlowConfig()
    for name in ("h", "g", "gamma", "ds"):
        p.add_argument(f"--{name}", type=float, default=getattr(d, name))
    for name in ("N", "n", "steps", "n_y"):
        p.add_argument(f"--{name}", type=int, default=getattr(d, name))
    p.add_argument("--sign", default=d.sign)
    p.add_argument("--out", default=d.out)
    run(FlowConfig(**vars(p.parse_args())))


if __name__ == "__main__":
    main()
