"""Trace primary branches for the first few modes and write them as CSV.

    python scripts/primary_branches.py --gamma 0.5 --modes 1 2 3 --steps 60 --out runs/primary
"""

import argparse
import os
from dataclasses import asdict, dataclass, field

from hydroelastic.continuation import export_branch, trace_primary
from hydroelastic.elasticity import quadratic_model
from hydroelastic.spectral import StripGeometry


@dataclass
class PrimaryConfig:
    h: float = 1.0
    g: float = 1.0
    N: int = 32
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 0.0
    modes: list = field(default_factory=lambda: [1, 2])
    signs: str = "+-"
    ds: float = 5e-3
    steps: int = 40
    out: str = "runs/primary"


def run(cfg: PrimaryConfig):
    geom = StripGeometry(cfg.h, cfg.g, cfg.N)
    model = quadratic_model(cfg.alpha, cfg.beta)
    os.makedirs(cfg.out, exist_ok=True)
    for n in cfg.modes:
        for sign in cfg.signs:
            br = trace_primary(n, sign, cfg.gamma, model, geom, ds=cfg.ds, n_steps=cfg.steps)
            path = os.path.join(cfg.out, f"{br.id}.csv")
            export_branch(br, path, geom, model, config=asdict(cfg), status=br.meta["status"])
            last = br.points[-1]
            print(f"{br.label:>16}  points={len(br):3d}  lambda {br.points[0].state.lam:+.6f} -> "
                  f"{last.state.lam:+.6f}  amplitude={last.amplitude:.4f}  {br.meta['status']}")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    d = PrimaryConfig()
    for name in ("h", "g", "alpha", "beta", "gamma", "ds"):
        p.add_argument(f"--{name}", type=float, default=getattr(d, name))
    p.add_argument("--N", type=int, default=d.N)
    p.add_argument("--steps", type=int, default=d.steps)
    p.add_argument("--modes", type=int, nargs="+", default=d.modes)
    p.add_argument("--signs", default=d.signs)
    p.add_argument("--out", default=d.out)
    run(PrimaryConfig(**vars(p.parse_args())))


if __name__ == "__main__":
    main()
