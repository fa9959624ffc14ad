"""Minimum Hessian eigenvalue of t -> log K_t(z, z) for the built-in one-parameter weights."""
from __future__ import annotations

import argparse
from dataclasses import dataclass

from bergvar.geometry import make_domain
from bergvar.metric import make_weight
from bergvar.variation import grid_points, kernel_variation


@dataclass
class Config:
    weights: tuple[str, ...] = ("product-gaussian", "shifted-gaussian", "modulated-gaussian")
    half_width: float = 0.5
    count: int = 9
    degree: int = 12
    z: complex = 0.0


def main(cfg: Config) -> int:
    disc = make_domain("polydisc", 1, radius=1.0)
    grid = grid_points(0.0, cfg.half_width, cfg.count)
    bad = 0
    print("weight,verdict,min_eig,min_circle_deficit")
    for name in cfg.weights:
        kw = {"a": 0.5, "b": 1.0} if name == "modulated-gaussian" else {}
        rep = kernel_variation(make_weight(name, 1, 1, **kw), disc, [cfg.z], [1.0], grid, degree=cfg.degree)
        bad += not rep.ok
        print(f"{name},{rep.verdict},{rep.min_eig:.6g},{rep.min_deficit:.3g}")
    return 1 if bad else 0


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=Config.count)
    ap.add_argument("--degree", type=int, default=Config.degree)
    a = ap.parse_args()
    raise SystemExit(main(Config(count=a.count, degree=a.degree)))
