"""Kernel diagonal of the Fock weight on growing discs, against 1/pi."""
from __future__ import annotations

import argparse
import math
from dataclasses import dataclass, field

from bergvar.geometry import disc_exhaustion
from bergvar.metric import make_weight
from bergvar.variation import ramadanov_domains


@dataclass
class Config:
    radii: list[float] = field(default_factory=lambda: [4, 6, 8, 10, 12, 14, 16, 18, 20])
    degree: int = 40
    z: complex = 0.0
    tol: float = 1e-10


def main(cfg: Config) -> int:
    rep = ramadanov_domains(disc_exhaustion(cfg.radii), make_weight("fock", 0, 1), [cfg.z], [1.0],
                            degree=cfg.degree, tol=cfg.tol, relative=False)
    print("radius,K,K-1/pi")
    for r, v in zip(cfg.radii, rep.values):
        print(f"{r},{float(v)!r},{v - 1 / math.pi:.3e}")
    print(f"monotone: {rep.verdict}  limit error: {abs(rep.limit - 1 / math.pi):.2e}")
    return 0 if rep.ok else 1


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--degree", type=int, default=Config.degree)
    ap.add_argument("--z", type=complex, default=Config.z)
    a = ap.parse_args()
    raise SystemExit(main(Config(degree=a.degree, z=a.z)))
