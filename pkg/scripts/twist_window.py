"""Twist constants per j and where the tan-argument leaves [pi/4, pi/2)."""
from __future__ import annotations

import argparse
import math
from dataclasses import dataclass

import numpy as np

from bergvar.curvature import griffiths_check, m_matrix
from bergvar.metric import TwistDomainError, choose_twist_constants, make_defining_function, ode_residual


@dataclass
class Config:
    js: tuple[int, ...] = (4, 6, 9, 16)
    probes: int = 200


def main(cfg: Config) -> None:
    rho = make_defining_function("unit-disc", 0, 1)
    print("j,delta,C1*delta,rho_upper,theta_max,window_probes,psd_probes,max_ode_residual")
    for j in cfg.js:
        p = choose_twist_constants(j)
        rs = np.linspace(-1.0, 0.0, cfg.probes, endpoint=False)
        inside = rs[rs < p.admissible_upper()]
        res = max((abs(ode_residual(r, p)) for r in inside), default=math.nan)
        psd = 0
        for r in rs:
            try:
                psd += griffiths_check(m_matrix(rho, p, np.zeros(0), [math.sqrt(1 + r)])).ok
            except TwistDomainError:
                pass
        print(f"{j},{p.delta:.6g},{p.C1 * p.delta:.6g},{p.admissible_upper():.6g},"
              f"{float(p.argument(rs).max()):.4g},{inside.size},{psd},{res:.2e}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--j", type=int, nargs="+", default=list(Config.js))
    ap.add_argument("--probes", type=int, default=Config.probes)
    a = ap.parse_args()
    main(Config(tuple(a.j), a.probes))
