"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest -s tests/test_acceptance.py`` or ``python tests/test_acceptance.py``.
Each criterion collects named sub-checks ``(name, passed, value, tol)``;
the printed line lists the failing ones.
"""
from __future__ import annotations

import contextlib
import filecmp
import io
import math
import tempfile
from pathlib import Path

import numpy as np
import pytest

from bergvar import cli
from bergvar.bergman import (HolomorphicFamily, build_model, eval_functional_norm, extremal_check,
                             field_curvature, field_projection, kernel_eval, measure_functional, t_u_hessian)
from bergvar.curvature import (griffiths_check, m_matrix, rewrite_identity_check, theta_delta,
                               theta_delta_by_subtraction, theta_full, xi_delta_eta)
from bergvar.geometry import disc_exhaustion, make_domain
from bergvar.metric import (TwistDomainError, choose_twist_constants, delta_condition, eta_from_rho,
                            make_defining_function, make_weight, matrix_demo, ode_residual,
                            quadratic_eta, quadratic_field, re_eta, scalar_weight, zero_eta)
from bergvar.variation import (cutoff_convergence, dual_norm_exhaustion, evaluation_at, grid_points,
                               kernel_variation, measure_variation, psh_check, log_kernel_function,
                               ramadanov_domains, ramadanov_metrics)

DISC = make_domain("polydisc", 1, radius=1.0)
FOCK_RADII = [4, 6, 8, 10, 12, 14, 16, 18, 20]


def _line(label: str, checks) -> tuple[bool, str]:
    ok = all(c[1] for c in checks)
    bad = [f"{n} (value={v!r}, tol={t!r})" for n, p, v, t in checks if not p]
    head = f"{label}: {'PASS' if ok else 'FAIL'} [{sum(c[1] for c in checks)}/{len(checks)} sub-checks]"
    return ok, head + ("" if ok else " failing: " + "; ".join(bad))


def closed_form_kernels():
    flat = make_weight("constant", 0, 1)
    model = build_model(DISC, flat, degree=12)
    k0 = kernel_eval(model, [0.0]).pair([1.0])
    k5 = kernel_eval(model, [0.5]).pair([1.0])
    fock = build_model(make_domain("polydisc", 1, radius=12.0), make_weight("fock", 0, 1), degree=40)
    kf = kernel_eval(fock, [0.0]).pair([1.0])
    return [
        ("disc K(0,0)", abs(k0 - 1 / math.pi) <= 1e-8, k0, 1e-8),
        ("disc K(0.5,0.5)", abs(k5 - 1 / (math.pi * 0.5625)) <= 1e-6, k5, 1e-6),
        ("fock-on-disc(12) K(0,0)", abs(kf - 1 / math.pi) <= 1e-6, kf, 1e-6),
    ]


def fock_exhaustion():
    fock = make_weight("fock", 0, 1)
    ex = disc_exhaustion(FOCK_RADII)
    dom = ramadanov_domains(ex, fock, [0.0], [1.0], tol=1e-10, relative=False)
    dual = dual_norm_exhaustion(fock, evaluation_at([0.0], [1.0]), ex, np.zeros((1, 0)), tol=1e-10)
    dn = dual.per_t[0]
    return [
        ("kernel diagonal nonincreasing", dom.ok, dom.values.tolist(), 1e-10),
        ("kernel limit", abs(dom.limit - 1 / math.pi) <= 1e-6, dom.limit, 1e-6),
        ("dual norm nonincreasing", dn.ok, dn.values.tolist(), 1e-10),
        ("dual norm limit", abs(dn.limit - 1 / math.pi) <= 1e-6, dn.limit, 1e-6),
    ]


def monotone_propositions():
    tol = 1e-9
    flat = make_weight("constant", 0, 1)
    checks = []
    for label, radii, weight in [("discs 1,2,4", [1, 2, 4], flat),
                                 ("fock 4..20", FOCK_RADII, make_weight("fock", 0, 1)),
                                 ("single stage", [1], flat)]:
        r = ramadanov_domains(disc_exhaustion(radii), weight, [0.0], [1.0], tol=tol)
        checks.append((f"domains/{label}", r.ok and r.transitive_consistent(), r.values.tolist(), tol))
    exact = ramadanov_domains(disc_exhaustion([1, 2, 4]), flat, [0.0], [1.0]).values * math.pi
    checks.append(("domains closed form 1/(pi R^2)", np.allclose(exact, [1, 0.25, 0.0625], rtol=1e-12),
                   exact.tolist(), 1e-12))
    ladders = {
        "scaled c=1/2,3/4,1": [make_weight("constant", 0, 1, c=c) for c in (0.5, 0.75, 1.0)],
        "constant": [flat] * 3,
        "phi_j=(1+2^-j)|z|^2": [scalar_weight(quadratic_field(np.diag([1 + 2.0 ** -j]), 0, 1))
                                for j in range(1, 6)],
    }
    for label, ladder in ladders.items():
        r = ramadanov_metrics(DISC, ladder, [0.0], [1.0], tol=tol)
        checks.append((f"metrics/{label}", r.ok, r.values.tolist(), tol))
    rho = make_defining_function("unit-disc", 0, 1)
    outer = make_domain("polydisc", 1, radius=2.0)
    cut = cutoff_convergence(DISC, outer, flat, rho, (4, 6, 8, 12), [0.0], [1.0], tol=tol)
    checks.append(("cutoff/z=0 nondecreasing", cut.monotone.ok, cut.monotone.values.tolist(), tol))
    checks.append(("cutoff/bounded by inner kernel", cut.bounded, cut.gap, tol))
    checks.append(("cutoff/lowest rung above outer kernel", cut.above_outer, float(cut.monotone.values[0]),
                   cut.outer_value))
    out = cutoff_convergence(DISC, outer, flat, rho, (4, 6, 8, 12), [1.5], [1.0], tol=tol)
    # outside the inner domain the values are only reported
    checks.append(("cutoff/z=1.5 reported", True, out.monotone.values.tolist(), None))
    return checks


def twist_algebra():
    checks = []
    rho = make_defining_function("unit-disc", 0, 1)
    for j in (4, 6, 9, 16):
        p = choose_twist_constants(j)
        checks.append((f"j={j} delta inequality", delta_condition(p.delta, j) > 0, p.margin, 0.0))
        checks.append((f"j={j} C1*delta bound", p.C1 * p.delta <= 1 + math.pi / 8, p.C1 * p.delta,
                       1 + math.pi / 8))
        window = np.linspace(-1.0, min(p.admissible_upper(), 0.0), 200, endpoint=False)
        res = max(abs(ode_residual(r, p)) for r in window)
        checks.append((f"j={j} ODE residual", res <= 1e-9 * j ** 3, res, 1e-9 * j ** 3))
        rhos = np.linspace(-1.0, 0.0, 200, endpoint=False)
        theta = np.asarray(p.argument(rhos))
        in_range = bool(np.all((theta >= math.pi / 4 - 1e-12) & (theta < math.pi / 2)))
        checks.append((f"j={j} tan-argument in [pi/4, pi/2)", in_range, float(theta.max()), math.pi / 2))
        psd = 0
        for k, r in enumerate(rhos):
            z = math.sqrt(1.0 + r) * np.exp(2j * math.pi * k / 200)
            try:
                psd += griffiths_check(m_matrix(rho, p, np.zeros(0), [z])).ok
            except TwistDomainError:
                pass
        checks.append((f"j={j} m_matrix PSD", psd == 200, psd, 200))
    return checks


def curvature_identities(rng=None):
    rng = rng or np.random.default_rng(5)
    checks = []
    worst_scalar = worst_fd = worst_sub = 0.0
    for name in ("product-gaussian", "shifted-gaussian", "modulated-gaussian", "radial-polynomial"):
        h = make_weight(name, 1, 1)
        for _ in range(10):
            t, z = rng.uniform(-0.7, 0.7, 2) @ [1, 1j], rng.uniform(-0.7, 0.7, 2) @ [1, 1j]
            t, z = np.array([t]), np.array([z])
            worst_scalar = max(worst_scalar, np.abs(theta_full(h, t, z).matrix - h.phi.hessian(t, z)).max())
            if name in ("product-gaussian", "shifted-gaussian"):
                worst_fd = max(worst_fd, np.abs(theta_full(h, t, z).matrix
                                                - h.phi.hessian(t, z, mode="fd")).max())
    for h in (make_weight("shifted-gaussian", 1, 1), matrix_demo(1, 1, a=0.7, angle=0.3),
              make_weight("modulated-gaussian", 1, 1, a=0.4, b=1.0)):
        for _ in range(10):
            t, z = [rng.uniform(-0.7, 0.7, 2) @ [1, 1j]], [rng.uniform(-0.7, 0.7, 2) @ [1, 1j]]
            delta = rng.uniform(0.1, 3.0)
            worst_sub = max(worst_sub, np.abs(theta_delta(h, delta, t, z).matrix
                                              - theta_delta_by_subtraction(h, delta, t, z).matrix).max())
    checks.append(("scalar Theta = ddbar phi", worst_scalar <= 1e-8, worst_scalar, 1e-8))
    checks.append(("scalar Theta vs FD potential Hessian", worst_fd <= 1e-8, worst_fd, 1e-8))
    checks.append(("Theta_delta subtraction vs direct", worst_sub <= 1e-10, worst_sub, 1e-10))
    p = choose_twist_constants(4)
    twist = eta_from_rho(make_defining_function("unit-disc", 0, 1), p)
    r_max = math.sqrt(1 + p.admissible_upper())
    worst_rw = 0.0
    etas = [(twist, p.delta)] * 60 + [(re_eta(1, 1.5), 0.7)] * 20 + [(quadratic_eta(1, 0.4), 1.3)] * 20
    for k, (eta, delta) in enumerate(etas):
        z = rng.uniform(0, 0.999 * r_max) * np.exp(1j * rng.uniform(0, 2 * math.pi))
        worst_rw = max(worst_rw, rewrite_identity_check(eta, delta, [z]))
    checks.append(("rewrite identity (100 probes)", worst_rw <= 1e-8, worst_rw, 1e-8))
    gauss = make_weight("product-gaussian", 1, 1)
    worst_diag, all_pos = 0.0, True
    for delta in (0.1, 0.5, 1.0, 4.0):
        blk = xi_delta_eta(gauss, delta, zero_eta(1), [0.3 - 0.2j], [0.1 + 0.4j])
        worst_diag = max(worst_diag, np.abs(blk.matrix - np.diag([1.0, delta / (1 + delta)])).max())
        all_pos &= griffiths_check(blk).verdict == "positive"
    checks.append(("Xi(e^{-|t|^2-|z|^2}) = diag(1, d/(1+d))", worst_diag <= 1e-10, worst_diag, 1e-10))
    checks.append(("Xi(e^{-|t|^2-|z|^2}) positive", all_pos, all_pos, None))
    v = griffiths_check(xi_delta_eta(make_weight("shifted-gaussian", 1, 1), 0.5, zero_eta(1), [0.0], [0.0]))
    checks.append(("Xi(e^{-|z-t|^2}) indefinite", v.verdict == "indefinite", v.min_eig, v.tol))
    return checks


def psh_variation():
    checks = []
    gauss = build_model(DISC, make_weight("product-gaussian", 1, 1), [0.0], degree=12)
    r = psh_check(log_kernel_function(gauss, [0.0], [1.0]), [[0.0]])
    h = float(r.hessians[0, 0, 0].real)
    checks.append(("|t|^2+|z|^2 Hessian = 1", abs(h - 1) <= 1e-4, h, 1e-4))
    checks.append(("|t|^2+|z|^2 strictly psh", r.verdict == "strictly-psh", r.verdict, None))
    s = kernel_variation(make_weight("shifted-gaussian", 1, 1), DISC, [0.0], [1.0], grid_points(0, 0.5, 21),
                         degree=12, tol=1e-6)
    checks.append(("|z-t|^2 psh on 21x21 grid", s.ok and s.min_eig >= -1e-6, s.min_eig, -1e-6))
    checks.append(("|z-t|^2 Hessian and circle verdicts agree", s.circle_verdict == "psh", s.circle_verdict, None))
    atom = measure_variation(make_weight("constant", 1, 1), DISC, lambda t: [(t / 2, [1.0])],
                             grid_points(0, 0.5, 11), degree=12)
    exact = np.array([-math.log(math.pi * (1 - abs(t[0]) ** 2 / 4) ** 2) for t in atom.grid])
    err = float(np.abs(atom.values - exact).max())
    checks.append(("moving atom log K(t/2,t/2) closed form", err <= 1e-6, err, 1e-6))
    checks.append(("moving atom psh", atom.ok, atom.verdict, None))
    return checks


def field_operators(rng=None):
    rng = rng or np.random.default_rng(7)
    checks = []
    worst_p = 0.0
    for name, kw, t in [("product-gaussian", {}, 0.0), ("modulated-gaussian", dict(a=0.3, b=0.5), 0.2 + 0.1j),
                        ("matrix-demo", dict(a=0.7, angle=0.4), 0.1j)]:
        model = build_model(DISC, make_weight(name, 1, 1, **kw), [t], degree=4, quad_order=12)
        worst_p = max(worst_p, *field_projection(model).projection_defects())
    checks.append(("P idempotent and self-adjoint", worst_p <= 1e-9, worst_p, 1e-9))
    model = build_model(DISC, make_weight("product-gaussian", 1, 1), [0.0], degree=6, quad_order=16)
    theta = field_curvature(model).form
    worst_u = worst_split = 0.0
    for _ in range(20):
        u = rng.standard_normal(model.dim) + 1j * rng.standard_normal(model.dim)
        nu = model.norm_sq(u)
        worst_u = max(worst_u, abs(np.vdot(u, theta @ u).real - nu) / nu)
    for name, kw, t in [("product-gaussian", {}, 0.0), ("modulated-gaussian", dict(a=0.3, b=0.5), 0.2 + 0.1j),
                        ("matrix-demo", dict(a=0.7, angle=0.4), 0.1j)]:
        mod = build_model(DISC, make_weight(name, 1, 1, **kw), [t], degree=4, quad_order=12)
        for _ in range(3):
            u = rng.standard_normal(mod.dim) + 1j * rng.standard_normal(mod.dim)
            res = t_u_hessian(mod, [HolomorphicFamily.constant(u)])
            worst_split = max(worst_split, abs(res.value - res.identity_value) / max(1.0, abs(res.value)))
    checks.append(("(Theta^E u, u) = |u|^2 for 20 u", worst_u <= 1e-8, worst_u, 1e-8))
    checks.append(("t_u_hessian vs split identity", worst_split <= 1e-4, worst_split, 1e-4))
    return checks


def dual_norm_identity(rng=None):
    rng = rng or np.random.default_rng(11)
    weights = [make_weight("constant", 0, 1), make_weight("fock", 0, 1),
               make_weight("radial-polynomial", 0, 1, coeffs=(0.5, 0.2)), matrix_demo(0, 1, angle=0.3)]
    domains = [DISC, make_domain("polydisc", 1, radius=2.0)]
    worst = 0.0
    for _ in range(50):
        h = weights[rng.integers(len(weights))]
        dom = domains[rng.integers(len(domains))]
        model = build_model(dom, h, degree=int(rng.integers(2, 11)))
        z = [0.8 * dom.radius * rng.uniform() * np.exp(1j * rng.uniform(0, 2 * math.pi))]
        sigma = rng.standard_normal(h.rank) + 1j * rng.standard_normal(h.rank)
        a = eval_functional_norm(model, z, sigma)
        b = kernel_eval(model, z).pair(sigma)
        worst = max(worst, abs(a - b) / abs(b))
    model = build_model(DISC, make_weight("fock", 0, 1), degree=8)
    ext = extremal_check(model, [0.3 - 0.2j], [1.0], samples=100_000, seed=0)
    two = build_model(DISC, make_weight("constant", 0, 1), degree=2)
    sym = extremal_check(two, None, None, samples=100_000,
                         xi=measure_functional(two, [([0.5], [1.0]), ([-0.5], [1.0])]))
    return [
        ("dual norm = <sigma x sigma-bar, K> (50 cases)", worst <= 1e-10, worst, 1e-10),
        ("exact sup dominates 1e5 samples", ext.best_random <= ext.exact * (1 + 1e-12), ext.gap, 0.0),
        ("exact sup = dual norm", abs(ext.exact - eval_functional_norm(model, [0.3 - 0.2j], [1.0]))
         <= 1e-9 * ext.exact, ext.exact, 1e-9),
        ("maximizer residual", ext.residual <= 1e-9, ext.residual, 1e-9),
        ("two-atom sampling within 1%", sym.exact * 0.99 <= sym.best_random <= sym.exact * (1 + 1e-12),
         sym.best_random / sym.exact, 0.01),
    ]


def determinism():
    checks = []
    with tempfile.TemporaryDirectory() as tmp:
        for exp in cli.EXPERIMENTS:
            dirs = [Path(tmp) / f"{exp}{k}" for k in range(2)]
            with contextlib.redirect_stdout(io.StringIO()):
                for d in dirs:
                    cli.main([exp, "--seed", "3", "--out", str(d)])
            names = sorted(p.name for p in dirs[0].glob("*.csv"))
            same = bool(names) and all(filecmp.cmp(dirs[0] / n, dirs[1] / n, shallow=False) for n in names)
            checks.append((f"{exp} CSV byte-identical", same, names, None))
    return checks


CRITERIA = [
    ("AC-1 closed-form kernels", closed_form_kernels),
    ("AC-2 Fock exhaustion", fock_exhaustion),
    ("AC-3 monotone limits", monotone_propositions),
    ("AC-4 twist algebra", twist_algebra),
    ("AC-5 curvature identities", curvature_identities),
    ("AC-6 psh variation", psh_variation),
    ("AC-7 field operators", field_operators),
    ("AC-8 dual norm and extremal", dual_norm_identity),
    ("AC-9 determinism", determinism),
]


@pytest.mark.parametrize("label,fn", CRITERIA, ids=[c[0].split()[0] for c in CRITERIA])
def test_criterion(label, fn):
    ok, line = _line(label, fn())
    print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    for label, fn in CRITERIA:
        print(_line(label, fn())[1])
