import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bergvar.bergman import build_model
from bergvar.geometry import disc_exhaustion, make_domain
from bergvar.metric import make_defining_function, make_weight, quadratic_field, scalar_weight
from bergvar.variation import (affine_shift, check_ladder, cutoff_convergence, dual_norm_exhaustion,
                               evaluation_at, grid_points, kernel_variation, log_kernel_function,
                               measure_variation, monotone_report, psh_check, ramadanov_domains,
                               ramadanov_metrics, usc_probe)


def test_psh_on_simple_functions():
    grid = grid_points(0, 0.5, 3)
    r = psh_check(lambda t: float(abs(t[0]) ** 2), grid)
    assert r.verdict == "strictly-psh" and r.min_eig == pytest.approx(1.0, abs=1e-6)
    r = psh_check(lambda t: float(np.real(t[0])), grid)
    assert r.verdict == "psh"
    r = psh_check(lambda t: -float(abs(t[0]) ** 2), grid)
    assert r.verdict == "fail" and r.circle_verdict == "fail"
    r = psh_check(lambda t: -math.inf, grid)
    assert r.verdict == "all-minus-infinity" and r.ok
    with pytest.raises(ValueError):
        psh_check(lambda t: 0.0, np.zeros((0, 1)))


def test_psh_two_parameters():
    grid = grid_points([0, 0], 0.2, 3, m=2)
    r = psh_check(lambda t: float(abs(t[0] + t[1]) ** 2), grid)
    assert r.verdict == "psh"
    assert np.allclose(r.hessians[0], [[1, 1], [1, 1]], atol=1e-6)


@given(a=st.floats(-5, 5), b=st.tuples(st.floats(-3, 3), st.floats(-3, 3)))
def test_affine_invariance(a, b):
    fn = lambda t: float(abs(t[0]) ** 2 + 0.5 * np.real(t[0] ** 2))
    grid = np.array([[0.1 + 0.2j]])
    base = psh_check(fn, grid)
    shifted = psh_check(affine_shift(fn, a, [complex(*b)]), grid)
    assert np.abs(base.hessians - shifted.hessians).max() < 1e-8
    assert base.verdict == shifted.verdict


def test_product_family_log_kernel(unit_disc):
    model = build_model(unit_disc, make_weight("product-gaussian", 1, 1), [0.0], degree=12)
    r = psh_check(log_kernel_function(model, [0.0], [1.0]), [[0.0], [0.3 + 0.1j]])
    assert np.allclose(r.hessians[:, 0, 0], 1.0, atol=1e-4)
    assert r.verdict == "strictly-psh"
    # K_t = e^{|t|^2} K_0 with K_0(0, 0) = 1 / (pi (1 - e^{-1})) on the unit disc
    assert r.values[1] == pytest.approx(0.1 - math.log(math.pi * (1 - math.exp(-1))), abs=1e-10)


def test_separation_structure(unit_disc):
    # log K_t - phi_1(t) is t-independent for product weights
    model = build_model(unit_disc, make_weight("product-gaussian", 1, 1, a=2.0, b=0.5), [0.0], degree=10)
    fn = log_kernel_function(model, [0.4], [1.0])
    vals = [fn([t]) - 2.0 * abs(t) ** 2 for t in (0.0, 0.5j, -0.7 + 0.2j)]
    assert max(vals) - min(vals) < 1e-8


def test_t_independent_weight_psh(unit_disc):
    r = kernel_variation(make_weight("fock", 1, 1), unit_disc, [0.0], [1.0], grid_points(0, 0.3, 2), degree=6)
    assert r.verdict == "psh" and np.abs(r.min_eigs).max() < 1e-6


def test_shifted_family_psh(unit_disc):
    r = kernel_variation(make_weight("shifted-gaussian", 1, 1), unit_disc, [0.0], [1.0],
                         grid_points(0, 0.5, 3), degree=12)
    assert r.ok and r.min_eig >= -1e-6
    assert r.hessian_verdict in ("psh", "strictly-psh") and r.circle_verdict == "psh"


def test_moving_atom(unit_disc):
    flat = make_weight("constant", 1, 1)
    r = measure_variation(flat, unit_disc, lambda t: [(t / 2, [1.0])], grid_points(0, 0.6, 3), degree=14)
    exact = [-math.log(math.pi * (1 - abs(t[0]) ** 2 / 4) ** 2) for t in r.grid]
    assert np.abs(r.values - exact).max() < 1e-6
    assert r.ok
    zero = measure_variation(flat, unit_disc, lambda t: [], grid_points(0, 0.3, 2), degree=2)
    assert zero.verdict == "all-minus-infinity"
    with pytest.raises(ValueError):
        measure_variation(flat, unit_disc, lambda t: [(2 * t, [1.0])], [[0.6]], degree=2)


def test_fixed_atom_product_family(unit_disc):
    r = measure_variation(make_weight("product-gaussian", 1, 1), unit_disc, lambda t: [(np.zeros(1), [1.0])],
                          [[0.0], [0.2j]], degree=8)
    assert r.verdict == "strictly-psh"
    assert r.values[1] - r.values[0] == pytest.approx(0.04, abs=1e-10)


def test_monotone_report_logic():
    up = monotone_report([1.0, 2.0, 2.0, 3.0], "nondecreasing", 1e-9)
    assert up.ok and up.limit == 3.0 and up.transitive_consistent()
    bad = monotone_report([3.0, 2.0, 2.5], "nonincreasing", 1e-9)
    assert not bad.ok and bad.violations == (1,)
    assert monotone_report([1.0], "nonincreasing", 0.0).ok
    with pytest.raises(ValueError):
        monotone_report([1.0], "sideways", 0.0)


@given(st.lists(st.floats(0.1, 10.0), min_size=2, max_size=8))
def test_monotone_sorted_sequences_pass(xs):
    assert monotone_report(sorted(xs), "nondecreasing", 1e-12).ok
    assert monotone_report(sorted(xs, reverse=True), "nonincreasing", 1e-12).ok


def test_ramadanov_domains_flat():
    r = ramadanov_domains(disc_exhaustion([1, 2, 4]), make_weight("constant", 0, 1), [0.0], [1.0])
    assert r.ok and np.allclose(r.values * math.pi, [1, 1 / 4, 1 / 16], rtol=1e-12)
    with pytest.raises(ValueError):
        ramadanov_domains(disc_exhaustion([1, 2]), make_weight("constant", 0, 1), [1.5], [1.0])


def test_ramadanov_metrics_ladders(unit_disc):
    scaled = [make_weight("constant", 0, 1, c=c) for c in (0.5, 0.75, 1.0)]
    r = ramadanov_metrics(unit_disc, scaled, [0.0], [1.0])
    assert r.ok and np.allclose(r.values * math.pi, [2, 4 / 3, 1], rtol=1e-12)
    flat = [make_weight("constant", 0, 1)] * 3
    assert np.ptp(ramadanov_metrics(unit_disc, flat, [0.0], [1.0]).values) < 1e-15
    decreasing = [scalar_weight(quadratic_field(np.diag([1 - 2.0 ** -j]), 0, 1)) for j in range(1, 5)]
    with pytest.raises(ValueError):
        check_ladder(unit_disc, decreasing)


def test_cutoff_convergence(unit_disc):
    rho = make_defining_function("unit-disc", 0, 1)
    r = cutoff_convergence(unit_disc, make_domain("polydisc", 1, radius=2.0), make_weight("constant", 0, 1),
                           rho, (4, 6, 8, 12), [0.0], [1.0])
    assert r.ok and 0 < r.gap < 0.1 / math.pi
    assert r.inner_value == pytest.approx(1 / math.pi)
    assert r.outer_value == pytest.approx(1 / (4 * math.pi))


def test_dual_norm_exhaustion_fock():
    res = dual_norm_exhaustion(make_weight("fock", 0, 1), evaluation_at([0.0], [1.0]),
                               disc_exhaustion([4, 8, 16]), np.zeros((1, 0)))
    assert res.per_t[0].ok
    assert abs(res.per_t[0].limit - 1 / math.pi) < 1e-6


def test_surrogate_ladder_nonproduct():
    h = make_weight("constant", 1, 1)
    rho = make_defining_function("disc-family", 1, 1)
    dom = make_domain("sublevel", 1, rho=rho, box=[(-1.05, 1.05)] * 2)
    grid = np.array([[0.0], [0.6]])
    s = kernel_variation(h, dom, [0.0], [1.0], grid, degree=2, quad_order=200,
                         outer=make_domain("polydisc", 1, radius=1.5), js=(4, 6, 8, 12))
    assert s.monotone
    exact = np.array([-math.log(math.pi * (1 - abs(t[0]) ** 2 / 4)) for t in grid])
    assert np.all(s.values[-1] < exact)
    assert np.abs(s.fiber_values - exact).max() < 0.02
    with pytest.raises(ValueError):
        kernel_variation(h, dom, [0.0], [1.0], grid, degree=2)


def test_usc_probe_diagnostic():
    p = usc_probe(lambda t: float(abs(t[0]) ** 2), [0.0])
    assert p.value == 0.0 and len(p.limsups) == 4
    assert p.limsups == tuple(sorted(p.limsups, reverse=True))
