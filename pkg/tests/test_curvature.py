import numpy as np
import pytest
from hypothesis import given, strategies as st

from bergvar.curvature import (SingularMetricError, curvature_sweep, griffiths_check, m_matrix,
                               m_matrix_lower_bound, nakano_base_check, nakano_form,
                               rewrite_identity_check, theta_delta, theta_delta_by_subtraction,
                               theta_full, xi_delta_eta)
from bergvar.metric import (MetricField, TwistDomainError, choose_twist_constants, eta_from_rho,
                            make_defining_function, make_weight, matrix_demo, quadratic_eta, re_eta,
                            zero_eta)

small = st.tuples(st.floats(-0.8, 0.8), st.floats(-0.8, 0.8)).map(lambda p: complex(*p))


@given(t=small, z=small)
@pytest.mark.parametrize("name", ["product-gaussian", "shifted-gaussian", "modulated-gaussian",
                                  "radial-polynomial"])
def test_scalar_curvature_is_potential_hessian(name, t, z):
    h = make_weight(name, 1, 1)
    t, z = np.array([t]), np.array([z])
    assert np.abs(theta_full(h, t, z).matrix - h.phi.hessian(t, z)).max() < 1e-8


@given(t=small, z=small, delta=st.floats(0.05, 5.0))
def test_subtraction_matches_direct(t, z, delta):
    h = make_weight("matrix-demo", 1, 1, a=0.7, angle=0.3)
    a = theta_delta(h, delta, [t], [z]).matrix
    b = theta_delta_by_subtraction(h, delta, [t], [z]).matrix
    assert np.abs(a - b).max() < 1e-10


@pytest.mark.parametrize("delta", [0.1, 0.5, 2.0])
def test_product_gaussian_block(delta):
    h = make_weight("product-gaussian", 1, 1)
    blk = xi_delta_eta(h, delta, zero_eta(1), [0.3], [0.2j])
    assert np.allclose(blk.matrix, np.diag([1.0, delta / (1 + delta)]), atol=1e-10)
    assert griffiths_check(blk).verdict == "positive"


def test_shifted_gaussian_is_indefinite():
    h = make_weight("shifted-gaussian", 1, 1)
    v = griffiths_check(xi_delta_eta(h, 0.5, zero_eta(1), [0.0], [0.0]))
    # [[1, -1], [-1, 1/3]]
    assert v.verdict == "indefinite"
    assert v.min_eig == pytest.approx((4 / 3 - np.sqrt(4 / 9 + 4)) / 2, rel=1e-12)


def test_block_accessors():
    h = make_weight("shifted-gaussian", 1, 1)
    blk = theta_full(h, [0.0], [0.0])
    assert blk.A[0, 0] == pytest.approx(1) and blk.B[0, 0] == pytest.approx(-1)
    assert blk.B_star[0, 0] == pytest.approx(-1) and blk.C[0, 0] == pytest.approx(1)
    assert blk.hermitian_defect() == 0.0


def test_rank_two_nakano_form():
    h = matrix_demo(1, 1, a=0.0, angle=0.4)
    N = nakano_form(h, zero_eta(1), 0.5, [0.0], [0.5])
    assert np.allclose(np.linalg.eigvalsh(N), [1.0, 2.0])
    assert nakano_base_check(h, zero_eta(1), 0.5, [0.0], [0.5]).ok


def test_twist_term_can_break_positivity():
    h = make_weight("fock", 0, 1)
    v = nakano_base_check(h, re_eta(1, coeff=4.0), 1.0, np.zeros(0), [0.0])
    assert v.verdict == "indefinite"


@pytest.mark.parametrize("eta", [re_eta(1), quadratic_eta(1, 0.3)])
def test_rewrite_identity_simple(eta):
    for z in (0.0, 0.3 + 0.1j, -0.5j):
        assert rewrite_identity_check(eta, 0.7, [z]) < 1e-12


def test_rewrite_identity_twist():
    p = choose_twist_constants(4)
    rho = make_defining_function("unit-disc", 0, 1)
    eta = eta_from_rho(rho, p)
    for r in np.linspace(0, np.sqrt(1 + p.admissible_upper()) * 0.99, 15):
        assert rewrite_identity_check(eta, p.delta, [r * np.exp(0.3j)]) < 1e-8


def test_m_matrix_inside_and_outside_window():
    p = choose_twist_constants(4)
    rho = make_defining_function("unit-disc", 0, 1)
    M = m_matrix(rho, p, np.zeros(0), [0.1 + 0.1j])
    assert griffiths_check(M).ok
    low = m_matrix_lower_bound(rho, p, np.zeros(0), [0.1 + 0.1j])
    assert np.linalg.eigvalsh(M.matrix - low)[0] >= -1e-9
    with pytest.raises(TwistDomainError):
        m_matrix(rho, p, np.zeros(0), [0.8])
    with pytest.raises(ValueError):
        m_matrix(rho, p, np.zeros(0), [1.2])


def test_singular_metric_rejected():
    def value(t, z):
        return np.array([[1.0, 1.0], [1.0, 1.0]], dtype=complex)
    h = MetricField(2, 0, 1, value)
    with pytest.raises(SingularMetricError):
        theta_full(h, np.zeros(0), [0.0])


def test_non_hermitian_rejected():
    with pytest.raises(ValueError):
        griffiths_check(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_sweep_rows():
    rows = curvature_sweep(make_weight("product-gaussian", 1, 1), 0.5, zero_eta(1),
                           [([0.0], [0.0]), ([0.5], [0.1j])])
    assert [r["verdict"] for r in rows] == ["positive", "positive"]
