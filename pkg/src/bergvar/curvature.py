"""Curvature block matrices and Griffiths/Nakano positivity tests.

Matrices are the coefficients of ``dw_a ^ dconj(w_b)`` (so ``i d dbar phi``
has matrix ``phi_{a bbar}``), written in an ``h``-orthonormal frame:

    M[(a, i), (b, l)] = (h^{1/2} Theta_ab h^{-1/2})[i, l],
    Theta_ab = -d/dconj(w_b) (h^{-1} dh/dw_a).

For a scalar weight ``h = exp(-phi)`` this is the complex Hessian of
``phi``.  For rank ``r > 1`` the base ``(n r) x (n r)`` block is the Nakano
form: ``sum <Theta_{nu mu} u_nu, u_mu>`` over arrays ``u_{nu i}`` is the
quadratic form of that block.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import sqrtm

from .fields import ScalarField, real_scalar
from .metric import EtaField, MetricField, TwistParams, eta_from_rho, twist_eta

SINGULAR_CONDITION = 1e12
HERMITIAN_RTOL = 1e-10


class SingularMetricError(ValueError):
    pass


@dataclass(frozen=True)
class CurvatureBlock:
    m: int
    n: int
    r: int
    matrix: np.ndarray

    def _slice(self, rows, cols):
        r = self.r
        return self.matrix[rows[0] * r:rows[1] * r, cols[0] * r:cols[1] * r]

    @property
    def A(self) -> np.ndarray:
        return self._slice((0, self.m), (0, self.m))

    @property
    def B(self) -> np.ndarray:
        return self._slice((0, self.m), (self.m, self.m + self.n))

    @property
    def B_star(self) -> np.ndarray:
        return self._slice((self.m, self.m + self.n), (0, self.m))

    @property
    def C(self) -> np.ndarray:
        return self._slice((self.m, self.m + self.n), (self.m, self.m + self.n))

    def hermitian_defect(self) -> float:
        M = self.matrix
        scale = max(np.abs(M).max(), 1e-300)
        return float(np.abs(M - M.conj().T).max() / scale) if M.size else 0.0


def _assemble(blocks: np.ndarray) -> np.ndarray:
    k, _, r, _ = blocks.shape
    return blocks.transpose(0, 2, 1, 3).reshape(k * r, k * r)


def _curvature_blocks(h: MetricField, t, z) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=complex)) if h.m else np.zeros(0, dtype=complex)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    h0 = np.asarray(h.at(t, z), dtype=complex)
    if np.linalg.cond(h0) > SINGULAR_CONDITION:
        raise SingularMetricError(f"metric {h.name} is singular at t={t}, z={z}")
    h1 = h.first(t, z)
    h2 = h.second(t, z)
    hinv = np.linalg.inv(h0)
    h1bar = np.conj(np.swapaxes(h1, -1, -2))
    # dbar_b (h^-1 d_a h) = h^-1 dbar_b d_a h - h^-1 dbar_b h h^-1 d_a h
    dd = np.einsum("ij,abjk->abik", hinv, h2)
    dd -= np.einsum("ij,bjk,kl,alm->abim", hinv, h1bar, hinv, h1)
    theta = -dd
    s = sqrtm(h0)
    sinv = np.linalg.inv(s)
    return np.einsum("ij,abjk,kl->abil", s, theta, sinv)


def theta_full(h: MetricField, t, z) -> CurvatureBlock:
    blocks = _curvature_blocks(h, t, z)
    return CurvatureBlock(h.m, h.n, h.rank, _assemble(blocks))


def _scale_base(block: CurvatureBlock, factor: float) -> np.ndarray:
    M = block.matrix.copy()
    k = block.m * block.r
    M[k:, k:] *= factor
    return M


def theta_delta(h: MetricField, delta: float, t, z) -> CurvatureBlock:
    """Full curvature with the fiber block scaled by ``delta/(1+delta)``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    full = theta_full(h, t, z)
    return CurvatureBlock(h.m, h.n, h.rank, _scale_base(full, delta / (1 + delta)))


def theta_delta_by_subtraction(h: MetricField, delta: float, t, z) -> CurvatureBlock:
    """``Theta(h) - Theta(h^[t]) / (1 + delta)`` with the fiber curvature from ``h.restrict(t)``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    full = theta_full(h, t, z)
    fiber = theta_full(h.restrict(t), np.zeros(0), z)
    M = full.matrix.copy()
    k = h.m * h.rank
    M[k:, k:] -= fiber.matrix / (1 + delta)
    return CurvatureBlock(h.m, h.n, h.rank, M)


def twist_form(eta: EtaField, delta: float, z, ricci=None) -> np.ndarray:
    """``Ric + 2 d dbar eta - (1+delta) d eta ^ dbar eta`` as an n x n matrix."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    g = np.asarray(eta.grad(z), dtype=complex)
    out = 2 * np.asarray(eta.hess(z), dtype=complex) - (1 + delta) * np.outer(g, g.conj())
    if ricci is not None:
        out = out + np.asarray(ricci, dtype=complex)
    return out


def xi_delta_eta(h: MetricField, delta: float, eta: EtaField, t, z, ricci=None) -> CurvatureBlock:
    block = theta_delta(h, delta, t, z)
    M = block.matrix.copy()
    k = h.m * h.rank
    tw = twist_form(eta, delta, z, ricci)
    M[k:, k:] += delta / (1 + delta) * np.kron(tw, np.eye(h.rank))
    return CurvatureBlock(h.m, h.n, h.rank, M)


def neg_exp_hessian(eta: EtaField, c: float, z) -> np.ndarray:
    """``d dbar (-exp(-c eta))`` via the field's closed form when it has one."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if eta.neg_exp_hessian is not None:
        return np.asarray(eta.neg_exp_hessian(c, z))
    e = math.exp(-c * eta.value(z))
    g = np.asarray(eta.grad(z), dtype=complex)
    G1, G2 = c * e, -c * c * e
    return G1 * np.asarray(eta.hess(z)) + G2 * np.outer(g, g.conj())


def rewrite_identity_check(eta: EtaField, delta: float, z) -> float:
    """Max-norm gap between the two forms of the eta twist term."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    lhs = twist_form(eta, delta, z)
    c = (1 + delta) / 2
    rhs = 4 * math.exp(c * eta.value(z)) / (1 + delta) * neg_exp_hessian(eta, c, z)
    return float(np.abs(lhs - rhs).max())


@dataclass(frozen=True)
class PositivityVerdict:
    min_eig: float
    tol: float
    verdict: str

    @property
    def ok(self) -> bool:
        return self.verdict in ("positive", "semipositive")


def default_tol(M: np.ndarray) -> float:
    return 1e-9 * (1.0 + (np.linalg.norm(M, 2) if M.size else 0.0))


def griffiths_check(block, tol: float | None = None) -> PositivityVerdict:
    M = block.matrix if isinstance(block, CurvatureBlock) else np.asarray(block, dtype=complex)
    scale = max(np.abs(M).max(), 1e-300) if M.size else 1.0
    if M.size and np.abs(M - M.conj().T).max() > HERMITIAN_RTOL * scale:
        raise ValueError("positivity test needs a Hermitian matrix")
    if tol is None:
        tol = default_tol(M)
    lam = float(np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0]) if M.size else 0.0
    if lam > tol:
        verdict = "positive"
    elif lam >= -tol:
        verdict = "semipositive"
    else:
        verdict = "indefinite"
    return PositivityVerdict(lam, tol, verdict)


def nakano_form(h: MetricField, eta: EtaField, delta: float, t, z, ricci=None) -> np.ndarray:
    """Fiber curvature plus the twist term, tensored with Id_V: an (n r) square matrix."""
    fiber = theta_full(h.restrict(t), np.zeros(0), z)
    return fiber.matrix + np.kron(twist_form(eta, delta, z, ricci), np.eye(h.rank))


def nakano_base_check(h: MetricField, eta: EtaField, delta: float, t, z, ricci=None,
                      tol: float | None = None) -> PositivityVerdict:
    return griffiths_check(nakano_form(h, eta, delta, t, z, ricci), tol)


def _rho_data(rho: ScalarField, t, z):
    t = np.atleast_1d(np.asarray(t, dtype=complex)) if rho.m else np.zeros(0, dtype=complex)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    n = rho.n
    val = real_scalar(rho(t, z))
    g = rho.gradient(t, z)[-n:]
    H = rho.hessian(t, z)[-n:, -n:]
    return val, g, H


def m_matrix(rho: ScalarField, params: TwistParams, t, z, eta: EtaField | None = None) -> CurvatureBlock:
    """The fiber matrix left over after the cut-off twist, at one point ``z``."""
    val, g, R = _rho_data(rho, t, z)
    if not (-1.0 <= val < 0.0):
        raise ValueError(f"rho^[t](z) = {val} outside [-1, 0)")
    if eta is None:
        eta = eta_from_rho(rho, params, t)
    d, j = params.delta, params.j
    x = j * j * val
    s = 1.0 / (1.0 + math.exp(-x))
    first = j * s
    second = j ** 3 * s * (1.0 - s)
    M = -(first * R + second * np.outer(g, g.conj())) / (1 + d)
    M = M + d / (1 + d) * (twist_form(eta, d, z) - R)
    return CurvatureBlock(0, rho.n, 1, M)


def m_matrix_lower_bound(rho: ScalarField, params: TwistParams, t, z) -> np.ndarray:
    """``(sqrt(delta j^3/(1+delta)) tan(theta) - (j + delta)) / (1+delta) * d dbar rho``."""
    val, _, R = _rho_data(rho, t, z)
    twist_eta(val, params)
    d, j = params.delta, params.j
    coeff = math.sqrt(d * j ** 3 / (1 + d)) * math.tan(float(params.argument(val))) - (j + d)
    return coeff / (1 + d) * R


def curvature_sweep(h: MetricField, delta: float, eta: EtaField, points, ricci=None):
    """Rows of (t, z, min-eig, verdict) for the twisted operator over ``points``."""
    rows = []
    for t, z in points:
        v = griffiths_check(xi_delta_eta(h, delta, eta, t, z, ricci))
        rows.append({"t": np.atleast_1d(t), "z": np.atleast_1d(z),
                     "min_eig": v.min_eig, "verdict": v.verdict})
    return rows
