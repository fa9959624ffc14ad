"""Truncated weighted Bergman spaces over quadrature.

A model at parameter ``t`` is spanned by ``z^alpha e_i`` with ``|alpha| <= d``
and ``i < r``.  With ``E(z)`` the ``r x dim`` matrix of basis values and the
inner product ``(f, g) = int g^H h f dV``:

* Gram           ``G = sum_q w_q E(z_q)^H h(z_q) E(z_q)``
* kernel         ``K(z, conj(w)) = E(z) G^{-1} E(w)^H``
* evaluation     ``<xi, f> = sigma^T f(z)``, dual norm ``sigma^T K(z, z) conj(sigma)``

Nothing is orthonormalized; everything is a quadratic form in ``G``.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigh, lapack

from .fields import complex_hessian
from .geometry import DomainSpec, QuadratureRule, sample_quadrature
from .metric import MetricField

PIVOT_RTOL = 1e-13
RICHARDSON_RTOL = 1e-3
MIN_QUAD_ORDER = 32


class PivotLossError(RuntimeError):
    pass


def monomial_exponents(n: int, degree: int) -> list[tuple[int, ...]]:
    """Multi-indices with ``|alpha| <= degree``, graded then lexicographic."""
    out = []
    for total in range(degree + 1):
        for alpha in itertools.product(range(total + 1), repeat=n):
            if sum(alpha) == total:
                out.append(alpha)
    return sorted(out, key=lambda a: (sum(a), tuple(-x for x in a)))


def _monomials(exponents: np.ndarray, z: np.ndarray) -> np.ndarray:
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    return np.prod(z[:, None, :] ** exponents[None, :, :], axis=-1)


@dataclass(frozen=True)
class BergmanModel:
    domain: DomainSpec
    weight: MetricField
    t: np.ndarray
    degree: int
    quad: QuadratureRule
    labels: tuple[tuple[tuple[int, ...], int], ...]
    gram: np.ndarray
    scale: np.ndarray = field(repr=False)
    factor: tuple = field(repr=False)
    dropped: tuple = ()
    vander: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return len(self.labels)

    @property
    def rank(self) -> int:
        return self.weight.rank

    @property
    def empty(self) -> bool:
        return self.dim == 0

    def basis(self, z) -> np.ndarray:
        """``E(z)``: shape ``(r, dim)``, or ``(N, r, dim)`` for a batch."""
        z = np.asarray(z, dtype=complex)
        single = z.ndim == 1
        exps = np.array([a for a, _ in self.labels], dtype=int).reshape(self.dim, -1)
        comps = np.array([i for _, i in self.labels], dtype=int)
        V = _monomials(exps, z)  # (N, dim)
        E = np.zeros((V.shape[0], self.rank, self.dim), dtype=complex)
        E[:, comps, np.arange(self.dim)] = V
        return E[0] if single else E

    def solve(self, v) -> np.ndarray:
        """``G^{-1} v`` through the equilibrated Cholesky factor."""
        v = np.asarray(v, dtype=complex)
        s = self.scale.reshape((-1,) + (1,) * (v.ndim - 1))
        return s * cho_solve(self.factor, s * v)

    def quad_form_inv(self, v) -> float:
        v = np.asarray(v, dtype=complex)
        return float(np.real(np.vdot(v, self.solve(v))))

    def norm_sq(self, coeffs) -> float:
        c = np.asarray(coeffs, dtype=complex)
        return float(np.real(np.vdot(c, self.gram @ c)))

    def evaluate(self, coeffs, z) -> np.ndarray:
        return self.basis(z) @ np.asarray(coeffs, dtype=complex)

    def condition(self) -> float:
        if self.empty:
            return 1.0
        Gs = self.scale[:, None] * self.gram * self.scale[None, :]
        return float(np.linalg.cond(Gs))

    def gram_at(self, t) -> np.ndarray:
        """Gram matrix of the same basis and nodes with the weight at ``t``."""
        return _gram(self.quad, self.weight, np.atleast_1d(np.asarray(t, dtype=complex)), self.labels,
                     self.vander)

    def at_parameter(self, t) -> "BergmanModel":
        """Same basis and quadrature, weight evaluated at another ``t``.

        Only valid for t-independent fiber domains.
        """
        if not self.domain.product:
            raise ValueError("at_parameter needs a t-independent fiber domain")
        t = np.atleast_1d(np.asarray(t, dtype=complex))
        G = self.gram_at(t)
        scale, factor = _factor(G)
        return BergmanModel(self.domain, self.weight, t, self.degree, self.quad, self.labels,
                            G, scale, factor, self.dropped, self.vander)

    def report(self) -> dict:
        return {"dim": self.dim, "dropped": len(self.dropped), "nodes": len(self.quad),
                "condition": self.condition()}


def _node_monomials(quad: QuadratureRule, labels) -> np.ndarray:
    exps = np.array([a for a, _ in labels], dtype=int).reshape(len(labels), -1)
    return _monomials(exps, quad.nodes)


def _gram(quad: QuadratureRule, weight: MetricField, t, labels, V=None) -> np.ndarray:
    comps = np.array([i for _, i in labels], dtype=int)
    V = _node_monomials(quad, labels) if V is None else V
    r = weight.rank
    H = np.asarray(weight.at(t, quad.nodes), dtype=complex).reshape(len(quad), r, r)
    # G[p, s] = sum_q w_q conj(V_qp) h_q[i_p, i_s] V_qs, one matrix product per frame pair
    G = np.zeros((len(labels), len(labels)), dtype=complex)
    Vc = V.conj()
    for i in range(r):
        rows = np.flatnonzero(comps == i)
        for l in range(r):
            cols = np.flatnonzero(comps == l)
            wh = quad.weights * H[:, i, l]
            G[np.ix_(rows, cols)] = (Vc[:, rows] * wh[:, None]).T @ V[:, cols]
    return 0.5 * (G + G.conj().T)


def _factor(G: np.ndarray):
    d = np.real(np.diag(G))
    scale = 1.0 / np.sqrt(d)
    Gs = scale[:, None] * G * scale[None, :]
    return scale, cho_factor(Gs, lower=True)


def build_model(domain: DomainSpec, weight: MetricField, t=None, degree: int = 12,
                quad_order: int | None = None, seed: int = 0,
                quad: QuadratureRule | None = None) -> BergmanModel:
    """Assemble and factor the Gram matrix of the degree-``d`` model at ``t``.

    The default quadrature order ``max(2d + 2, 32)`` makes polynomial-weight
    Gram entries exact on polydiscs and balls and keeps Gaussian weights
    accurate to rounding on moderate radii.
    Directions whose pivot (after unit-diagonal scaling) falls below
    ``1e-13 * trace / dim`` are dropped and listed in ``dropped``.
    """
    if degree < 0:
        raise ValueError("degree must be >= 0")
    t = np.zeros(weight.m, dtype=complex) if t is None else np.atleast_1d(np.asarray(t, dtype=complex))
    if quad is None:
        quad = sample_quadrature(domain, quad_order or max(2 * degree + 2, MIN_QUAD_ORDER), seed)
    labels = tuple((a, i) for a in monomial_exponents(domain.dim, degree) for i in range(weight.rank))
    if quad.empty:
        z = np.zeros((0, 0))
        return BergmanModel(domain, weight, t, degree, quad, (), np.zeros((0, 0), dtype=complex),
                            np.zeros(0), (z, True), dropped=labels)
    V = _node_monomials(quad, labels)
    G = _gram(quad, weight, t, labels, V)
    diag = np.real(np.diag(G))
    alive = np.flatnonzero(diag > 0)
    if alive.size == 0:
        raise PivotLossError("every basis direction has zero norm on the quadrature")
    Ga = G[np.ix_(alive, alive)]
    s = 1.0 / np.sqrt(np.real(np.diag(Ga)))
    Gs = s[:, None] * Ga * s[None, :]
    tol = PIVOT_RTOL * float(np.real(np.trace(Gs))) / Gs.shape[0]
    _, piv, rank, info = lapack.zpstrf(Gs, tol=tol, lower=1)
    if rank == 0:
        raise PivotLossError("pivoted Cholesky kept no direction")
    keep = np.sort(alive[piv[:rank] - 1])
    kept = tuple(labels[k] for k in keep)
    dropped = tuple(lab for k, lab in enumerate(labels) if k not in set(keep.tolist()))
    Gk = G[np.ix_(keep, keep)]
    scale, factor = _factor(Gk)
    return BergmanModel(domain, weight, t, degree, quad, kept, Gk, scale, factor, dropped,
                        np.ascontiguousarray(V[:, keep]))


# ---------------------------------------------------------------------------
# kernels and functionals

@dataclass(frozen=True)
class KernelValue:
    matrix: np.ndarray

    def pair(self, sigma) -> float:
        """``<sigma (x) conj(sigma), K>`` = ``sigma^T K conj(sigma)``."""
        s = np.atleast_1d(np.asarray(sigma, dtype=complex))
        return float(np.real(s @ self.matrix @ s.conj()))

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))


def kernel_eval(model: BergmanModel, z, w=None) -> KernelValue:
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    w = z if w is None else np.atleast_1d(np.asarray(w, dtype=complex))
    if model.empty:
        return KernelValue(np.zeros((model.rank, model.rank), dtype=complex))
    Ez, Ew = model.basis(z), model.basis(w)
    return KernelValue(Ez @ model.solve(Ew.conj().T))


def kernel_diagonal(model: BergmanModel, z, sigma=None) -> float:
    sigma = np.ones(model.rank) if sigma is None else sigma
    return kernel_eval(model, z).pair(sigma)


@dataclass(frozen=True)
class DualFunctional:
    """``f -> v^H c`` on coefficient arrays ``c``."""

    coeffs: np.ndarray
    kind: str
    atoms: tuple = ()


def evaluation_functional(model: BergmanModel, z, sigma) -> DualFunctional:
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    s = np.atleast_1d(np.asarray(sigma, dtype=complex))
    v = model.basis(z).conj().T @ s.conj() if not model.empty else np.zeros(0, dtype=complex)
    return DualFunctional(v, "evaluation", ((tuple(z), tuple(s)),))


def measure_functional(model: BergmanModel, atoms) -> DualFunctional:
    v = np.zeros(model.dim, dtype=complex)
    clean = []
    for z, sigma in atoms:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if not model.domain.contains(z)[0]:
            raise ValueError(f"atom {z} lies outside the model domain")
        s = np.atleast_1d(np.asarray(sigma, dtype=complex))
        if not model.empty:
            v = v + model.basis(z).conj().T @ s.conj()
        clean.append((tuple(z), tuple(s)))
    return DualFunctional(v, "measure", tuple(clean))


def dual_norm_sq(model: BergmanModel, xi: DualFunctional) -> float:
    if model.empty:
        return 0.0
    return model.quad_form_inv(xi.coeffs)


def eval_functional_norm(model: BergmanModel, z, sigma) -> float:
    return dual_norm_sq(model, evaluation_functional(model, z, sigma))


def measure_functional_norm(model: BergmanModel, atoms) -> float:
    return dual_norm_sq(model, measure_functional(model, atoms))


@dataclass(frozen=True)
class ExtremalResult:
    exact: float
    best_random: float
    gap: float
    residual: float
    maximizer: np.ndarray = field(repr=False)


def extremal_check(model: BergmanModel, z, sigma, samples: int = 100_000, seed: int = 0,
                   xi: DualFunctional | None = None) -> ExtremalResult:
    """``sup |<xi, f>|^2 / ||f||^2`` by a generalized eigenproblem and by sampling."""
    xi = evaluation_functional(model, z, sigma) if xi is None else xi
    v = xi.coeffs
    if model.empty:
        return ExtremalResult(0.0, 0.0, 0.0, 0.0, np.zeros(0))
    s = model.scale
    vs = s * v
    Gs = s[:, None] * model.gram * s[None, :]
    lam, vec = eigh(np.outer(vs, vs.conj()), Gs, subset_by_index=[model.dim - 1, model.dim - 1])
    exact = float(lam[0])
    c = model.solve(v)
    ratio = abs(np.vdot(v, c)) ** 2 / model.norm_sq(c)
    residual = abs(ratio - exact) / max(exact, 1e-300)
    rng = np.random.default_rng(seed)
    best = 0.0
    chunk = 20_000
    for start in range(0, samples, chunk):
        k = min(chunk, samples - start)
        C = rng.standard_normal((k, model.dim)) + 1j * rng.standard_normal((k, model.dim))
        num = np.abs(C @ v.conj()) ** 2
        den = np.real(np.einsum("kp,pq,kq->k", C.conj(), model.gram, C))
        best = max(best, float(np.max(num / den)))
    return ExtremalResult(exact, best, exact - best, residual, c)


def bergman_inequality_constant(model: BergmanModel, probes: Sequence, n_random: int = 100,
                                seed: int = 0) -> float:
    """Sharp ``C`` with ``|s(z)|_h^2 <= C ||s||^2`` on the probes (max of ``tr(h K)``).

    Random unit-norm elements are checked against the returned constant.
    """
    if len(probes) == 0:
        raise ValueError("need at least one probe point")
    probes = [np.atleast_1d(np.asarray(p, dtype=complex)) for p in probes]
    C = 0.0
    for p in probes:
        h = np.asarray(model.weight.at(model.t, p), dtype=complex)
        K = kernel_eval(model, p).matrix
        C = max(C, float(np.real(np.trace(h @ K))))
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        c = rng.standard_normal(model.dim) + 1j * rng.standard_normal(model.dim)
        c = c / np.sqrt(model.norm_sq(c))
        for p in probes:
            f = model.evaluate(c, p)
            h = np.asarray(model.weight.at(model.t, p), dtype=complex)
            val = float(np.real(np.vdot(f, h @ f)))
            if val > C * (1 + 1e-9):
                raise AssertionError(f"Bergman inequality violated at {p}: {val} > {C}")
    return C


def reproduce(model: BergmanModel, coeffs, z) -> np.ndarray:
    """``int K(z, w) h(w) f(w) dV(w)`` by the model's quadrature."""
    E = model.basis(model.quad.nodes)  # (N, r, dim)
    H = np.asarray(model.weight.at(model.t, model.quad.nodes)).reshape(len(model.quad), model.rank, model.rank)
    f = E @ np.asarray(coeffs, dtype=complex)
    inner = np.einsum("q,qip,qij,qj->p", model.quad.weights, E.conj(), H, f)
    return model.basis(np.atleast_1d(np.asarray(z, dtype=complex))) @ model.solve(inner)


# ---------------------------------------------------------------------------
# field of Hilbert spaces on the truncated model

@dataclass(frozen=True)
class FieldOperator:
    kind: str
    matrix: np.ndarray
    form: np.ndarray | None = None
    weight_matrix: np.ndarray | None = None

    def projection_defects(self) -> tuple[float, float]:
        """(idempotency, self-adjointness) defects of a projection operator."""
        P, W = self.matrix, self.weight_matrix
        scale = max(1.0, float(np.abs(P).max()))
        idem = float(np.abs(P @ P - P).max()) / scale
        WP = W @ P
        adj = float(np.abs(WP - WP.conj().T).max()) / max(float(np.abs(WP).max()), 1e-300)
        return idem, adj


def _discrete(model: BergmanModel):
    """Node-stacked basis ``B`` (N r x dim) and weight ``W`` blocks (N, r, r)."""
    E = model.basis(model.quad.nodes)
    N, r = len(model.quad), model.rank
    H = np.asarray(model.weight.at(model.t, model.quad.nodes), dtype=complex).reshape(N, r, r)
    return E, model.quad.weights[:, None, None] * H


def _require_product(model: BergmanModel):
    if not model.domain.product:
        raise NotImplementedError("field operators need a t-independent fiber domain")


def _node_connection(model: BergmanModel, j: int) -> np.ndarray:
    # h^{-1} d h / dt_j at each node
    t = model.t
    out = np.empty((len(model.quad), model.rank, model.rank), dtype=complex)
    for q, z in enumerate(model.quad.nodes):
        h0 = np.asarray(model.weight.at(t, z), dtype=complex)
        out[q] = np.linalg.solve(h0, model.weight.first(t, z)[j])
    return out


def _node_curvature(model: BergmanModel, j: int, k: int) -> np.ndarray:
    # -dbar_k (h^{-1} d_j h) at each node (raw endomorphism)
    t = model.t
    out = np.empty((len(model.quad), model.rank, model.rank), dtype=complex)
    for q, z in enumerate(model.quad.nodes):
        h0 = np.asarray(model.weight.at(t, z), dtype=complex)
        h1 = model.weight.first(t, z)
        h2 = model.weight.second(t, z)
        hinv = np.linalg.inv(h0)
        d = hinv @ h2[j, k] - hinv @ h1[k].conj().T @ hinv @ h1[j]
        out[q] = -d
    return out


def field_projection(model: BergmanModel) -> FieldOperator:
    """Bergman projection of the discrete L^2 space on the model's nodes."""
    _require_product(model)
    E, WH = _discrete(model)
    N, r = len(model.quad), model.rank
    B = E.reshape(N * r, model.dim)
    W = np.zeros((N * r, N * r), dtype=complex)
    for q in range(N):
        W[q * r:(q + 1) * r, q * r:(q + 1) * r] = WH[q]
    P = B @ model.solve(B.conj().T @ W)
    return FieldOperator("projection", P, weight_matrix=W)


def field_connection(model: BergmanModel, j: int = 0) -> FieldOperator:
    """Coefficient matrix of ``u -> P (h^{-1} d_{t_j} h) u``.

    With ``D_j = d_{t_j} + h^{-1} d_{t_j} h`` (compatible with ``(u, v) = int v^H h u``),
    the (1,0) connection of a section with coefficients ``c(t)`` is
    ``dc/dt_j + matrix @ c``.
    """
    _require_product(model)
    E, WH = _discrete(model)
    Q = _node_connection(model, j)
    QE = Q @ E
    M = np.einsum("qip,qij,qjs->ps", E.conj(), WH, QE)
    return FieldOperator("connection", model.solve(M), form=M)


def _perp_form(model: BergmanModel, E, WH, QE_j, QE_k) -> np.ndarray:
    # (Q_k B)^H W (I - P) (Q_j B)
    full = np.einsum("qip,qij,qjs->ps", QE_k.conj(), WH, QE_j)
    left = np.einsum("qip,qij,qjs->ps", QE_k.conj(), WH, E)
    right = np.einsum("qip,qij,qjs->ps", E.conj(), WH, QE_j)
    return full - left @ model.solve(right)


def field_curvature(model: BergmanModel, j: int = 0, k: int = 0) -> FieldOperator:
    """``Theta^E_{j kbar}``: multiplication curvature minus the second fundamental form.

    ``form[p, s]`` gives ``(Theta^E u, v) = d^H form c``.
    """
    _require_product(model)
    E, WH = _discrete(model)
    TF = _node_curvature(model, j, k)
    S = np.einsum("qip,qij,qjs->ps", E.conj(), WH, TF @ E)
    QE_j = _node_connection(model, j) @ E
    QE_k = QE_j if k == j else _node_connection(model, k) @ E
    form = S - _perp_form(model, E, WH, QE_j, QE_k)
    return FieldOperator("curvature", model.solve(form), form=form)


@dataclass(frozen=True)
class HolomorphicFamily:
    """Coefficient arrays polynomial in ``t``: ``c(t) = sum_beta t^beta terms[beta]``."""

    terms: dict

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=complex))
        return sum(np.prod(t ** np.array(b)) * np.asarray(c, dtype=complex)
                   for b, c in self.terms.items())

    def derivative(self, t, j: int) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=complex))
        out = 0
        for b, c in self.terms.items():
            if b[j] == 0:
                continue
            bb = list(b)
            bb[j] -= 1
            out = out + b[j] * np.prod(t ** np.array(bb)) * np.asarray(c, dtype=complex)
        if isinstance(out, int):
            out = np.zeros_like(next(iter(self.terms.values())), dtype=complex)
        return out

    @classmethod
    def constant(cls, coeffs, m: int = 1) -> "HolomorphicFamily":
        return cls({(0,) * m: np.asarray(coeffs, dtype=complex)})


@dataclass(frozen=True)
class TuHessian:
    value: float
    richardson_gap: float
    norms_sq: float
    identity_value: float
    constraint_residual: float

    @property
    def c0(self) -> float:
        return self.value / self.norms_sq if self.norms_sq > 0 else float("nan")


def t_u_hessian(model: BergmanModel, family: Sequence[HolomorphicFamily], step: float = 1e-3) -> TuHessian:
    """Coefficient of ``d dbar (-T_u)`` against ``dV(t)`` at ``model.t``.

    ``T_jk(t) = (u_j(t), u_k(t))_t`` is differentiated by central differences
    (step and step/2, the gap is reported).  ``identity_value`` is the same
    quantity from the field operators:
    ``sum_jk (Theta^E_jk u_j, u_k) - ||sum_j nabla^E_j u_j||^2``.
    """
    _require_product(model)
    m = model.weight.m
    if len(family) != m:
        raise ValueError(f"need an m-tuple of sections (m={m})")
    t0 = model.t

    def T(j, k):
        def fn(t):
            return np.vdot(family[k](t), model.gram_at(t) @ family[j](t))
        return fn

    def hess_at(h):
        total = 0.0
        for j in range(m):
            for k in range(m):
                H = complex_hessian(T(j, k), t0, h)
                total += H[j, k]
        return -float(np.real(total))

    v1, v2 = hess_at(step), hess_at(step / 2)
    value = (4 * v2 - v1) / 3
    if abs(v1 - v2) > RICHARDSON_RTOL * (1.0 + abs(value)):
        warnings.warn(f"t-Hessian steps {step:g} and {step / 2:g} disagree by {abs(v1 - v2):.3g}; "
                      "step is at the rounding floor or too coarse", RuntimeWarning)

    conn_sum = np.zeros(model.dim, dtype=complex)
    theta_pair = 0.0
    for j in range(m):
        A = field_connection(model, j).matrix
        conn_sum += family[j].derivative(t0, j) + A @ family[j](t0)
        for k in range(m):
            F = field_curvature(model, j, k).form
            theta_pair += np.vdot(family[k](t0), F @ family[j](t0))
    constraint = model.norm_sq(conn_sum)
    identity = float(np.real(theta_pair)) - constraint
    norms = sum(model.norm_sq(u(t0)) for u in family)
    return TuHessian(value, abs(v1 - v2), norms, identity, float(np.sqrt(constraint)))
