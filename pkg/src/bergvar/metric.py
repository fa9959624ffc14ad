"""Hermitian weights h(t, z), the cut-off smoothing rho_j and the twist f(rho).

Derivative conventions follow :mod:`bergvar.fields`: with ``w = (t, z)``,
``first(t, z)[a] = dh/dw_a`` and ``second(t, z)[a, b] = d^2 h / dw_a dconj(w_b)``.
A scalar weight is stored through its potential ``phi`` with ``h = exp(-phi)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import expit

from .fields import ScalarField, real_scalar, split_point, wirtinger_gradient, wirtinger_hessian


@dataclass(frozen=True)
class MetricField:
    rank: int
    m: int
    n: int
    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    d1: Callable | None = None
    d2: Callable | None = None
    name: str = ""
    phi: ScalarField | None = None
    mode: str = "analytic"

    def at(self, t, z) -> np.ndarray:
        """``h`` at one point, or ``(N, r, r)`` for a batch of ``z``."""
        return np.asarray(self.value(np.asarray(t, dtype=complex), np.asarray(z, dtype=complex)))

    def _joint(self, w: np.ndarray) -> np.ndarray:
        t, z = split_point(w, self.m)
        return np.asarray(self.value(t, z))

    def first(self, t, z) -> np.ndarray:
        t, z = np.asarray(t, dtype=complex), np.asarray(z, dtype=complex)
        if self.mode == "analytic" and self.d1 is not None:
            return np.asarray(self.d1(t, z))
        return wirtinger_gradient(self._joint, np.concatenate([t, z]))

    def second(self, t, z) -> np.ndarray:
        t, z = np.asarray(t, dtype=complex), np.asarray(z, dtype=complex)
        if self.mode == "analytic" and self.d2 is not None:
            return np.asarray(self.d2(t, z))
        return wirtinger_hessian(self._joint, np.concatenate([t, z]))

    @property
    def analytic(self) -> bool:
        return self.mode == "analytic" and self.d1 is not None and self.d2 is not None

    def finite_difference(self) -> "MetricField":
        return replace(self, mode="fd")

    def restrict(self, t) -> "MetricField":
        """The fiber metric ``h^[t]`` as a field with no parameter directions."""
        t0 = np.asarray(t, dtype=complex)
        m = self.m
        return MetricField(
            self.rank, 0, self.n,
            lambda _t, z: self.value(t0, z),
            (lambda _t, z: self.first(t0, z)[m:]) if self.d1 is not None else None,
            (lambda _t, z: self.second(t0, z)[m:, m:]) if self.d2 is not None else None,
            name=f"{self.name}@t",
            phi=self.phi.restrict(t0) if self.phi is not None else None,
            mode=self.mode,
        )


def scalar_weight(phi: ScalarField, name: str | None = None) -> MetricField:
    """The rank-one metric ``exp(-phi)``."""

    def value(t, z):
        return np.exp(-np.real(phi.value(t, z)))[..., None, None]

    def d1(t, z):
        h = math.exp(-real_scalar(phi.value(t, z)))
        return (-phi.gradient(t, z) * h)[:, None, None]

    def d2(t, z):
        h = math.exp(-real_scalar(phi.value(t, z)))
        g = phi.gradient(t, z)
        out = (-phi.hessian(t, z) + np.outer(g, g.conj())) * h
        return out[:, :, None, None]

    return MetricField(1, phi.m, phi.n, value, d1, d2, name=name or phi.name, phi=phi)


def weighted(h: MetricField, psi: ScalarField, name: str = "") -> MetricField:
    """The metric ``h * exp(-psi)`` with product-rule derivatives."""
    if (h.m, h.n) != (psi.m, psi.n):
        raise ValueError("dimension mismatch between metric and scalar factor")
    if h.phi is not None:
        return scalar_weight(h.phi + psi, name=name or f"{h.name}*exp(-{psi.name})")

    def value(t, z):
        g = np.exp(-np.real(psi.value(t, z)))
        return np.asarray(h.value(t, z)) * np.asarray(g)[..., None, None]

    def d1(t, z):
        g = math.exp(-real_scalar(psi.value(t, z)))
        dg = -psi.gradient(t, z) * g
        return h.first(t, z) * g + h.at(t, z)[None] * dg[:, None, None]

    def d2(t, z):
        g = math.exp(-real_scalar(psi.value(t, z)))
        p1 = psi.gradient(t, z)
        dg = -p1 * g
        ddg = (-psi.hessian(t, z) + np.outer(p1, p1.conj())) * g
        h0, h1, h2 = h.at(t, z), h.first(t, z), h.second(t, z)
        h1bar = np.conj(np.swapaxes(h1, -1, -2))  # [b] -> dh/dconj(w_b)
        out = h2 * g
        out = out + h1[:, None] * np.conj(dg)[None, :, None, None]
        out = out + h1bar[None, :] * dg[:, None, None, None]
        out = out + h0[None, None] * ddg[:, :, None, None]
        return out

    return MetricField(h.rank, h.m, h.n, value, d1, d2, name=name or f"{h.name}*exp(-{psi.name})")


# ---------------------------------------------------------------------------
# built-in potentials and defining functions

def quadratic_field(A, m: int, n: int, const: float = 0.0, name: str = "") -> ScalarField:
    """``w^H A w + const`` for a Hermitian ``(m+n) x (m+n)`` matrix ``A``."""
    A = np.asarray(A, dtype=complex)
    if A.shape != (m + n, m + n) or not np.allclose(A, A.conj().T):
        raise ValueError("quadratic form must be Hermitian of size m+n")

    def value(t, z):
        t = np.broadcast_to(t, z.shape[:-1] + (m,))
        w = np.concatenate([t, z], axis=-1)
        return np.real(np.einsum("...c,cd,...d->...", w.conj(), A, w)) + const

    def grad(t, z):
        w = np.concatenate([t, z])
        return A.T @ w.conj()

    return ScalarField(m, n, value, grad, lambda t, z: A.T.copy(), name=name)


def _sq(z):
    return np.sum(np.abs(z) ** 2, axis=-1)


def modulated_field(m: int, n: int, a: float = 0.0, b: float = 0.0, c: float = 1.0) -> ScalarField:
    """``a|t|^2 + b|z|^2 + 2c Re(t_1) |z|^2``."""

    def value(t, z):
        return a * float(np.sum(np.abs(t) ** 2)) + (b + 2 * c * np.real(t[0])) * _sq(z)

    def grad(t, z):
        g = np.zeros(m + n, dtype=complex)
        g[:m] = a * t.conj()
        g[0] += c * _sq(z)
        g[m:] = (b + 2 * c * np.real(t[0])) * z.conj()
        return g

    def hess(t, z):
        H = np.zeros((m + n, m + n), dtype=complex)
        H[:m, :m] = a * np.eye(m)
        H[0, m:] = c * z
        H[m:, 0] = c * z.conj()
        H[m:, m:] = (b + 2 * c * np.real(t[0])) * np.eye(n)
        return H

    return ScalarField(m, n, value, grad, hess, name="modulated-gaussian")


def radial_field(m: int, n: int, coeffs, a: float = 0.0) -> ScalarField:
    """``a|t|^2 + sum_k coeffs[k-1] |z|^{2k}``."""
    p = np.polynomial.Polynomial([0.0] + [float(c) for c in coeffs])
    dp, ddp = p.deriv(1), p.deriv(2)

    def value(t, z):
        return a * float(np.sum(np.abs(t) ** 2)) + p(_sq(z))

    def grad(t, z):
        s = _sq(z)
        return np.concatenate([a * t.conj(), dp(s) * z.conj()])

    def hess(t, z):
        s = _sq(z)
        H = np.zeros((m + n, m + n), dtype=complex)
        H[:m, :m] = a * np.eye(m)
        H[m:, m:] = dp(s) * np.eye(n) + ddp(s) * np.outer(z.conj(), z)
        return H

    return ScalarField(m, n, value, grad, hess, name="radial-polynomial")


def _product_A(m, n, a, b):
    return np.diag([a] * m + [b] * n)


def _shifted_A(m, n):
    if m not in (1, n):
        raise ValueError("shifted-gaussian needs m == 1 or m == n")
    A = np.zeros((m + n, m + n))
    for nu in range(n):
        k = 0 if m == 1 else nu
        A[k, k] += 1.0
        A[m + nu, m + nu] += 1.0
        A[k, m + nu] -= 1.0
        A[m + nu, k] -= 1.0
    return A


def matrix_demo(m: int, n: int, a: float = 0.0, b=(1.0, 2.0), angle: float = 0.0) -> MetricField:
    """Rank-2 metric ``R diag(exp(-a|t|^2 - b_i |z|^2)) R^T`` with a fixed rotation ``R``."""
    R = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    b = tuple(float(x) for x in b)

    def value(t, z):
        s = _sq(z)
        ta = a * float(np.sum(np.abs(t) ** 2))
        d = np.stack([np.exp(-ta - bi * s) for bi in b], axis=-1)
        return np.einsum("ik,...k,lk->...il", R, d, R).astype(complex)

    def _lift(per_entry):
        # per_entry: (..., 2) coefficients for each diagonal slot
        return np.einsum("ik,...k,lk->...il", R, per_entry, R)

    def d1(t, z):
        s = _sq(z)
        ta = a * float(np.sum(np.abs(t) ** 2))
        e = np.array([math.exp(-ta - bi * s) for bi in b])
        out = np.zeros((m + n, 2), dtype=complex)
        out[:m] = -a * t.conj()[:, None] * e[None]
        out[m:] = -np.outer(z.conj(), np.array(b)) * e[None]
        return _lift(out)

    def d2(t, z):
        s = _sq(z)
        ta = a * float(np.sum(np.abs(t) ** 2))
        e = np.array([math.exp(-ta - bi * s) for bi in b])
        out = np.zeros((m + n, m + n, 2), dtype=complex)
        for k, bk in enumerate(b):
            g = np.concatenate([a * t.conj(), bk * z.conj()])
            H = np.diag([a] * m + [bk] * n).astype(complex)
            out[:, :, k] = (-H + np.outer(g, g.conj())) * e[k]
        return _lift(out)

    return MetricField(2, m, n, value, d1, d2, name="matrix-demo")


WEIGHTS: dict[str, Callable[..., MetricField]] = {
    "constant": lambda m, n, c=1.0: scalar_weight(
        quadratic_field(np.zeros((m + n, m + n)), m, n, const=-math.log(c), name="constant")),
    "product-gaussian": lambda m, n, a=1.0, b=1.0: scalar_weight(
        quadratic_field(_product_A(m, n, a, b), m, n, name="product-gaussian")),
    "fock": lambda m, n, b=1.0: scalar_weight(
        quadratic_field(_product_A(m, n, 0.0, b), m, n, name="fock")),
    "shifted-gaussian": lambda m, n: scalar_weight(
        quadratic_field(_shifted_A(m, n), m, n, name="shifted-gaussian")),
    "modulated-gaussian": lambda m, n, a=0.0, b=0.0, c=1.0: scalar_weight(modulated_field(m, n, a, b, c)),
    "radial-polynomial": lambda m, n, coeffs=(1.0,), a=0.0: scalar_weight(radial_field(m, n, coeffs, a)),
    "matrix-demo": matrix_demo,
}

DEFINING_FUNCTIONS: dict[str, Callable[..., ScalarField]] = {
    # |z|^2 - R^2 + c|t|^2 ; the default is the shrinking-disc family
    "disc-family": lambda m, n, radius=1.0, c=0.25: quadratic_field(
        _product_A(m, n, c, 1.0), m, n, const=-radius ** 2, name="disc-family"),
    "unit-disc": lambda m, n, radius=1.0: quadratic_field(
        _product_A(m, n, 0.0, 1.0), m, n, const=-radius ** 2, name="unit-disc"),
    "empty": lambda m, n: quadratic_field(np.zeros((m + n, m + n)), m, n, const=1.0, name="empty"),
}

USER_TABLES: dict[str, MetricField] = {}


def make_weight(name: str, m: int, n: int, **params) -> MetricField:
    if name in USER_TABLES:
        return USER_TABLES[name]
    if name not in WEIGHTS:
        raise KeyError(f"unknown weight {name!r}")
    return WEIGHTS[name](m, n, **params)


def make_defining_function(name: str, m: int, n: int, **params) -> ScalarField:
    if name not in DEFINING_FUNCTIONS:
        raise KeyError(f"unknown defining function {name!r}")
    return DEFINING_FUNCTIONS[name](m, n, **params)


def load_table_weight(path, name: str | None = None) -> MetricField:
    """Register a t-independent scalar potential tabulated on a grid in C.

    The CSV has columns ``x,y,phi`` on a full rectangular grid.  Values are
    interpolated with cubic splines; derivatives come from finite differences.
    """
    from pathlib import Path
    from scipy.interpolate import RegularGridInterpolator

    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    xs, ys = np.unique(data[:, 0]), np.unique(data[:, 1])
    grid = np.full((xs.size, ys.size), np.nan)
    ix = np.searchsorted(xs, data[:, 0])
    iy = np.searchsorted(ys, data[:, 1])
    grid[ix, iy] = data[:, 2]
    if np.isnan(grid).any():
        raise ValueError("table does not cover a full rectangular grid")
    interp = RegularGridInterpolator((xs, ys), grid, method="cubic")

    def value(t, z):
        z = np.asarray(z)
        pts = np.stack([np.real(z[..., 0]), np.imag(z[..., 0])], axis=-1)
        return interp(pts)

    key = name or Path(path).stem
    field = scalar_weight(ScalarField(1, 1, value, name=key), name=key)
    USER_TABLES[key] = field
    return field


# ---------------------------------------------------------------------------
# cut-off smoothing and the twist

def smooth_max_zero(rho, j: int):
    """``rho_j = log(exp(j^2 rho) + 1) / j`` in overflow-safe form (about ``j max(rho, 0)``)."""
    if j < 4:
        raise ValueError("the smoothing index j must be >= 4")
    return np.logaddexp(0.0, j * j * np.asarray(rho, dtype=float)) / j


def smooth_max_zero_derivatives(rho, j: int):
    """First and second derivatives of ``rho_j`` in ``rho``."""
    s = expit(j * j * np.asarray(rho, dtype=float))
    return j * s, j ** 3 * s * (1.0 - s)


def smoothed_defining_function(rho: ScalarField, j: int) -> ScalarField:
    """``rho_j(rho(t, z))`` with chain-rule Wirtinger derivatives."""

    def value(t, z):
        return smooth_max_zero(np.real(rho.value(t, z)), j)

    def grad(t, z):
        d1, _ = smooth_max_zero_derivatives(real_scalar(rho.value(t, z)), j)
        return d1 * rho.gradient(t, z)

    def hess(t, z):
        r = real_scalar(rho.value(t, z))
        d1, d2 = smooth_max_zero_derivatives(r, j)
        g = rho.gradient(t, z)
        return d1 * rho.hessian(t, z) + d2 * np.outer(g, g.conj())

    return ScalarField(rho.m, rho.n, value, grad, hess, name=f"{rho.name}_j{j}")


def twisted_weight(h: MetricField, rho: ScalarField, j: int) -> MetricField:
    """``h_j = h * exp(-rho_j)``."""
    if j < 4:
        raise ValueError("the smoothing index j must be >= 4")
    hj = weighted(h, smoothed_defining_function(rho, j), name=f"{h.name}|cutoff j={j}")

    def checked(fn, what):
        def inner(t, z):
            out = fn(t, z)
            if not np.all(np.isfinite(out)):
                raise FloatingPointError(f"{what} of {hj.name} overflowed at t={t}, z={z}")
            return out
        return inner

    return replace(hj, d1=checked(hj.d1, "first derivative"), d2=checked(hj.d2, "second derivative"))


def delta_condition(delta: float, j: int) -> float:
    """``sqrt(delta j^3/(1+delta)) - (j + delta)``; positive when admissible."""
    return math.sqrt(delta * j ** 3 / (1.0 + delta)) - (j + delta)


def twist_c1(delta: float, j: int) -> float:
    return (math.pi * math.sqrt(delta / (j ** 3 * (1.0 + delta))) + 1.0) / delta


@dataclass(frozen=True)
class TwistParams:
    delta: float
    j: int
    C1: float
    C2: float = 0.0

    def __post_init__(self):
        if self.j < 4:
            raise ValueError("j must be >= 4")
        if self.delta <= 0:
            raise ValueError("delta must be positive")

    @property
    def margin(self) -> float:
        return delta_condition(self.delta, self.j)

    @property
    def frequency(self) -> float:
        """Coefficient ``a`` of the tan/cos argument ``a (rho + C1 delta)``."""
        d, j = self.delta, self.j
        return math.sqrt(1.0 + d) * j ** 1.5 / (4.0 * math.sqrt(d))

    def argument(self, rho):
        return self.frequency * (np.asarray(rho, dtype=float) + self.C1 * self.delta)

    def admissible_upper(self) -> float:
        """Sup of the rho-range on which the argument stays below pi/2."""
        return math.pi / (2 * self.frequency) - self.C1 * self.delta


DELTA_GRID = tuple(2.0 ** k for k in range(-6, 7))
DELTA_BISECTIONS = 30


def choose_twist_constants(j: int) -> TwistParams:
    """Smallest grid delta satisfying the twist inequality, refined by bisection.

    The grid is ``2^-6 .. 2^6``; the bracket below the first admissible grid
    point is bisected a fixed number of times and the admissible end kept.
    """
    if j < 4:
        raise ValueError("j must be >= 4")
    prev = None
    for d in DELTA_GRID:
        if delta_condition(d, j) > 0:
            break
        prev = d
    else:
        raise AssertionError(f"no admissible delta on the grid for j={j}")
    lo, hi = prev, d
    if lo is not None:
        for _ in range(DELTA_BISECTIONS):
            mid = 0.5 * (lo + hi)
            if delta_condition(mid, j) > 0:
                hi = mid
            else:
                lo = mid
    delta = hi
    assert delta_condition(delta, j) > 0
    return TwistParams(delta=delta, j=j, C1=twist_c1(delta, j), C2=0.0)


class TwistDomainError(ValueError):
    pass


class Jet(NamedTuple):
    value: float
    d1: float
    d2: float


def twist_eta(rho: float, params: TwistParams) -> Jet:
    """``f(rho) = C2 - 2/(1+delta) log cos(a (rho + C1 delta))`` with f', f''."""
    if not (-1.0 <= rho < 0.0):
        raise TwistDomainError(f"rho={rho} outside the normalized range [-1, 0)")
    theta = float(params.argument(rho))
    if theta < math.pi / 4 - 1e-12:
        raise TwistDomainError(f"tan-argument {theta} below pi/4 at rho={rho}")
    if theta >= math.pi / 2:
        raise TwistDomainError(
            f"tan-argument {theta:.6g} >= pi/2 at rho={rho} (cos <= 0); admissible rho < "
            f"{params.admissible_upper():.6g} for j={params.j}, delta={params.delta:.6g}")
    d = params.delta
    a = params.frequency
    k = 2.0 / (1.0 + d)
    c = math.cos(theta)
    return Jet(params.C2 - k * math.log(c), k * a * math.tan(theta), k * a * a / (c * c))


def ode_residual(rho: float, params: TwistParams) -> float:
    f = twist_eta(rho, params)
    d = params.delta
    return 2 * d * f.d2 - d * (1 + d) * f.d1 ** 2 - params.j ** 3 / 4.0


@dataclass(frozen=True)
class EtaField:
    """A real function ``eta(z)`` on the fiber with its z-Wirtinger derivatives.

    ``neg_exp_hessian(c, z)``, when given, is an independent closed form for
    ``d dbar (-exp(-c eta))``.
    """

    n: int
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray]
    name: str = ""
    neg_exp_hessian: Callable[[float, np.ndarray], np.ndarray] | None = None


def zero_eta(n: int) -> EtaField:
    return EtaField(n, lambda z: 0.0, lambda z: np.zeros(n, dtype=complex),
                    lambda z: np.zeros((n, n), dtype=complex), name="zero")


def re_eta(n: int, coeff: float = 1.0) -> EtaField:
    """``coeff * Re z_1``; pluriharmonic."""
    g = np.zeros(n, dtype=complex)
    g[0] = 0.5 * coeff
    return EtaField(n, lambda z: coeff * float(np.real(np.asarray(z)[0])), lambda z: g.copy(),
                    lambda z: np.zeros((n, n), dtype=complex), name="re-z")


def quadratic_eta(n: int, coeff: float = 1.0) -> EtaField:
    return EtaField(n, lambda z: coeff * float(_sq(np.asarray(z))),
                    lambda z: coeff * np.asarray(z, dtype=complex).conj(),
                    lambda z: coeff * np.eye(n, dtype=complex), name="quadratic")


def eta_from_rho(rho: ScalarField, params: TwistParams, t=None) -> EtaField:
    """``eta = f(rho^[t])`` with chain-rule derivatives in z."""
    fib = rho.restrict(t if t is not None else np.zeros(rho.m)) if rho.m else rho
    n = rho.n

    def r(z):
        return real_scalar(fib.value(_T0, np.asarray(z, dtype=complex)))

    def value(z):
        return twist_eta(r(z), params).value

    def grad(z):
        return twist_eta(r(z), params).d1 * fib.gradient(_T0, z)[-n:]

    def hess(z):
        f = twist_eta(r(z), params)
        g = fib.gradient(_T0, z)[-n:]
        return f.d1 * fib.hessian(_T0, z)[-n:, -n:] + f.d2 * np.outer(g, g.conj())

    def neg_exp_hessian(c, z):
        if not math.isclose(c, (1 + params.delta) / 2):
            raise ValueError("closed form only for c = (1 + delta)/2")
        # -exp(-c f(rho)) = -exp(-c C2) cos(theta(rho))
        rv = r(z)
        twist_eta(rv, params)
        theta = float(params.argument(rv))
        a = params.frequency
        scale = math.exp(-c * params.C2)
        G1 = scale * a * math.sin(theta)
        G2 = scale * a * a * math.cos(theta)
        g = fib.gradient(_T0, z)[-n:]
        return G1 * fib.hessian(_T0, z)[-n:, -n:] + G2 * np.outer(g, g.conj())

    return EtaField(n, value, grad, hess, name=f"twist(j={params.j})", neg_exp_hessian=neg_exp_hessian)


_T0 = np.zeros(0, dtype=complex)

ETAS: dict[str, Callable[..., EtaField]] = {
    "zero": zero_eta,
    "re-z": re_eta,
    "quadratic": quadratic_eta,
}
