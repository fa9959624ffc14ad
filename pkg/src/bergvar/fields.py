"""Real-valued fields on U x X with Wirtinger derivatives.

Points are split as ``t`` (shape ``(m,)``) and ``z`` (shape ``(n,)`` or a
batch ``(N, n)``).  Derivatives are taken with respect to the concatenated
holomorphic coordinate ``w = (t, z)``:

* ``grad[a]    = d f / d w_a``
* ``hess[a, b] = d^2 f / d w_a d conj(w_b)``

so ``hess`` is the coefficient matrix of ``d dbar f`` and is Hermitian for
real ``f``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

FD_RELATIVE_STEP = 1e-4


def real_scalar(x) -> float:
    """Real part of a one-element array (or scalar) as a float."""
    return float(np.ravel(np.real(x))[0])


def split_point(w: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    w = np.asarray(w, dtype=complex)
    return w[:m], w[m:]


def _fd_steps(w: np.ndarray) -> np.ndarray:
    return FD_RELATIVE_STEP * (1.0 + np.abs(w))


def wirtinger_gradient(fun: Callable[[np.ndarray], np.ndarray], w: np.ndarray) -> np.ndarray:
    """Central-difference ``d/dw_a`` of ``fun`` at ``w``.

    ``fun`` may be scalar- or array-valued; the derivative index is the
    leading axis of the result.
    """
    w = np.asarray(w, dtype=complex)
    steps = _fd_steps(w)
    out = []
    for a in range(w.size):
        e = np.zeros(w.size, dtype=complex)
        e[a] = steps[a]
        dx = (np.asarray(fun(w + e)) - np.asarray(fun(w - e))) / (2 * steps[a])
        dy = (np.asarray(fun(w + 1j * e)) - np.asarray(fun(w - 1j * e))) / (2 * steps[a])
        out.append(0.5 * (dx - 1j * dy))
    return np.array(out)


def wirtinger_hessian(fun: Callable[[np.ndarray], np.ndarray], w: np.ndarray) -> np.ndarray:
    """``[a, b] -> d^2 fun / dw_a dconj(w_b)`` by nested central differences."""
    w = np.asarray(w, dtype=complex)
    steps = _fd_steps(w)
    k = w.size

    def dbar(b: int) -> Callable[[np.ndarray], np.ndarray]:
        e = np.zeros(k, dtype=complex)
        e[b] = steps[b]

        def g(v: np.ndarray) -> np.ndarray:
            dx = (np.asarray(fun(v + e)) - np.asarray(fun(v - e))) / (2 * steps[b])
            dy = (np.asarray(fun(v + 1j * e)) - np.asarray(fun(v - 1j * e))) / (2 * steps[b])
            return 0.5 * (dx + 1j * dy)

        return g

    cols = [wirtinger_gradient(dbar(b), w) for b in range(k)]
    # cols[b][a] = d_a dbar_b f
    return np.moveaxis(np.array(cols), 0, 1)


def complex_hessian(fun: Callable, t0, h: float) -> np.ndarray:
    """``[a, b] -> d^2 fun / dt_a dconj(t_b)`` by central differences with step ``h``."""
    t0 = np.atleast_1d(np.asarray(t0, dtype=complex))
    m = t0.size
    H = np.zeros((m, m), dtype=complex)

    def d2(u, v):
        return (fun(t0 + h * u + h * v) - fun(t0 + h * u - h * v)
                - fun(t0 - h * u + h * v) + fun(t0 - h * u - h * v)) / (4 * h * h)

    for a in range(m):
        for b in range(m):
            ea = np.zeros(m, dtype=complex)
            eb = np.zeros(m, dtype=complex)
            ea[a] = 1
            eb[b] = 1
            xx, yy = d2(ea, eb), d2(1j * ea, 1j * eb)
            xy, yx = d2(ea, 1j * eb), d2(1j * ea, eb)
            H[a, b] = 0.25 * (xx + yy + 1j * (xy - yx))
    return H


@dataclass(frozen=True)
class ScalarField:
    """Real function of ``(t, z)`` with optional analytic derivatives.

    ``value(t, z)`` must broadcast over a leading batch axis of ``z``.
    ``grad`` / ``hess`` take a single point and follow the module
    conventions; when absent they fall back to finite differences.
    """

    m: int
    n: int
    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    hess: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    name: str = ""

    @property
    def analytic(self) -> bool:
        return self.grad is not None and self.hess is not None

    def __call__(self, t, z) -> np.ndarray:
        return np.asarray(self.value(np.asarray(t, dtype=complex), np.asarray(z, dtype=complex)))

    def _joint(self, w: np.ndarray) -> float:
        t, z = split_point(w, self.m)
        return real_scalar(self.value(t, z))

    def gradient(self, t, z, mode: str = "auto") -> np.ndarray:
        t = np.asarray(t, dtype=complex)
        z = np.asarray(z, dtype=complex)
        if mode != "fd" and self.grad is not None:
            return np.asarray(self.grad(t, z), dtype=complex)
        return wirtinger_gradient(self._joint, np.concatenate([t, z]))

    def hessian(self, t, z, mode: str = "auto") -> np.ndarray:
        t = np.asarray(t, dtype=complex)
        z = np.asarray(z, dtype=complex)
        if mode != "fd" and self.hess is not None:
            return np.asarray(self.hess(t, z), dtype=complex)
        return wirtinger_hessian(self._joint, np.concatenate([t, z]))

    def restrict(self, t) -> "ScalarField":
        """The fiber function ``z -> f(t, z)`` as a field with ``m = 0``."""
        t0 = np.asarray(t, dtype=complex)
        m = self.m
        grad = hess = None
        if self.grad is not None:
            grad = lambda _t, z: np.asarray(self.grad(t0, z))[m:]
        if self.hess is not None:
            hess = lambda _t, z: np.asarray(self.hess(t0, z))[m:, m:]
        return ScalarField(0, self.n, lambda _t, z: self.value(t0, z), grad, hess,
                           name=f"{self.name}@t")

    def __add__(self, other: "ScalarField") -> "ScalarField":
        if (self.m, self.n) != (other.m, other.n):
            raise ValueError("dimension mismatch in field sum")
        grad = hess = None
        if self.grad is not None and other.grad is not None:
            grad = lambda t, z: self.grad(t, z) + other.grad(t, z)
        if self.hess is not None and other.hess is not None:
            hess = lambda t, z: self.hess(t, z) + other.hess(t, z)
        return ScalarField(self.m, self.n, lambda t, z: self.value(t, z) + other.value(t, z),
                           grad, hess, name=f"{self.name}+{other.name}")
