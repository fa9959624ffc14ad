"""Plurisubharmonic variation of log kernels and dual norms, and monotone limits.

Two independent subharmonicity probes are used at each grid point: the
complex Hessian by central differences (with a step-halving Richardson
check) and the sub-mean-value inequality on small circles in each
coordinate line.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bergman import (BergmanModel, DualFunctional, build_model, evaluation_functional,
                      dual_norm_sq, kernel_eval, measure_functional_norm)
from .fields import ScalarField, complex_hessian
from .geometry import DomainSpec, Exhaustion, fiber_domain, sample_quadrature
from .metric import MetricField, twisted_weight

NEG_INF_THRESHOLD = -700.0
FD_STEP = 1e-3
CIRCLE_ANGLES = 16
CIRCLE_MULTIPLES = (2, 8)
RICHARDSON_RTOL = 1e-3


def safe_log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


# ---------------------------------------------------------------------------
# psh test

@dataclass(frozen=True)
class PSHReport:
    grid: np.ndarray
    values: np.ndarray
    hessians: np.ndarray
    min_eigs: np.ndarray
    circle_deficits: np.ndarray
    verdict: str
    tol: float
    hessian_verdict: str = ""
    circle_verdict: str = ""
    richardson_gaps: np.ndarray = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.verdict in ("strictly-psh", "psh", "all-minus-infinity")

    @property
    def min_eig(self) -> float:
        finite = self.min_eigs[np.isfinite(self.min_eigs)]
        return float(finite.min()) if finite.size else math.nan

    @property
    def min_deficit(self) -> float:
        finite = self.circle_deficits[np.isfinite(self.circle_deficits)]
        return float(finite.min()) if finite.size else math.nan

    def rows(self) -> list[dict]:
        out = []
        for k, t in enumerate(self.grid):
            row = {}
            for i, c in enumerate(t):
                row[f"t{i}_re"] = float(c.real)
                row[f"t{i}_im"] = float(c.imag)
            row["value"] = float(self.values[k])
            row["min_eig"] = float(self.min_eigs[k])
            row["circle_deficit"] = float(np.min(self.circle_deficits[k]))
            out.append(row)
        return out


def grid_points(center, half_width: float, count: int, m: int = 1) -> np.ndarray:
    """Square ``count x count`` grid in each complex ``t_i`` (``m = 1``) or along the axes."""
    c = np.atleast_1d(np.asarray(center, dtype=complex))
    if c.size == 1 and m > 1:
        c = np.full(m, c[0])
    xs = np.linspace(-half_width, half_width, count)
    if m == 1:
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        return (c[0] + X + 1j * Y).reshape(-1, 1)
    pts = [c.copy()]
    for i in range(m):
        for x in xs:
            for y in xs:
                if x == 0 and y == 0:
                    continue
                p = c.copy()
                p[i] += x + 1j * y
                pts.append(p)
    return np.array(pts)


def psh_check(fun: Callable[[np.ndarray], float], grid, step: float | None = None,
              tol: float = 1e-6, strict_tol: float | None = None) -> PSHReport:
    """Grid evidence that ``fun`` is psh (or identically -inf).

    ``fun`` maps ``t`` of shape ``(m,)`` to a real log value (``-inf``
    allowed).  At every grid point with a finite value the Hessian is taken
    with step ``step`` (default ``1e-3 (1 + |t|)``) and half of it,
    extrapolated, and the circle means at radii ``2 step`` and ``8 step``
    are compared with the center value.
    """
    grid = np.asarray(grid, dtype=complex)
    if grid.ndim == 1:
        grid = grid[:, None]
    if grid.shape[0] == 0:
        raise ValueError("psh_check needs a nonempty grid")
    strict_tol = tol if strict_tol is None else strict_tol
    m = grid.shape[1]

    def f(t):
        v = float(fun(t))
        return -math.inf if v < NEG_INF_THRESHOLD else v

    values = np.array([f(t) for t in grid])
    n = len(grid)
    hessians = np.full((n, m, m), np.nan, dtype=complex)
    min_eigs = np.full(n, np.nan)
    deficits = np.full((n, m * len(CIRCLE_MULTIPLES)), np.nan)
    gaps = np.full(n, np.nan)
    if np.all(np.isneginf(values)):
        return PSHReport(grid, values, hessians, min_eigs, deficits, "all-minus-infinity", tol,
                         "all-minus-infinity", "all-minus-infinity", gaps)
    if m == 0:
        # no parameter directions: nothing to differentiate
        return PSHReport(grid, values, hessians, np.zeros(n), deficits, "psh", tol, "psh", "psh", gaps)

    noisy = 0
    angles = 2 * np.pi * np.arange(CIRCLE_ANGLES) / CIRCLE_ANGLES
    for k, t in enumerate(grid):
        if not np.isfinite(values[k]):
            continue
        h = (step if step is not None else FD_STEP) * (1.0 + float(np.linalg.norm(t)))
        with np.errstate(invalid="ignore"):
            H1 = complex_hessian(f, t, h)
            H2 = complex_hessian(f, t, h / 2)
        if not (np.all(np.isfinite(H1)) and np.all(np.isfinite(H2))):
            continue
        H = (4 * H2 - H1) / 3
        H = 0.5 * (H + H.conj().T)
        gaps[k] = float(np.abs(H1 - H2).max())
        if gaps[k] > RICHARDSON_RTOL * (1.0 + float(np.abs(H).max())):
            noisy += 1
        hessians[k] = H
        min_eigs[k] = float(np.linalg.eigvalsh(H)[0])
        col = 0
        for i in range(m):
            e = np.zeros(m, dtype=complex)
            e[i] = 1.0
            for mult in CIRCLE_MULTIPLES:
                r = mult * h
                mean = np.mean([f(t + r * np.exp(1j * a) * e) for a in angles])
                deficits[k, col] = mean - values[k]
                col += 1
    if noisy:
        warnings.warn(f"{noisy} grid points failed the step-halving check; the FD step may be "
                      "below the noise floor", RuntimeWarning)

    finite = np.isfinite(min_eigs)
    if np.any(min_eigs[finite] < -tol):
        hv = "fail"
    elif finite.any() and np.all(min_eigs[finite] > strict_tol):
        hv = "strictly-psh"
    else:
        hv = "psh"
    fd = np.isfinite(deficits)
    cv = "fail" if np.any(deficits[fd] < -tol) else "psh"
    verdict = "fail" if "fail" in (hv, cv) else hv
    return PSHReport(grid, values, hessians, min_eigs, deficits, verdict, tol, hv, cv, gaps)


def affine_shift(fun: Callable, a: float, b) -> Callable:
    """``fun + a + 2 Re(b . t)``; leaves every complex Hessian unchanged."""
    b = np.atleast_1d(np.asarray(b, dtype=complex))
    return lambda t: fun(t) + a + 2.0 * float(np.real(np.dot(b, t)))


# ---------------------------------------------------------------------------
# kernel and dual-norm variation

def log_kernel_function(model: BergmanModel, z, sigma) -> Callable[[np.ndarray], float]:
    """``t -> log <sigma x conj(sigma), K_t(z, z)>`` on a t-independent fiber."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))

    def fn(t):
        return safe_log(kernel_eval(model.at_parameter(t), z).pair(sigma))

    return fn


@dataclass(frozen=True)
class SurrogateLadder:
    """Cut-off surrogate values ``log K_j(t)`` on a fixed outer domain."""

    js: tuple[int, ...]
    grid: np.ndarray
    values: np.ndarray  # (len(js), len(grid)) log kernel values
    fiber_values: np.ndarray  # log fiber kernel per grid point (Monte Carlo fiber)
    monotone: bool
    psh: PSHReport

    def gaps(self) -> np.ndarray:
        return self.fiber_values - self.values[-1]


def kernel_variation(weight: MetricField, domain: DomainSpec, z, sigma, grid, degree: int = 8,
                     quad_order: int | None = None, step: float | None = None, tol: float = 1e-6,
                     js: Sequence[int] = (4, 6, 8, 12), outer: DomainSpec | None = None,
                     seed: int = 0, fiber_order: int = 8):
    """psh test of ``t -> log K_t(z, z)``.

    Product domains give a :class:`PSHReport`.  For a sublevel family the
    fiber kernel is approximated from below by the outer-domain kernels of
    ``h * exp(-rho_j(rho))`` over the ``js`` ladder; a
    :class:`SurrogateLadder` is returned with the psh report of the last rung.
    """
    grid = np.asarray(grid, dtype=complex).reshape(len(grid), -1)
    if domain.product:
        model = build_model(domain, weight, grid[0], degree, quad_order, seed)
        return psh_check(log_kernel_function(model, z, sigma), grid, step, tol)
    if outer is None:
        raise ValueError("a sublevel family needs an outer product domain")
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    rho = domain.rho
    order = quad_order or 300
    values = np.empty((len(js), len(grid)))
    fn = None
    for a, j in enumerate(js):
        hj = twisted_weight(weight, rho, j)
        model = build_model(outer, hj, grid[0], degree, order, seed)
        fn = log_kernel_function(model, z, sigma)
        values[a] = [fn(t) for t in grid]
    fiber = np.empty(len(grid))
    for k, t in enumerate(grid):
        fd = fiber_domain(domain, t)
        if not fd.contains(z)[0]:
            raise ValueError(f"probe point {z} is outside the fiber at t={t}")
        fm = build_model(fd, weight, t, degree, quad=sample_quadrature(fd, fiber_order, seed))
        fiber[k] = safe_log(kernel_eval(fm, z).pair(sigma))
    monotone = bool(np.all(np.diff(values, axis=0) >= 0))
    return SurrogateLadder(tuple(js), grid, values, fiber, monotone, psh_check(fn, grid, step, tol))


def measure_variation(weight: MetricField, domain: DomainSpec, atoms: Callable, grid, degree: int = 8,
                      quad_order: int | None = None, step: float | None = None,
                      tol: float = 1e-6, seed: int = 0) -> PSHReport:
    """psh test of ``t -> log ||xi_t||^2`` for atoms ``atoms(t) -> [(z_k(t), sigma_k)]``."""
    grid = np.asarray(grid, dtype=complex).reshape(len(grid), -1)
    model = build_model(domain, weight, grid[0], degree, quad_order, seed)

    def fn(t):
        at = atoms(t)
        if not at:
            return -math.inf
        for z, _ in at:
            if not domain.contains(np.atleast_1d(np.asarray(z, dtype=complex)))[0]:
                raise ValueError(f"atom {z} leaves the fiber at t={t}")
        return safe_log(measure_functional_norm(model.at_parameter(t), at))

    return psh_check(fn, grid, step, tol)


# ---------------------------------------------------------------------------
# monotone limits

@dataclass(frozen=True)
class MonotoneReport:
    values: np.ndarray
    direction: str
    tol: float
    verdict: str
    violations: tuple = ()
    labels: tuple = ()

    @property
    def stages(self) -> int:
        return len(self.values)

    @property
    def limit(self) -> float:
        return float(self.values[-1])

    @property
    def ok(self) -> bool:
        return self.verdict == "pass"

    def transitive_consistent(self) -> bool:
        """Every pair ``i < k`` compares as the composed adjacent steps do, within twice the tolerance."""
        v = self.values
        sign = -1.0 if self.direction == "nonincreasing" else 1.0
        for i in range(len(v)):
            for k in range(i + 1, len(v)):
                if sign * (v[k] - v[i]) < -2 * self.tol * max(abs(v[i]), abs(v[k]), 1e-300) * (k - i):
                    return False
        return True


def monotone_report(values, direction: str, tol: float, relative: bool = True,
                    labels: Sequence = ()) -> MonotoneReport:
    v = np.asarray(values, dtype=float)
    if direction not in ("nonincreasing", "nondecreasing"):
        raise ValueError(f"unknown direction {direction!r}")
    sign = -1.0 if direction == "nonincreasing" else 1.0
    bad = []
    for k in range(len(v) - 1):
        scale = max(abs(v[k]), abs(v[k + 1])) if relative else 1.0
        if sign * (v[k + 1] - v[k]) < -tol * scale:
            bad.append(k)
    return MonotoneReport(v, direction, tol, "fail" if bad else "pass", tuple(bad), tuple(labels))


def ramadanov_domains(exhaustion: Exhaustion, weight: MetricField, z, sigma, degree: int = 12,
                      quad_order: int | None = None, t=None, tol: float = 1e-9,
                      relative: bool = True, seed: int = 0) -> MonotoneReport:
    """Kernel diagonals over an increasing chain of domains (expected nonincreasing)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if not exhaustion.stages[0].contains(z)[0]:
        raise ValueError("probe point must lie in the smallest stage")
    vals = []
    for stage in exhaustion.stages:
        model = build_model(stage, weight, t, degree, quad_order, seed)
        vals.append(kernel_eval(model, z).pair(sigma))
    return monotone_report(vals, "nonincreasing", tol, relative,
                           labels=tuple(s.describe().get("radii", s.describe().get("level"))
                                        for s in exhaustion.stages))


def check_ladder(domain: DomainSpec, ladder: Sequence[MetricField], t=None, order: int = 8,
                 tol: float = 1e-12, seed: int = 0) -> None:
    """Raise when ``h_{k+1} - h_k`` fails to be positive semidefinite at some quadrature node."""
    nodes = sample_quadrature(domain, order, seed).nodes
    for k in range(len(ladder) - 1):
        lo = ladder[k]
        t0 = np.zeros(lo.m, dtype=complex) if t is None else np.atleast_1d(t)
        A = np.asarray(lo.at(t0, nodes)).reshape(len(nodes), lo.rank, lo.rank)
        B = np.asarray(ladder[k + 1].at(t0, nodes)).reshape(len(nodes), lo.rank, lo.rank)
        D = B - A
        lam = np.linalg.eigvalsh(0.5 * (D + np.conj(np.swapaxes(D, -1, -2))))[:, 0]
        scale = np.abs(A).reshape(len(nodes), -1).max(axis=1)
        bad = np.flatnonzero(lam < -tol * (1 + scale))
        if bad.size:
            raise ValueError(f"ladder rung {k} -> {k + 1} decreases at node {nodes[bad[0]]}")


def ramadanov_metrics(domain: DomainSpec, ladder: Sequence[MetricField], z, sigma, degree: int = 12,
                      quad_order: int | None = None, t=None, tol: float = 1e-9,
                      seed: int = 0) -> MonotoneReport:
    """Kernel diagonals along a pointwise nondecreasing ladder of metrics (expected nonincreasing)."""
    check_ladder(domain, ladder, t, seed=seed)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    vals = [kernel_eval(build_model(domain, h, t, degree, quad_order, seed), z).pair(sigma)
            for h in ladder]
    return monotone_report(vals, "nonincreasing", tol, labels=tuple(h.name for h in ladder))


@dataclass(frozen=True)
class CutoffReport:
    monotone: MonotoneReport
    inner_value: float
    outer_value: float

    @property
    def gap(self) -> float:
        return self.inner_value - self.monotone.limit

    @property
    def bounded(self) -> bool:
        return bool(np.all(self.monotone.values <= self.inner_value * (1 + self.monotone.tol)))

    @property
    def above_outer(self) -> bool:
        return bool(self.monotone.values[0] >= self.outer_value * (1 - self.monotone.tol))

    @property
    def ok(self) -> bool:
        return self.monotone.ok and self.bounded and self.above_outer


def cutoff_convergence(inner: DomainSpec, outer: DomainSpec, weight: MetricField, rho: ScalarField,
                       js: Sequence[int], z, sigma, degree: int = 8, quad_order: int = 300,
                       t=None, tol: float = 1e-9, seed: int = 0) -> CutoffReport:
    """Outer-domain kernels for ``h * exp(-rho_j(rho))`` along ``js`` (expected nondecreasing).

    Also returns the inner-domain kernel (the expected limit and upper bound)
    and the plain outer-domain kernel (a lower bound for the first rung).
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    vals = []
    for j in js:
        model = build_model(outer, twisted_weight(weight, rho, j), t, degree, quad_order, seed)
        vals.append(kernel_eval(model, z).pair(sigma))
    inner_val = outer_val = math.nan
    if inner.contains(z)[0]:
        inner_val = kernel_eval(build_model(inner, weight, t, degree, None, seed), z).pair(sigma)
    outer_val = kernel_eval(build_model(outer, weight, t, degree, quad_order, seed), z).pair(sigma)
    mono = monotone_report(vals, "nondecreasing", tol, labels=tuple(js))
    return CutoffReport(mono, inner_val, outer_val)


@dataclass(frozen=True)
class ExhaustionVariation:
    per_t: tuple[MonotoneReport, ...]
    psh: PSHReport

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.per_t) and self.psh.ok


def dual_norm_exhaustion(weight: MetricField, functional: Callable[[BergmanModel], DualFunctional],
                         exhaustion: Exhaustion, grid, degree: int = 12,
                         quad_order: int | None = None, step: float | None = None,
                         tol: float = 1e-9, psh_tol: float = 1e-6, seed: int = 0) -> ExhaustionVariation:
    """Dual norms of ``functional(model)`` over the stages at each grid ``t``.

    The sequence is expected nonincreasing; the log of the last stage is
    then tested for plurisubharmonicity in ``t``.
    """
    grid = np.asarray(grid, dtype=complex).reshape(len(grid), -1)
    models = [build_model(s, weight, grid[0], degree, quad_order, seed) for s in exhaustion.stages]
    reports = []
    for t in grid:
        vals = [dual_norm_sq(mod.at_parameter(t), functional(mod)) for mod in models]
        reports.append(monotone_report(vals, "nonincreasing", tol))
    last = models[-1]

    def fn(t):
        return safe_log(dual_norm_sq(last.at_parameter(t), functional(last)))

    return ExhaustionVariation(tuple(reports), psh_check(fn, grid, step, psh_tol))


def evaluation_at(z, sigma) -> Callable[[BergmanModel], DualFunctional]:
    return lambda model: evaluation_functional(model, z, sigma)


@dataclass(frozen=True)
class SemicontinuityProbe:
    value: float
    limsups: tuple[float, ...]
    radii: tuple[float, ...]
    violations: tuple[float, ...]


def usc_probe(fun: Callable[[np.ndarray], float], t, radii=(0.1, 0.03, 0.01, 0.003),
              samples: int = 32, tol: float = 1e-6) -> SemicontinuityProbe:
    """Sup of ``fun`` over shrinking circles around ``t``; diagnostics only.

    Upper semicontinuity asks the limit of these sups not to exceed the
    center value; radii where the sup exceeds it by more than ``tol`` are
    listed (a smooth psh function always shows a small positive excess).
    """
    t = np.atleast_1d(np.asarray(t, dtype=complex))
    v = float(fun(t))
    angles = 2 * np.pi * np.arange(samples) / samples
    sups, bad = [], []
    for r in radii:
        s = max(float(fun(t + r * np.exp(1j * a))) for a in angles)
        sups.append(s)
        if s - v > tol:
            bad.append(r)
    return SemicontinuityProbe(v, tuple(sups), tuple(radii), tuple(bad))
