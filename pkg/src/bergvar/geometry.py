"""Domains in C^n, their fibers and exhaustions, and volume quadrature."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .fields import ScalarField

MC_SAMPLES_PER_ORDER = 1024
RADIAL_PANEL = 16.0


class EmptyFiberWarning(UserWarning):
    pass


class ContainmentError(ValueError):
    """Raised when exhaustion stages are not nested on the sampled nodes."""


def as_point(coords, dim: int | None = None) -> np.ndarray:
    p = np.atleast_1d(np.asarray(coords, dtype=complex))
    if dim is not None and p.shape[-1] != dim:
        raise ValueError(f"expected {dim} complex coordinates, got {p.shape[-1]}")
    return p


@dataclass(frozen=True)
class DomainSpec:
    """A polydisc, a ball, or a sublevel set ``{rho(t, .) < -level}``.

    For sublevel domains ``t`` is the parameter of the fiber (``None`` means
    the family has not been restricted yet; membership then uses ``t = 0``).
    """

    kind: str
    dim: int
    radii: tuple[float, ...] = ()
    rho: ScalarField | None = None
    box: tuple[tuple[float, float], ...] = ()
    t: tuple[complex, ...] | None = None
    level: float = 0.0
    name: str = ""

    @property
    def radius(self) -> float:
        return self.radii[0]

    @property
    def product(self) -> bool:
        """True when the fiber does not depend on the parameter."""
        return self.kind != "sublevel"

    def reference_t(self) -> np.ndarray:
        if self.t is not None:
            return np.asarray(self.t, dtype=complex)
        return np.zeros(self.rho.m if self.rho is not None else 0, dtype=complex)

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if z.ndim == 1:
            z = z[None, :]
        if self.kind == "polydisc":
            return np.all(np.abs(z) < np.asarray(self.radii), axis=-1)
        if self.kind == "ball":
            return np.sum(np.abs(z) ** 2, axis=-1) < self.radius ** 2
        vals = np.real(self.rho(self.reference_t(), z))
        return vals < -self.level

    def volume(self) -> float:
        if self.kind == "polydisc":
            return float(np.prod([math.pi * r * r for r in self.radii]))
        if self.kind == "ball":
            n = self.dim
            return math.pi ** n * self.radius ** (2 * n) / math.factorial(n)
        raise ValueError("no closed-form volume for sublevel domains")

    def describe(self) -> dict:
        d = {"kind": self.kind, "dim": self.dim}
        if self.kind == "polydisc":
            d["radii"] = list(self.radii)
        elif self.kind == "ball":
            d["radius"] = self.radius
        else:
            d.update(rho=self.rho.name if self.rho else "", box=[list(b) for b in self.box],
                     level=self.level)
            if self.t is not None:
                d["t"] = [str(c) for c in self.t]
        return d


def make_domain(kind: str, dim: int, radius: float | None = None,
                radii: Sequence[float] | None = None, rho: ScalarField | None = None,
                box: Sequence[Sequence[float]] | None = None, name: str = "") -> DomainSpec:
    if dim < 1:
        raise ValueError("dimension must be positive")
    if kind == "polydisc":
        if radii is None:
            if radius is None:
                raise ValueError("polydisc needs radius or radii")
            radii = [radius] * dim
        radii = tuple(float(r) for r in radii)
        if len(radii) != dim:
            raise ValueError(f"polydisc of dimension {dim} given {len(radii)} radii")
        if min(radii) <= 0:
            raise ValueError("radii must be strictly positive")
        return DomainSpec("polydisc", dim, radii=radii, name=name)
    if kind == "ball":
        if radius is None or radius <= 0:
            raise ValueError("ball radius must be strictly positive")
        return DomainSpec("ball", dim, radii=(float(radius),), name=name)
    if kind == "sublevel":
        if rho is None:
            raise ValueError("sublevel domain needs a defining function")
        if rho.n != dim:
            raise ValueError(f"defining function acts on C^{rho.n}, domain is C^{dim}")
        if box is None:
            raise ValueError("sublevel domain needs a bounding box")
        box = tuple((float(lo), float(hi)) for lo, hi in box)
        if len(box) != 2 * dim or any(hi <= lo for lo, hi in box):
            raise ValueError("bounding box must give 2n nondegenerate real intervals")
        spec = DomainSpec("sublevel", dim, rho=rho, box=box, name=name or rho.name)
        if sample_quadrature(spec, 1, seed=0).empty:
            warnings.warn("sublevel set is empty at the reference parameter", EmptyFiberWarning)
        return spec
    raise ValueError(f"unknown domain kind {kind!r}")


def fiber_domain(spec: DomainSpec, t) -> DomainSpec:
    if spec.product:
        return spec
    t = as_point(t, spec.rho.m)
    return replace(spec, t=tuple(complex(c) for c in t))


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    exactness: int
    stderr: float = 0.0

    def __post_init__(self):
        if len(self.nodes) != len(self.weights):
            raise ValueError("node and weight counts differ")
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def empty(self) -> bool:
        return len(self.weights) == 0

    def __len__(self) -> int:
        return len(self.weights)

    def integrate(self, values) -> complex:
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))


def _disc_rule(radius: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    # Composite Gauss-Legendre in s = r^2 (dA = ds dtheta / 2), uniform in angle.
    # Panels of width <= RADIAL_PANEL keep Gaussian factors resolved on large discs.
    x, w = roots_legendre(order)
    r2 = radius * radius
    panels = max(1, math.ceil(r2 / RADIAL_PANEL))
    edges = np.linspace(0.0, r2, panels + 1)
    half = 0.5 * np.diff(edges)
    s = (edges[:-1, None] + half[:, None] * (x[None, :] + 1.0)).ravel()
    ws = (half[:, None] * w[None, :]).ravel()
    n_ang = 2 * order + 1
    theta = 2 * np.pi * np.arange(n_ang) / n_ang
    nodes = (np.sqrt(s)[:, None] * np.exp(1j * theta)[None, :]).ravel()
    weights = (0.5 * ws[:, None] * np.full(n_ang, 2 * np.pi / n_ang)[None, :]).ravel()
    return nodes, weights


def _ball_rule(dim: int, radius: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    # Collapsed-simplex rule in s_k = |z_k|^2, Gauss-Jacobi on each level.
    rules = []
    for k in range(dim):
        alpha = dim - 1 - k
        xi, w = roots_jacobi(order, alpha, 0.0)
        rules.append((0.5 * (xi + 1.0), w * 2.0 ** (-alpha - 1)))
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wgrid = np.ones_like(grids[0])
    for k in range(dim):
        wgrid = wgrid * np.meshgrid(*[rules[i][1] if i == k else np.ones(order)
                                      for i in range(dim)], indexing="ij")[k]
    xs = [g.ravel() for g in grids]
    ws = wgrid.ravel() * radius ** (2 * dim)
    s = np.empty((xs[0].size, dim))
    rest = np.full(xs[0].size, radius * radius)
    for k in range(dim):
        s[:, k] = rest * xs[k]
        rest = rest * (1.0 - xs[k])
    n_ang = 2 * order + 1
    theta = 2 * np.pi * np.arange(n_ang) / n_ang
    ang = np.stack(np.meshgrid(*([theta] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    nodes = np.sqrt(s)[:, None, :] * np.exp(1j * ang)[None, :, :]
    weights = ws[:, None] * np.full(len(ang), (np.pi / n_ang) ** dim)[None, :]
    # (1/2 * 2pi/n_ang) per axis
    return nodes.reshape(-1, dim), weights.ravel()


def sample_quadrature(domain: DomainSpec, order: int, seed: int = 0) -> QuadratureRule:
    """Volume quadrature for ``domain``.

    Polydiscs and balls get deterministic polar rules that integrate
    ``z^a conj(z)^b`` exactly for total degree ``<= 2 * order``.  Sublevel
    domains get ``1024 * order`` uniform box samples, rejected outside the
    set, with equal weights summing to the volume estimate.
    """
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    if domain.kind == "polydisc":
        axes = [_disc_rule(r, order) for r in domain.radii]
        nodes = np.stack(np.meshgrid(*[a[0] for a in axes], indexing="ij"), axis=-1)
        weights = np.ones(nodes.shape[:-1])
        for k, (_, w) in enumerate(axes):
            shape = [1] * domain.dim
            shape[k] = w.size
            weights = weights * w.reshape(shape)
        return QuadratureRule(nodes.reshape(-1, domain.dim), weights.ravel(), 2 * order)
    if domain.kind == "ball":
        nodes, weights = _ball_rule(domain.dim, domain.radius, order)
        return QuadratureRule(nodes, weights, 2 * order)

    rng = np.random.default_rng(seed)
    count = MC_SAMPLES_PER_ORDER * order
    lo = np.array([b[0] for b in domain.box])
    hi = np.array([b[1] for b in domain.box])
    real = lo + (hi - lo) * rng.random((count, lo.size))
    z = real[:, 0::2] + 1j * real[:, 1::2]
    inside = domain.contains(z)
    box_volume = float(np.prod(hi - lo))
    p = inside.mean()
    weights = np.full(int(inside.sum()), box_volume / count)
    stderr = box_volume * math.sqrt(p * (1 - p) / count)
    return QuadratureRule(np.ascontiguousarray(z[inside]), weights, 0, stderr)


@dataclass(frozen=True)
class Exhaustion:
    stages: tuple[DomainSpec, ...]
    checked_nodes: int = field(default=0, compare=False)

    def __len__(self) -> int:
        return len(self.stages)


def _check_nested(stages: Sequence[DomainSpec], order: int = 4, seed: int = 0) -> int:
    checked = 0
    for k in range(len(stages) - 1):
        rule = sample_quadrature(stages[k], order, seed)
        if rule.empty:
            continue
        inside = stages[k + 1].contains(rule.nodes)
        checked += len(rule)
        if not np.all(inside):
            bad = rule.nodes[~inside][0]
            raise ContainmentError(f"stage {k} node {bad} lies outside stage {k + 1}")
    return checked


def exhaustion_from_stages(stages: Sequence[DomainSpec]) -> Exhaustion:
    stages = tuple(stages)
    if not stages:
        raise ValueError("an exhaustion needs at least one stage")
    return Exhaustion(stages, _check_nested(stages))


def exhaust(spec: DomainSpec, count: int, growth: float = 2.0) -> Exhaustion:
    """Geometric exhaustion: radii ``r * growth**k`` or levels ``growth**-(k+1)``."""
    if count < 2:
        raise ValueError("an exhaustion needs count >= 2")
    if growth <= 1:
        raise ValueError("growth must exceed 1")
    if spec.product:
        stages = [replace(spec, radii=tuple(r * growth ** k for r in spec.radii))
                  for k in range(count)]
    else:
        stages = [replace(spec, level=growth ** -(k + 1)) for k in range(count)]
    return exhaustion_from_stages(stages)


def disc_exhaustion(radii: Sequence[float], dim: int = 1) -> Exhaustion:
    """Nested polydiscs with the given (increasing) radii."""
    return exhaustion_from_stages([make_domain("polydisc", dim, radius=r) for r in radii])
