"""Config-driven experiment runner.

Usage::

    bergvar <experiment> [--config FILE] [--tol X] [--degree D] [--quad-order Q]
                         [--seed S] [--out DIR]
    bergvar list

Each run prints ``CHECK <name> PASS|FAIL value=<v> tol=<tol>`` lines and
writes CSV tables to the output directory.  Exit status: 0 when every check
passes, 1 when any fails, 2 on a configuration error.
"""
from __future__ import annotations

import argparse
import copy
import csv
import math
import platform
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
import scipy
import yaml

from . import bergman, curvature, geometry, metric, variation

EXPERIMENTS = ("curvature", "kernel", "nakano", "psh", "ramadanov", "twist")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration

DEFAULT_NUMERICS = {"degree": 12, "quad_order": None, "fd_step": 1e-3, "tol": 1e-8, "seed": 0}

DEFAULTS: dict[str, dict] = {
    "kernel": {
        "family": {"m": 0, "n": 1},
        "domain": {"kind": "polydisc", "radius": 1.0},
        "weight": {"name": "constant"},
        "probes": {"z": [[0.0], [0.5]], "sigma": [1.0]},
    },
    "curvature": {
        "family": {"m": 1, "n": 1},
        "weight": {"name": "product-gaussian"},
        "twist": {"delta": 0.5, "eta": "zero"},
        "grid": {"center": 0.0, "half_width": 0.5, "count": 3},
        "probes": {"z": [[0.0], [0.3], [0.2j]]},
        "expect": {"verdict": "positive"},
    },
    "twist": {
        "family": {"m": 0, "n": 1},
        "twist": {"j": [4, 6, 9, 16], "points": 200},
        "numerics": {"tol": 1e-9},
    },
    "psh": {
        "family": {"m": 1, "n": 1},
        "domain": {"kind": "polydisc", "radius": 1.0},
        "weight": {"name": "product-gaussian"},
        "probes": {"z": [[0.0]], "sigma": [1.0]},
        "grid": {"center": 0.0, "half_width": 0.5, "count": 5},
        "numerics": {"tol": 1e-6},
    },
    "ramadanov": {
        "family": {"m": 0, "n": 1},
        "mode": "domains",
        "weight": {"name": "fock"},
        "radii": [4, 6, 8, 10, 12, 14, 16, 18, 20],
        "probes": {"z": [[0.0]], "sigma": [1.0]},
        "numerics": {"tol": 1e-10},
    },
    "nakano": {
        "family": {"m": 1, "n": 1},
        "domain": {"kind": "polydisc", "radius": 1.0},
        "weight": {"name": "matrix-demo", "params": {"a": 1.0}},
        "twist": {"delta": 0.5, "eta": "zero"},
        "probes": {"z": [[0.0], [0.4], [0.3j]]},
        "numerics": {"degree": 4, "quad_order": 12, "tol": 1e-4, "fd_step": 1e-3},
        "samples": 5,
    },
}


@dataclass(frozen=True)
class Numerics:
    degree: int
    quad_order: int | None
    fd_step: float
    tol: float
    seed: int


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    numerics: Numerics
    body: dict = field(default_factory=dict)
    out: str = "out"

    def get(self, path: str, default: Any = None) -> Any:
        node: Any = self.body
        for key in path.split("."):
            if not isinstance(node, dict) or key not in node:
                return default
            node = node[key]
        return node

    def require(self, path: str) -> Any:
        value = self.get(path, _MISSING)
        if value is _MISSING:
            raise ConfigError(f"{path}: required")
        return value

    def echo(self) -> dict:
        return {"experiment": self.experiment, "numerics": asdict(self.numerics),
                "out": self.out, **self.body}


_MISSING = object()


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _check_numerics(raw: dict) -> Numerics:
    merged = {**DEFAULT_NUMERICS, **raw}
    unknown = set(merged) - set(DEFAULT_NUMERICS)
    if unknown:
        raise ConfigError(f"numerics.{sorted(unknown)[0]}: unknown key")
    try:
        degree = int(merged["degree"])
        quad = None if merged["quad_order"] is None else int(merged["quad_order"])
        step, tol, seed = float(merged["fd_step"]), float(merged["tol"]), int(merged["seed"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"numerics: {exc}") from None
    if not 0 <= degree <= 80:
        raise ConfigError("numerics.degree: must lie in [0, 80]")
    if quad is not None and not 1 <= quad <= 2000:
        raise ConfigError("numerics.quad_order: must lie in [1, 2000]")
    if not 0 < step < 1:
        raise ConfigError("numerics.fd_step: must lie in (0, 1)")
    if not 0 < tol < 1:
        raise ConfigError("numerics.tol: must lie in (0, 1)")
    if seed < 0:
        raise ConfigError("numerics.seed: must be >= 0")
    return Numerics(degree, quad, step, tol, seed)


def load_config(experiment: str, path: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults for ``experiment`` merged with a YAML file and command-line overrides."""
    if experiment not in DEFAULTS:
        raise ConfigError(f"experiment: unknown kind {experiment!r}")
    raw: dict = {}
    if path is not None:
        try:
            raw = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("top level: expected a mapping")
        kind = raw.pop("experiment", experiment)
        if kind != experiment:
            raise ConfigError(f"experiment: file says {kind!r}, command is {experiment!r}")
    defaults = copy.deepcopy(DEFAULTS[experiment])
    num_default = defaults.pop("numerics", {})
    num_raw = raw.pop("numerics", {}) if path is not None else {}
    if path is not None and not isinstance(num_raw, dict):
        raise ConfigError("numerics: expected a mapping")
    if path is not None and "degree" not in num_raw:
        raise ConfigError("numerics.degree: required")
    out = raw.pop("out", "out")
    body = _merge(defaults, raw)
    numerics = _check_numerics({**num_default, **num_raw, **(overrides or {})})
    cfg = ExperimentConfig(experiment, numerics, body, str(out))
    _validate_body(cfg)
    return cfg


def _validate_body(cfg: ExperimentConfig) -> None:
    m, n = cfg.get("family.m", 0), cfg.get("family.n", 1)
    if not (isinstance(m, int) and isinstance(n, int) and m >= 0 and n >= 1):
        raise ConfigError("family: m >= 0 and n >= 1 must be integers")
    name = cfg.get("weight.name")
    if name is not None and name not in metric.WEIGHTS and name not in metric.USER_TABLES:
        raise ConfigError(f"weight.name: unknown weight {name!r}")
    eta = cfg.get("twist.eta")
    if eta is not None and eta not in metric.ETAS:
        raise ConfigError(f"twist.eta: unknown eta {eta!r}")
    kind = cfg.get("domain.kind")
    if kind is not None and kind not in ("polydisc", "ball", "sublevel"):
        raise ConfigError(f"domain.kind: unknown kind {kind!r}")
    rho = cfg.get("domain.rho")
    if rho is not None and rho not in metric.DEFINING_FUNCTIONS:
        raise ConfigError(f"domain.rho: unknown defining function {rho!r}")
    mode = cfg.get("mode")
    if cfg.experiment == "ramadanov" and mode not in ("domains", "metrics", "cutoff"):
        raise ConfigError("mode: expected domains, metrics or cutoff")
    for path in ("twist.j",):
        js = cfg.get(path)
        if js is not None:
            js = js if isinstance(js, list) else [js]
            if any(not isinstance(j, int) or j < 4 for j in js):
                raise ConfigError(f"{path}: integers >= 4 required")


# ---------------------------------------------------------------------------
# report

def _fmt(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (complex, np.complexfloating)):
        return repr(complex(v))
    return str(v)


@dataclass
class Check:
    name: str
    passed: bool
    value: Any
    tol: Any

    def line(self) -> str:
        return f"CHECK {self.name} {'PASS' if self.passed else 'FAIL'} value={_fmt(self.value)} tol={_fmt(self.tol)}"


@dataclass
class RunReport:
    config: ExperimentConfig
    checks: list[Check] = field(default_factory=list)
    tables: dict[str, list[dict]] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def check(self, name: str, passed: bool, value: Any, tol: Any) -> Check:
        c = Check(name, bool(passed), value, tol)
        self.checks.append(c)
        return c

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 1

    def environment(self) -> dict:
        return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__}

    def render(self) -> str:
        lines = [f"# bergvar {self.config.experiment}"]
        env = self.environment()
        lines.append("# environment: " + " ".join(f"{k}={v}" for k, v in env.items()))
        echo = yaml.safe_dump(_plain(self.config.echo()), sort_keys=True).rstrip().splitlines()
        lines += ["# config:"] + [f"#   {ln}" for ln in echo]
        lines += [f"# note: {n}" for n in self.notes]
        lines += [c.line() for c in self.checks]
        passed = sum(c.passed for c in self.checks)
        lines.append(f"# summary: {passed}/{len(self.checks)} checks passed")
        return "\n".join(lines) + "\n"


def _plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return str(complex(obj))
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_csv(path: Path, rows: list[dict]) -> None:
    """Header row from the first record; floats written with ``repr`` for exact round-trips."""
    path.parent.mkdir(parents=True, exist_ok=True)
    if not rows:
        path.write_text("")
        return
    keys = list(rows[0])
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for row in rows:
            w.writerow([_fmt(row.get(k, "")) for k in keys])


# ---------------------------------------------------------------------------
# pipelines

def _points(raw) -> list[np.ndarray]:
    return [np.atleast_1d(np.asarray([complex(c) for c in np.atleast_1d(p)], dtype=complex)) for p in raw]


def _family(cfg: ExperimentConfig) -> tuple[int, int]:
    return int(cfg.get("family.m", 0)), int(cfg.get("family.n", 1))


def _weight(cfg: ExperimentConfig) -> metric.MetricField:
    m, n = _family(cfg)
    params = cfg.get("weight.params", {}) or {}
    try:
        return metric.make_weight(cfg.require("weight.name"), m, n, **params)
    except TypeError as exc:
        raise ConfigError(f"weight.params: {exc}") from None


def _domain(cfg: ExperimentConfig) -> geometry.DomainSpec:
    m, n = _family(cfg)
    kind = cfg.require("domain.kind")
    if kind == "sublevel":
        rho = metric.make_defining_function(cfg.require("domain.rho"), m, n,
                                            **(cfg.get("domain.params", {}) or {}))
        return geometry.make_domain("sublevel", n, rho=rho, box=cfg.require("domain.box"))
    return geometry.make_domain(kind, n, radius=cfg.get("domain.radius"), radii=cfg.get("domain.radii"))


def _grid(cfg: ExperimentConfig) -> np.ndarray:
    m, _ = _family(cfg)
    if m == 0:
        return np.zeros((1, 0), dtype=complex)
    explicit = cfg.get("grid.points")
    if explicit is not None:
        return np.array(_points(explicit))
    return variation.grid_points(complex(cfg.get("grid.center", 0.0)), float(cfg.get("grid.half_width", 0.5)),
                                 int(cfg.get("grid.count", 3)), m)


def _t_cols(t) -> dict:
    out = {}
    for i, c in enumerate(np.atleast_1d(t)):
        out[f"t{i}_re"] = float(np.real(c))
        out[f"t{i}_im"] = float(np.imag(c))
    return out


def _z_cols(z) -> dict:
    out = {}
    for i, c in enumerate(np.atleast_1d(z)):
        out[f"z{i}_re"] = float(np.real(c))
        out[f"z{i}_im"] = float(np.imag(c))
    return out


def _closed_form_kernel(cfg: ExperimentConfig, z: np.ndarray, sigma) -> tuple[str, float, float] | None:
    """(check name, reference value, tolerance) for the built-in closed forms."""
    m, n = _family(cfg)
    if n != 1 or cfg.get("domain.kind") != "polydisc":
        return None
    name = cfg.get("weight.name")
    params = cfg.get("weight.params", {}) or {}
    R = float(cfg.get("domain.radius") or cfg.get("domain.radii")[0])
    s2 = float(np.sum(np.abs(sigma) ** 2))
    zz = abs(z[0]) ** 2
    if name == "constant":
        c = float(params.get("c", 1.0))
        return "kernel_disc", s2 * R * R / (math.pi * (R * R - zz) ** 2) / c, 1e-6
    if name == "fock" and float(params.get("b", 1.0)) == 1.0 and m == 0:
        # truncation tail of e^{|z|^2} beyond the model degree and disc radius
        return "kernel_fock", s2 * math.exp(zz) / math.pi, 1e-6
    return None


def run_kernel(cfg: ExperimentConfig, report: RunReport) -> None:
    num = cfg.numerics
    model = bergman.build_model(_domain(cfg), _weight(cfg), None, num.degree, num.quad_order, num.seed)
    report.notes.append("model " + " ".join(f"{k}={_fmt(v)}" for k, v in model.report().items()))
    sigma = np.asarray([complex(s) for s in cfg.get("probes.sigma", [1.0])])
    rows = []
    for k, z in enumerate(_points(cfg.require("probes.z"))):
        kv = bergman.kernel_eval(model, z).pair(sigma)
        dn = bergman.eval_functional_norm(model, z, sigma)
        ref = _closed_form_kernel(cfg, z, sigma)
        row = {**_z_cols(z), "kernel": kv, "dual_norm": dn, "reference": ref[1] if ref else math.nan}
        rows.append(row)
        rel = abs(dn - kv) / max(abs(kv), 1e-300)
        report.check(f"dual_norm_identity[{k}]", rel <= 1e-10, rel, 1e-10)
        if ref is not None:
            name, value, tol = ref
            report.check(name if k == 0 else f"{name}[{k}]", abs(kv - value) <= tol, kv, tol)
        ext = bergman.extremal_check(model, z, sigma, samples=10_000, seed=num.seed)
        report.check(f"extremal[{k}]", ext.gap >= -1e-12 and ext.residual <= 1e-9, ext.exact, 1e-9)
    report.tables["kernel"] = rows


def _eta(cfg: ExperimentConfig, n: int) -> metric.EtaField:
    return metric.ETAS[cfg.get("twist.eta", "zero")](n)


def run_curvature(cfg: ExperimentConfig, report: RunReport) -> None:
    h = _weight(cfg)
    m, n = _family(cfg)
    delta = float(cfg.require("twist.delta"))
    eta = _eta(cfg, n)
    expect = cfg.get("expect.verdict")
    rows, verdicts = [], []
    worst_sub = worst_herm = 0.0
    for t in _grid(cfg):
        for z in _points(cfg.require("probes.z")):
            block = curvature.xi_delta_eta(h, delta, eta, t, z)
            v = curvature.griffiths_check(block)
            a = curvature.theta_delta(h, delta, t, z).matrix
            b = curvature.theta_delta_by_subtraction(h, delta, t, z).matrix
            worst_sub = max(worst_sub, float(np.abs(a - b).max()))
            worst_herm = max(worst_herm, block.hermitian_defect())
            verdicts.append(v.verdict)
            rows.append({**_t_cols(t), **_z_cols(z), "min_eig": v.min_eig, "verdict": v.verdict})
    report.check("theta_delta_subtraction", worst_sub <= 1e-10, worst_sub, 1e-10)
    report.check("hermitian", worst_herm <= curvature.HERMITIAN_RTOL, worst_herm, curvature.HERMITIAN_RTOL)
    if expect is not None:
        hit = sum(vd == expect for vd in verdicts)
        if expect == "indefinite":
            report.check(f"verdict_{expect}", hit > 0, hit, len(verdicts))
        else:
            report.check(f"verdict_{expect}", hit == len(verdicts), hit, len(verdicts))
    report.tables["curvature"] = rows


def run_twist(cfg: ExperimentConfig, report: RunReport) -> None:
    js = cfg.require("twist.j")
    js = js if isinstance(js, list) else [js]
    count = int(cfg.get("twist.points", 200))
    tol = cfg.numerics.tol
    rho = metric.make_defining_function("unit-disc", 0, 1)
    rows = []
    for j in js:
        p = metric.choose_twist_constants(j)
        report.check(f"delta_condition[j={j}]", p.margin > 0, p.margin, 0.0)
        c1d = p.C1 * p.delta
        report.check(f"c1_delta_bound[j={j}]", c1d <= 1 + math.pi / 8, c1d, 1 + math.pi / 8)
        upper = min(p.admissible_upper(), 0.0)
        window = np.linspace(-1.0, upper, count, endpoint=False)
        res = max(abs(metric.ode_residual(r, p)) for r in window)
        report.check(f"ode_residual[j={j}]", res <= tol * j ** 3, res, tol * j ** 3)
        full = np.linspace(-1.0, 0.0, count, endpoint=False)
        theta = np.asarray(p.argument(full))
        inside = int(np.sum((theta >= math.pi / 4 - 1e-12) & (theta < math.pi / 2)))
        report.check(f"tan_argument_range[j={j}]", inside == count, float(theta.max()), math.pi / 2)
        psd = 0
        radii = np.sqrt(1.0 + full)
        for r in radii:
            try:
                M = curvature.m_matrix(rho, p, np.zeros(0), [r])
                psd += curvature.griffiths_check(M).ok
            except metric.TwistDomainError:
                pass
        report.check(f"m_matrix_psd[j={j}]", psd == count, psd, count)
        rows.append({"j": j, "delta": p.delta, "C1": p.C1, "margin": p.margin,
                     "admissible_upper": p.admissible_upper(), "ode_residual": res,
                     "theta_max": float(theta.max()), "m_psd": psd, "probes": count})
    report.tables["twist"] = rows


def run_psh(cfg: ExperimentConfig, report: RunReport) -> None:
    num = cfg.numerics
    h, dom = _weight(cfg), _domain(cfg)
    z = _points(cfg.require("probes.z"))[0]
    sigma = np.asarray([complex(s) for s in cfg.get("probes.sigma", [1.0])])
    grid = _grid(cfg)
    atoms = cfg.get("atoms")
    if atoms is not None:
        # atoms: list of {scale: s, offset: c, sigma: [..]} meaning z_k(t) = c + s t_0
        def at(t):
            return [(np.atleast_1d(complex(a.get("offset", 0.0)) + complex(a.get("scale", 0.0)) * t[0]),
                     np.asarray([complex(s) for s in a.get("sigma", [1.0])])) for a in atoms]
        rep = variation.measure_variation(h, dom, at, grid, num.degree, num.quad_order, num.fd_step,
                                          num.tol, num.seed)
    elif dom.product:
        rep = variation.kernel_variation(h, dom, z, sigma, grid, num.degree, num.quad_order,
                                         num.fd_step, num.tol, seed=num.seed)
    else:
        outer = geometry.make_domain("polydisc", dom.dim, radius=float(cfg.require("outer_radius")))
        ladder = variation.kernel_variation(h, dom, z, sigma, grid, num.degree, num.quad_order,
                                            num.fd_step, num.tol, js=tuple(cfg.get("twist.j", [4, 6, 8, 12])),
                                            outer=outer, seed=num.seed)
        report.check("surrogate_monotone_in_j", ladder.monotone,
                     float(np.min(np.diff(ladder.values, axis=0))), 0.0)
        report.tables["surrogate"] = [{**_t_cols(t), **{f"logK_j{j}": ladder.values[a, k]
                                                          for a, j in enumerate(ladder.js)},
                                       "logK_fiber": ladder.fiber_values[k]}
                                      for k, t in enumerate(ladder.grid)]
        rep = ladder.psh
    expect = cfg.get("expect.verdict")
    if expect is not None:
        report.check(f"psh_verdict_{expect}", rep.verdict == expect, rep.verdict, expect)
    else:
        report.check("psh_verdict", rep.ok, rep.verdict, rep.tol)
    report.check("psh_min_eig", rep.verdict == "all-minus-infinity" or rep.min_eig >= -rep.tol,
                 rep.min_eig, rep.tol)
    agree = rep.hessian_verdict == rep.circle_verdict or (
        rep.hessian_verdict in ("psh", "strictly-psh") and rep.circle_verdict == "psh")
    report.check("hessian_circle_agree", agree, f"{rep.hessian_verdict}/{rep.circle_verdict}", "")
    report.tables["psh"] = rep.rows()


def _monotone_rows(rep: variation.MonotoneReport) -> list[dict]:
    return [{"stage": k, "label": str(rep.labels[k]) if rep.labels else k, "value": float(v)}
            for k, v in enumerate(rep.values)]


def run_ramadanov(cfg: ExperimentConfig, report: RunReport) -> None:
    num = cfg.numerics
    m, n = _family(cfg)
    z = _points(cfg.require("probes.z"))[0]
    sigma = np.asarray([complex(s) for s in cfg.get("probes.sigma", [1.0])])
    mode = cfg.require("mode")
    if mode == "domains":
        ex = geometry.disc_exhaustion([float(r) for r in cfg.require("radii")], n)
        rep = variation.ramadanov_domains(ex, _weight(cfg), z, sigma, num.degree, num.quad_order,
                                          tol=num.tol, seed=num.seed)
        limit = cfg.get("expect.limit")
        if limit is not None:
            report.check("limit", abs(rep.limit - float(limit)) <= 1e-6, rep.limit, 1e-6)
    elif mode == "metrics":
        ladder = [metric.make_weight(w["name"], m, n, **(w.get("params") or {})) for w in cfg.require("ladder")]
        rep = variation.ramadanov_metrics(_domain(cfg), ladder, z, sigma, num.degree, num.quad_order,
                                          tol=num.tol, seed=num.seed)
    else:
        inner, outer = _domain(cfg), geometry.make_domain("polydisc", n, radius=float(cfg.require("outer_radius")))
        rho = metric.make_defining_function(cfg.get("rho", "unit-disc"), m, n,
                                            radius=float(cfg.get("domain.radius", 1.0)))
        cut = variation.cutoff_convergence(inner, outer, _weight(cfg), rho, cfg.require("twist.j"), z, sigma,
                                           num.degree, num.quad_order or 300, tol=num.tol, seed=num.seed)
        rep = cut.monotone
        report.check("cutoff_bounded_by_inner", cut.bounded, cut.gap, num.tol)
        report.check("cutoff_above_outer", cut.above_outer, float(rep.values[0]), cut.outer_value)
    report.check(f"monotone_{rep.direction}", rep.ok, rep.limit, rep.tol)
    report.check("transitive", rep.transitive_consistent(), rep.stages, 2 * rep.tol)
    report.tables[f"ramadanov_{mode}"] = _monotone_rows(rep)


def run_nakano(cfg: ExperimentConfig, report: RunReport) -> None:
    num = cfg.numerics
    h = _weight(cfg)
    m, n = _family(cfg)
    delta = float(cfg.require("twist.delta"))
    eta = _eta(cfg, n)
    t0 = np.zeros(m, dtype=complex)
    rows = []
    ok = True
    worst = math.inf
    for z in _points(cfg.require("probes.z")):
        v = curvature.nakano_base_check(h, eta, delta, t0, z)
        ok &= v.ok
        worst = min(worst, v.min_eig)
        rows.append({**_z_cols(z), "min_eig": v.min_eig, "verdict": v.verdict})
    report.check("nakano_base", ok, worst, 0.0)
    report.tables["nakano"] = rows
    if m == 0:
        return
    model = bergman.build_model(_domain(cfg), h, t0, num.degree, num.quad_order, num.seed)
    rng = np.random.default_rng(num.seed)
    gaps, trows = [], []
    for k in range(int(cfg.get("samples", 5))):
        fam = [bergman.HolomorphicFamily.constant(rng.standard_normal(model.dim)
                                                  + 1j * rng.standard_normal(model.dim), m)
               for _ in range(m)]
        res = bergman.t_u_hessian(model, fam, num.fd_step)
        gap = abs(res.value - res.identity_value) / max(1.0, abs(res.identity_value))
        gaps.append(gap)
        trows.append({"sample": k, "hessian": res.value, "identity": res.identity_value,
                      "norms_sq": res.norms_sq, "c0": res.c0, "constraint": res.constraint_residual})
    report.check("t_u_hessian_identity", max(gaps) <= num.tol, max(gaps), num.tol)
    report.tables["t_u_hessian"] = trows


PIPELINES: dict[str, Callable[[ExperimentConfig, RunReport], None]] = {
    "kernel": run_kernel,
    "curvature": run_curvature,
    "twist": run_twist,
    "psh": run_psh,
    "ramadanov": run_ramadanov,
    "nakano": run_nakano,
}


def run(cfg: ExperimentConfig) -> RunReport:
    report = RunReport(cfg)
    PIPELINES[cfg.experiment](cfg, report)
    out = Path(cfg.out)
    for name, rows in report.tables.items():
        write_csv(out / f"{name}.csv", rows)
    return report


def list_registry() -> str:
    lines = ["weights:"]
    lines += [f"  {w}" for w in sorted(metric.WEIGHTS)]
    lines.append("defining-functions:")
    lines += [f"  {d}" for d in sorted(metric.DEFINING_FUNCTIONS)]
    lines.append("domains:")
    lines += [f"  {d}" for d in ("ball", "polydisc", "sublevel")]
    lines.append("etas:")
    lines += [f"  {e}" for e in sorted(metric.ETAS)]
    lines.append("experiments:")
    lines += [f"  {e}" for e in sorted(EXPERIMENTS)]
    lines.append("extras:")
    lines += [f"  {u}" for u in sorted(metric.USER_TABLES)]
    return "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bergvar", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="YAML experiment file")
        s.add_argument("--tol", type=float)
        s.add_argument("--degree", type=int)
        s.add_argument("--quad-order", type=int)
        s.add_argument("--seed", type=int)
        s.add_argument("--out", help="directory for CSV output")
    ls = sub.add_parser("list")
    ls.add_argument("--table", action="append", default=[], help="CSV potential table to register")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for path in args.table:
            metric.load_table_weight(path)
        sys.stdout.write(list_registry())
        return 0
    overrides = {k: v for k, v in (("tol", args.tol), ("degree", args.degree),
                                    ("quad_order", args.quad_order), ("seed", args.seed)) if v is not None}
    try:
        cfg = load_config(args.command, args.config, overrides)
        if args.out is not None:
            cfg = ExperimentConfig(cfg.experiment, cfg.numerics, cfg.body, args.out)
        report = run(cfg)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    sys.stdout.write(report.render())
    return report.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
