"""Experiment harness: identity suites and convergence-order reports.

Every command reads an optional JSON config, runs its checks, writes
<out>/<label>.json, <label>.csv and <label>.png (matplotlib figure rendered
next to the delimited output), prints one line per check, and exits 0 when
all asserted checks pass, 1 when one fails, 2 on a bad config.

All randomness flows through numpy Generators seeded from the config, so
reruns with the same config and seed produce bit-identical CSV files.  The
per-lambda and per-point work is pure and could be farmed out; the reduce
is ordered either way.
"""

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import bounds as bd
from . import flows as fl
from . import magnus as mg
from . import tensor_algebra as ta
from .free_lie import LieCoordinates, bch, build_hall_basis, random_lie

COMMANDS = (
    "identity-suite",
    "dilation-order",
    "bch-order",
    "pushforward-order",
    "magnus-compare",
    "w-field-check",
)

DEFAULT_LAMBDAS = tuple(2.0 ** -k for k in range(1, 9))


class ConfigError(ValueError):
    """Bad or inconsistent experiment configuration (exit code 2)."""


def integrator_tol(span: float, steps_per_unit: int) -> float:
    """Accumulated RK4 error scale over a time span, with a rounding term.

    Local error per step is O(h^5); over span/h steps that accumulates to
    O(span * h^4).  The factor 100 absorbs the scheme constant and the O(1)
    magnitudes of the experiments here; distances below this are treated as
    solver noise, not signal.
    """
    h = 1.0 / steps_per_unit
    return 100.0 * max(span, 1.0) * h ** 4 + 1e-12


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    experiment: str
    label: str
    system: dict = field(default_factory=dict)
    kappa: int = 2
    d: int = 2
    path: dict = field(default_factory=dict)
    lambda_grid: tuple = DEFAULT_LAMBDAS
    sample_points: int = 16
    tangent_samples: int = 16
    steps_per_unit: int = 4096
    seed: int = 0
    cases: int = 100
    expect: str = "order"              # "order" or "noise_floor"
    slope_threshold: Optional[float] = None
    corrupt_psi_minus: bool = False
    step_counts: tuple = ()            # magnus-compare resolutions
    h_grid: tuple = (4e-3, 2e-3, 1e-3)
    t_samples: tuple = (0.3, 0.6, 0.9)
    squad: int = 8

    def threshold(self) -> float:
        return self.kappa + 0.7 if self.slope_threshold is None else self.slope_threshold


_COMMAND_DEFAULTS = {
    "identity-suite": {"system": {"name": "heisenberg"}, "kappa": 2,
                       "steps_per_unit": 1024},
    "dilation-order": {"system": {"name": "linear"}, "kappa": 2},
    "bch-order": {"system": {"name": "linear"}, "kappa": 2},
    "pushforward-order": {"system": {"name": "linear"}, "kappa": 2},
    # piecewise-constant controls need kappa >= 5 before the group ODE has
    # any truncation error to converge away (lower degrees integrate
    # polynomial solutions that RK4 reproduces exactly)
    "magnus-compare": {"kappa": 5, "steps_per_unit": 1024,
                       "step_counts": tuple(2 ** k for k in range(4, 11))},
    "w-field-check": {"system": {"name": "linear"}, "kappa": 2,
                      "steps_per_unit": 512, "sample_points": 4},
}


def load_config(command: str, config_path: Optional[str], seed: Optional[int],
                steps: Optional[int], ) -> ExperimentConfig:
    data = dict(_COMMAND_DEFAULTS.get(command, {}))
    if config_path is not None:
        try:
            with open(config_path) as fh:
                user = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config root must be a JSON object")
        data.update(user)

    allowed = {f.name for f in ExperimentConfig.__dataclass_fields__.values()}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    data.setdefault("label", command)
    cfg = ExperimentConfig(experiment=command, **{k: v for k, v in data.items()
                                                  if k != "experiment"})
    if seed is not None:
        cfg.seed = seed
    if steps is not None:
        cfg.steps_per_unit = steps

    if not (1 <= cfg.kappa <= 8):
        raise ConfigError(f"kappa={cfg.kappa} out of range [1, 8]")
    if cfg.d < 1 or cfg.sample_points < 1 or cfg.tangent_samples < 1:
        raise ConfigError("d and sample counts must be positive")
    if cfg.steps_per_unit < 1 or cfg.cases < 1:
        raise ConfigError("steps_per_unit and cases must be positive")
    if cfg.expect not in ("order", "noise_floor"):
        raise ConfigError(f"expect={cfg.expect!r} (want 'order' or 'noise_floor')")
    lam = np.asarray(cfg.lambda_grid, dtype=float)
    if lam.size == 0 or np.any(lam <= 0) or np.any(np.diff(lam) >= 0):
        raise ConfigError("lambda_grid must be positive and strictly decreasing")
    cfg.lambda_grid = tuple(float(v) for v in lam)
    cfg.step_counts = tuple(int(s) for s in cfg.step_counts)
    if any(s < 1 for s in cfg.step_counts):
        raise ConfigError("step_counts must be positive")
    return cfg


def build_system(cfg: ExperimentConfig) -> fl.DynamicalSystem:
    spec = dict(cfg.system)
    try:
        if "fields" in spec:
            return fl.system_from_json_dict(spec, kappa=cfg.kappa)
        name = spec.pop("name", "linear")
        return fl.built_in_system(name, cfg.kappa, d=cfg.d, **spec)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad system spec: {exc}") from exc


def build_path(cfg: ExperimentConfig, basis) -> mg.ControlPath:
    spec = dict(cfg.path)
    if "pieces" in spec and isinstance(spec["pieces"], list):
        try:
            return mg.path_from_json_dict({"d": basis.params.d,
                                           "kappa": basis.params.kappa, **spec},
                                          basis=basis)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"bad path spec: {exc}") from exc
    kind = spec.get("kind", "pwc")
    T = float(spec.get("T", 1.0))
    scale = float(spec.get("scale", 1.0))
    rng = np.random.default_rng(spec.get("seed", cfg.seed + 101))
    if kind == "pwc":
        n_pieces = int(spec.get("n_pieces", 2))
        edges = np.linspace(0.0, T, n_pieces + 1)
        pieces = [(float(a), float(b), scale * random_lie(basis, rng=rng))
                  for a, b in zip(edges[:-1], edges[1:])]
        return mg.PiecewiseConstantPath(pieces)
    if kind == "smooth":
        deg = int(spec.get("poly_degree", 3))
        coeffs = scale * rng.standard_normal((len(basis.words), deg + 1))
        return mg.PolynomialPath(basis, coeffs, T)
    raise ConfigError(f"unknown path kind {kind!r}")


# ---------------------------------------------------------------------------
# check plumbing and report output
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    measured: float
    tolerance: float
    passed: bool
    kind: str = "upper"               # "upper": measured<=tol, "lower": >=, "band": ~
    note: str = ""

    def line(self) -> str:
        sym = {"upper": "<=", "lower": ">=", "band": "~"}[self.kind]
        status = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.note})" if self.note else ""
        return (f"[{status}] {self.name}: measured={self.measured:.6g} "
                f"{sym} {self.tolerance:.6g}{extra}")


def check_upper(name, measured, tol, note=""):
    return CheckResult(name, float(measured), float(tol),
                       bool(measured <= tol), "upper", note)


def check_lower(name, measured, tol, note=""):
    return CheckResult(name, float(measured), float(tol),
                       bool(measured >= tol), "lower", note)


def write_outputs(outdir: Path, label: str, payload: dict, csv_text: str,
                  figure) -> list:
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    jpath = outdir / f"{label}.json"
    jpath.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    paths.append(jpath)
    cpath = outdir / f"{label}.csv"
    cpath.write_text(csv_text)
    paths.append(cpath)
    if figure is not None:
        ppath = outdir / f"{label}.png"
        figure.savefig(ppath, dpi=110)
        plt.close(figure)
        paths.append(ppath)
    return paths


def checks_csv(checks) -> str:
    lines = ["check,measured,tolerance,kind,passed"]
    for c in checks:
        lines.append("%s,%.17g,%.17g,%s,%d" % (c.name, c.measured, c.tolerance,
                                               c.kind, int(c.passed)))
    return "\n".join(lines) + "\n"


def checks_figure(checks, title):
    fig, ax = plt.subplots(figsize=(7.0, 0.45 * max(len(checks), 4) + 1.2))
    names = [c.name for c in checks]
    eps = 1e-17
    meas = [max(abs(c.measured), eps) for c in checks]
    tols = [max(abs(c.tolerance), eps) for c in checks]
    y = np.arange(len(checks))
    colors = ["tab:green" if c.passed else "tab:red" for c in checks]
    ax.barh(y, meas, color=colors, alpha=0.8)
    ax.scatter(tols, y, marker="|", s=220, color="k", label="tolerance")
    ax.set_yticks(y, names)
    ax.set_xscale("log")
    ax.set_xlabel("measured (bar) vs tolerance (tick)")
    ax.set_title(title)
    ax.invert_yaxis()
    fig.tight_layout()
    return fig


def order_figure(report: bd.ConvergenceReport, title, ref_exponent):
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    lam = np.array(report.lambdas)
    dist = np.array(report.distances)
    used = np.array(report.used)
    pos = dist > 0
    if np.any(used):
        ax.loglog(lam[used], dist[used], "o-", label="distance")
    if np.any(pos & ~used):
        ax.loglog(lam[pos & ~used], dist[pos & ~used], "x", color="gray",
                  label="excluded (noise)")
    if report.noise_floor > 0:
        ax.axhline(report.noise_floor, ls=":", color="gray", label="noise floor")
    anchor = dist[used][0] if np.any(used) else 1.0
    ref = anchor * (lam / lam[0]) ** ref_exponent
    ax.loglog(lam, ref, "--", color="k", alpha=0.5,
              label=f"slope {ref_exponent:g} reference")
    if report.slope is not None:
        ax.set_title(f"{title}  (fit slope {report.slope:.3f})")
    else:
        ax.set_title(f"{title}  (all points at noise floor)")
    ax.set_xlabel("lambda")
    ax.set_ylabel("distance")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    return fig


# ---------------------------------------------------------------------------
# identity suite
# ---------------------------------------------------------------------------

def _random_algebra(params, rng, scale=0.6):
    levels = [np.zeros(1)]
    for k in range(1, params.kappa + 1):
        levels.append(scale ** k * rng.standard_normal(params.level_dim(k)))
    return ta.AlgebraElement(params, levels)


def _tensor_identity_checks(cfg: ExperimentConfig) -> list:
    params = ta.AlgebraParams(cfg.d, cfg.kappa)
    rng = np.random.default_rng(cfg.seed + 11)
    r_roundtrip = r_assoc = r_inverse = r_bch = r_jacobi = r_conj = 0.0
    basis = build_hall_basis(params)
    for _ in range(cfg.cases):
        A = _random_algebra(params, rng)
        B = _random_algebra(params, rng)
        C = _random_algebra(params, rng)
        g, h, k = ta.exp(A), ta.exp(B), ta.exp(C)

        back = ta.log(g)
        r_roundtrip = max(r_roundtrip, ta.norm(ta.sub(back, A)) / max(ta.norm(A), 1.0))

        gh_k = ta.mul(ta.mul(g, h), k)
        g_hk = ta.mul(g, ta.mul(h, k))
        r_assoc = max(r_assoc, ta.norm(ta.sub(gh_k, g_hk)) / max(ta.norm(gh_k), 1.0))

        gi = ta.inverse(g)
        unit_err = ta.sub(ta.mul(g, gi), ta.unit(params))
        r_inverse = max(r_inverse, ta.norm(unit_err) / max(ta.norm(g), 1.0))

        la, _ = basis.project(A)
        lb, _ = basis.project(B)
        pa = basis.to_tensor(la)
        pb = basis.to_tensor(lb)
        lhs = ta.exp(bch(LieCoordinates(basis, la), LieCoordinates(basis, lb)).to_tensor())
        rhs = ta.mul(ta.exp(pa), ta.exp(pb))
        r_bch = max(r_bch, ta.norm(ta.sub(lhs, rhs)) / max(ta.norm(rhs), 1.0))

        jac = ta.add(ta.bracket(A, ta.bracket(B, C)),
                     ta.add(ta.bracket(B, ta.bracket(C, A)),
                            ta.bracket(C, ta.bracket(A, B))))
        scale3 = max(ta.norm(A) * ta.norm(B) * ta.norm(C), 1.0)
        r_jacobi = max(r_jacobi, ta.norm(jac) / scale3)

        conj = ta.conjugation_operator(g)
        ser = ta.operator_exp(ta.ad_operator(A))
        r_conj = max(r_conj, conj.frobenius_distance(ser)
                     / max(1.0, (1.0 + ta.norm(A)) ** params.kappa))

    return [
        check_upper("exp-log-roundtrip", r_roundtrip, 1e-12),
        check_upper("group-associativity", r_assoc, 1e-12),
        check_upper("group-inverse", r_inverse, 1e-12),
        check_upper("bch-vs-group-product", r_bch, 1e-12),
        check_upper("jacobi-identity", r_jacobi, 1e-12),
        check_upper("conjugation-vs-ad-series", r_conj, 1e-12),
    ]


def _scaling_identity_checks(cfg: ExperimentConfig, basis, path) -> list:
    rng = np.random.default_rng(cfg.seed + 23)
    r_dilation = 0.0
    for _ in range(cfg.cases):
        A = random_lie(basis, rng=rng)
        lam = float(rng.uniform(0.05, 3.0))
        r_dilation = max(r_dilation, abs(ta.hom_norm(A.dilate(lam).to_tensor())
                                         - lam * ta.hom_norm(A.to_tensor())))
    base = mg.path_norms(path, path.T).homogeneous
    lam = 0.375
    scaled = mg.path_norms(mg.dilate_path(path, lam), path.T).homogeneous
    r_path = abs(scaled - lam * base)
    return [
        check_upper("dilation-norm-scaling", r_dilation, 1e-12),
        check_upper("path-norm-dilation-scaling", r_path, 1e-12),
    ]


def _magnus_identity_checks(cfg: ExperimentConfig, path) -> tuple:
    steps = max(cfg.steps_per_unit, 1024)
    chen = mg.magnus_log(path, path.T, method="chen")
    ode = mg.magnus_log(path, path.T, method="ode", steps=steps)
    override = None
    note = ""
    if cfg.corrupt_psi_minus:
        # fault injection: perturb the first-order series coefficient, which
        # feeds every degree >= 2 of the C-ODE right-hand side
        override = ta.psi_minus_coeffs(path.basis.params.kappa)
        override[1] = override[1] * 1.5
        note = "psi_minus corrupted via config hook"
    code = mg.c_ode_solve(path, path.T, steps, _coeffs_override=override)
    three_way = max((chen - ode).norm(), (chen - code).norm(), (ode - code).norm())

    g = mg.group_ode_solve(path, path.T, steps)
    _, residual = path.basis.project(ta.log(g))
    checks = [
        check_upper("magnus-three-way", three_way, 1e-8, note),
        check_upper("solved-log-lie-residual", residual, 1e-9),
    ]
    return checks, chen


def _flow_identity_checks(cfg: ExperimentConfig, sys_, path) -> list:
    fcfg = fl.FlowConfig(steps_per_unit=cfg.steps_per_unit)
    rng = np.random.default_rng(cfg.seed + 37)
    pts = sys_.manifold.sample_points(rng, cfg.sample_points)
    T = path.T
    tol = integrator_tol(T, cfg.steps_per_unit)

    mid = 0.4 * T
    full = fl.flow(sys_, path, pts, 0.0, T, fcfg)
    part = fl.flow(sys_, path, fl.flow(sys_, path, pts, 0.0, mid, fcfg), mid, T, fcfg)
    r_comp = float(np.max(sys_.manifold.dist(full, part)))
    back = fl.flow(sys_, path, full, T, 0.0, fcfg)
    r_inv = float(np.max(sys_.manifold.dist(back, pts)))
    checks = [
        check_upper("flow-composition", r_comp, 10 * tol),
        check_upper("flow-inverse", r_inv, 10 * tol),
    ]

    if sys_.name == "heisenberg":
        C = mg.magnus_log(path, T, method="chen")
        exact = fl.dist_map(sys_, lambda x: fl.flow(sys_, path, x, 0.0, T, fcfg),
                            lambda x: fl.exp_flow(sys_, C, x, fcfg), pts)
        checks.append(check_upper("nilpotent-flow-exactness", exact, 100 * tol))
        samples = sys_.manifold.sample_tangents(rng, cfg.tangent_samples)
        m = np.stack([s.m for s in samples])
        v = np.stack([s.v for s in samples])
        via_path = fl.pushforward_flow(sys_, path, m, v, 0.0, T, fcfg)
        via_log = fl.exp_pushforward(sys_, C, m, v, fcfg)
        d_push = max(fl.dist_TM_flat(fl.TangentSample(a, b), fl.TangentSample(c, d))
                     for a, b, c, d in zip(via_path.m, via_path.v, via_log.m, via_log.v))
        checks.append(check_upper("nilpotent-pushforward-exactness", d_push, 100 * tol))

    disp = fl.displacement_bound(sys_, path, pts, fcfg, slack=1.1)
    checks.append(CheckResult("displacement-bound", disp["measured"],
                              1.1 * disp["bound"], disp["ok"], "upper",
                              "speed-integral bound, 10% sampling slack"))
    return checks


def cmd_identity_suite(cfg: ExperimentConfig, outdir: Path) -> int:
    sys_ = build_system(cfg)
    path = build_path(cfg, sys_.basis)
    checks = _tensor_identity_checks(cfg)
    checks += _scaling_identity_checks(cfg, sys_.basis, path)
    mg_checks, _ = _magnus_identity_checks(cfg, path)
    checks += mg_checks
    checks += _flow_identity_checks(cfg, sys_, path)

    passed = all(c.passed for c in checks)
    payload = {
        "experiment": cfg.experiment,
        "config": _config_dict(cfg),
        "checks": [asdict(c) for c in checks],
        "passed": passed,
    }
    fig = checks_figure(checks, f"identity suite: {sys_.name}, kappa={cfg.kappa}")
    paths = write_outputs(outdir, cfg.label, payload, checks_csv(checks), fig)
    _print_summary(checks, paths)
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# order experiments (dilation / bch / pushforward share a harness)
# ---------------------------------------------------------------------------

def _run_order_experiment(cfg: ExperimentConfig, outdir: Path, title: str,
                          measure: Callable[[float], float],
                          shape: Callable[[float], float],
                          ref_exponent: float,
                          metadata: dict) -> int:
    dists = [measure(lam) for lam in cfg.lambda_grid]
    shapes = [shape(lam) for lam in cfg.lambda_grid]
    ratios = [d / s if s > 0 else 0.0 for d, s in zip(dists, shapes)]
    floor = integrator_tol(metadata.get("T", 1.0), cfg.steps_per_unit)
    report = bd.build_report(
        cfg.lambda_grid, dists, noise_floor=floor, metadata=metadata,
        extras={"bound_shape": shapes, "measured_over_shape": ratios},
    )

    checks = []
    if cfg.expect == "order":
        if report.slope is None:
            checks.append(CheckResult("fitted-slope", float("nan"), cfg.threshold(),
                                      False, "lower",
                                      "fewer than 3 usable points above the noise floor"))
        else:
            checks.append(check_lower("fitted-slope", report.slope, cfg.threshold(),
                                      f"target exponent {ref_exponent:g}"))
    else:
        checks.append(check_upper("distances-at-noise-floor", max(dists), floor,
                                  "exactness expected for this configuration"))

    passed = all(c.passed for c in checks)
    payload = {
        "experiment": cfg.experiment,
        "config": _config_dict(cfg),
        "report": report.to_json_dict(),
        "checks": [asdict(c) for c in checks],
        "passed": passed,
        "monitored": {"measured_over_shape": ratios,
                      "note": "shape ratios are reported, never asserted"},
    }
    fig = order_figure(report, title, ref_exponent)
    paths = write_outputs(outdir, cfg.label, payload, report.to_csv(), fig)
    _print_summary(checks, paths)
    return 0 if passed else 1


def cmd_dilation_order(cfg: ExperimentConfig, outdir: Path) -> int:
    sys_ = build_system(cfg)
    path = build_path(cfg, sys_.basis)
    fcfg = fl.FlowConfig(steps_per_unit=cfg.steps_per_unit)
    rng = np.random.default_rng(cfg.seed)
    pts = sys_.manifold.sample_points(rng, cfg.sample_points)
    T = path.T
    base_norm = mg.path_norms(path, T).homogeneous
    is_pwc = isinstance(path, mg.PiecewiseConstantPath)

    def measure(lam: float) -> float:
        dp = mg.dilate_path(path, lam)
        if is_pwc:
            C = mg.magnus_log(dp, T, method="chen")
        else:
            C = mg.magnus_log(dp, T, method="ode", steps=cfg.steps_per_unit)
        return fl.dist_map(sys_, lambda x: fl.flow(sys_, dp, x, 0.0, T, fcfg),
                           lambda x: fl.exp_flow(sys_, C, x, fcfg), pts)

    def shape(lam: float) -> float:
        return (lam * base_norm) ** (cfg.kappa + 1)

    meta = {"system": sys_.name, "kappa": cfg.kappa, "T": T,
            "path_hom_norm": base_norm}
    return _run_order_experiment(
        cfg, outdir, f"flow vs exp(log-development): {sys_.name}, kappa={cfg.kappa}",
        measure, shape, cfg.kappa + 1, meta)


def cmd_bch_order(cfg: ExperimentConfig, outdir: Path) -> int:
    sys_ = build_system(cfg)
    basis = sys_.basis
    fcfg = fl.FlowConfig(steps_per_unit=cfg.steps_per_unit)
    rng = np.random.default_rng(cfg.seed)
    pts = sys_.manifold.sample_points(rng, cfg.sample_points)
    A = random_lie(basis, seed=cfg.seed + 7)
    zero_b = bool(cfg.path.get("zero_b", False)) if cfg.path else False
    B = LieCoordinates.zero(basis) if zero_b else random_lie(basis, seed=cfg.seed + 8)
    kappa = cfg.kappa
    # Q window [kappa-1, 2kappa-2] collapses to the constant 1 when kappa=1
    q = bd.QSpec(kappa - 1, 2 * kappa - 2) if kappa >= 2 else None

    def measure(lam: float) -> float:
        Al, Bl = A.dilate(lam), B.dilate(lam)
        return fl.dist_map(
            sys_,
            lambda x: fl.exp_flow(sys_, Bl, fl.exp_flow(sys_, Al, x, fcfg), fcfg),
            lambda x: fl.exp_flow(sys_, bch(Al, Bl), x, fcfg), pts)

    def shape(lam: float) -> float:
        na = ta.hom_norm(A.dilate(lam).to_tensor())
        nb = ta.hom_norm(B.dilate(lam).to_tensor())
        qval = bd.q_eval(q, na + nb) if q is not None else 1.0
        return na * nb * qval

    meta = {"system": sys_.name, "kappa": kappa, "T": 2.0, "zero_b": zero_b}
    return _run_order_experiment(
        cfg, outdir,
        f"two-exponential product vs combined exponential: {sys_.name}, kappa={kappa}",
        measure, shape, kappa + 1, meta)


def cmd_pushforward_order(cfg: ExperimentConfig, outdir: Path) -> int:
    sys_ = build_system(cfg)
    if sys_.manifold.kind != "flat":
        raise ConfigError("pushforward-order requires a flat manifold "
                          "(tangent-bundle distances use the flat closed form)")
    path = build_path(cfg, sys_.basis)
    fcfg = fl.FlowConfig(steps_per_unit=cfg.steps_per_unit)
    rng = np.random.default_rng(cfg.seed)
    samples = sys_.manifold.sample_tangents(rng, cfg.tangent_samples)
    m = np.stack([s.m for s in samples])
    v = np.stack([s.v for s in samples])
    T = path.T
    base_norm = mg.path_norms(path, T).homogeneous
    is_pwc = isinstance(path, mg.PiecewiseConstantPath)

    def measure(lam: float) -> float:
        dp = mg.dilate_path(path, lam)
        if is_pwc:
            C = mg.magnus_log(dp, T, method="chen")
        else:
            C = mg.magnus_log(dp, T, method="ode", steps=cfg.steps_per_unit)
        via_path = fl.pushforward_flow(sys_, dp, m, v, 0.0, T, fcfg)
        via_log = fl.exp_pushforward(sys_, C, m, v, fcfg)
        return max(fl.dist_TM_flat(fl.TangentSample(a, b), fl.TangentSample(c, d))
                   for a, b, c, d in zip(via_path.m, via_path.v, via_log.m, via_log.v))

    def shape(lam: float) -> float:
        return bd.q_eval(bd.QSpec(cfg.kappa, 2 * cfg.kappa, closed_left=False),
                         lam * base_norm)

    meta = {"system": sys_.name, "kappa": cfg.kappa, "T": T,
            "path_hom_norm": base_norm}
    return _run_order_experiment(
        cfg, outdir, f"differential of flow vs exp: {sys_.name}, kappa={cfg.kappa}",
        measure, shape, cfg.kappa + 1, meta)


# ---------------------------------------------------------------------------
# magnus comparison table
# ---------------------------------------------------------------------------

def _cdot_norm_ratio(path, steps: int = 64) -> float:
    """Monitored ratio N*(dC/dt) / N*(xi') over [0, T]; reported, not asserted."""
    basis = path.basis
    C = LieCoordinates.zero(basis)
    acc = np.zeros(basis.params.kappa)
    for a, b in mg.aligned_grid(path, 0.0, path.T, steps):
        h = b - a
        k1 = mg.c_ode_derivative(path, C, a, (a, b))
        k2 = mg.c_ode_derivative(path, C + (h / 2) * k1, a + h / 2, (a, b))
        k3 = mg.c_ode_derivative(path, C + (h / 2) * k2, a + h / 2, (a, b))
        k4 = mg.c_ode_derivative(path, C + h * k3, b, (a, b))
        mid = C + (h / 2) * k1          # midpoint-rule accumulation of |Cdot|_k
        acc += h * ta.level_norms(mg.c_ode_derivative(path, mid, a + h / 2, (a, b))
                                  .to_tensor())[1:]
        C = C + (h / 6) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    num = mg.PathNorms(acc).homogeneous
    den = mg.path_norms(path, path.T).homogeneous
    return num / den if den > 0 else 0.0


def cmd_magnus_compare(cfg: ExperimentConfig, outdir: Path) -> int:
    params = ta.AlgebraParams(cfg.d, cfg.kappa)
    basis = build_hall_basis(params)
    path = build_path(cfg, basis)
    T = path.T
    step_counts = cfg.step_counts or tuple(2 ** k for k in range(4, 11))

    # distances are taken between raw tensor logs: a coarse group-ODE result
    # sits off the group by O(h^4), and that deviation IS the convergence
    # signal -- projecting it away first would leave only rounding noise
    is_pwc = isinstance(path, mg.PiecewiseConstantPath)
    if is_pwc:
        ref_log = ta.log(mg.chen_product(path, T))
        ref_label = "chen"
    else:
        ref_log = ta.log(mg.group_ode_solve(path, T, 4 * max(step_counts)))
        ref_label = f"ode@{4 * max(step_counts)}"

    rows = []
    for s in step_counts:
        log_ode = ta.log(mg.group_ode_solve(path, T, s))
        _, residual = basis.project(log_ode)
        code = mg.c_ode_solve(path, T, s).to_tensor()
        rows.append({
            "steps": s,
            "ref_vs_ode": ta.norm(ta.sub(ref_log, log_ode)),
            "ref_vs_code": ta.norm(ta.sub(ref_log, code)),
            "ode_vs_code": ta.norm(ta.sub(log_ode, code)),
            "lie_residual": residual,
        })

    # step-halving ratios: here the integrator truncation error IS the
    # signal, so the only exclusion is rounding contamination of the
    # tensor-log coordinates themselves
    round_floor = 1e4 * np.finfo(float).eps * max(1.0, ta.norm(ref_log))
    ratios = []
    for prev, cur in zip(rows[:-1], rows[1:]):
        if prev["ref_vs_ode"] > 0 and cur["ref_vs_ode"] > 0:
            ratios.append(prev["ref_vs_ode"] / cur["ref_vs_ode"])
        else:
            ratios.append(float("nan"))
    usable = [r for r, row in zip(ratios, rows[1:])
              if row["ref_vs_ode"] > round_floor and np.isfinite(r)]

    final = rows[-1]
    agree = max(final["ref_vs_ode"], final["ref_vs_code"], final["ode_vs_code"])
    checks = [
        check_upper("three-way-agreement-at-max-steps", agree, 1e-8,
                    f"{max(step_counts)} steps, reference {ref_label}"),
        check_upper("lie-residual-at-max-steps", final["lie_residual"], 1e-9),
    ]
    if cfg.expect == "order":
        if usable:
            checks.append(CheckResult("step-halving-ratio", usable[-1], 16.0,
                                      bool(abs(usable[-1] - 16.0) <= 4.8), "band",
                                      "target 16 +/- 30%"))
        else:
            checks.append(CheckResult("step-halving-ratio", float("nan"), 16.0,
                                      False, "band", "no ratios above rounding floor"))
    ratio_monitored = _cdot_norm_ratio(path)

    lines = ["steps,ref_vs_ode,ref_vs_code,ode_vs_code,lie_residual,halving_ratio"]
    for i, row in enumerate(rows):
        r = "" if i == 0 or not np.isfinite(ratios[i - 1]) else "%.17g" % ratios[i - 1]
        lines.append("%d,%.17g,%.17g,%.17g,%.17g,%s" % (
            row["steps"], row["ref_vs_ode"], row["ref_vs_code"],
            row["ode_vs_code"], row["lie_residual"], r))
    csv_text = "\n".join(lines) + "\n"

    passed = all(c.passed for c in checks)
    payload = {
        "experiment": cfg.experiment,
        "config": _config_dict(cfg),
        "reference": ref_label,
        "rows": rows,
        "halving_ratios": [r if np.isfinite(r) else None for r in ratios],
        "checks": [asdict(c) for c in checks],
        "passed": passed,
        "monitored": {"cdot_over_xidot_hom_norm": ratio_monitored,
                      "note": "bounded by theory up to a hidden constant; reported only"},
    }

    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    hs = T / np.array(step_counts, dtype=float)
    for key, style in (("ref_vs_ode", "o-"), ("ref_vs_code", "s-"),
                       ("ode_vs_code", "^-")):
        vals = np.array([row[key] for row in rows])
        keep = vals > 0
        if np.any(keep):
            ax.loglog(hs[keep], vals[keep], style, label=key)
    anchor = next((row["ref_vs_ode"] for row in rows if row["ref_vs_ode"] > 0), 1.0)
    ax.loglog(hs, anchor * (hs / hs[0]) ** 4, "--", color="k", alpha=0.5,
              label="h^4 reference")
    ax.set_xlabel("step size h")
    ax.set_ylabel("log-coordinate distance")
    ax.set_title(f"integrators vs {ref_label}, kappa={cfg.kappa}")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()

    paths = write_outputs(outdir, cfg.label, payload, csv_text, fig)
    _print_summary(checks, paths)
    print(f"  monitored N*(dC/dt)/N*(xi') = {ratio_monitored:.4f}")
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# w-field check
# ---------------------------------------------------------------------------

def cmd_w_field_check(cfg: ExperimentConfig, outdir: Path) -> int:
    sys_ = build_system(cfg)
    basis = sys_.basis
    path = build_path(cfg, basis)
    fcfg = fl.FlowConfig(steps_per_unit=cfg.steps_per_unit)
    rng = np.random.default_rng(cfg.seed + 41)
    pts = sys_.manifold.sample_points(rng, cfg.sample_points)
    if any(t <= 0 or t >= path.T for t in cfg.t_samples):
        raise ConfigError("t_samples must lie strictly inside (0, T)")
    breaks = set(path.breakpoints())
    if any(t in breaks for t in cfg.t_samples):
        raise ConfigError("t_samples must avoid path breakpoints")
    steps_for = lambda t: max(1, int(round(t * cfg.steps_per_unit)))

    def solved_log(t: float) -> LieCoordinates:
        return mg.c_ode_solve(path, t, steps_for(t))

    per_t = []
    for t in cfg.t_samples:
        C = solved_log(t)
        Cdot = mg.c_ode_derivative(path, C, t)
        base = fl.exp_flow(sys_, C, pts, fcfg)
        per_t.append((t, fl.w_field_eval(sys_, C, Cdot, base, cfg.squad, fcfg)))

    def residual(h: float) -> float:
        worst = 0.0
        for t, w in per_t:
            fd = (fl.exp_flow(sys_, solved_log(t + h), pts, fcfg)
                  - fl.exp_flow(sys_, solved_log(t - h), pts, fcfg)) / (2 * h)
            worst = max(worst, float(np.max(np.linalg.norm(fd - w, axis=-1))))
        return worst

    res = [residual(h) for h in cfg.h_grid]
    ratios = [a / b if b > 0 else float("inf") for a, b in zip(res[:-1], res[1:])]

    checks = []
    for i, r in enumerate(ratios):
        expected = (cfg.h_grid[i] / cfg.h_grid[i + 1]) ** 2
        checks.append(CheckResult(
            f"residual-ratio-h{i}", r, expected,
            bool(abs(r - expected) <= 0.2 * expected), "band",
            f"h {cfg.h_grid[i]:g} -> {cfg.h_grid[i + 1]:g}, O(h^2) trend +/- 20%"))

    # constant generator: the s-integrand is V_A itself, so the residual is
    # pure finite-difference truncation
    A = random_lie(basis, seed=cfg.seed + 5)
    h0 = cfg.h_grid[-1]
    tc = 0.5
    baseA = fl.exp_flow(sys_, tc * A, pts, fcfg)
    wA = fl.w_field_eval(sys_, tc * A, A, baseA, cfg.squad, fcfg)
    fdA = (fl.exp_flow(sys_, (tc + h0) * A, pts, fcfg)
           - fl.exp_flow(sys_, (tc - h0) * A, pts, fcfg)) / (2 * h0)
    r_const = float(np.max(np.linalg.norm(fdA - wA, axis=-1)))
    checks.append(check_upper("constant-generator-residual", r_const,
                              max(10.0 * h0 ** 2, 100 * integrator_tol(1.0, cfg.steps_per_unit)),
                              "FD truncation only"))

    zero = LieCoordinates.zero(basis)
    wz = fl.w_field_eval(sys_, zero, zero, pts, cfg.squad, fcfg)
    fdz = (fl.exp_flow(sys_, zero, pts, fcfg) - fl.exp_flow(sys_, zero, pts, fcfg)) / (2 * h0)
    r_zero = float(np.max(np.linalg.norm(fdz - wz, axis=-1)))
    checks.append(check_upper("zero-field-residual", r_zero, 0.0, "exact zero"))

    lines = ["h,residual,ratio_to_next"]
    for i, (h, r) in enumerate(zip(cfg.h_grid, res)):
        rat = "%.17g" % ratios[i] if i < len(ratios) else ""
        lines.append("%.17g,%.17g,%s" % (h, r, rat))
    csv_text = "\n".join(lines) + "\n"

    passed = all(c.passed for c in checks)
    payload = {
        "experiment": cfg.experiment,
        "config": _config_dict(cfg),
        "h_grid": list(cfg.h_grid),
        "residuals": res,
        "ratios": ratios,
        "checks": [asdict(c) for c in checks],
        "passed": passed,
    }

    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    hg = np.array(cfg.h_grid)
    ax.loglog(hg, res, "o-", label="max residual")
    ax.loglog(hg, res[0] * (hg / hg[0]) ** 2, "--", color="k", alpha=0.5,
              label="h^2 reference")
    ax.set_xlabel("finite-difference step h")
    ax.set_ylabel("max |FD - W(flow)|")
    ax.set_title(f"time-derivative identity residual: {sys_.name}, kappa={cfg.kappa}")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()

    paths = write_outputs(outdir, cfg.label, payload, csv_text, fig)
    _print_summary(checks, paths)
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _config_dict(cfg: ExperimentConfig) -> dict:
    out = asdict(cfg)
    out["lambda_grid"] = list(cfg.lambda_grid)
    out["step_counts"] = list(cfg.step_counts)
    out["h_grid"] = list(cfg.h_grid)
    out["t_samples"] = list(cfg.t_samples)
    return out


def _print_summary(checks, paths) -> None:
    for c in checks:
        print(c.line())
    n_fail = sum(not c.passed for c in checks)
    print("PASS" if n_fail == 0 else f"FAIL: {n_fail} check(s) failed")
    print("wrote " + ", ".join(str(p) for p in paths))


_DISPATCH = {
    "identity-suite": cmd_identity_suite,
    "dilation-order": cmd_dilation_order,
    "bch-order": cmd_bch_order,
    "pushforward-order": cmd_pushforward_order,
    "magnus-compare": cmd_magnus_compare,
    "w-field-check": cmd_w_field_check,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="trunclog",
        description="identity checks and convergence-order experiments for "
                    "truncated log-coordinate flows")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON experiment config", default=None)
    parser.add_argument("--out", help="output directory", default="out")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--steps", type=int, default=None,
                        help="override integrator steps per unit time")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.command, args.config, args.seed, args.steps)
        return _DISPATCH[args.command](cfg, Path(args.out))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
