"""Experiment sweeps: generate, fit at the default tuning, score, and fit rates.

A sweep is the product ``grid_n x grid_p x grid_s`` of cells, each repeated
``replicates`` times. Replicate ``r`` draws its training sample with seed
``seed + r`` and a fresh evaluation sample of ``eval_mc`` points with seed
``seed + EVAL_OFFSET + r``; the fitted and true scores are compared on the same
evaluation draws, so their Monte-Carlo noise largely cancels in the excess risk.
"""
from __future__ import annotations

import csv
import dataclasses
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .datagen import GeneratorConfig, generate, sample_stream
from .errors import InvalidInputError
from .kernels import KernelSpec
from .model import GroundTruth, Model, fmt, hinge
from .solver import FitConfig, fit

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

RESULT_FIELDS = ("n", "p", "s", "replicate", "lambda", "mu", "gamma_n", "nu_n",
                 "beta_l2_error", "beta_l1_error", "g_l2_error", "f_l2_error",
                 "excess_risk", "excess_risk_se", "solver_iterations", "converged",
                 "wall_time_ms")
METRICS = ("beta_l2_error", "beta_l1_error", "g_l2_error", "f_l2_error", "excess_risk",
           "solver_iterations", "wall_time_ms")
HYPER_POLICIES = ("theorem", "manual")
EVAL_OFFSET = 1_000_003
_GRID_KEYS = ("n", "p", "s", "seed")


@dataclass(frozen=True)
class ExperimentConfig:
    grid_n: Tuple[int, ...] = (200,)
    grid_p: Tuple[int, ...] = (10,)
    grid_s: Tuple[int, ...] = (2,)
    kernel: KernelSpec = field(default_factory=lambda: kernels.finite_rank(6))
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    replicates: int = 1
    hyper_policy: str = "theorem"
    manual_lambda: float = 0.0
    manual_mu: float = 0.0
    mu_scale: float = 1.0
    # Bernstein exponent the design targets; an annotation used by rate summaries
    zeta_assumed: float = 2.0
    eval_mc: int = 100_000
    output_path: Optional[str] = None
    seed: int = 0
    solver: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self):
        for name in ("grid_n", "grid_p", "grid_s"):
            vals = tuple(int(v) for v in getattr(self, name))
            if not vals:
                raise InvalidInputError(f"{name} must not be empty")
            object.__setattr__(self, name, vals)
        if min(self.grid_n) < 2 or min(self.grid_p) < 2 or min(self.grid_s) < 0:
            raise InvalidInputError("grid needs n >= 2, p >= 2 and s >= 0")
        if max(self.grid_s) > min(self.grid_p):
            raise InvalidInputError("every s must be at most every p in the grid")
        if self.replicates < 1 or self.eval_mc < 1:
            raise InvalidInputError("replicates and eval_mc must be positive")
        if self.hyper_policy not in HYPER_POLICIES:
            raise InvalidInputError(f"hyper_policy must be one of {HYPER_POLICIES}")
        if not (self.manual_lambda >= 0 and self.manual_mu >= 0 and self.mu_scale > 0):
            raise InvalidInputError("manual lambda, mu must be >= 0 and mu_scale > 0")
        if not self.zeta_assumed >= 2:
            raise InvalidInputError("zeta_assumed must be at least 2")

    def cells(self) -> List[Tuple[int, int, int]]:
        return list(itertools.product(self.grid_n, self.grid_p, self.grid_s))


@dataclass
class ResultRow:
    n: int
    p: int
    s: int
    replicate: int
    lam: float
    mu: float
    gamma_n: float
    nu_n: float
    beta_l2_error: float
    beta_l1_error: float
    g_l2_error: float
    f_l2_error: float
    excess_risk: float
    excess_risk_se: float
    solver_iterations: int
    converged: bool
    wall_time_ms: float

    def get(self, name: str):
        return self.lam if name == "lambda" else getattr(self, name)

    def csv_fields(self) -> List[str]:
        out = []
        for name in RESULT_FIELDS:
            v = self.get(name)
            if isinstance(v, bool):
                out.append("true" if v else "false")
            elif isinstance(v, (int, np.integer)):
                out.append(str(int(v)))
            else:
                out.append(fmt(v))
        return out


def hyperparameters(cfg: ExperimentConfig, n: int, p: int, T=None):
    """``(lambda, mu, gamma_n, nu_n)`` for one cell."""
    if cfg.kernel.family == kernels.GAUSSIAN:
        spectrum = kernels.spectrum_of(cfg.kernel, T)
    else:
        spectrum = kernels.spectrum_of(cfg.kernel)
    nu = kernels.nu_n(spectrum, n)
    gam = kernels.gamma_n(spectrum, n, p)
    if cfg.hyper_policy == "manual":
        return cfg.manual_lambda, cfg.manual_mu, gam, nu
    return math.sqrt(math.log(p) / n), cfg.mu_scale * gam * gam, gam, nu


def evaluate(model: Model, truth: GroundTruth, gen: GeneratorConfig, mc_n: int, seed: int,
             chunk: int = 20_000) -> Dict[str, float]:
    """Excess hinge risk (with standard error) and L2 score errors on fresh draws."""
    s_d = s_dd = s_f = s_g = 0.0
    for Z, T, y, f in sample_stream(gen, truth, mc_n, seed, chunk):
        gh = model.g(T)
        fh = Z @ model.beta + gh
        d = hinge(y * fh) - hinge(y * f)
        s_d += d.sum()
        s_dd += (d * d).sum()
        s_f += ((fh - f) ** 2).sum()
        s_g += ((gh - truth.g_star(T)) ** 2).sum()
    mean = s_d / mc_n
    var = max(s_dd / mc_n - mean * mean, 0.0) * mc_n / max(mc_n - 1, 1)
    return {"excess_risk": mean, "excess_risk_se": math.sqrt(var / mc_n),
            "f_l2_error": math.sqrt(s_f / mc_n), "g_l2_error": math.sqrt(s_g / mc_n)}


def run_cell(cfg: ExperimentConfig, n: int, p: int, s: int, replicate: int) -> ResultRow:
    gen = dataclasses.replace(cfg.generator, n=n, p=p, s=s, seed=cfg.seed + replicate)
    t0 = time.perf_counter()
    data, truth = generate(gen)
    lam, mu, gam, nu = hyperparameters(cfg, n, p, data.T)
    solver_cfg = dataclasses.replace(cfg.solver, lam=lam, mu=mu, seed=gen.seed)
    report = fit(data, cfg.kernel, solver_cfg)
    ev = evaluate(report.model, truth, gen, cfg.eval_mc, cfg.seed + EVAL_OFFSET + replicate)
    diff = report.model.beta - truth.beta_star
    wall = (time.perf_counter() - t0) * 1e3
    return ResultRow(n, p, s, replicate, lam, mu, gam, nu,
                     float(np.linalg.norm(diff)), float(np.abs(diff).sum()),
                     ev["g_l2_error"], ev["f_l2_error"], ev["excess_risk"], ev["excess_risk_se"],
                     report.iterations, report.converged, wall)


def run(cfg: ExperimentConfig, output_path: Optional[str] = None) -> List[ResultRow]:
    """Run every (cell, replicate) in order; rows are written and flushed as they finish."""
    path = output_path if output_path is not None else cfg.output_path
    rows: List[ResultRow] = []
    fh = open(path, "w", newline="") if path else None
    try:
        writer = csv.writer(fh) if fh else None
        if writer:
            writer.writerow(RESULT_FIELDS)
            fh.flush()
        for n, p, s in cfg.cells():
            for r in range(cfg.replicates):
                row = run_cell(cfg, n, p, s, r)
                rows.append(row)
                if writer:
                    writer.writerow(row.csv_fields())
                    fh.flush()
    finally:
        if fh:
            fh.close()
    return rows


def read_results(path) -> List[ResultRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != RESULT_FIELDS:
            raise InvalidInputError(f"{path}: not a results file (unexpected header)")
        rows = []
        for rec in reader:
            if not rec:
                continue
            try:
                v = dict(zip(RESULT_FIELDS, rec))
                rows.append(ResultRow(
                    int(v["n"]), int(v["p"]), int(v["s"]), int(v["replicate"]),
                    float(v["lambda"]), float(v["mu"]), float(v["gamma_n"]), float(v["nu_n"]),
                    float(v["beta_l2_error"]), float(v["beta_l1_error"]), float(v["g_l2_error"]),
                    float(v["f_l2_error"]), float(v["excess_risk"]), float(v["excess_risk_se"]),
                    int(v["solver_iterations"]), v["converged"] == "true",
                    float(v["wall_time_ms"])))
            except (KeyError, ValueError) as exc:
                raise InvalidInputError(f"{path}: malformed row ({exc})") from None
    return rows


def _value(row, name: str) -> float:
    if isinstance(row, ResultRow):
        return float(row.get(name))
    return float(row[name])


X_AXES = ("n", "s", "s_logp_over_n")


def _x(row, axis: str) -> float:
    if axis == "s_logp_over_n":
        return _value(row, "s") * math.log(_value(row, "p")) / _value(row, "n")
    return _value(row, axis)


def rate_fit(results: Iterable, x_axis: str = "n", y_field: str = "beta_l2_error"):
    """Least squares of log(mean y) on log(x), grouping replicates by x.

    Returns ``(slope, intercept, r_squared)``. Groups with a non-positive x or
    mean y are dropped; fewer than four remaining groups is an error.
    """
    if x_axis not in X_AXES:
        raise InvalidInputError(f"x axis must be one of {X_AXES}")
    groups: Dict[float, List[float]] = {}
    for row in results:
        groups.setdefault(_x(row, x_axis), []).append(_value(row, y_field))
    pts = [(x, float(np.mean(v))) for x, v in sorted(groups.items())]
    pts = [(x, y) for x, y in pts if x > 0 and y > 0]
    if len(pts) < 4:
        raise InvalidInputError("rate fit needs at least four positive (x, mean y) points")
    lx = np.log([x for x, _ in pts])
    ly = np.log([y for _, y in pts])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    sst = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / sst if sst > 0 else 1.0
    return float(slope), float(intercept), r2


def summarize(results: Sequence, group_keys: Sequence[str] = ("n", "p", "s"),
              metrics: Sequence[str] = METRICS) -> List[dict]:
    """Mean, standard error and count of each metric per group, sorted by group key."""
    groups: Dict[tuple, list] = {}
    for row in results:
        groups.setdefault(tuple(_value(row, k) for k in group_keys), []).append(row)
    out = []
    for key in sorted(groups):
        rows = groups[key]
        rec = dict(zip(group_keys, key))
        rec["count"] = len(rows)
        for m in metrics:
            v = np.array([_value(r, m) for r in rows])
            rec[f"{m}_mean"] = float(v.mean())
            rec[f"{m}_se"] = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
        out.append(rec)
    return out


def monotonicity_flags(summary: List[dict], along: str = "n",
                       metric: str = "beta_l2_error") -> List[Tuple[float, float]]:
    """Consecutive grid values where the mean metric rises by more than one standard error.

    Groups differing in any other key are compared separately.
    """
    other = [k for k in summary[0] if k not in (along, "count") and not k.endswith(("_mean", "_se"))] \
        if summary else []
    flags = []
    by_rest: Dict[tuple, list] = {}
    for rec in summary:
        by_rest.setdefault(tuple(rec[k] for k in other), []).append(rec)
    for recs in by_rest.values():
        recs = sorted(recs, key=lambda r: r[along])
        for a, b in zip(recs, recs[1:]):
            if b[f"{metric}_mean"] > a[f"{metric}_mean"] + a[f"{metric}_se"]:
                flags.append((a[along], b[along]))
    return flags


# configuration files

def _toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise InvalidInputError(f"{path}: {exc}") from None


def _check_keys(section: str, given: dict, allowed: Iterable[str]) -> None:
    unknown = sorted(set(given) - set(allowed))
    if unknown:
        raise InvalidInputError(f"unknown {section} key(s): {', '.join(unknown)}")


def generator_from_dict(d: dict, forbid: Sequence[str] = ()) -> GeneratorConfig:
    names = [f.name for f in dataclasses.fields(GeneratorConfig) if f.name not in forbid]
    _check_keys("generator", d, names)
    try:
        return GeneratorConfig(**d)
    except TypeError as exc:
        raise InvalidInputError(str(exc)) from None


def solver_from_dict(d: dict) -> FitConfig:
    names = [f.name for f in dataclasses.fields(FitConfig) if f.name not in ("lam", "mu", "seed")]
    _check_keys("solver", d, names)
    return FitConfig(**d)


_TOP_KEYS = ("grid_n", "grid_p", "grid_s", "kernel", "replicates", "hyper_policy",
             "manual_lambda", "manual_mu", "mu_scale", "zeta_assumed", "eval_mc",
             "output_path", "seed", "generator", "solver")


def config_from_dict(d: dict) -> ExperimentConfig:
    d = dict(d)
    _check_keys("experiment", d, _TOP_KEYS)
    if "kernel" in d:
        if not isinstance(d["kernel"], str):
            raise InvalidInputError("kernel must be a string such as 'finite_rank:m=6'")
        d["kernel"] = kernels.parse_kernel(d["kernel"])
    d["generator"] = generator_from_dict(d.get("generator", {}), forbid=_GRID_KEYS)
    d["solver"] = solver_from_dict(d.get("solver", {}))
    for k in ("grid_n", "grid_p", "grid_s"):
        if k in d and not isinstance(d[k], list):
            d[k] = [d[k]]
    try:
        return ExperimentConfig(**d)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidInputError):
            raise
        raise InvalidInputError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    return config_from_dict(_toml(path))
