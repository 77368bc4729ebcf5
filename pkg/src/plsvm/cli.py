"""Command line interface: ``plsvm {run,fit,complexity,probe,rates}``.

Exit codes: 0 success, 2 invalid input or configuration, 3 I/O failure,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import math
import sys

import numpy as np

from . import epprobe, experiments, kernels
from .errors import InvalidInputError, NumericalFailure
from .model import Dataset
from .solver import FitConfig, fit

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4

_PROBE_KEYS = ("ball_radii", "n_candidates", "n_replicates", "seed", "radius_mode", "n_scales",
               "scale_range", "mc_factor", "grid_n", "kernel", "output_path", "generator")


def _cmd_run(args) -> int:
    cfg = experiments.load_config(args.config)
    out = args.out if args.out else cfg.output_path
    rows = experiments.run(cfg, out)
    summary = experiments.summarize(rows)
    print("n,p,s,count,beta_l2_error_mean,beta_l2_error_se,excess_risk_mean,excess_risk_se")
    for rec in summary:
        print(f"{rec['n']:g},{rec['p']:g},{rec['s']:g},{rec['count']},"
              f"{rec['beta_l2_error_mean']:.6g},{rec['beta_l2_error_se']:.6g},"
              f"{rec['excess_risk_mean']:.6g},{rec['excess_risk_se']:.6g}")
    for a, b in experiments.monotonicity_flags(summary):
        print(f"note: mean beta_l2_error rises from n={a:g} to n={b:g}", file=sys.stderr)
    if out:
        print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


def _cmd_fit(args) -> int:
    data = Dataset.from_csv(args.data)
    spec = kernels.parse_kernel(args.kernel)
    lam, mu = args.lam, args.mu
    if lam is None or mu is None:
        gam = kernels.gamma_n(kernels.spectrum_of(spec, data.T), data.n, data.p)
        lam = math.sqrt(math.log(data.p) / data.n) if lam is None else lam
        mu = gam * gam if mu is None else mu
    report = fit(data, spec, FitConfig(lam=lam, mu=mu))
    report.model.to_json(args.out)
    print(f"objective={report.objective:.17g} iterations={report.iterations} "
          f"converged={str(report.converged).lower()} kkt={report.kkt_residual:.3g}")
    print(f"nonzero beta: {int(np.count_nonzero(report.model.beta))} of {data.p}")
    return EXIT_OK


def _cmd_complexity(args) -> int:
    spec = kernels.parse_kernel(args.kernel)
    if spec.family == kernels.GAUSSIAN:
        rng = np.random.default_rng(args.seed)
        spectrum = kernels.spectrum_of(spec, rng.random((args.n, spec.domain_dim)))
    else:
        spectrum = kernels.spectrum_of(spec)
    nu = kernels.nu_n(spectrum, args.n)
    gam = kernels.gamma_n(spectrum, args.n, args.p)
    print("r,Q_n(r),40r^2")
    for r in np.geomspace(max(nu, 1e-12) / 8.0, max(nu, 1e-12) * 8.0, 7):
        print(f"{r:.6g},{kernels.q_n(spectrum, args.n, r):.6g},{40.0 * r * r:.6g}")
    print(f"nu_n={nu:.17g}")
    print(f"gamma_n={gam:.17g}")
    print(f"lambda_default={math.sqrt(math.log(args.p) / args.n):.17g}")
    print(f"mu_default={gam * gam:.17g}")
    return EXIT_OK


def load_probe_config(path):
    """``(ProbeConfig, GeneratorConfig, KernelSpec, n_grid, output_path)`` from a TOML file."""
    d = experiments._toml(path)
    experiments._check_keys("probe", d, _PROBE_KEYS)
    gen = experiments.generator_from_dict(d.get("generator", {}))
    spec = kernels.parse_kernel(d.get("kernel", "finite_rank:m=6"))
    grid = [int(v) for v in d.get("grid_n", [gen.n])]
    fields = {k: d[k] for k in _PROBE_KEYS[:8] if k in d}
    for k in ("ball_radii", "scale_range"):
        if k in fields:
            fields[k] = tuple(fields[k])
    try:
        cfg = epprobe.ProbeConfig(**fields)
    except TypeError as exc:
        raise InvalidInputError(str(exc)) from None
    return cfg, gen, spec, grid, d.get("output_path")


def _cmd_probe(args) -> int:
    cfg, gen, spec, grid, out = load_probe_config(args.config)
    out = args.out if args.out else out
    results = [epprobe.sup_probe(cfg, dataclasses.replace(gen, n=n), spec) for n in grid]
    print("n,sup_estimate,bound_value,ratio")
    for r in results:
        print(f"{r.n},{r.sup_estimate:.6g},{r.bound_value:.6g},{r.ratio:.6g}")
    if len(grid) >= 2 and all(r.sup_estimate > 0 for r in results):
        slope = np.polyfit(np.log(grid), np.log([r.sup_estimate for r in results]), 1)[0]
        print(f"log-log slope of sup_estimate vs n: {slope:.4f}")
    if out:
        epprobe.write_probe_csv(out, results)
    return EXIT_OK


def _cmd_rates(args) -> int:
    rows = experiments.read_results(args.results)
    slope, intercept, r2 = experiments.rate_fit(rows, args.x, args.y)
    print(f"slope={slope:.6g} intercept={intercept:.6g} r_squared={r2:.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="plsvm", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment sweep from a TOML config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="results CSV (overrides output_path)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("fit", help="fit one dataset and write the model as JSON")
    p.add_argument("--data", required=True)
    p.add_argument("--kernel", required=True, help="e.g. finite_rank:m=6, poly_decay:alpha=1")
    p.add_argument("--lambda", dest="lam", type=float, help="default sqrt(log p / n)")
    p.add_argument("--mu", type=float, help="default gamma_n^2")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("complexity", help="print Q_n near the fixed point, nu_n and gamma_n")
    p.add_argument("--kernel", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--seed", type=int, default=0, help="sample seed for empirical spectra")
    p.set_defaults(func=_cmd_complexity)

    p = sub.add_parser("probe", help="empirical-process probe from a TOML config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="probe CSV (overrides output_path)")
    p.set_defaults(func=_cmd_probe)

    p = sub.add_parser("rates", help="log-log rate fit on a results CSV")
    p.add_argument("--results", required=True)
    p.add_argument("--y", default="beta_l2_error")
    p.add_argument("--x", default="n", choices=experiments.X_AXES)
    p.set_defaults(func=_cmd_rates)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidInputError, KeyError) as exc:
        print(f"plsvm: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"plsvm: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericalFailure, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"plsvm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
