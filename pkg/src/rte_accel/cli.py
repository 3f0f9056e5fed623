"""Implicit transport time marching with DSA and on-the-fly ROM acceleration.

Exit codes: 0 success, 2 usage error, 3 solver failure, 4 I/O failure.
"""

import argparse
import configparser
import sys
from dataclasses import asdict, fields
from pathlib import Path

import numba
import numpy as np

from . import outputs
from .dsa import AssemblyError
from .orchestrator import MODES, ConvergenceFailure, SolverConfig, time_march
from .quadrature import InvalidQuadratureError
from .scenarios import CATALOG, UnknownScenarioError, build_problem, parse_section, scenario_catalog
from .sweep import SingularBlockError

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4


class UsageError(ValueError):
    pass


def _quad(text):
    try:
        parts = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or N_PHI,N_Z, got {text!r}")
    if len(parts) not in (1, 2):
        raise argparse.ArgumentTypeError(f"expected N or N_PHI,N_Z, got {text!r}")
    return parts


def make_parser():
    p = argparse.ArgumentParser(prog="rte-accel", description=__doc__.splitlines()[0])
    p.add_argument("--scenario", help=f"one of: {', '.join(CATALOG)}")
    p.add_argument("--config", type=Path, help="key-value file with [scenario] and [solver] sections")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--nx", type=int)
    p.add_argument("--ny", type=int)
    p.add_argument("--degree", type=int)
    p.add_argument("--quad", type=_quad, help="N (1D Gauss-Legendre) or N_PHI,N_Z")
    step = p.add_mutually_exclusive_group()
    step.add_argument("--cfl", type=float, help="dt = CFL * dx")
    step.add_argument("--dt", type=float)
    p.add_argument("--t-final", type=float)
    p.add_argument("--sigma-s", type=float, help="scattering strength (gaussian_source_2d)")
    p.add_argument("--eps-sisa", type=float)
    p.add_argument("--eps-ig", type=float)
    p.add_argument("--eps-pc", type=float)
    p.add_argument("--eps-up", type=float)
    p.add_argument("--n-iter", type=int)
    p.add_argument("--rank-cap", type=int)
    p.add_argument("--mh-snapshots", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", type=Path, default=Path("results"))
    p.add_argument("--compare-baseline", action="store_true",
                   help="also run SI-DSA and write a comparison report")
    p.add_argument("--seed-check", action="store_true",
                   help="run twice and fail unless iteration counts and densities match exactly")
    p.add_argument("--quiet", action="store_true")
    return p


_SOLVER_KEYS = {f.name for f in fields(SolverConfig)}


def _read_config(path):
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise OSError(f"cannot read config file {path}")
    scen = dict(cp["scenario"]) if cp.has_section("scenario") else {}
    solver = dict(cp["solver"]) if cp.has_section("solver") else {}
    unknown = set(solver) - _SOLVER_KEYS
    if unknown:
        raise UsageError(f"unknown solver keys in {path}: {', '.join(sorted(unknown))}")
    return scen, solver


def resolve(args):
    """Scenario and SolverConfig from file values overlaid by flags."""
    scen_file, solver_file = ({}, {}) if args.config is None else _read_config(args.config)
    name = args.scenario or scen_file.pop("name", None)
    scen_file.pop("name", None)
    if name is None:
        raise UsageError(f"no scenario given; valid names: {', '.join(CATALOG)}")
    if name not in CATALOG:
        raise UnknownScenarioError(name)

    over = parse_section(scen_file)
    over.pop("name", None)
    if "dt" in over and "cfl" in over:
        raise UsageError("config sets both dt and cfl")
    flags = dict(nx=args.nx, ny=args.ny, degree=args.degree, quad=args.quad, cfl=args.cfl, dt=args.dt,
                 t_final=args.t_final, sigma_s=args.sigma_s, eps_sisa=args.eps_sisa, eps_ig=args.eps_ig,
                 eps_pc=args.eps_pc, eps_up=args.eps_up)
    if flags["dt"] is not None:
        over.pop("cfl", None)
    if flags["cfl"] is not None:
        over.pop("dt", None)
    over.update({k: v for k, v in flags.items() if v is not None})
    if name != "gaussian_source_2d" and over.get("sigma_s") is not None:
        raise UsageError("--sigma-s only applies to gaussian_source_2d")
    scenario = scenario_catalog(name, **over)

    solver = SolverConfig()
    params = asdict(solver)
    params.update(scenario.tolerances())
    for k, v in solver_file.items():
        params[k] = type(params[k])(v) if k != "mode" else v
    for k in ("mode", "eps_sisa", "eps_ig", "eps_pc", "eps_up", "n_iter", "rank_cap",
              "mh_snapshots", "threads"):
        v = getattr(args, k)
        if v is not None:
            params[k] = v
    return scenario, SolverConfig(**params)


def _log(args, msg):
    if not args.quiet:
        print(msg)


def _run(config, problem, args, label):
    _log(args, f"[{label}] mode={config.mode} steps={problem.n_steps} dofs={problem.ops.n_dofs} "
               f"angles={problem.quad.count}")
    F, rho, metrics = time_march(config, problem)
    it = metrics.column("iterations")
    _log(args, f"[{label}] done: {int(it.sum())} iterations, avg sweeps {metrics.avg_sweeps():.3f}, "
               f"N0={metrics.N0} N1={metrics.N1}, {metrics.total_ms / 1e3:.2f} s")
    return F, rho, metrics


def _strip_timing(metrics):
    keep = [k for k in outputs.METRICS_HEADER if k not in outputs.TIMING_COLUMNS]
    # compare as written, so NaN indicators match
    return [[outputs.fmt(getattr(r, k)) for k in keep] for r in metrics.steps]


def main(argv=None):
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        scenario, config = resolve(args)
    except (UsageError, UnknownScenarioError, ValueError, InvalidQuadratureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    if config.threads and config.threads > 0:
        numba.set_num_threads(min(config.threads, numba.config.NUMBA_NUM_THREADS))

    try:
        problem = build_problem(scenario)
        baseline = None
        if args.compare_baseline:
            base_cfg = SolverConfig(**{**asdict(config), "mode": "si-dsa"})
            _, rho_b, baseline = _run(base_cfg, problem, args, "baseline")
        F, rho, metrics = _run(config, problem, args, "run")
        if args.seed_check:
            _, rho2, metrics2 = _run(config, problem, args, "repeat")
            if _strip_timing(metrics) != _strip_timing(metrics2) or not np.array_equal(rho, rho2):
                print("error: repeated run differs", file=sys.stderr)
                return EXIT_SOLVER
            _log(args, "[repeat] identical metrics and density")
    except (ConvergenceFailure, AssemblyError, SingularBlockError, ArithmeticError) as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    try:
        out = args.out
        out.mkdir(parents=True, exist_ok=True)
        (out / "scenario.ini").write_text(scenario.to_config())
        outputs.write_metrics(metrics, out / "metrics.csv")
        outputs.write_solution(problem.space, rho, out / "solution.csv")
        outputs.write_summary(metrics, out / "summary.csv", baseline)
        if baseline is not None:
            (out / "baseline").mkdir(exist_ok=True)
            outputs.write_metrics(baseline, out / "baseline" / "metrics.csv")
            outputs.write_solution(problem.space, rho_b, out / "baseline" / "solution.csv")
            rows = outputs.compare_runs(baseline, metrics)
            outputs.write_comparison(rows, out / "comparison.csv")
            diff = float(np.max(np.abs(rho - rho_b)))
            _log(args, f"[compare] speedup {outputs.speedup(rows):.3f}, max |rho - rho_baseline| = {diff:.3e}")
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_IO
    _log(args, f"outputs in {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
