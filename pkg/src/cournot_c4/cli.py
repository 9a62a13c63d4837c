"""Command-line entry point: ``c4 {gen-env,solve,sweep,optimize,check}``.

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import checks
from .env import Environment, SyntheticParams, generate_synthetic_env, ingest_embeddings, load_env, save_env
from .equilibrium import SolverConfig, solve_pne
from .errors import NumericalError, ValidationError
from .fixtures import fixture_path
from .game import welfare
from .optimizer import OptimizerConfig, optimize_beta, sweep_beta, sweep_stats_to_csv, sweep_to_csv

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2


def _write(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True) + "\n"


def parse_grid(spec: str) -> list[float]:
    """``"start:stop:step"`` (inclusive of ``stop``) or a comma-separated list."""
    if ":" in spec:
        try:
            start, stop, step = (float(v) for v in spec.split(":"))
        except ValueError as exc:
            raise ValidationError(f"grid must look like start:stop:step, got {spec!r}") from exc
        if not step > 0 or stop < start:
            raise ValidationError(f"invalid grid {spec!r}")
        count = int(round((stop - start) / step)) + 1
        return [round(start + k * step, 12) for k in range(count)]
    try:
        return [float(v) for v in spec.split(",") if v.strip()]
    except ValueError as exc:
        raise ValidationError(f"invalid grid {spec!r}") from exc


def parse_seeds(spec: str) -> list[int]:
    """``"0..9"`` (inclusive) or a comma-separated list."""
    try:
        if ".." in spec:
            lo, hi = spec.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(v) for v in spec.split(",") if v.strip()]
    except ValueError as exc:
        raise ValidationError(f"invalid seed list {spec!r}") from exc


def _synthetic_params(args, seed=None) -> SyntheticParams:
    return SyntheticParams(
        d=args.d, clusters=args.clusters, spread=args.spread, n=args.n, m=args.m,
        rho=args.rho, cost_lo=args.cost_lo, cost_hi=args.cost_hi,
        seed=args.seed if seed is None else seed,
    )


def _load_or_generate(args, seed=None) -> Environment:
    if getattr(args, "env", None):
        name = args.env
        if name.startswith("fixture:"):
            try:
                name = str(fixture_path(name.split(":", 1)[1]))
            except FileNotFoundError as exc:
                raise ValidationError(str(exc)) from exc
        return load_env(name)
    return generate_synthetic_env(_synthetic_params(args, seed))


def _solver(args) -> SolverConfig:
    return SolverConfig(max_iter=args.max_iter, eta=args.solver_eta, tol=args.tol)


def _beta_arg(args, m: int) -> np.ndarray:
    if getattr(args, "beta_file", None):
        data = json.loads(Path(args.beta_file).read_text())
        beta = np.asarray(data["beta"] if isinstance(data, dict) else data, dtype=float)
    else:
        beta = np.full(m, float(args.beta))
    if beta.shape != (m,) or np.any(~np.isfinite(beta)) or np.any(beta < 0):
        raise ValidationError(f"beta must be >= 0 with length m={m}")
    return beta


def cmd_gen_env(args) -> int:
    if args.kind == "synthetic":
        env = generate_synthetic_env(_synthetic_params(args))
    else:
        if not (args.users and args.creators):
            raise ValidationError("--kind ingest needs --users and --creators")
        coefficients = None
        if args.cost_coefficients:
            coefficients = [float(v) for v in args.cost_coefficients.split(",")]
        env = ingest_embeddings(
            args.users, args.creators, rho=args.rho, coefficients=coefficients,
            cost_range=(args.cost_lo, args.cost_hi), seed=args.seed,
        )
    save_env(env, args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    env = _load_or_generate(args)
    beta = _beta_arg(args, env.m)
    res = solve_pne(env, beta, _solver(args))
    report = welfare(env, res.x_star, beta, args.lam)
    _write(args.out, _dump({"solve": res.to_dict(), "welfare": report.to_dict()}))
    print(f"U={report.U:.6g} V={report.V:.6g} W={report.W:.6g} converged={res.converged}", file=sys.stderr)
    return EXIT_OK if res.converged else EXIT_NUMERICAL


def cmd_sweep(args) -> int:
    grid = parse_grid(args.grid)
    solver = _solver(args)
    if args.repeats > 1 or args.seeds:
        seeds = parse_seeds(args.seeds) if args.seeds else list(range(args.seed, args.seed + args.repeats))
        if args.seeds and len(seeds) != args.repeats and args.repeats > 1:
            raise ValidationError(f"--repeats {args.repeats} does not match {len(seeds)} seeds")
        sweeps = [sweep_beta(_load_or_generate(args, s), grid, args.lam, solver) for s in seeds]
        _write(args.out, sweep_stats_to_csv(grid, sweeps))
        failed = any(not r.converged for s in sweeps for r in s)
    else:
        rows = sweep_beta(_load_or_generate(args), grid, args.lam, solver)
        _write(args.out, sweep_to_csv(rows))
        failed = any(not r.converged for r in rows)
    return EXIT_NUMERICAL if failed else EXIT_OK


def cmd_optimize(args) -> int:
    env = _load_or_generate(args)
    config = OptimizerConfig(
        iterations=args.iters, eta=args.eta, delta=args.delta, lam=args.lam, beta0=args.beta0,
        mode=args.mode, beta_max=args.beta_max, seed=args.seed, sketch_diagonal=args.sketch_diagonal,
    )
    trace = optimize_beta(env, config, _solver(args))
    _write(args.out, trace.to_csv())
    if args.beta_out:
        _write(args.beta_out, _dump(trace.to_dict()["final_beta"] if trace.final_beta else None))
    if args.json_out:
        _write(args.json_out, _dump(trace.to_dict(full_beta=args.full_beta)))
    if trace.error:
        print(f"error: {trace.error}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_check(args) -> int:
    results = checks.run_checks(seed=args.seed, skip=set(args.skip or ()))
    lines = [f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}" for r in results]
    _write(args.out, "\n".join(lines) + "\n")
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERICAL


def _add_synthetic(p) -> None:
    d = SyntheticParams()
    p.add_argument("--n", type=int, default=d.n, help="creators")
    p.add_argument("--m", type=int, default=d.m, help="users")
    p.add_argument("--d", type=int, default=d.d, help="embedding dimension")
    p.add_argument("--clusters", type=int, default=d.clusters)
    p.add_argument("--spread", type=float, default=d.spread)
    p.add_argument("--rho", type=float, default=d.rho, help="cost exponent")
    p.add_argument("--cost-lo", type=float, default=d.cost_lo)
    p.add_argument("--cost-hi", type=float, default=d.cost_hi)


def _add_solver(p) -> None:
    d = SolverConfig()
    p.add_argument("--max-iter", type=int, default=d.max_iter)
    p.add_argument("--solver-eta", type=float, default=d.eta)
    p.add_argument("--tol", type=float, default=d.tol)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="c4", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-env", help="generate or ingest an environment JSON")
    p.add_argument("--kind", choices=("synthetic", "ingest"), default="synthetic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--users", help="user embedding CSV (ingest)")
    p.add_argument("--creators", help="creator embedding CSV (ingest)")
    p.add_argument("--cost-coefficients", help="comma-separated c_i (ingest); default draws U[lo, hi]")
    _add_synthetic(p)
    p.set_defaults(func=cmd_gen_env)

    env_help = "environment JSON (or fixture:<name>); default generates a synthetic one from --seed"

    p = sub.add_parser("solve", help="equilibrium and welfare at one beta")
    p.add_argument("--env", help=env_help)
    p.add_argument("--beta", type=float, default=0.0, help="homogeneous beta")
    p.add_argument("--beta-file", help="JSON list (or {'beta': [...]}) of per-user beta")
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    _add_synthetic(p)
    _add_solver(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="U, V, W across a grid of homogeneous beta")
    p.add_argument("--env", help=env_help)
    p.add_argument("--grid", default="0:10:0.5", help="start:stop:step or comma list")
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=1, help="number of generated environments")
    p.add_argument("--seeds", help="environment seeds, e.g. 0..9")
    p.add_argument("--out", default="-")
    _add_synthetic(p)
    _add_solver(p)
    p.set_defaults(func=cmd_sweep)

    d = OptimizerConfig()
    p = sub.add_parser("optimize", help="welfare ascent on beta")
    p.add_argument("--env", help=env_help)
    p.add_argument("--lambda", dest="lam", type=float, default=d.lam)
    p.add_argument("--mode", choices=("personalized", "homogeneous"), default=d.mode)
    p.add_argument("--iters", type=int, default=d.iterations)
    p.add_argument("--eta", type=float, default=d.eta, help="outer step size")
    p.add_argument("--delta", type=float, default=d.delta, help="user sample rate")
    p.add_argument("--beta0", type=float, default=d.beta0)
    p.add_argument("--beta-max", type=float, default=d.beta_max)
    p.add_argument("--sketch-diagonal", action=argparse.BooleanOptionalAction, default=d.sketch_diagonal,
                   help="sum the diagonal block over the sampled users too")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-", help="trace CSV")
    p.add_argument("--beta-out", help="final beta JSON")
    p.add_argument("--json-out", help="full trace JSON")
    p.add_argument("--full-beta", action="store_true", help="include beta snapshots in --json-out")
    _add_synthetic(p)
    _add_solver(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("check", help="numerical self-checks on small seeded instances")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--skip", action="append", choices=checks.CHECK_NAMES, help="check to omit (repeatable)")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
