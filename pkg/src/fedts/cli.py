"""Command line entry point: ``python -m fedts {run,sweep,accountant,gen}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .accountant import delta_default, epsilon_and_order
from .domain import build_grid
from .experiments import ConfigError, emit, load_config, run_experiment, sweep, sweep_csv
from .objectives import gen_heterogeneous, gen_synthetic, save_table

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("fedts")


def _cmd_run(args) -> int:
    config = load_config(args.config)
    outdir = Path(args.out or config.output_dir or "results")
    result = run_experiment(config, workers=args.workers)
    paths = emit(result, outdir)
    summary = result.summary()
    print(f"{config.algo}: simple regret at t={config.horizon} = "
          f"{summary['final_simple_regret']:.6f} +- {summary['final_simple_regret_se']:.6f}, "
          f"epsilon = {summary['epsilon']}")
    for kind, path in paths.items():
        print(f"  {kind}: {path}")
    return EXIT_OK


def _load_grid(path) -> dict:
    try:
        grid = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError([f"grid file is not valid JSON: {exc}"]) from exc
    if not isinstance(grid, dict) or not all(isinstance(v, list) and v for v in grid.values()):
        raise ConfigError(["grid must map parameter names to non-empty lists"])
    return grid


def _cmd_sweep(args) -> int:
    config = load_config(args.config)
    grid = _load_grid(args.grid)
    outdir = Path(args.out or config.output_dir or "results")
    results = sweep(config, grid, workers=args.workers)
    for params, res in results:
        tag = "_".join(f"{k}{v}" for k, v in sorted(params.items()))
        emit(res, outdir, prefix=f"{config.name or config.algo}_{tag}_")
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / f"{config.name or config.algo}_sweep.csv"
    path.write_text(sweep_csv(results))
    print(path.read_text(), end="")
    return EXIT_OK


def _cmd_accountant(args) -> int:
    if args.delta is None and args.n_agents is None:
        raise ConfigError(["one of --delta or --n-agents is required"])
    delta = args.delta if args.delta is not None else delta_default(args.n_agents)
    if not 0 < args.q <= 1 or args.z <= 0 or args.T < 0:
        raise ConfigError(["need 0 < q <= 1, z > 0 and T >= 0"])
    if not 0 < delta < 1:
        raise ConfigError([f"delta must lie in (0, 1), got {delta}"])
    eps, order = epsilon_and_order(args.q, args.z, args.T, delta, args.max_order)
    if args.json:
        print(json.dumps({"q": args.q, "z": args.z, "T": args.T, "delta": delta,
                          "epsilon": eps, "order": order}))
    else:
        print(f"epsilon = {eps:.4f} (delta = {delta:.6g}, order m = {order})")
    return EXIT_OK


def _cmd_gen(args) -> int:
    domain = build_grid(args.dims, None, args.points)
    if args.synthetic:
        suite = gen_synthetic(domain.points, args.n_agents, args.lengthscale, args.d, args.seed)
    else:
        suite = gen_heterogeneous(domain.points, args.n_agents, args.alpha, args.lengthscale,
                                  args.seed)
    save_table(suite, args.out)
    print(f"wrote {suite.n_agents} agents x {suite.grid_size} points to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedts", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--workers", type=int, help="thread count (default: FEDTS_WORKERS or 1)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="run a config over a parameter grid")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", required=True, help="JSON object, e.g. {\"q\": [0.15, 0.25]}")
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("accountant", help="privacy loss of T subsampled Gaussian rounds")
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--z", type=float, required=True)
    p.add_argument("--T", type=int, required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--delta", type=float)
    group.add_argument("--n-agents", type=int, help="use delta = n_agents^-1.1")
    p.add_argument("--max-order", type=int, default=64)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_accountant)

    p = sub.add_parser("gen", help="write an objective suite table")
    kind = p.add_mutually_exclusive_group(required=True)
    kind.add_argument("--synthetic", action="store_true")
    kind.add_argument("--hetero", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--n-agents", type=int, default=200)
    p.add_argument("--points", type=int, default=1000, help="grid points per dimension")
    p.add_argument("--dims", type=int, default=1)
    p.add_argument("--lengthscale", type=float, default=0.03)
    p.add_argument("--d", type=float, default=0.02, help="synthetic perturbation size")
    p.add_argument("--alpha", type=float, default=0.7, help="heterogeneity weight")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except (np.linalg.LinAlgError, ArithmeticError) as exc:
        # LinAlgError subclasses ValueError, so it must be caught first
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
