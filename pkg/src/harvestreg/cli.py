"""Command line entry point: ``harvestreg <command> [args] [flags]``."""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError
from .model import ModelValidationError


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML configuration file")
    common.add_argument("--out-dir", default=".", help="directory for CSV/JSON artifacts")
    common.add_argument("--seed", type=int, help="root seed (overrides [mc] seed)")
    common.add_argument("--paths", type=int, help="number of Monte Carlo paths (overrides [mc] n_paths)")
    common.add_argument("--grid-scale", type=float, default=1.0,
                        help="multiply n_space, n_time (and [mc] n_steps) by this factor")
    common.add_argument("--mode", choices=("eps", "exact"), default="eps", help="Hamiltonian used by the solver")
    common.add_argument("--jobs", type=int, default=1, help="worker cap for sweeps")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="harvestreg", description="Regulated harvesting: PDE solve, simulation, figures.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve the HJB equation and export the surface")
    sub.add_parser("simulate", parents=[common], help="simulate the optimal contract and export outcomes")
    fig = sub.add_parser("figure", parents=[common], help="data for one figure")
    fig.add_argument("number", type=int, choices=range(1, 8))
    sw = sub.add_parser("sweep", parents=[common], help="sensitivity sweep")
    sw.add_argument("kind", choices=("beta", "cost", "renewal"))
    sw.add_argument("--values", type=float, nargs="+", help="sweep values (defaults per kind)")
    sub.add_parser("verify", parents=[common], help="run the oracle suites")
    return p


def main(argv: list[str] | None = None) -> int:
    from .experiments import run

    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if ns.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if ns.jobs < 1:
        parser.error("--jobs must be >= 1")
    if ns.grid_scale <= 0:
        parser.error("--grid-scale must be positive")
    args = []
    if ns.command == "figure":
        args = [str(ns.number)]
    elif ns.command == "sweep":
        args = [ns.kind]
    try:
        return run(ns.config, ns.command, args, out_dir=ns.out_dir, seed=ns.seed, n_paths=ns.paths,
                   grid_scale=ns.grid_scale, mode=ns.mode, jobs=ns.jobs, values=getattr(ns, "values", None))
    except (ConfigError, ModelValidationError) as exc:
        print(f"harvestreg: config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"harvestreg: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
