#!/usr/bin/env python3
"""TV-ULoG blob detection with uncertainty

Subcommands:
- demo-1d / demo-2d: full pipeline on a simulated deconvolution experiment
- bench: solver comparison on one credible tube
- tube / solve / extract: one pipeline stage on persisted artifacts

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from core.config.settings import config  # noqa: E402
from core.exceptions import TvUlogError  # noqa: E402
from core.monitoring.logger import get_logger  # noqa: E402
from core.registry.solver_registry import available_solvers  # noqa: E402
from tasks.bench import cmd_bench  # noqa: E402
from tasks.demo import cmd_demo_1d, cmd_demo_2d  # noqa: E402
from tasks.stages import cmd_extract, cmd_solve, cmd_tube  # noqa: E402

logger = get_logger(__name__)


def _add_solver_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--solver", choices=available_solvers(), default=None,
                        help="Solver backend (default: $TVULOG_SOLVER or socp)")
    parser.add_argument("--mu", type=float, default=None,
                        help="Smoothing parameter (default: 1e-3 times the RMS tube width)")
    parser.add_argument("--tol", type=float, default=None,
                        help="Solver tolerance (default: 1e-8 socp, 1e-6 first-order)")
    parser.add_argument("--max-iters", type=int, default=None,
                        help="Iteration cap (default: 100 socp, 200000 first-order)")


def _add_experiment_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", default=None, help="Experiment JSON document")
    parser.add_argument("--alpha", type=float, default=None, help="Credibility parameter (default: 0.05)")
    parser.add_argument("--seed", type=int, default=None, help="Random seed (default: 1)")
    parser.add_argument("--out", default="out", help="Output directory (default: out)")


def _add_extraction_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--r", type=float, default=None, help="Relative region threshold in (0, 1) (default: 0.5)")
    parser.add_argument("--dark", action="store_true", default=None, help="Detect dark blobs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tvulog",
        description="Blob detection with uncertainty quantification via credible scale-space tubes",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    for name in ("demo-1d", "demo-2d"):
        demo = commands.add_parser(name, help=f"Run the {name[-2:].upper()} demo pipeline")
        _add_experiment_flags(demo)
        _add_solver_flags(demo)
        _add_extraction_flags(demo)

    bench = commands.add_parser("bench", help="Compare solver backends on one tube")
    _add_experiment_flags(bench)
    bench.add_argument("--tol", type=float, default=None, help="Solver tolerance")
    bench.add_argument("--max-iters", type=int, default=None, help="Iteration cap")

    tube = commands.add_parser("tube", help="Estimate the credible tube of a sample set")
    tube.add_argument("samples", help="TVSS sample file")
    _add_experiment_flags(tube)

    solve = commands.add_parser("solve", help="Solve the TV-ULoG problem in a tube")
    solve.add_argument("lower", help="TVUC lower bound")
    solve.add_argument("upper", help="TVUC upper bound")
    solve.add_argument("--out", default="out", help="Output directory (default: out)")
    _add_solver_flags(solve)

    extract = commands.add_parser("extract", help="Extract blob regions from a minimizer")
    extract.add_argument("minimizer", help="TVUC minimizer")
    extract.add_argument("--out", default="out", help="Output directory (default: out)")
    _add_extraction_flags(extract)
    return parser


def run(args: argparse.Namespace) -> int:
    """Dispatch a parsed command line."""
    if args.command in ("demo-1d", "demo-2d"):
        overrides = {
            "alpha": args.alpha, "seed": args.seed, "solver": args.solver, "mu": args.mu,
            "tol": args.tol, "max_iters": args.max_iters, "r": args.r, "dark": args.dark,
        }
        demo = cmd_demo_1d if args.command == "demo-1d" else cmd_demo_2d
        return demo(args.config, args.out, overrides)
    if args.command == "bench":
        overrides = {"alpha": args.alpha, "seed": args.seed, "tol": args.tol, "max_iters": args.max_iters}
        return cmd_bench(args.config, args.out, overrides)
    if args.command == "tube":
        return cmd_tube(args.samples, args.config, args.out, {"alpha": args.alpha, "seed": args.seed})
    if args.command == "solve":
        return cmd_solve(args.lower, args.upper, args.out, args.solver or config.solver.default_solver,
                         mu=args.mu, tol=args.tol, max_iters=args.max_iters)
    if args.command == "extract":
        return cmd_extract(args.minimizer, args.out, 0.5 if args.r is None else args.r, bool(args.dark))
    raise AssertionError(f"unhandled command {args.command}")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "r", None) is not None and not 0 < args.r < 1:
        parser.error("--r must lie in (0, 1)")

    try:
        return run(args)
    except TvUlogError as e:
        logger.error(f"{args.command} failed", error=e.message, detail=e.detail)
        print(f"tvulog {args.command}: {e.message}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        print("Interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
