"""
ranklab Command Line

Entry point: parses the subcommand, configures logging and dispatches a
Request to the registered handler. Results go to stdout, logs and errors to
stderr.

Exit codes: 0 success or pass, 1 verification failure or divergence,
2 usage or configuration error.
"""

import argparse
import logging
import sys
from typing import List, Optional

from .common.exceptions import DivergenceError, InconsistencyError, RankLabError
from .common.protocol import ErrorResponse, Request
from .commands import get_dispatcher
from .config import Settings

logger = logging.getLogger(__name__)


def _global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default, help="Seed for randomized procedures")
    parser.add_argument("--threads", type=int, default=default, help="Worker thread cap")
    parser.add_argument("--log-level", default=default,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"], help="Logging level")
    parser.add_argument("--out", default=default, help="Output directory (overrides RANKLAB_OUT)")
    parser.add_argument("--json", action="store_true", default=argparse.SUPPRESS if suppress else False,
                        help="Print the result as JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ranklab",
        description="Numerical laboratory for spacetime convexity and constant rank theorems",
    )
    _global_options(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("sigma", parents=[common], help="Elementary symmetric function σ_k")
    p.add_argument("--lambda", dest="lambda_", help="Eigenvalue vector, e.g. 1,2,3")
    p.add_argument("--matrix", help="Symmetric matrix, rows separated by ';'")
    p.add_argument("--k", type=int, required=True, help="Order k >= 0")
    p.add_argument("--drop", help="1-based deleted indices, e.g. 1 or 1,2")
    p.add_argument("--identities", action="store_true", help="Also print identity residuals")

    p = sub.add_parser("classify", parents=[common], help="CASE 1 / CASE 2 dichotomy of a spacetime Hessian")
    p.add_argument("--spatial", help="D²u, rows separated by ';'")
    p.add_argument("--mixed", help="Du_t vector")
    p.add_argument("--temporal", type=float, help="u_tt")
    p.add_argument("--matrix", help="Full spacetime Hessian instead of the blocks")
    p.add_argument("--tol", type=float, default=1e-8, help="Rank threshold")
    p.add_argument("--psd-tol", type=float, help="Allowed negative eigenvalue (defaults to --tol)")

    p = sub.add_parser("check-operator", parents=[common],
                       help="Sample ellipticity and the structure condition of an operator")
    p.add_argument("config", help="Experiment file")

    p = sub.add_parser("run", parents=[common], help="Solve an experiment and verify it")
    p.add_argument("config", help="Experiment file")
    p.add_argument("--rank-tol", type=float, help="Override verify.rank_tol")
    p.add_argument("--export-frame", type=int, help="Also write frame M as frame_M.csv")

    p = sub.add_parser("verify", parents=[common], help="Verify a stored solution")
    p.add_argument("solution", help="Solution file written by run")
    p.add_argument("config", help="Experiment file of the run")
    p.add_argument("--rank-tol", type=float, help="Override verify.rank_tol")

    p = sub.add_parser("report", parents=[common], help="Print a stored summary")
    p.add_argument("path", help="summary.json or an output directory")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    log_level = args.log_level or Settings().log_level
    logging.basicConfig(
        level=getattr(logging, log_level.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )
    logging.getLogger().setLevel(getattr(logging, log_level.upper(), logging.INFO))

    dispatcher = get_dispatcher()
    request = Request(method=args.command, params=dispatcher.options_for(args.command, vars(args)))
    logger.debug(f"Dispatching {request.method}")

    try:
        response = dispatcher.dispatch(request.method, request.params)
    except (DivergenceError, InconsistencyError) as e:
        logger.error(e.message)
        sys.stderr.write(ErrorResponse(e.code, e.message, e.details, exit_code=1).to_json())
        return 1
    except RankLabError as e:
        logger.error(e.message)
        error = ErrorResponse(e.code, e.message, e.details)
        sys.stderr.write(error.to_json())
        return error.exit_code

    if args.json:
        sys.stdout.write(response.to_json())
    elif response.text:
        sys.stdout.write(response.text + "\n")
    return response.exit_code


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
