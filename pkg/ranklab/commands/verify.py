"""
verify subcommand: re-run verification on a stored solution.
"""

from typing import Optional

from ..common.protocol import Response
from ..models.experiment import load_config
from ..storage import read_solution
from .handlers import command, resolve_out, resolve_threads
from .run import prepare, render, verify_and_write


@command("verify")
def verify(
    solution: str,
    config: str,
    out: Optional[str] = None,
    threads: Optional[int] = None,
    rank_tol: Optional[float] = None,
) -> Response:
    """
    Verify a solution file written by ``run`` against its experiment.

    The header must match the experiment grid; the CSV and JSON outputs are
    the ones ``run`` writes for the same inputs.
    """
    experiment = load_config(config)
    grid, spec, closed = prepare(experiment, rank_tol)
    sol = read_solution(solution, grid)
    summary = verify_and_write(sol, spec, experiment, resolve_out(out, experiment.output.dir),
                               resolve_threads(threads), closed.describe())
    return Response(result=summary, text=render(summary))
