"""
run subcommand: solve (or sample) an experiment, verify it and write the
solution, the CSV rows and the JSON summary.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional

from ..common.exceptions import ArgumentError, ConfigError
from ..common.protocol import Response, format_float
from ..models.experiment import ExperimentConfig, load_config
from ..operators import OperatorSpec, from_config
from ..pde import Boundary, GridSpec, SolutionField, closed_form_from_config, exact_solution, solve
from ..storage import write_csv, write_frame_csv, write_solution, write_summary
from ..verify import CSV_COLUMNS, verify_solution
from .handlers import command, resolve_out, resolve_threads

logger = logging.getLogger(__name__)

SOLUTION_FILE = "solution.bin"
CSV_FILE = "verify.csv"
SUMMARY_FILE = "summary.json"


def prepare(experiment: ExperimentConfig, rank_tol: Optional[float] = None):
    """Grid, operator and closed form of an experiment; config errors become ConfigError."""
    if rank_tol is not None:
        experiment.verify.rank_tol = rank_tol
    try:
        grid = GridSpec.from_config(experiment.grid)
        closed = closed_form_from_config(experiment.initial, grid.n)
    except ArgumentError as e:
        raise ConfigError(f"invalid experiment: {e.message}", details=e.details) from e
    return grid, from_config(experiment.operator), closed


def verify_and_write(sol: SolutionField, spec: OperatorSpec, experiment: ExperimentConfig,
                     out: Path, threads: int, initial: Dict[str, Any]) -> Dict[str, Any]:
    """Verify a solution and write the CSV and JSON outputs requested by output.formats."""
    summary, rows = verify_solution(sol, spec, experiment.verify, threads)
    summary["initial"] = initial
    formats = experiment.output.formats
    if "csv" in formats:
        write_csv(out / CSV_FILE, CSV_COLUMNS, rows)
    if "json" in formats:
        write_summary(out / SUMMARY_FILE, summary)
    logger.info(f"Wrote {len(rows)} verification rows to {out}")
    return summary


def render(summary: Dict[str, Any]) -> str:
    """l(t) per frame and the empirical constant."""
    lines = ["frame  l(t)  constant"]
    for frame, level, constant in zip(summary["timeline_frames"], summary["l_per_frame"],
                                      summary["constancy_per_frame"]):
        lines.append(f"{frame:>5}  {level:>4}  {'yes' if constant else 'no'}")
    lines.append(f"constancy = {'true' if summary['constancy'] else 'false'}")
    lines.append(f"monotone = {'true' if summary['monotone'] else 'false'}")
    lines.append(f"sup_ratio = {format_float(summary['sup_ratio'])}")
    lines.append(f"max_case2_residual = {format_float(summary['max_case2_residual'])}")
    return "\n".join(lines)


@command("run")
def run(
    config: str,
    out: Optional[str] = None,
    threads: Optional[int] = None,
    rank_tol: Optional[float] = None,
    export_frame: Optional[int] = None,
) -> Response:
    """
    Produce a solution per the experiment and verify it.

    With ``initial.source = closed_form`` the closed form is sampled on every
    frame; otherwise the explicit solver runs from the closed form's initial
    frame, with exact or frozen boundary values. ``export_frame`` also writes
    that frame as frame_<m>.csv.
    """
    experiment = load_config(config)
    grid, spec, closed = prepare(experiment, rank_tol)
    threads = resolve_threads(threads)
    out_dir = resolve_out(out, experiment.output.dir)

    if experiment.initial.source == "closed_form":
        sol = exact_solution(closed, grid)
    else:
        sampler = closed.sampler(grid)
        boundary = Boundary.exact(sampler) if experiment.boundary.kind == "exact" else Boundary.frozen()
        sol = solve(spec, sampler(grid.t0), grid, boundary, threads)

    if "binary" in experiment.output.formats:
        write_solution(sol, out_dir / SOLUTION_FILE)
    if export_frame is not None:
        if not 0 <= export_frame < sol.count:
            raise ArgumentError(f"frame {export_frame} out of range [0, {sol.count - 1}]",
                                details={"frame": export_frame, "frames": sol.count})
        write_frame_csv(sol, export_frame, out_dir / f"frame_{export_frame}.csv")
    summary = verify_and_write(sol, spec, experiment, out_dir, threads, closed.describe())
    return Response(result=summary, text=render(summary))
