"""
check-operator subcommand: ellipticity and the structure condition of the
operator declared in an experiment file.
"""

import logging
from typing import Optional

from ..common.protocol import Response, format_float
from ..models.experiment import load_config
from ..operators import check_structure_condition, from_config
from ..storage import write_summary
from .handlers import command, resolve_out, resolve_seed, resolve_threads

logger = logging.getLogger(__name__)

VERDICT_FILE = "check_operator.json"


def _status(passed: bool) -> str:
    return "pass" if passed else "fail"


@command("check-operator")
def check_operator(
    config: str,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
    out: Optional[str] = None,
) -> Response:
    """
    Sample the operator's ellipticity and structure condition.

    Writes the verdict as JSON to the output directory. Exit code 0 when both
    hold on every sample, 1 otherwise.
    """
    experiment = load_config(config)
    spec = from_config(experiment.operator)
    seed = resolve_seed(seed, experiment.check.seed)
    verdict = check_structure_condition(spec, experiment.check, experiment.grid.n, seed=seed,
                                        threads=resolve_threads(threads))
    passed = verdict.passed and verdict.elliptic
    result = {"operator": spec.term(), "passed": passed, **verdict.to_dict()}

    path = write_summary(resolve_out(out, experiment.output.dir) / VERDICT_FILE, result)
    logger.info(f"Wrote verdict to {path}")

    lines = [
        f"operator: {spec.term()}",
        f"ellipticity: {_status(verdict.elliptic)} (min eigenvalue of F_A {format_float(verdict.min_ellipticity)})",
        f"structure condition: {_status(verdict.passed)}",
        f"  qstar sampling: {_status(verdict.test1.passed)} (min {format_float(verdict.test1.min_value)}, "
        f"{verdict.test1.evaluations} directions)",
        f"  chord convexity: {_status(verdict.test2.passed)} (min {format_float(verdict.test2.min_value)}, "
        f"{verdict.test2.evaluations} chords)",
        f"fixed-t chord convexity: {_status(verdict.test3.passed)} (min {format_float(verdict.test3.min_value)}, "
        f"{verdict.test3.evaluations} chords)",
        f"samples: {verdict.samples} (seed {verdict.seed})",
    ]
    if verdict.witness is not None:
        witness = verdict.witness
        lines.append(f"witness: {witness['test']} value {format_float(witness['value'])}")
        if "direction" in witness:
            direction = witness["direction"]
            lines.append(f"  direction Y={format_float(direction['Y'])} D={format_float(direction['D'])}")
    if not verdict.agreement:
        lines.append("warning: the two sampled tests disagree")
    if verdict.test3.witness is not None and verdict.witness is None:
        lines.append(f"fixed-t witness: value {format_float(verdict.test3.witness['value'])}")
    lines.append(verdict.note)
    return Response(result=result, exit_code=0 if passed else 1,
                    status="success" if passed else "fail", text="\n".join(lines))
