"""
report subcommand: print a stored JSON summary as a table.
"""

from pathlib import Path

from ..common.protocol import Response, format_float
from ..storage import read_summary
from .handlers import command
from .run import SUMMARY_FILE


def _cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, list) and len(value) > 8:
        return f"[{', '.join(_cell(v) for v in value[:8])}, ...] ({len(value)} entries)"
    if isinstance(value, list):
        return f"[{', '.join(_cell(v) for v in value)}]"
    if value is None:
        return "-"
    return str(value)


def _rows(data: dict, prefix: str = ""):
    for key in sorted(data):
        value = data[key]
        if isinstance(value, dict):
            yield from _rows(value, f"{prefix}{key}.")
        else:
            yield f"{prefix}{key}", _cell(value)


@command("report")
def report(path: str) -> Response:
    """
    Show a summary written by ``run``, ``verify`` or ``check-operator``.

    Args:
        path: a summary JSON file or an output directory holding summary.json
    """
    target = Path(path)
    if target.is_dir():
        target = target / SUMMARY_FILE
    summary = read_summary(target)
    rows = list(_rows(summary))
    width = max((len(key) for key, _ in rows), default=0)
    text = "\n".join(f"{key.ljust(width)}  {value}" for key, value in rows)
    return Response(result=summary, text=text)
