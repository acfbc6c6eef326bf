"""
Solution and Report Storage

Binary layout of a SolutionField (little endian):

    magic   4 bytes  b"RLAB"
    version uint16
    n       uint16
    dims    n x uint32     points per axis
    frames  uint32
    dt, t0  2 x float64
    data    frames x prod(dims) float64, row-major

A sidecar ``.meta`` text file next to the binary records the box and the
horizon as ``key = value`` lines. Reports are CSV and canonical JSON.
"""

import csv
import json
import logging
import math
import struct
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from .common.exceptions import FormatError
from .common.protocol import dumps, format_float
from .pde import GridSpec, SolutionField

logger = logging.getLogger(__name__)

MAGIC = b"RLAB"
VERSION = 1
_PREFIX = struct.Struct("<4sHH")
_TIMES = struct.Struct("<dd")

PathLike = Union[str, Path]


def meta_path(path: PathLike) -> Path:
    return Path(path).with_suffix(".meta")


def _header(grid: GridSpec, frames: int) -> bytes:
    return (
        _PREFIX.pack(MAGIC, VERSION, grid.n)
        + struct.pack(f"<{grid.n}I", *grid.points)
        + struct.pack("<I", frames)
        + _TIMES.pack(grid.dt, grid.t0)
    )


def write_solution(sol: SolutionField, path: PathLike) -> Path:
    """Write the binary solution file and its sidecar; returns the binary path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(_header(sol.grid, sol.count))
        f.write(np.ascontiguousarray(sol.frames, dtype="<f8").tobytes())
    grid = sol.grid
    lines = [
        f"n = {grid.n}",
        f"lo = {','.join(format_float(v) for v in grid.lo)}",
        f"hi = {','.join(format_float(v) for v in grid.hi)}",
        f"points = {','.join(str(p) for p in grid.points)}",
        f"dt = {format_float(grid.dt)}",
        f"t0 = {format_float(grid.t0)}",
        f"t1 = {format_float(grid.t1)}",
        f"frames = {sol.count}",
    ]
    meta_path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info(f"Wrote solution ({sol.count} frames) to {path}")
    return path


def read_meta(path: PathLike) -> Dict[str, str]:
    meta = meta_path(path)
    try:
        text = meta.read_text(encoding="utf-8")
    except OSError as e:
        raise FormatError(f"cannot read sidecar {meta}: {e.strerror}", offset=0,
                          details={"path": str(meta)}) from e
    entries = {}
    for line in text.splitlines():
        key, sep, value = line.partition("=")
        if sep:
            entries[key.strip()] = value.strip()
    return entries


def _grid_from_meta(path: Path, n: int, points: Sequence[int], dt: float, t0: float) -> GridSpec:
    meta = read_meta(path)
    try:
        lo = [float(v) for v in meta["lo"].split(",")]
        hi = [float(v) for v in meta["hi"].split(",")]
        t1 = float(meta["t1"])
    except (KeyError, ValueError) as e:
        raise FormatError(f"malformed sidecar {meta_path(path)}", offset=0, details={"path": str(path)}) from e
    return GridSpec(n, tuple(lo), tuple(hi), tuple(points), dt, t0, t1)


def read_solution(path: PathLike, grid: Optional[GridSpec] = None) -> SolutionField:
    """
    Read a binary solution file.

    Without ``grid`` the box and horizon come from the sidecar; with it the
    header must match the grid.

    Raises:
        FormatError: bad magic or version, truncated data, or a grid mismatch;
            details carry the byte offset
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise FormatError(f"cannot read solution {path}: {e.strerror}", offset=0,
                          details={"path": str(path)}) from e

    def need(offset: int, size: int, what: str) -> None:
        if len(data) < offset + size:
            raise FormatError(
                f"truncated solution file {path}: {what} needs bytes {offset}..{offset + size}, "
                f"file has {len(data)}",
                offset=len(data),
                details={"path": str(path), "expected": offset + size},
            )

    need(0, _PREFIX.size, "header")
    magic, version, n = _PREFIX.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"{path} is not a solution file", offset=0, details={"magic": magic.hex()})
    if version != VERSION:
        raise FormatError(f"unsupported solution version {version}", offset=4, details={"version": version})
    offset = _PREFIX.size
    need(offset, 4 * n + 4 + _TIMES.size, "header")
    points = struct.unpack_from(f"<{n}I", data, offset)
    offset += 4 * n
    (count,) = struct.unpack_from("<I", data, offset)
    offset += 4
    dt, t0 = _TIMES.unpack_from(data, offset)
    offset += _TIMES.size

    size = count * int(np.prod(points)) * 8
    need(offset, size, "frame data")
    if len(data) != offset + size:
        raise FormatError(f"trailing bytes in solution file {path}", offset=offset + size,
                          details={"path": str(path), "size": len(data)})

    if grid is None:
        grid = _grid_from_meta(path, n, points, dt, t0)
    expected = {"n": grid.n, "points": list(grid.points), "frames": grid.frames}
    found = {"n": n, "points": list(points), "frames": count}
    if expected != found or not math.isclose(dt, grid.dt, rel_tol=1e-12) or not math.isclose(
            t0, grid.t0, rel_tol=1e-12, abs_tol=1e-15):
        raise FormatError(
            f"solution file {path} does not match the grid",
            offset=0,
            details={"expected": {**expected, "dt": grid.dt, "t0": grid.t0},
                     "found": {**found, "dt": dt, "t0": t0}},
        )
    frames = np.frombuffer(data, dtype="<f8", count=count * int(np.prod(points)), offset=offset)
    return SolutionField(grid, frames.reshape((count,) + tuple(points)).astype(float))


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value) if math.isfinite(float(value)) else str(float(value))
    return str(value)


def write_csv(path: PathLike, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write rows with 15 significant digits per float."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def read_csv(path: PathLike) -> List[Dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def write_frame_csv(sol: SolutionField, m: int, path: PathLike) -> Path:
    """Export one frame as columns x1..xn, u."""
    coordinates = sol.grid.coordinates.reshape(-1, sol.grid.n)
    values = sol.frames[m].reshape(-1)
    columns = [f"x{i + 1}" for i in range(sol.grid.n)] + ["u"]
    rows = (list(x) + [u] for x, u in zip(coordinates, values))
    return write_csv(path, columns, rows)


def write_summary(path: PathLike, summary: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(summary) + "\n", encoding="utf-8")
    return path


def read_summary(path: PathLike) -> Dict[str, Any]:
    """
    Raises:
        FormatError: unreadable or invalid JSON
    """
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise FormatError(f"cannot read summary {path}: {e.strerror}", offset=0,
                          details={"path": str(path)}) from e
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid summary {path}: {e.msg}", offset=e.pos, details={"path": str(path)}) from e
