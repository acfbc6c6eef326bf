"""
classify subcommand: the CASE 1 / CASE 2 dichotomy for one spacetime Hessian.
"""

from typing import Optional

import numpy as np

from ..common.exceptions import ArgumentError
from ..common.protocol import Response, format_float
from ..matrixkit import SpacetimeHessian, assemble, classify_case, psd_defect
from ..models.experiment import parse_matrix, parse_vector
from ..symm import SymMatrix
from .handlers import command


@command("classify")
def classify(
    spatial: Optional[str] = None,
    mixed: Optional[str] = None,
    temporal: Optional[float] = None,
    matrix: Optional[str] = None,
    tol: float = 1e-8,
    psd_tol: Optional[float] = None,
) -> Response:
    """
    Classify the spacetime Hessian given by blocks or as a full matrix.

    Args:
        spatial: D²u literal ``1,0;0,0``
        mixed: Du_t literal ``0,0``
        temporal: u_tt
        matrix: full (n+1)x(n+1) literal instead of the blocks
        tol: rank threshold
        psd_tol: allowed negative eigenvalue, defaults to tol
    """
    if matrix is not None:
        W = SpacetimeHessian.from_matrix(SymMatrix(np.asarray(parse_matrix(matrix))))
    elif spatial is not None and temporal is not None:
        D2 = SymMatrix(np.asarray(parse_matrix(spatial)))
        Dt = parse_vector(mixed) if mixed is not None else [0.0] * D2.dim
        W = assemble(D2, Dt, temporal)
    else:
        raise ArgumentError("give --matrix, or --spatial and --temporal (with optional --mixed)")

    report = classify_case(W, tol, psd_tol)
    result = {**report.to_dict(), "psd_defect": psd_defect(W)}
    lines = [
        f"l = {report.total_rank}",
        f"k = {report.spatial_rank}",
        f"case = {report.case_tag.value}",
        f"gap = {format_float(report.gap)}",
        f"residual = {format_float(report.residual)}",
    ]
    return Response(result=result, text="\n".join(lines))
