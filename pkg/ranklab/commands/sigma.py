"""
sigma subcommand: elementary symmetric functions of a vector or a matrix.
"""

from typing import List, Optional

import numpy as np

from ..common.exceptions import ArgumentError
from ..common.protocol import Response, format_float
from ..models.experiment import parse_matrix, parse_vector
from ..symm import (
    SymMatrix,
    eigenvalues,
    identity_residuals,
    sigma_matrix,
    sigma_minor,
    sigma as sigma_of,
    sigma_vector_minor,
)
from .handlers import command


def _drop(text: Optional[str]) -> Optional[List[int]]:
    """1-based ``--drop 1,2`` to 0-based indices."""
    if text is None:
        return None
    values = parse_vector(text)
    if any(v != int(v) or v < 1 for v in values):
        raise ArgumentError(f"--drop takes 1-based indices, got {text!r}", details={"drop": text})
    return [int(v) - 1 for v in values]


@command("sigma")
def sigma(
    k: int,
    lambda_: Optional[str] = None,
    matrix: Optional[str] = None,
    drop: Optional[str] = None,
    identities: bool = False,
) -> Response:
    """
    σ_k of an eigenvalue vector or a symmetric matrix.

    Args:
        k: order
        lambda_: vector literal ``1,2,3``
        matrix: matrix literal ``1,0;0,2``
        drop: 1-based deleted indices (one or two)
        identities: also report the residuals of the standard σ_k identities

    Returns:
        Response with the value printed at 15 significant digits
    """
    if (lambda_ is None) == (matrix is None):
        raise ArgumentError("give exactly one of --lambda or --matrix")
    drop_indices = _drop(drop)

    if lambda_ is not None:
        values = np.asarray(parse_vector(lambda_))
        if drop_indices is None:
            value = sigma_of(values, k)
        else:
            value = sigma_vector_minor(values, k, drop_indices)
    else:
        W = SymMatrix(np.asarray(parse_matrix(matrix)))
        values = eigenvalues(W)
        if drop_indices is None:
            value = sigma_matrix(W, k)
        else:
            value = sigma_minor(W, k, drop_indices)

    result = {"k": k, "sigma": value}
    lines = [format_float(value)]
    if drop_indices is not None:
        result["drop"] = [i + 1 for i in drop_indices]
    if identities:
        residuals = identity_residuals(values, k)
        result["identities"] = residuals
        lines += [f"{name} = {format_float(residual)}" for name, residual in residuals.items()]
    return Response(result=result, text="\n".join(lines))
