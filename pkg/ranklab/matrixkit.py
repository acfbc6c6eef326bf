"""
Spacetime Hessian Toolkit

Assembly of the (n+1)x(n+1) spacetime Hessian [[D²u, Du_tᵀ], [Du_t, u_tt]],
spectral diagonalization, numerical rank, the CASE 1 / CASE 2 rank dichotomy,
the bordered σ expansion, the regularized-inverse lower bound and the
quarter-power gradient ratio of a PSD matrix field.

Indices are 0-based; the temporal coordinate is the last one (index n).
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike
from scipy import linalg

from .common.exceptions import ArgumentError, InconsistencyError, NumericError, PreconditionError
from .symm import (
    MatrixLike,
    Spectrum,
    SymMatrix,
    as_sym,
    eigenvalues,
    sigma,
    sigma_all,
)

logger = logging.getLogger(__name__)

DEFAULT_RANK_TOL = 1e-8
ORTHOGONALITY_TOL = 1e-12
DENOMINATOR_FLOOR = 1e-14


@dataclass(frozen=True)
class SpacetimeHessian:
    """
    Spacetime Hessian of u at one point.

    Attributes:
        spatial: D²u, a SymMatrix of dimension n
        mixed: Du_t, read-only vector of length n
        temporal: u_tt
    """
    spatial: SymMatrix
    mixed: np.ndarray
    temporal: float

    def __post_init__(self):
        spatial = as_sym(self.spatial)
        mixed = np.asarray(self.mixed, dtype=float).reshape(-1)
        if mixed.size != spatial.dim:
            raise ArgumentError(
                f"mixed vector has length {mixed.size}, expected {spatial.dim}",
                details={"spatial_dim": spatial.dim, "mixed_len": int(mixed.size)},
            )
        mixed = mixed.copy()
        mixed.setflags(write=False)
        object.__setattr__(self, "spatial", spatial)
        object.__setattr__(self, "mixed", mixed)
        object.__setattr__(self, "temporal", float(self.temporal))

    @classmethod
    def from_matrix(cls, matrix: ArrayLike) -> "SpacetimeHessian":
        """Split an (n+1)x(n+1) symmetric array into its blocks."""
        W = as_sym(matrix)
        n = W.dim - 1
        if n < 1:
            raise ArgumentError("spacetime Hessian needs dimension >= 2", details={"dim": W.dim})
        return cls(SymMatrix(W.entries[:n, :n]), W.entries[n, :n], W.entries[n, n])

    @property
    def n(self) -> int:
        return self.spatial.dim

    @property
    def matrix(self) -> np.ndarray:
        """The materialized block matrix."""
        n = self.n
        full = np.empty((n + 1, n + 1))
        full[:n, :n] = self.spatial.entries
        full[n, :n] = self.mixed
        full[:n, n] = self.mixed
        full[n, n] = self.temporal
        return full

    def as_sym(self) -> SymMatrix:
        return SymMatrix(self.matrix)

    def psd_defect(self) -> float:
        return psd_defect(self.as_sym())


@dataclass(frozen=True)
class Rotation:
    """
    Orthogonal change of coordinates P.

    Attributes:
        P: read-only (dim x dim) orthogonal matrix
        good_count: set for structured rotations; coordinates good_count..dim-2
            are then fixed to the identity
    """
    P: np.ndarray
    good_count: Optional[int] = None

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ArgumentError("Rotation needs a square matrix", details={"shape": list(P.shape)})
        defect = float(np.max(np.abs(P.T @ P - np.eye(P.shape[0]))))
        if defect > ORTHOGONALITY_TOL:
            raise NumericError("Rotation is not orthogonal", details={"defect": defect})
        P.setflags(write=False)
        object.__setattr__(self, "P", P)

    @property
    def dim(self) -> int:
        return int(self.P.shape[0])

    @property
    def structured(self) -> bool:
        return self.good_count is not None


class Case(str, Enum):
    CASE1 = "CASE1"
    CASE2 = "CASE2"


@dataclass(frozen=True)
class CaseReport:
    """
    Result of the rank dichotomy at one point.

    Attributes:
        total_rank: l, numerical rank of the full spacetime Hessian
        spatial_rank: k, numerical rank of D²u
        case_tag: CASE1 (k = l - 1) or CASE2 (k = l)
        gap: u_tt - Σ_{i∈G} u_it²/u_ii over the spatial good set G
        residual: |gap| in CASE2, 0.0 in CASE1
    """
    total_rank: int
    spatial_rank: int
    case_tag: Case
    gap: float
    residual: float

    def to_dict(self) -> dict:
        return {
            "l": self.total_rank,
            "k": self.spatial_rank,
            "case": self.case_tag.value,
            "gap": self.gap,
            "residual": self.residual,
        }


HessianLike = Union[SpacetimeHessian, MatrixLike]


def _sym(W: HessianLike) -> SymMatrix:
    if isinstance(W, SpacetimeHessian):
        return W.as_sym()
    return as_sym(W)


def assemble(spatial: MatrixLike, mixed: ArrayLike, temporal: float) -> SpacetimeHessian:
    """Place D²u, Du_t and u_tt into a spacetime Hessian."""
    return SpacetimeHessian(as_sym(spatial), mixed, temporal)


def psd_defect(W: HessianLike) -> float:
    """max(0, -λ_min(W))."""
    return max(0.0, -float(eigenvalues(_sym(W))[0]))


def spectral(W: MatrixLike) -> Tuple[Spectrum, Rotation]:
    """
    Diagonalize W as PᵀWP = diag(λ) with λ descending.

    Ties keep their original index order. Exactly diagonal input is permuted
    rather than eigensolved, so its spectrum is exact.
    """
    W = as_sym(W)
    off = W.entries - np.diag(np.diag(W.entries))
    if not np.any(off):
        values = np.diag(W.entries).copy()
        vectors = np.eye(W.dim)
    else:
        try:
            values, vectors = linalg.eigh(W.entries)
        except linalg.LinAlgError as e:
            raise NumericError(f"Eigensolver failed: {e}", details={"dim": W.dim}) from e
    order = np.argsort(-values, kind="stable")
    return Spectrum(values[order]), Rotation(vectors[:, order])


def rotate(W: HessianLike, P: Union[Rotation, ArrayLike]) -> SymMatrix:
    """PᵀWP, symmetrized."""
    P = P.P if isinstance(P, Rotation) else np.asarray(P, dtype=float)
    W = _sym(W)
    if P.shape != W.entries.shape:
        raise ArgumentError("rotation and matrix dimensions differ",
                            details={"rotation": list(P.shape), "matrix": list(W.entries.shape)})
    return SymMatrix.symmetrized(P.T @ W.entries @ P)


def numerical_rank(W: HessianLike, tol: float = DEFAULT_RANK_TOL) -> int:
    """Count of eigenvalues λ_i > tol * max(1, λ_max)."""
    if tol <= 0:
        raise ArgumentError(f"tol must be positive, got {tol}", details={"tol": tol})
    values = eigenvalues(_sym(W))
    threshold = tol * max(1.0, float(values[-1]))
    return int(np.count_nonzero(values > threshold))


def diagonalize_spatial(W: SpacetimeHessian) -> Tuple[SpacetimeHessian, Rotation]:
    """
    Rotate x only, so D²u becomes diag(λ) descending.

    Du_t is rotated with it and u_tt is unchanged. The returned Rotation acts
    on the full (n+1) space.
    """
    spectrum, rotation = spectral(W.spatial)
    n = W.n
    full = np.eye(n + 1)
    full[:n, :n] = rotation.P
    rotated = SpacetimeHessian(SymMatrix.diag(spectrum.values), rotation.P.T @ W.mixed, W.temporal)
    return rotated, Rotation(full)


def schur_gap(W: SpacetimeHessian, good: Sequence[int]) -> float:
    """u_tt - Σ_{i∈good} u_it²/u_ii, read off the diagonal of D²u."""
    d = W.spatial.diagonal()
    good = list(good)
    return float(W.temporal - np.sum(W.mixed[good] ** 2 / d[good]))


def _good_set(d: np.ndarray, threshold: float) -> np.ndarray:
    return np.flatnonzero(d > threshold)


def classify_case(
    W: SpacetimeHessian,
    tol: float = DEFAULT_RANK_TOL,
    psd_tol: Optional[float] = None,
) -> CaseReport:
    """
    Classify a PSD spacetime Hessian into the rank dichotomy.

    With l the total rank and k the rank of D²u, exactly one of

        CASE1: k = l - 1 and u_tt - Σ_{i∈G} u_it²/u_ii > 0
        CASE2: k = l     and u_tt - Σ_{i∈G} u_it²/u_ii = 0

    holds. The spatial block is diagonalized before the gap is read. Both ranks
    use the same threshold tol * max(1, λ_max) of the full matrix.

    Args:
        W: spacetime Hessian
        tol: rank threshold, relative to max(1, λ_max)
        psd_tol: allowed negative eigenvalue, relative to max(1, λ_max);
            defaults to tol

    Raises:
        PreconditionError: W is not PSD within psd_tol
        InconsistencyError: k is neither l - 1 nor l, or a CASE2 gap exceeds
            psd_tol * max(1, λ_max)
    """
    psd_tol = tol if psd_tol is None else psd_tol
    values = eigenvalues(W.as_sym())
    scale = max(1.0, float(values[-1]))
    if -values[0] > psd_tol * scale:
        raise PreconditionError(
            "Spacetime Hessian is not positive semidefinite",
            details={"lambda_min": float(values[0]), "psd_tol": psd_tol},
        )
    threshold = tol * scale
    total_rank = int(np.count_nonzero(values > threshold))

    rotated, _ = diagonalize_spatial(W)
    d = rotated.spatial.diagonal()
    good = _good_set(d, threshold)
    spatial_rank = int(good.size)
    gap = schur_gap(rotated, good)

    if spatial_rank == total_rank - 1:
        return CaseReport(total_rank, spatial_rank, Case.CASE1, gap, 0.0)
    if spatial_rank == total_rank:
        if abs(gap) > psd_tol * scale:
            raise InconsistencyError(
                "Schur gap does not vanish although the ranks agree",
                details={"l": total_rank, "k": spatial_rank, "gap": gap, "tol": tol, "psd_tol": psd_tol},
            )
        return CaseReport(total_rank, spatial_rank, Case.CASE2, gap, abs(gap))
    raise InconsistencyError(
        f"Spatial rank {spatial_rank} incompatible with total rank {total_rank}",
        details={"l": total_rank, "k": spatial_rank, "tol": tol},
    )


def structured_rotation(
    W: SpacetimeHessian,
    good_count: int,
    tol: float = 1e-10,
) -> Rotation:
    """
    Rotation mixing only the good coordinates 0..l-1 and t.

    The (l+1)x(l+1) block on those coordinates is eigendecomposed with the l
    largest eigenvalues placed on the good coordinates and the smallest on t.
    Bad coordinates l..n-1 keep identity rows and columns.

    Raises:
        PreconditionError: a bad row of W does not vanish within tol * max(1, ‖W‖)
    """
    n = W.n
    if not 0 <= good_count <= n:
        raise ArgumentError(f"good_count must lie in [0, {n}]", details={"good_count": good_count})
    if not W.spatial.is_diagonal():
        raise PreconditionError("D²u must be diagonal; rotate with diagonalize_spatial first",
                                details={"spatial": W.spatial.entries.tolist()})
    full = W.matrix
    bound = tol * max(1.0, float(np.max(np.abs(full))))
    bad = list(range(good_count, n))
    if bad:
        block = np.abs(full[bad, :])
        i, j = np.unravel_index(int(np.argmax(block)), block.shape)
        if block[i, j] > bound:
            raise PreconditionError(
                "Bad rows of the spacetime Hessian do not vanish",
                details={"entry": [bad[i], int(j)], "value": float(full[bad[i], j])},
            )
    index = list(range(good_count)) + [n]
    sub = full[np.ix_(index, index)]
    _, sub_rotation = spectral(SymMatrix.symmetrized(sub))
    P = np.eye(n + 1)
    P[np.ix_(index, index)] = sub_rotation.P
    return Rotation(P, good_count=good_count)


def bordered_sigma(M: MatrixLike, v: ArrayLike, s: float, m: int) -> float:
    """
    σ_{m+1} of the bordered matrix [[M, v], [vᵀ, s]] for diagonal M:

        σ_{m+1}(M) + s σ_m(M) - Σ_i v_i² σ_{m-1}(M|i)
    """
    M = as_sym(M)
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size != M.dim:
        raise ArgumentError("border vector and matrix dimensions differ",
                            details={"dim": M.dim, "len": int(v.size)})
    if m < 0:
        raise ArgumentError(f"m must be non-negative, got {m}", details={"m": m})
    if not M.is_diagonal():
        raise PreconditionError("bordered expansion needs a diagonal block")
    d = M.diagonal()
    border = 0.0
    if m >= 1:
        minors = [sigma(np.delete(d, i), m - 1) for i in range(M.dim)]
        border = float(np.dot(v ** 2, minors))
    return sigma(d, m + 1) + s * sigma(d, m) - border


def regularized_gap(W: SpacetimeHessian, good_count: int, eps: float) -> float:
    """C = u_tt + eps - Σ_{i<l} u_it²/(u_ii + eps); positive whenever W is PSD."""
    d = W.spatial.diagonal()[:good_count]
    return float(W.temporal + eps - np.sum(W.mixed[:good_count] ** 2 / (d + eps)))


def inverse_lower_bound_check(W: SpacetimeHessian, good_count: int, eps: float) -> float:
    """
    λ_min of (W + eps·I)⁻¹ - diag(1/(u_ii + eps) for i < l, 0 elsewhere).

    W must be in spatially diagonal form (see diagonalize_spatial). The
    inverse is formed densely from a symmetric eigensolve; a return value
    >= -1e-10 certifies the lower bound at this eps.

    Raises:
        ArgumentError: eps <= 0 or good_count outside [0, n]
        PreconditionError: D²u is not diagonal, or a good entry is not positive
    """
    if eps <= 0:
        raise ArgumentError(f"eps must be positive, got {eps}", details={"eps": eps})
    n = W.n
    if not 0 <= good_count <= n:
        raise ArgumentError(f"good_count must lie in [0, {n}]", details={"good_count": good_count})
    if not W.spatial.is_diagonal():
        raise PreconditionError("D²u must be diagonal; rotate with diagonalize_spatial first",
                                details={"spatial": W.spatial.entries.tolist()})
    d = W.spatial.diagonal()
    if np.any(d[:good_count] <= 0):
        raise PreconditionError("good diagonal entries must be positive",
                                details={"diagonal": d[:good_count].tolist()})

    regularized = W.matrix + eps * np.eye(n + 1)
    try:
        values, vectors = linalg.eigh(regularized)
    except linalg.LinAlgError as e:
        raise NumericError(f"Eigensolver failed: {e}") from e
    if values[0] <= 0:
        raise NumericError("Regularized matrix is singular",
                           details={"lambda_min": float(values[0]), "eps": eps})
    inverse = (vectors / values) @ vectors.T
    inverse = 0.5 * (inverse + inverse.T)

    lower = np.zeros(n + 1)
    lower[:good_count] = 1.0 / (d[:good_count] + eps)
    return float(linalg.eigvalsh(inverse - np.diag(lower))[0])


def quarter_ratio(
    field: ArrayLike,
    spacing: Union[float, Sequence[float]],
    margin: int = 1,
    psd_tol: float = 1e-8,
) -> float:
    """
    sup |∇W_ij| / (W_ii W_jj)^{1/4} over interior points and index pairs.

    Args:
        field: samples of shape (N_1, ..., N_g, d, d)
        spacing: grid step per axis (scalar for a single axis)
        margin: interior margin in grid points, >= 1
        psd_tol: allowed negative eigenvalue, relative to max(1, λ_max)

    Returns:
        the empirical constant of the quarter-power gradient bound

    Raises:
        PreconditionError: a sample is not PSD within psd_tol
    """
    field = np.asarray(field, dtype=float)
    axes = field.ndim - 2
    if axes < 1 or field.shape[-1] != field.shape[-2]:
        raise ArgumentError("field must have shape (*grid, d, d)", details={"shape": list(field.shape)})
    if margin < 1:
        raise ArgumentError(f"margin must be >= 1, got {margin}", details={"margin": margin})
    spacing = np.broadcast_to(np.asarray(spacing, dtype=float), (axes,))
    if any(n <= 2 * margin for n in field.shape[:axes]):
        raise ArgumentError("grid too small for the requested margin",
                            details={"shape": list(field.shape[:axes]), "margin": margin})

    sym = 0.5 * (field + np.swapaxes(field, -1, -2))
    values = np.linalg.eigvalsh(sym)
    lam_min, lam_max = values[..., 0], values[..., -1]
    violation = -lam_min - psd_tol * np.maximum(1.0, lam_max)
    if np.any(violation > 0):
        where = np.unravel_index(int(np.argmax(violation)), violation.shape)
        raise PreconditionError(
            "Matrix field is not positive semidefinite",
            details={"point": [int(i) for i in where], "lambda_min": float(lam_min[where])},
        )

    gradients = np.gradient(field, *spacing, axis=tuple(range(axes)))
    if axes == 1:
        gradients = [gradients]
    norm = np.sqrt(sum(g ** 2 for g in gradients))

    diag = np.clip(np.diagonal(field, axis1=-2, axis2=-1), 0.0, None)
    denominator = np.maximum((diag[..., :, None] * diag[..., None, :]) ** 0.25, DENOMINATOR_FLOOR)
    ratio = norm / denominator

    interior = tuple(slice(margin, n - margin) for n in field.shape[:axes])
    return float(np.max(ratio[interior]))


def sigma_field(field: ArrayLike, k_max: int) -> np.ndarray:
    """σ_0..σ_kmax of every matrix in a stacked field (..., d, d)."""
    field = np.asarray(field, dtype=float)
    values = np.linalg.eigvalsh(0.5 * (field + np.swapaxes(field, -1, -2)))
    return sigma_all(values, k_max)
