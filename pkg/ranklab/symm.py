"""
Elementary Symmetric Functions

σ_k calculus on eigenvalue vectors and symmetric matrices: the prefix-product
recurrence, deleted-index minors σ_k(W|i), σ_k(W|ij) and the diagonal
derivative formulas

    ∂σ_m/∂W_ij        = σ_{m-1}(W|i)      (i = j, W diagonal)
    ∂²σ_m/∂W_ij∂W_kl  = ±σ_{m-2}(W|ik)    (W diagonal)

Indices in this module are 0-based.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike
from scipy import linalg

from .common.exceptions import ArgumentError, NumericError, PreconditionError

logger = logging.getLogger(__name__)

# Off-diagonal mass allowed in a "diagonal" matrix, relative to its largest diagonal entry
DIAGONAL_RTOL = 1e-14


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.array(values, dtype=float)
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class Spectrum:
    """
    Ordered eigenvalue vector λ = (λ_1, ..., λ_n), descending.

    Attributes:
        values: read-only float array, sorted descending on construction
    """
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise ArgumentError("Spectrum needs a non-empty 1-D vector",
                                details={"shape": list(values.shape)})
        object.__setattr__(self, "values", _frozen(np.sort(values)[::-1]))

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.n


@dataclass(frozen=True)
class SymMatrix:
    """
    Symmetric matrix W with entry(i, j) == entry(j, i) exactly as stored.

    Attributes:
        entries: read-only (dim x dim) float array
    """
    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1] or entries.shape[0] < 1:
            raise ArgumentError("SymMatrix needs a non-empty square array",
                                details={"shape": list(entries.shape)})
        if not np.array_equal(entries, entries.T):
            raise ArgumentError("SymMatrix entries are not symmetric",
                                details={"max_asymmetry": float(np.max(np.abs(entries - entries.T)))})
        object.__setattr__(self, "entries", _frozen(entries))

    @classmethod
    def symmetrized(cls, array: ArrayLike) -> "SymMatrix":
        """Build from an almost-symmetric array by averaging with its transpose."""
        array = np.asarray(array, dtype=float)
        return cls(0.5 * (array + array.T))

    @classmethod
    def diag(cls, values: ArrayLike) -> "SymMatrix":
        return cls(np.diag(np.asarray(values, dtype=float)))

    @classmethod
    def identity(cls, dim: int) -> "SymMatrix":
        return cls(np.eye(dim))

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    def diagonal(self) -> np.ndarray:
        return np.diag(self.entries).copy()

    def is_diagonal(self, rtol: float = DIAGONAL_RTOL) -> bool:
        """True when off-diagonal entries vanish relative to the largest diagonal magnitude."""
        off = self.entries - np.diag(np.diag(self.entries))
        scale = float(np.max(np.abs(np.diag(self.entries))))
        return bool(np.max(np.abs(off)) <= rtol * scale) if scale > 0 else not np.any(off)

    def submatrix(self, drop: Iterable[int]) -> np.ndarray:
        """Principal submatrix with the listed rows/columns removed."""
        keep = [i for i in range(self.dim) if i not in set(drop)]
        return self.entries[np.ix_(keep, keep)]

    def __array__(self, dtype=None, copy=None):
        return np.array(self.entries, dtype=dtype)


MatrixLike = Union[SymMatrix, ArrayLike]
VectorLike = Union[Spectrum, ArrayLike]


def as_sym(W: MatrixLike) -> SymMatrix:
    """Coerce an array-like into a SymMatrix (exact symmetry required)."""
    return W if isinstance(W, SymMatrix) else SymMatrix(np.asarray(W, dtype=float))


def _as_values(lam: VectorLike) -> np.ndarray:
    if isinstance(lam, Spectrum):
        return np.asarray(lam.values)
    return np.asarray(lam, dtype=float)


def _check_k(k: int) -> None:
    if int(k) != k or k < 0:
        raise ArgumentError(f"k must be a non-negative integer, got {k}", details={"k": k})


def sigma_all(values: ArrayLike, k_max: int) -> np.ndarray:
    """
    All elementary symmetric functions σ_0..σ_kmax along the last axis.

    Uses the prefix-product recurrence e_j ← e_j + λ_i e_{j-1}, which costs
    O(n k) per vector and is vectorized over any leading axes.

    Args:
        values: array of shape (..., n)
        k_max: highest order requested

    Returns:
        array of shape (..., k_max + 1); entries with k > n are zero
    """
    _check_k(k_max)
    values = np.asarray(values, dtype=float)
    e = np.zeros(values.shape[:-1] + (k_max + 1,))
    e[..., 0] = 1.0
    if k_max == 0:
        return e
    for i in range(values.shape[-1]):
        e[..., 1:] += values[..., i, None] * e[..., :-1]
    return e


def sigma(lam: VectorLike, k: int) -> float:
    """
    σ_k(λ): sum over all k-subsets of products, with σ_0 = 1 and σ_k = 0 for k > n.

    Args:
        lam: eigenvalue vector or Spectrum
        k: order, k >= 0

    Returns:
        σ_k(λ)
    """
    _check_k(k)
    values = _as_values(lam)
    if k > values.size:
        return 0.0
    return float(sigma_all(values, k)[k])


def sigma_vector_minor(lam: VectorLike, k: int, drop: Sequence[int]) -> float:
    """σ_k(λ|i) or σ_k(λ|ij): σ_k with the listed components removed."""
    values = _as_values(lam)
    drop = _check_drop(drop, values.size)
    return sigma(np.delete(values, list(drop)), k)


def eigenvalues(W: MatrixLike) -> np.ndarray:
    """Ascending eigenvalues of a symmetric matrix; exact for already-diagonal input."""
    W = as_sym(W)
    off = W.entries - np.diag(np.diag(W.entries))
    if not np.any(off):
        return np.sort(np.diag(W.entries))
    try:
        return linalg.eigvalsh(W.entries)
    except linalg.LinAlgError as e:
        raise NumericError(f"Eigensolver failed: {e}", details={"dim": W.dim}) from e


def sigma_matrix(W: MatrixLike, k: int) -> float:
    """σ_k(W) = σ_k(λ(W)) through a symmetric eigensolve."""
    _check_k(k)
    W = as_sym(W)
    if k > W.dim:
        return 0.0
    return sigma(eigenvalues(W), k)


def _check_drop(drop: Sequence[int], dim: int) -> Tuple[int, ...]:
    drop = tuple(int(i) for i in drop)
    if len(drop) not in (1, 2) or len(set(drop)) != len(drop):
        raise ArgumentError("drop must list one or two distinct indices",
                            details={"drop": list(drop)})
    for i in drop:
        if not 0 <= i < dim:
            raise ArgumentError(f"drop index {i} out of range for dimension {dim}",
                                details={"drop": list(drop), "dim": dim})
    return drop


def sigma_minor(W: MatrixLike, k: int, drop: Sequence[int]) -> float:
    """σ_k(W|i) / σ_k(W|ij): σ_k of the principal submatrix without the drop rows/columns."""
    _check_k(k)
    W = as_sym(W)
    drop = _check_drop(drop, W.dim)
    if k == 0:
        return 1.0
    if W.dim == len(drop):
        return 0.0
    return sigma_matrix(SymMatrix(W.submatrix(drop)), k)


def _require_diagonal(W: SymMatrix) -> np.ndarray:
    if not W.is_diagonal():
        off = W.entries - np.diag(np.diag(W.entries))
        i, j = np.unravel_index(int(np.argmax(np.abs(off))), off.shape)
        raise PreconditionError(
            "Matrix is not diagonal",
            details={"entry": [int(i), int(j)], "value": float(off[i, j])},
        )
    return np.diag(W.entries).copy()


def sigma_grad_diag(W: MatrixLike, m: int) -> SymMatrix:
    """
    ∂σ_m/∂W at a diagonal W.

    Returns:
        diagonal SymMatrix with entry (i, i) = σ_{m-1}(W|i)
    """
    W = as_sym(W)
    if m < 1:
        raise ArgumentError(f"m must be a positive integer, got {m}", details={"m": m})
    d = _require_diagonal(W)
    grads = [sigma(np.delete(d, i), m - 1) for i in range(W.dim)]
    return SymMatrix.diag(grads)


def sigma_hess_diag(W: MatrixLike, m: int, i: int, j: int, k: int, l: int) -> float:
    """
    ∂²σ_m/∂W_ij∂W_kl at a diagonal W.

    σ_{m-2}(W|ik) when i = j, k = l, i != k; -σ_{m-2}(W|ik) when i = l, j = k,
    i != j; zero otherwise.
    """
    W = as_sym(W)
    if m < 1:
        raise ArgumentError(f"m must be a positive integer, got {m}", details={"m": m})
    for index in (i, j, k, l):
        if not 0 <= index < W.dim:
            raise ArgumentError(f"index {index} out of range for dimension {W.dim}",
                                details={"indices": [i, j, k, l], "dim": W.dim})
    d = _require_diagonal(W)
    if m < 2:
        return 0.0
    if i == j and k == l and i != k:
        return sigma(np.delete(d, [i, k]), m - 2)
    if i == l and j == k and i != j:
        return -sigma(np.delete(d, [i, j]), m - 2)
    return 0.0


def identity_residuals(lam: VectorLike, k: int) -> dict:
    """
    Residuals of the three standard identities for σ_k:

        deletion:    σ_k(λ) - σ_k(λ|i) - λ_i σ_{k-1}(λ|i)   (max over i)
        euler:       Σ_i λ_i σ_{k-1}(λ|i) - k σ_k(λ)
        deleted_sum: Σ_i σ_k(λ|i) - (n - k) σ_k(λ)
    """
    values = _as_values(lam)
    n = values.size
    if not 1 <= k <= n:
        raise ArgumentError(f"k must lie in [1, {n}], got {k}", details={"k": k, "n": n})
    sk = sigma(values, k)
    deleted = [np.delete(values, i) for i in range(n)]
    deletion = max(abs(sk - sigma(d, k) - values[i] * sigma(d, k - 1)) for i, d in enumerate(deleted))
    euler = sum(values[i] * sigma(d, k - 1) for i, d in enumerate(deleted)) - k * sk
    deleted_sum = sum(sigma(d, k) for d in deleted) - (n - k) * sk
    return {"deletion": float(deletion), "euler": float(euler), "deleted_sum": float(deleted_sum)}


def in_gamma_k(lam: VectorLike, k: int) -> bool:
    """Γ_k sign test: σ_j(λ) > 0 for every j = 1..k."""
    _check_k(k)
    values = _as_values(lam)
    if k == 0:
        return True
    return bool(np.all(sigma_all(values, k)[1:] > 0))


def sigma_brute(lam: VectorLike, k: int) -> float:
    """k-subset enumeration oracle for σ_k(λ)."""
    _check_k(k)
    values = _as_values(lam).tolist()
    return float(sum(math.prod(c) for c in itertools.combinations(values, k)))


def sigma_minor_brute(W: MatrixLike, k: int) -> float:
    """σ_k(W) as the sum of all k x k principal minors (enumeration oracle, small n)."""
    _check_k(k)
    W = as_sym(W)
    if k == 0:
        return 1.0
    return float(sum(np.linalg.det(W.entries[np.ix_(c, c)])
                     for c in itertools.combinations(range(W.dim), k)))
