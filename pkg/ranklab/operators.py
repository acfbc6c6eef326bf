"""
Operator Catalog

Fully nonlinear parabolic operators F(A, p, u, x, t), their derivative
bundles, the quadratic form Q* and sampled checks of ellipticity and of the
structure condition

    (A, u, x, t) ↦ F(A⁻¹, p, u, x, t) is locally convex for each fixed p.

Derivatives with respect to A are taken along the symmetric unit directions
E^{ij} (E^{ii} = e_i e_iᵀ, E^{ij} = ½(e_i e_jᵀ + e_j e_iᵀ) for i != j), so that
dF[X] = Σ_ij F^{ij} X_ij for symmetric X.
"""

import inspect
import logging
import math
import re
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike
from scipy import linalg, special
from scipy.stats import ortho_group

from .common.exceptions import ArgumentError, ConfigError, DomainError, PreconditionError
from .models.experiment import CheckConfig, OperatorConfig
from .symm import MatrixLike, SymMatrix, as_sym, eigenvalues, in_gamma_k, sigma, sigma_all

logger = logging.getLogger(__name__)

# Relative step for second derivatives taken from analytic first derivatives
FD_GRAD_STEP = 1e-5
# Relative step for derivatives taken from values only
FD_VALUE_STEP = 1e-4
ADMISSIBLE_TOL = 1e-12
MAX_ATTEMPTS_FACTOR = 10

CERTIFICATE_NOTE = (
    "Sampled check: a pass is a statistical certificate over the recorded domain and seed, "
    "not a proof."
)

_EPS = float(np.finfo(float).eps)


# ---------------------------------------------------------------------------
# Evaluation points and flat coordinates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BasePoint:
    """An argument (A, p, u, x, t) of F."""
    A: np.ndarray
    p: np.ndarray
    u: float
    x: np.ndarray
    t: float

    @property
    def n(self) -> int:
        return int(self.A.shape[0])

    def scale(self) -> float:
        return max(1.0, float(np.linalg.norm(self.A)), abs(self.u), float(np.linalg.norm(self.x)), abs(self.t))

    def to_dict(self) -> dict:
        return {"A": self.A, "p": self.p, "u": self.u, "x": self.x, "t": self.t}


def base_point(A: MatrixLike, p: ArrayLike = None, u: float = 0.0, x: ArrayLike = None,
               t: float = 0.0) -> BasePoint:
    """Validate and package an evaluation point; p and x default to zero."""
    A = as_sym(A).entries.copy()
    n = A.shape[0]
    p = np.zeros(n) if p is None else np.asarray(p, dtype=float).reshape(-1)
    x = np.zeros(n) if x is None else np.asarray(x, dtype=float).reshape(-1)
    if p.size != n or x.size != n:
        raise ArgumentError(
            "p and x must have the dimension of A",
            details={"n": n, "p": int(p.size), "x": int(x.size)},
        )
    return BasePoint(A, p, float(u), x, float(t))


class FlatLayout:
    """Coordinates z = (A pairs i <= j, u, x_1..x_n, t) of flat gradients and Hessians."""

    def __init__(self, n: int):
        self.n = n
        self.pairs = [(i, j) for i in range(n) for j in range(i, n)]
        m = len(self.pairs)
        self.rows = np.array([i for i, _ in self.pairs], dtype=int)
        self.cols = np.array([j for _, j in self.pairs], dtype=int)
        self.index = np.zeros((n, n), dtype=int)
        self.basis = np.zeros((m, n, n))
        for a, (i, j) in enumerate(self.pairs):
            self.index[i, j] = self.index[j, i] = a
            if i == j:
                self.basis[a, i, i] = 1.0
            else:
                self.basis[a, i, j] = self.basis[a, j, i] = 0.5
        self.m = m
        self.u = m
        self.x = slice(m + 1, m + 1 + n)
        self.t = m + 1 + n
        self.size = m + 2 + n

    def shift(self, pt: BasePoint, z: np.ndarray) -> BasePoint:
        A = pt.A + np.tensordot(z[: self.m], self.basis, axes=1)
        return BasePoint(A, pt.p, pt.u + z[self.u], pt.x + z[self.x], pt.t + z[self.t])

    def matrix_part(self, grad: np.ndarray) -> np.ndarray:
        """Unpack the A block of a flat gradient into a symmetric matrix."""
        return grad[self.index]


def _is_psd(A: np.ndarray) -> bool:
    values = eigenvalues(SymMatrix(A))
    return bool(values[0] >= -ADMISSIBLE_TOL * max(1.0, abs(float(values[-1]))))


def _eig(A: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    off = A - np.diag(np.diag(A))
    if not np.any(off):
        return np.diag(A).copy(), np.eye(A.shape[0])
    return linalg.eigh(A)


def _sigma_with_gradient(lam: np.ndarray, V: np.ndarray, m: int) -> Tuple[float, np.ndarray]:
    """σ_m(A) and ∂σ_m/∂A = V diag(σ_{m-1}(λ|i)) Vᵀ."""
    minors = np.array([sigma(np.delete(lam, i), m - 1) for i in range(lam.size)])
    return sigma(lam, m), (V * minors) @ V.T


# ---------------------------------------------------------------------------
# Operator specifications
# ---------------------------------------------------------------------------

class OperatorSpec(ABC):
    """
    Base class for operators F(A, p, u, x, t).

    Subclasses implement ``value_field``; derivatives default to central
    differences of the value and are overridden where closed forms exist.
    """

    kind: str = "abstract"

    @abstractmethod
    def value_field(self, A: np.ndarray, p: np.ndarray, u: np.ndarray, x: np.ndarray,
                    t: float) -> np.ndarray:
        """F over leading axes: A (..., n, n), p (..., n), u (...), x (..., n)."""

    @abstractmethod
    def describe(self) -> Dict[str, Any]:
        """Plain description for reports."""

    def value(self, pt: BasePoint) -> float:
        return float(self.value_field(pt.A, pt.p, np.asarray(pt.u), pt.x, pt.t))

    def admissible(self, pt: BasePoint) -> bool:
        return _is_psd(pt.A)

    def grad_A(self, pt: BasePoint) -> np.ndarray:
        """F^{ij} by central differences of the value."""
        layout = FlatLayout(pt.n)
        h = FD_VALUE_STEP * pt.scale()
        grad = np.empty(layout.m)
        for a in range(layout.m):
            z = np.zeros(layout.size)
            z[a] = h
            grad[a] = (self.value(layout.shift(pt, z)) - self.value(layout.shift(pt, -z))) / (2 * h)
        return layout.matrix_part(grad)

    def grad_p(self, pt: BasePoint) -> np.ndarray:
        """F^{u_i} by central differences of the value."""
        h = FD_GRAD_STEP * max(1.0, float(np.linalg.norm(pt.p)))
        grad = np.empty(pt.n)
        for i in range(pt.n):
            step = np.zeros(pt.n)
            step[i] = h
            plus = BasePoint(pt.A, pt.p + step, pt.u, pt.x, pt.t)
            minus = BasePoint(pt.A, pt.p - step, pt.u, pt.x, pt.t)
            grad[i] = (self.value(plus) - self.value(minus)) / (2 * h)
        return grad

    def flat_derivatives(self, pt: BasePoint) -> Tuple[float, np.ndarray, np.ndarray, float]:
        """
        Value, flat gradient, flat Hessian and finite-difference noise floor.

        The default differentiates the value only: central differences for the
        gradient, the three- and four-point formulas for the Hessian.
        """
        layout = FlatLayout(pt.n)
        N = layout.size
        h = FD_VALUE_STEP * pt.scale()
        f0 = self.value(pt)

        def f(*offsets: Tuple[int, float]) -> float:
            z = np.zeros(N)
            for index, sign in offsets:
                z[index] += sign * h
            return self.value(layout.shift(pt, z))

        grad = np.empty(N)
        hess = np.empty((N, N))
        for a in range(N):
            fp, fm = f((a, 1)), f((a, -1))
            grad[a] = (fp - fm) / (2 * h)
            hess[a, a] = (fp - 2 * f0 + fm) / h ** 2
            for b in range(a):
                hess[a, b] = hess[b, a] = (
                    f((a, 1), (b, 1)) - f((a, 1), (b, -1)) - f((a, -1), (b, 1)) + f((a, -1), (b, -1))
                ) / (4 * h ** 2)
        noise = 4 * _EPS * max(1.0, abs(f0)) / h ** 2
        return f0, grad, hess, noise

    def term(self) -> str:
        return self.kind

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.term()})"


class LinearOperator(OperatorSpec):
    """
    F = tr(a A) + drift·p + potential·u + source.

    The coefficient a must be symmetric positive semidefinite; None means the
    identity in whatever dimension A has (the heat operator).
    """

    kind = "linear"

    def __init__(self, coeff: Optional[ArrayLike] = None, drift: Optional[ArrayLike] = None,
                 potential: float = 0.0, source: float = 0.0):
        self.coeff = None
        if coeff is not None:
            coeff = as_sym(np.asarray(coeff, dtype=float))
            if eigenvalues(coeff)[0] < -ADMISSIBLE_TOL * max(1.0, float(np.max(np.abs(coeff.entries)))):
                raise ArgumentError("linear coefficient must be positive semidefinite",
                                    details={"coeff": coeff.entries.tolist()})
            self.coeff = coeff.entries
        self.drift = None if drift is None else np.asarray(drift, dtype=float).reshape(-1)
        self.potential = float(potential)
        self.source = float(source)

    @property
    def is_heat(self) -> bool:
        return (self.coeff is None and self.drift is None and self.potential == 0.0
                and self.source == 0.0)

    def coefficient(self, n: int) -> np.ndarray:
        if self.coeff is None:
            return np.eye(n)
        if self.coeff.shape[0] != n:
            raise ArgumentError("coefficient dimension does not match A",
                                details={"coeff": self.coeff.shape[0], "n": n})
        return self.coeff

    def _drift(self, n: int) -> np.ndarray:
        if self.drift is None:
            return np.zeros(n)
        if self.drift.size != n:
            raise ArgumentError("drift dimension does not match A", details={"drift": self.drift.size, "n": n})
        return self.drift

    def value_field(self, A, p, u, x, t):
        n = A.shape[-1]
        return (np.einsum("ij,...ij->...", self.coefficient(n), A) + p @ self._drift(n)
                + self.potential * u + self.source)

    def grad_A(self, pt: BasePoint) -> np.ndarray:
        return self.coefficient(pt.n).copy()

    def grad_p(self, pt: BasePoint) -> np.ndarray:
        return self._drift(pt.n).copy()

    def flat_derivatives(self, pt: BasePoint):
        layout = FlatLayout(pt.n)
        grad = np.zeros(layout.size)
        grad[: layout.m] = self.coefficient(pt.n)[layout.rows, layout.cols]
        grad[layout.u] = self.potential
        return self.value(pt), grad, np.zeros((layout.size, layout.size)), 0.0

    def describe(self):
        return {
            "kind": "heat" if self.is_heat else self.kind,
            "coeff": self.coeff,
            "drift": self.drift,
            "potential": self.potential,
            "source": self.source,
        }

    def term(self) -> str:
        return "heat" if self.is_heat else self.kind


class _HessianOperator(OperatorSpec):
    """Shared machinery for functions of the eigenvalues of A."""

    k: int

    def admissible(self, pt: BasePoint) -> bool:
        return _is_psd(pt.A) and in_gamma_k(eigenvalues(SymMatrix(pt.A)), self.k)

    @abstractmethod
    def _of_sigmas(self, e: np.ndarray) -> np.ndarray:
        """F from stacked σ_0..σ_k."""

    def value_field(self, A, p, u, x, t):
        A = np.asarray(A, dtype=float)
        lam = np.linalg.eigvalsh(0.5 * (A + np.swapaxes(A, -1, -2)))
        return self._of_sigmas(sigma_all(lam, self.k))

    def value(self, pt: BasePoint) -> float:
        return float(self._of_sigmas(sigma_all(eigenvalues(SymMatrix(pt.A)), self.k)))

    def flat_derivatives(self, pt: BasePoint):
        """Analytic gradient; A-block Hessian by central differences of the gradient."""
        layout = FlatLayout(pt.n)
        grad_A = self.grad_A(pt)
        grad = np.zeros(layout.size)
        grad[: layout.m] = grad_A[layout.rows, layout.cols]
        hess = np.zeros((layout.size, layout.size))
        h = FD_GRAD_STEP * max(1.0, float(np.linalg.norm(pt.A)))
        for b in range(layout.m):
            E = layout.basis[b]
            plus = self.grad_A(BasePoint(pt.A + h * E, pt.p, pt.u, pt.x, pt.t))
            minus = self.grad_A(BasePoint(pt.A - h * E, pt.p, pt.u, pt.x, pt.t))
            hess[: layout.m, b] = ((plus - minus) / (2 * h))[layout.rows, layout.cols]
        block = hess[: layout.m, : layout.m]
        hess[: layout.m, : layout.m] = 0.5 * (block + block.T)
        noise = 2 * _EPS * max(1.0, float(np.max(np.abs(grad_A)))) / h
        return self.value(pt), grad, hess, noise

    def grad_p(self, pt: BasePoint) -> np.ndarray:
        return np.zeros(pt.n)


class HessianPower(_HessianOperator):
    """F = σ_k(A)^{1/k}."""

    kind = "hessian_power"

    def __init__(self, k: int):
        if int(k) != k or k < 1:
            raise ArgumentError(f"hessian_power needs k >= 1, got {k}", details={"k": k})
        self.k = int(k)

    def _of_sigmas(self, e):
        return np.maximum(e[..., self.k], 0.0) ** (1.0 / self.k)

    def grad_A(self, pt: BasePoint) -> np.ndarray:
        lam, V = _eig(pt.A)
        sk, dsk = _sigma_with_gradient(lam, V, self.k)
        if sk <= 0:
            raise DomainError("σ_k(A) must be positive", details={"k": self.k, "sigma": sk})
        return (sk ** (1.0 / self.k - 1.0) / self.k) * dsk

    def describe(self):
        return {"kind": self.kind, "k": self.k}

    def term(self) -> str:
        return f"hessian_power({self.k})"


class HessianQuotient(_HessianOperator):
    """F = (σ_k(A) / σ_l(A))^{1/(k-l)}, k > l > 0."""

    kind = "hessian_quotient"

    def __init__(self, k: int, l: int):
        if not (int(k) == k and int(l) == l and k > l > 0):
            raise ArgumentError(f"hessian_quotient needs k > l > 0, got k={k}, l={l}",
                                details={"k": k, "l": l})
        self.k = int(k)
        self.l = int(l)

    def _of_sigmas(self, e):
        sk = np.maximum(e[..., self.k], 0.0)
        sl = e[..., self.l]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(sl > 0, sk / np.where(sl > 0, sl, 1.0), 0.0)
        return ratio ** (1.0 / (self.k - self.l))

    def grad_A(self, pt: BasePoint) -> np.ndarray:
        lam, V = _eig(pt.A)
        sk, dsk = _sigma_with_gradient(lam, V, self.k)
        sl, dsl = _sigma_with_gradient(lam, V, self.l)
        if sk <= 0 or sl <= 0:
            raise DomainError("σ_k(A) and σ_l(A) must be positive",
                              details={"k": self.k, "l": self.l, "sigma_k": sk, "sigma_l": sl})
        power = 1.0 / (self.k - self.l)
        ratio = sk / sl
        return power * ratio ** (power - 1.0) * (sl * dsk - sk * dsl) / sl ** 2

    def describe(self):
        return {"kind": self.kind, "k": self.k, "l": self.l}

    def term(self) -> str:
        return f"hessian_quotient({self.k},{self.l})"


# ---------------------------------------------------------------------------
# Custom operators
# ---------------------------------------------------------------------------

_custom_operators: Dict[str, Callable] = {}
_CUSTOM_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def custom_operator(name: str):
    """
    Register a black-box evaluator F(A, p, u, x, t) under ``name``.

    The name must be usable inside an operator term, ``custom(name)``, and
    the evaluator must take the five arguments positionally and broadcast over
    leading axes (A of shape (..., n, n)). The evaluator is registered
    unchanged; reusing a name for a different evaluator raises ArgumentError.
    """
    if not _CUSTOM_NAME.match(name):
        raise ArgumentError(f"custom operator name must be an identifier: {name!r}", details={"name": name})

    def decorator(func: Callable) -> Callable:
        try:
            inspect.signature(func).bind("A", "p", "u", "x", "t")
        except TypeError as e:
            raise ArgumentError(f"custom operator {name} must take (A, p, u, x, t)",
                                details={"name": name}) from e
        existing = _custom_operators.get(name)
        if existing is not None and existing is not func:
            raise ArgumentError(f"custom operator {name} is already registered",
                                details={"name": name, "available": list_custom_operators()})
        _custom_operators[name] = func
        logger.debug(f"Registered custom operator {name}")
        return func
    return decorator


def list_custom_operators() -> List[str]:
    return sorted(_custom_operators)


@custom_operator("trace_minus_u_squared")
def _trace_minus_u_squared(A, p, u, x, t):
    return np.trace(A, axis1=-2, axis2=-1) - np.square(u)


@custom_operator("trace_plus_potential")
def _trace_plus_potential(A, p, u, x, t):
    return np.trace(A, axis1=-2, axis2=-1) + u


class CustomOperator(OperatorSpec):
    """A registered black-box evaluator; all derivatives by finite differences."""

    kind = "custom"

    def __init__(self, name: str, evaluator: Optional[Callable] = None):
        if evaluator is None:
            evaluator = _custom_operators.get(name)
        if evaluator is None:
            raise ArgumentError(f"unknown custom operator: {name}",
                                details={"name": name, "available": list_custom_operators()})
        self.name = name
        self.evaluator = evaluator

    def value_field(self, A, p, u, x, t):
        return np.asarray(self.evaluator(A, p, u, x, t), dtype=float)

    def describe(self):
        return {"kind": self.kind, "name": self.name}

    def term(self) -> str:
        return f"custom({self.name})"


# ---------------------------------------------------------------------------
# Scalar functions for composition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalarFunction:
    """
    g(s_1, ..., s_m) for composition, with value, gradient and Hessian.

    ``value`` broadcasts over leading axes of s; ``gradient`` and ``hessian``
    act on a single vector.
    """
    name: str
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    nondecreasing: bool
    convex: bool
    arity: Optional[int] = None
    domain: Callable[[np.ndarray], bool] = lambda s: True
    params: Dict[str, Any] = field(default_factory=dict)

    def describe(self) -> Dict[str, Any]:
        return {"name": self.name, **self.params}


def g_identity() -> ScalarFunction:
    return ScalarFunction(
        "identity",
        value=lambda s: s[..., 0],
        gradient=lambda s: np.ones(1),
        hessian=lambda s: np.zeros((1, 1)),
        nondecreasing=True,
        convex=True,
        arity=1,
    )


def g_sum() -> ScalarFunction:
    return ScalarFunction(
        "sum",
        value=lambda s: np.sum(s, axis=-1),
        gradient=lambda s: np.ones(s.size),
        hessian=lambda s: np.zeros((s.size, s.size)),
        nondecreasing=True,
        convex=True,
    )


def g_weighted_sum(weights: Sequence[float]) -> ScalarFunction:
    w = np.asarray(weights, dtype=float).reshape(-1)
    if np.any(w < 0):
        raise ArgumentError("weighted_sum needs nonnegative weights", details={"weights": w.tolist()})
    return ScalarFunction(
        "weighted_sum",
        value=lambda s: s @ w,
        gradient=lambda s: w.copy(),
        hessian=lambda s: np.zeros((w.size, w.size)),
        nondecreasing=True,
        convex=True,
        arity=int(w.size),
        params={"weights": w.tolist()},
    )


def g_power(alpha: float) -> ScalarFunction:
    """s^alpha on s > 0; declared convex only for alpha >= 1."""
    alpha = float(alpha)
    return ScalarFunction(
        "power",
        value=lambda s: s[..., 0] ** alpha,
        gradient=lambda s: np.array([alpha * s[0] ** (alpha - 1.0)]),
        hessian=lambda s: np.array([[alpha * (alpha - 1.0) * s[0] ** (alpha - 2.0)]]),
        nondecreasing=alpha > 0,
        convex=alpha >= 1,
        arity=1,
        domain=lambda s: bool(np.all(s > 0)),
        params={"alpha": alpha},
    )


def g_logsumexp() -> ScalarFunction:
    def hessian(s):
        w = special.softmax(s)
        return np.diag(w) - np.outer(w, w)

    return ScalarFunction(
        "logsumexp",
        value=lambda s: special.logsumexp(s, axis=-1),
        gradient=lambda s: special.softmax(s),
        hessian=hessian,
        nondecreasing=True,
        convex=True,
    )


def scalar_function(name: str, alpha: Optional[float] = None,
                    weights: Optional[Sequence[float]] = None) -> ScalarFunction:
    """Look up a catalog g by name."""
    if name == "identity":
        return g_identity()
    if name == "sum":
        return g_sum()
    if name == "logsumexp":
        return g_logsumexp()
    if name == "weighted_sum":
        if weights is None:
            raise ArgumentError("weighted_sum needs weights")
        return g_weighted_sum(weights)
    if name == "power":
        if alpha is None:
            raise ArgumentError("power needs alpha")
        return g_power(alpha)
    raise ArgumentError(f"unknown composition function: {name}", details={"g": name})


class Composition(OperatorSpec):
    """F = g(F_1, ..., F_m), derivatives by the chain rule."""

    kind = "composition"

    def __init__(self, g: ScalarFunction, children: Sequence[OperatorSpec]):
        children = list(children)
        if not children:
            raise ArgumentError("composition needs at least one child")
        if not (g.nondecreasing and g.convex):
            raise ArgumentError(
                f"composition function {g.name} must be nondecreasing and convex",
                details={"g": g.name, "nondecreasing": g.nondecreasing, "convex": g.convex},
            )
        if g.arity is not None and g.arity != len(children):
            raise ArgumentError(f"{g.name} takes {g.arity} arguments, got {len(children)}",
                                details={"g": g.name, "children": len(children)})
        self.g = g
        self.children = children

    def _child_values(self, pt: BasePoint) -> np.ndarray:
        return np.array([child.value(pt) for child in self.children])

    def admissible(self, pt: BasePoint) -> bool:
        if not all(child.admissible(pt) for child in self.children):
            return False
        return self.g.domain(self._child_values(pt))

    def value_field(self, A, p, u, x, t):
        s = np.stack([np.asarray(child.value_field(A, p, u, x, t), dtype=float)
                      for child in self.children], axis=-1)
        return self.g.value(s)

    def value(self, pt: BasePoint) -> float:
        return float(self.g.value(self._child_values(pt)))

    def grad_A(self, pt: BasePoint) -> np.ndarray:
        weights = self.g.gradient(self._child_values(pt))
        return sum(w * child.grad_A(pt) for w, child in zip(weights, self.children))

    def grad_p(self, pt: BasePoint) -> np.ndarray:
        weights = self.g.gradient(self._child_values(pt))
        return sum(w * child.grad_p(pt) for w, child in zip(weights, self.children))

    def flat_derivatives(self, pt: BasePoint):
        parts = [child.flat_derivatives(pt) for child in self.children]
        s = np.array([part[0] for part in parts])
        J = np.array([part[1] for part in parts])
        g1 = self.g.gradient(s)
        g2 = self.g.hessian(s)
        grad = g1 @ J
        hess = sum(w * part[2] for w, part in zip(g1, parts)) + J.T @ g2 @ J
        noise = float(sum(abs(w) * part[3] for w, part in zip(g1, parts)))
        return float(self.g.value(s)), grad, hess, noise

    def describe(self):
        return {"kind": self.kind, "g": self.g.describe(),
                "children": [child.describe() for child in self.children]}

    def term(self) -> str:
        return f"{self.g.name}[{', '.join(child.term() for child in self.children)}]"


# ---------------------------------------------------------------------------
# Catalog
# ---------------------------------------------------------------------------

def heat(n: Optional[int] = None) -> LinearOperator:
    """F = tr(A); without n the operator adapts to the dimension of A."""
    return LinearOperator(None if n is None else np.eye(n))


def linear(coeff: Optional[ArrayLike] = None, drift: Optional[ArrayLike] = None,
           potential: float = 0.0, source: float = 0.0) -> LinearOperator:
    return LinearOperator(coeff, drift, potential, source)


def hessian_power(k: int) -> HessianPower:
    return HessianPower(k)


def hessian_quotient(k: int, l: int) -> HessianQuotient:
    return HessianQuotient(k, l)


def compose(g: ScalarFunction, children: Sequence[OperatorSpec]) -> Composition:
    return Composition(g, children)


def custom(name: str) -> CustomOperator:
    return CustomOperator(name)


_TERM = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\(([^)]*)\))?\s*$")


def parse_term(text: str) -> OperatorSpec:
    """
    Build an operator from a catalog term: ``heat``, ``hessian_power(2)``,
    ``hessian_quotient(3,1)``, ``custom(name)``.

    A general linear operator needs its coefficient matrix, which a term
    cannot carry; ``linear`` is rejected rather than read as ``heat``.
    """
    match = _TERM.match(text)
    if not match:
        raise ArgumentError(f"cannot parse operator term {text!r}", details={"term": text})
    name, args = match.group(1), match.group(2)
    args = [a.strip() for a in args.split(",")] if args else []
    try:
        if name == "heat" and not args:
            return heat()
        if name == "linear":
            raise ArgumentError(
                "linear needs an explicit coefficient: use heat for tr(A), or operator.kind = linear "
                "with operator.coeff",
                details={"term": text},
            )
        if name == "hessian_power" and len(args) == 1:
            return hessian_power(int(args[0]))
        if name == "hessian_quotient" and len(args) == 2:
            return hessian_quotient(int(args[0]), int(args[1]))
        if name == "custom" and len(args) == 1:
            return custom(args[0])
    except ValueError as e:
        if isinstance(e, ArgumentError):
            raise
        raise ArgumentError(f"bad arguments in operator term {text!r}", details={"term": text}) from e
    raise ArgumentError(f"unknown operator term {text!r}", details={"term": text})


def from_config(config: OperatorConfig) -> OperatorSpec:
    """Build the operator described by an experiment's ``operator.*`` keys."""
    try:
        if config.kind == "heat":
            return heat()
        if config.kind == "linear":
            return linear(config.coeff, config.drift, config.potential, config.source)
        if config.kind == "hessian_power":
            return hessian_power(config.k)
        if config.kind == "hessian_quotient":
            return hessian_quotient(config.k, config.l)
        if config.kind == "custom":
            return custom(config.name)
        g = scalar_function(config.g, alpha=config.alpha, weights=config.weights)
        return compose(g, [parse_term(term) for term in config.children])
    except ArgumentError as e:
        raise ConfigError(f"invalid operator: {e.message}", details=e.details) from e


# ---------------------------------------------------------------------------
# Derivative bundles and the quadratic form
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DerivativeBundle:
    """
    Value and all first/second partial derivatives of F at one point.

    Tensor index conventions: F_AA[a, b, c, d] = F^{ab,cd}, F_Ax[a, b, i] =
    F^{ab,x_i}. ``fd_noise`` bounds the rounding error of finite-difference
    second derivatives (zero for exact ones).
    """
    value: float
    F_A: np.ndarray
    F_AA: np.ndarray
    F_Au: np.ndarray
    F_Ax: np.ndarray
    F_At: np.ndarray
    F_uu: float
    F_ut: float
    F_ux: np.ndarray
    F_xx: np.ndarray
    F_xt: np.ndarray
    F_tt: float
    F_p: np.ndarray
    A_inv: Optional[np.ndarray] = None
    fd_noise: float = 0.0

    @property
    def n(self) -> int:
        return int(self.F_A.shape[0])

    @classmethod
    def from_flat(cls, value: float, grad: np.ndarray, hess: np.ndarray, F_p: np.ndarray,
                  A_inv: Optional[np.ndarray] = None, fd_noise: float = 0.0) -> "DerivativeBundle":
        n = F_p.size
        layout = FlatLayout(n)
        hess = 0.5 * (hess + hess.T)
        idx = layout.index
        x, u, t = layout.x, layout.u, layout.t
        return cls(
            value=float(value),
            F_A=grad[idx],
            F_AA=hess[idx[:, :, None, None], idx[None, None, :, :]],
            F_Au=hess[idx, u],
            F_Ax=hess[idx][:, :, x],
            F_At=hess[idx, t],
            F_uu=float(hess[u, u]),
            F_ut=float(hess[u, t]),
            F_ux=hess[u, x].copy(),
            F_xx=hess[x, x].copy(),
            F_xt=hess[x, t].copy(),
            F_tt=float(hess[t, t]),
            F_p=np.asarray(F_p, dtype=float),
            A_inv=A_inv,
            fd_noise=float(fd_noise),
        )

    def flat(self) -> Tuple[np.ndarray, np.ndarray]:
        """Flat gradient and Hessian over (A pairs, u, x, t)."""
        layout = FlatLayout(self.n)
        grad = np.zeros(layout.size)
        grad[: layout.m] = self.F_A[layout.rows, layout.cols]
        hess = np.zeros((layout.size, layout.size))
        r, c = layout.rows, layout.cols
        hess[: layout.m, : layout.m] = self.F_AA[r[:, None], c[:, None], r[None, :], c[None, :]]
        hess[: layout.m, layout.u] = hess[layout.u, : layout.m] = self.F_Au[r, c]
        hess[: layout.m, layout.x] = self.F_Ax[r, c]
        hess[layout.x, : layout.m] = self.F_Ax[r, c].T
        hess[: layout.m, layout.t] = hess[layout.t, : layout.m] = self.F_At[r, c]
        hess[layout.u, layout.u] = self.F_uu
        hess[layout.u, layout.t] = hess[layout.t, layout.u] = self.F_ut
        hess[layout.u, layout.x] = hess[layout.x, layout.u] = self.F_ux
        hess[layout.x, layout.x] = self.F_xx
        hess[layout.x, layout.t] = hess[layout.t, layout.x] = self.F_xt
        hess[layout.t, layout.t] = self.F_tt
        return grad, hess


def _inverse(A: np.ndarray) -> Optional[np.ndarray]:
    """Symmetric inverse through an eigendecomposition; None when A is singular."""
    lam, V = _eig(A)
    scale = max(1.0, float(np.max(np.abs(lam))))
    if np.min(np.abs(lam)) <= 1e-14 * scale:
        return None
    inverse = (V / lam) @ V.T
    return 0.5 * (inverse + inverse.T)


def evaluate(spec: OperatorSpec, A: MatrixLike, p: ArrayLike = None, u: float = 0.0,
             x: ArrayLike = None, t: float = 0.0, with_inverse: bool = True) -> DerivativeBundle:
    """
    Evaluate F and all its derivatives at (A, p, u, x, t).

    Linear operators are differentiated exactly; hessian kinds use analytic
    first derivatives and central differences of them (step 1e-5 relative)
    for second derivatives; custom evaluators are differenced throughout.

    Raises:
        DomainError: A is outside the admissible set, or singular when the
            inverse is requested
    """
    pt = A if isinstance(A, BasePoint) else base_point(A, p, u, x, t)
    if not spec.admissible(pt):
        raise DomainError(f"A is not admissible for {spec.term()}", details={"A": pt.A.tolist()})
    A_inv = None
    if with_inverse:
        A_inv = _inverse(pt.A)
        if A_inv is None:
            raise DomainError("A is singular; A⁻¹ is required", details={"A": pt.A.tolist()})
    value, grad, hess, noise = spec.flat_derivatives(pt)
    return DerivativeBundle.from_flat(value, grad, hess, spec.grad_p(pt), A_inv, noise)


def grad_A(spec: OperatorSpec, A: MatrixLike, p: ArrayLike = None, u: float = 0.0,
           x: ArrayLike = None, t: float = 0.0) -> np.ndarray:
    """F^{ij} only."""
    return spec.grad_A(base_point(A, p, u, x, t))


def value_field(spec: OperatorSpec, A: ArrayLike, p: ArrayLike, u: ArrayLike, x: ArrayLike,
                t: float) -> np.ndarray:
    """F over stacked arguments; admissibility is not checked."""
    return spec.value_field(np.asarray(A, dtype=float), np.asarray(p, dtype=float),
                            np.asarray(u, dtype=float), np.asarray(x, dtype=float), float(t))


@dataclass(frozen=True)
class QDirection:
    """A direction X̃ = (X, Y, Z, D) of the quadratic form."""
    X: SymMatrix
    Y: float
    Z: np.ndarray
    D: float

    def __post_init__(self):
        X = as_sym(self.X)
        Z = np.asarray(self.Z, dtype=float).reshape(-1)
        if Z.size != X.dim:
            raise ArgumentError("Z must have the dimension of X", details={"n": X.dim, "Z": int(Z.size)})
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "Y", float(self.Y))
        object.__setattr__(self, "D", float(self.D))

    @property
    def n(self) -> int:
        return self.X.dim

    def scaled(self, c: float) -> "QDirection":
        return QDirection(SymMatrix(c * self.X.entries), c * self.Y, c * self.Z, c * self.D)

    def norm(self) -> float:
        return math.sqrt(float(np.sum(self.X.entries ** 2)) + self.Y ** 2
                         + float(np.sum(self.Z ** 2)) + self.D ** 2)

    def l1(self) -> float:
        return float(np.sum(np.abs(self.X.entries)) + abs(self.Y) + np.sum(np.abs(self.Z)) + abs(self.D))

    def to_dict(self) -> dict:
        return {"X": self.X.entries, "Y": self.Y, "Z": self.Z, "D": self.D}

    @classmethod
    def zero(cls, n: int) -> "QDirection":
        return cls(SymMatrix(np.zeros((n, n))), 0.0, np.zeros(n), 0.0)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "QDirection":
        """Gaussian direction normalized to unit length."""
        G = rng.standard_normal((n, n))
        direction = cls(SymMatrix.symmetrized(G), rng.standard_normal(), rng.standard_normal(n),
                        rng.standard_normal())
        return direction.scaled(1.0 / direction.norm())

    @classmethod
    def axes(cls, n: int) -> List["QDirection"]:
        """Unit Y, unit D, unit Z_i and normalized E^{ij} directions."""
        zero = np.zeros((n, n))
        axes = [cls(SymMatrix(zero), 1.0, np.zeros(n), 0.0), cls(SymMatrix(zero), 0.0, np.zeros(n), 1.0)]
        for i in range(n):
            Z = np.zeros(n)
            Z[i] = 1.0
            axes.append(cls(SymMatrix(zero), 0.0, Z, 0.0))
        for i in range(n):
            for j in range(i, n):
                X = np.zeros((n, n))
                X[i, j] = X[j, i] = 1.0
                axis = cls(SymMatrix(X), 0.0, np.zeros(n), 0.0)
                axes.append(axis.scaled(1.0 / axis.norm()))
        return axes


def qstar_terms(bundle: DerivativeBundle, direction: QDirection) -> Dict[str, float]:
    """
    The eleven terms of Q*(X̃, X̃):

        F^{ab,cd} X_ab X_cd + 2 F^{ab} A^{cd} X_ad X_bc + 2 F^{ab,u} X_ab Y
        + 2 F^{ab,x_i} X_ab Z_i + 2 F^{ab,t} X_ab D + F^{u,u} Y²
        + 2 F^{u,x_i} Y Z_i + 2 F^{u,t} Y D + F^{x_i,x_j} Z_i Z_j
        + 2 F^{x_i,t} Z_i D + F^{t,t} D²
    """
    if bundle.A_inv is None:
        raise PreconditionError("bundle has no A⁻¹; evaluate with with_inverse=True")
    if direction.n != bundle.n:
        raise ArgumentError("direction and bundle dimensions differ",
                            details={"direction": direction.n, "bundle": bundle.n})
    X, Y, Z, D = direction.X.entries, direction.Y, direction.Z, direction.D
    return {
        "AA": float(np.einsum("abcd,ab,cd->", bundle.F_AA, X, X)),
        "cross": float(2.0 * np.einsum("ab,cd,ad,bc->", bundle.F_A, bundle.A_inv, X, X)),
        "Au": float(2.0 * np.sum(bundle.F_Au * X) * Y),
        "Ax": float(2.0 * np.einsum("abi,ab,i->", bundle.F_Ax, X, Z)),
        "At": float(2.0 * np.sum(bundle.F_At * X) * D),
        "uu": float(bundle.F_uu * Y ** 2),
        "ux": float(2.0 * np.dot(bundle.F_ux, Z) * Y),
        "ut": float(2.0 * bundle.F_ut * Y * D),
        "xx": float(Z @ bundle.F_xx @ Z),
        "xt": float(2.0 * np.dot(bundle.F_xt, Z) * D),
        "tt": float(bundle.F_tt * D ** 2),
    }


def qstar(bundle: DerivativeBundle, direction: QDirection) -> float:
    """Q*(X̃, X̃) as the sum of its eleven terms."""
    return float(sum(qstar_terms(bundle, direction).values()))


def check_ellipticity(bundle: DerivativeBundle, tol: float = 1e-12) -> bool:
    """True iff λ_min(F_A) > tol."""
    F_A = 0.5 * (bundle.F_A + bundle.F_A.T)
    return bool(linalg.eigvalsh(F_A)[0] > tol)


# ---------------------------------------------------------------------------
# Sampled structure-condition check
# ---------------------------------------------------------------------------

@dataclass
class ConditionCheck:
    """Outcome of one sampled test."""
    name: str
    passed: bool
    evaluations: int
    min_value: float
    witness: Optional[Dict[str, Any]] = None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "evaluations": self.evaluations,
            "min_value": self.min_value,
            "witness": self.witness,
        }


@dataclass
class Verdict:
    """
    Result of check_structure_condition.

    Attributes:
        passed: test1 and test2 passed (the spacetime condition)
        test1: Q* sampling over base points and directions
        test2: chord convexity of F(B⁻¹, p, u, x, t)
        test3: chord convexity of F(B⁻¹, p, u, x, t) in (B, u, x) at fixed t,
            the weaker condition behind the spatial constant rank property
        agreement: the two tests reached the same conclusion
        witness: the failing evidence, if any
        elliptic: λ_min(F_A) > tol at every sampled point
        min_ellipticity: smallest λ_min(F_A) seen
    """
    passed: bool
    test1: ConditionCheck
    test2: ConditionCheck
    test3: ConditionCheck
    agreement: bool
    witness: Optional[Dict[str, Any]]
    elliptic: bool
    min_ellipticity: float
    samples: int
    attempts: int
    seed: int
    n: int
    operator: Dict[str, Any]
    domain: Dict[str, Any]
    note: str = CERTIFICATE_NOTE

    @property
    def spatial_passed(self) -> bool:
        return self.test3.passed

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "test1": self.test1.to_dict(),
            "test2": self.test2.to_dict(),
            "test3": self.test3.to_dict(),
            "spatial_passed": self.spatial_passed,
            "agreement": self.agreement,
            "witness": self.witness,
            "elliptic": self.elliptic,
            "min_ellipticity": self.min_ellipticity,
            "samples": self.samples,
            "attempts": self.attempts,
            "seed": self.seed,
            "n": self.n,
            "operator": self.operator,
            "domain": self.domain,
            "note": self.note,
        }


def sample_base_point(n: int, domain: CheckConfig, rng: np.random.Generator) -> BasePoint:
    """
    Draw (A, p, u, x, t) from the sampling box.

    A has log-uniform eigenvalues in [eig_lo, eig_hi] and a Haar-random
    eigenbasis.
    """
    lam = np.exp(rng.uniform(math.log(domain.eig_lo), math.log(domain.eig_hi), size=n))
    Q = np.eye(1) if n == 1 else ortho_group.rvs(dim=n, random_state=rng)
    A = (Q * lam) @ Q.T
    A = 0.5 * (A + A.T)
    return BasePoint(
        A=A,
        p=rng.uniform(domain.p_lo, domain.p_hi, size=n),
        u=float(rng.uniform(domain.u_lo, domain.u_hi)),
        x=rng.uniform(domain.x_lo, domain.x_hi, size=n),
        t=float(rng.uniform(domain.t_lo, domain.t_hi)),
    )


@dataclass
class _Chord:
    label: str
    dB: np.ndarray
    du: float
    dx: np.ndarray
    dt: float


def _chords(pt: BasePoint, B: np.ndarray, domain: CheckConfig, rng: np.random.Generator,
            with_time: bool = True) -> List[_Chord]:
    """
    Random chords plus one chord per coordinate block; B ± ½dB stays positive
    definite. Without ``with_time`` every chord keeps t fixed.
    """
    n = pt.n
    radius = domain.chord_scale * float(linalg.eigvalsh(B)[0])

    def unit_sym() -> np.ndarray:
        G = rng.standard_normal((n, n))
        G = 0.5 * (G + G.T)
        return G / np.linalg.norm(G)

    def unit_vec() -> np.ndarray:
        v = rng.standard_normal(n)
        return v / np.linalg.norm(v)

    time_scale = domain.chord_scale if with_time else 0.0
    zero_B, zero_x = np.zeros((n, n)), np.zeros(n)
    chords = [
        _Chord("random", radius * unit_sym(), domain.chord_scale * float(rng.standard_normal()),
               domain.chord_scale * unit_vec(), time_scale * float(rng.standard_normal()))
        for _ in range(domain.num_chords)
    ]
    chords += [
        _Chord("B", radius * unit_sym(), 0.0, zero_x, 0.0),
        _Chord("u", zero_B, domain.chord_scale, zero_x, 0.0),
        _Chord("x", zero_B, 0.0, domain.chord_scale * unit_vec(), 0.0),
    ]
    if with_time:
        chords.append(_Chord("t", zero_B, 0.0, zero_x, domain.chord_scale))
    return chords


@dataclass
class _SampleOutcome:
    q_min: float
    q_witness: Optional[Dict[str, Any]]
    q_failures: int
    q_evaluations: int
    chord_min: float
    chord_witness: Optional[Dict[str, Any]]
    chord_failures: int
    chord_evaluations: int
    spatial_min: float
    spatial_witness: Optional[Dict[str, Any]]
    spatial_failures: int
    spatial_evaluations: int
    ellipticity: float


def _chord_scan(spec: OperatorSpec, pt: BasePoint, B: np.ndarray, chords: List[_Chord],
                domain: CheckConfig, test: str) -> Tuple[float, Optional[Dict[str, Any]], int, int]:
    """Second differences of G(B, u, x, t) = F(B⁻¹, p, u, x, t) along chords through B."""
    s = np.linspace(-0.5, 0.5, domain.chord_points)
    chord_min, chord_witness, chord_failures, chord_evaluations = math.inf, None, 0, 0
    for chord in chords:
        values = []
        for si in s:
            A = _inverse(B + si * chord.dB)
            point = BasePoint(A, pt.p, pt.u + si * chord.du, pt.x + si * chord.dx, pt.t + si * chord.dt)
            if A is None or not spec.admissible(point):
                break
            values.append(spec.value(point))
        if len(values) < s.size:
            logger.debug(f"Skipping {chord.label} chord leaving the admissible set")
            continue
        chord_evaluations += 1
        values = np.asarray(values)
        second = values[:-2] - 2.0 * values[1:-1] + values[2:]
        worst = int(np.argmin(second))
        value = float(second[worst])
        failed = value < -domain.chord_tol
        chord_failures += int(failed)
        if value < chord_min and (failed or chord_failures == 0):
            chord_min = value
            if failed:
                chord_witness = {
                    "test": test,
                    "base_point": pt.to_dict(),
                    "chord": {"label": chord.label, "dB": chord.dB, "du": chord.du, "dx": chord.dx,
                              "dt": chord.dt},
                    "position": float(s[worst + 1]),
                    "value": value,
                }
    return chord_min, chord_witness, chord_failures, chord_evaluations


def _sample_tests(spec: OperatorSpec, pt: BasePoint, rng: np.random.Generator,
                  domain: CheckConfig) -> _SampleOutcome:
    bundle = evaluate(spec, pt)
    ellipticity = float(linalg.eigvalsh(0.5 * (bundle.F_A + bundle.F_A.T))[0])

    # Test 1: Q* over axis and random unit directions
    q_min, q_witness, q_failures = math.inf, None, 0
    directions = QDirection.axes(pt.n) + [QDirection.random(pt.n, rng) for _ in range(domain.num_directions)]
    for direction in directions:
        terms = qstar_terms(bundle, direction)
        value = sum(terms.values())
        threshold = (domain.tol_abs + domain.tol_rel * sum(abs(v) for v in terms.values())
                     + bundle.fd_noise * direction.l1() ** 2)
        failed = value < -threshold
        q_failures += int(failed)
        if value < q_min and (failed or q_failures == 0):
            q_min = value
            if failed:
                q_witness = {"test": "qstar", "base_point": pt.to_dict(), "direction": direction.to_dict(),
                             "value": value, "terms": terms}

    # Test 2: convexity of G(B, u, x, t) = F(B⁻¹, p, u, x, t) along chords through B = A⁻¹
    B = bundle.A_inv
    chord = _chord_scan(spec, pt, B, _chords(pt, B, domain, rng), domain, "chord")
    # Test 3: the same at fixed t, convexity in (B, u, x) only
    spatial = _chord_scan(spec, pt, B, _chords(pt, B, domain, rng, with_time=False), domain, "spatial_chord")
    return _SampleOutcome(q_min, q_witness, q_failures, len(directions), *chord, *spatial, ellipticity)


def _admissible_sample(spec: OperatorSpec, pt: BasePoint) -> bool:
    try:
        return spec.admissible(pt)
    except (DomainError, ArgumentError, FloatingPointError):
        return False


def check_structure_condition(spec: OperatorSpec, sampling: CheckConfig, n: int,
                              seed: Optional[int] = None, threads: int = 1) -> Verdict:
    """
    Sample the structure condition in two independent ways, plus its
    fixed-t variant.

    Test 1 requires Q*(X̃, X̃) >= -(tol_abs + tol_rel·Σ|terms| + noise) over
    sampled base points, canonical axis directions and random unit
    directions. Test 2 requires every second difference of
    G(B, u, x, t) = F(B⁻¹, p, u, x, t) along chords through B = A⁻¹ to be
    >= -chord_tol. Test 3 repeats test 2 with t held fixed, which checks
    convexity in (B, u, x) alone. Per-sample seeds are spawned from one
    SeedSequence, so the verdict does not depend on the thread count.

    Raises:
        ConfigError: no admissible sample found in the domain
    """
    seed = sampling.seed if seed is None else seed
    seed = 0 if seed is None else int(seed)
    sequences = np.random.SeedSequence(seed).spawn(sampling.num_points * MAX_ATTEMPTS_FACTOR)

    accepted: List[Tuple[BasePoint, np.random.Generator]] = []
    attempts = 0
    for sequence in sequences:
        if len(accepted) == sampling.num_points:
            break
        attempts += 1
        rng = np.random.default_rng(sequence)
        pt = sample_base_point(n, sampling, rng)
        if _admissible_sample(spec, pt):
            accepted.append((pt, rng))
    if not accepted:
        raise ConfigError(
            f"no admissible sample for {spec.term()} in {attempts} attempts",
            details={"attempts": attempts, "domain": sampling.domain()},
        )
    if len(accepted) < sampling.num_points:
        logger.warning(f"Only {len(accepted)} of {sampling.num_points} samples admissible")

    def run(item):
        return _sample_tests(spec, item[0], item[1], sampling)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run, accepted))
    else:
        outcomes = [run(item) for item in accepted]

    test1 = ConditionCheck("qstar", True, 0, math.inf)
    test2 = ConditionCheck("chord_convexity", True, 0, math.inf)
    test3 = ConditionCheck("spatial_chord_convexity", True, 0, math.inf)
    for outcome in outcomes:
        test1.evaluations += outcome.q_evaluations
        test2.evaluations += outcome.chord_evaluations
        test3.evaluations += outcome.spatial_evaluations
        _merge(test1, outcome.q_min, outcome.q_witness, outcome.q_failures)
        _merge(test2, outcome.chord_min, outcome.chord_witness, outcome.chord_failures)
        _merge(test3, outcome.spatial_min, outcome.spatial_witness, outcome.spatial_failures)

    min_ellipticity = min(outcome.ellipticity for outcome in outcomes)
    agreement = test1.passed == test2.passed
    if not agreement:
        logger.warning(f"Structure tests disagree for {spec.term()}: "
                       f"qstar={'pass' if test1.passed else 'fail'}, "
                       f"chords={'pass' if test2.passed else 'fail'}")
    if test2.passed and not test3.passed:
        logger.warning(f"{spec.term()} passes the spacetime chords but fails at fixed t")
    verdict = Verdict(
        passed=test1.passed and test2.passed,
        test1=test1,
        test2=test2,
        test3=test3,
        agreement=agreement,
        witness=test1.witness or test2.witness,
        elliptic=min_ellipticity > sampling.ellipticity_tol,
        min_ellipticity=min_ellipticity,
        samples=len(accepted),
        attempts=attempts,
        seed=seed,
        n=n,
        operator=spec.describe(),
        domain=sampling.domain(),
    )
    logger.info(f"Structure check for {spec.term()}: {'pass' if verdict.passed else 'fail'} "
                f"({verdict.samples} samples, seed {seed})")
    return verdict

def _merge(check: ConditionCheck, value: float, witness: Optional[dict], failures: int) -> None:
    """Fold one sample into a test result; the reported minimum prefers failing evidence."""
    if failures:
        if check.passed or value < check.min_value:
            check.min_value = value
            check.witness = witness
        check.passed = False
    elif check.passed:
        check.min_value = min(check.min_value, value)
