"""
Parabolic Flows on Uniform Grids

Closed-form reference solutions of the heat equation, an explicit
forward-Euler solver for u_t = F(D²u, Du, u, x, t) and extraction of
spacetime-Hessian fields from sampled solutions.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike

from .common.exceptions import ArgumentError, DivergenceError, DomainError, StabilityError
from .matrixkit import SpacetimeHessian
from .models.experiment import GridConfig, InitialConfig
from .operators import BasePoint, LinearOperator, OperatorSpec
from .symm import SymMatrix, eigenvalues

logger = logging.getLogger(__name__)

MIN_POINTS = 8
MAX_POINTS = 257
MAX_DIM = 3
OVERFLOW_LIMIT = 1e300
# Interior points sampled per frame for the nonlinear CFL bound
CFL_SAMPLES = 16


def _frozen(values: ArrayLike) -> np.ndarray:
    values = np.array(values, dtype=float)
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class GridSpec:
    """
    Uniform spacetime grid over a box.

    Attributes:
        n: spatial dimension, 1..3
        lo, hi: box corners per axis
        points: grid points per axis, 8..257
        dt: time step
        t0, t1: time horizon
    """
    n: int
    lo: Tuple[float, ...]
    hi: Tuple[float, ...]
    points: Tuple[int, ...]
    dt: float
    t0: float = 0.0
    t1: float = 1.0

    def __post_init__(self):
        if not 1 <= self.n <= MAX_DIM:
            raise ArgumentError(f"grid dimension must lie in [1, {MAX_DIM}]", details={"n": self.n})
        for name in ("lo", "hi", "points"):
            values = tuple(getattr(self, name))
            if len(values) == 1:
                values = values * self.n
            if len(values) != self.n:
                raise ArgumentError(f"grid {name} needs 1 or {self.n} entries", details={name: list(values)})
            object.__setattr__(self, name, values)
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        object.__setattr__(self, "points", tuple(int(v) for v in self.points))
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ArgumentError("grid hi must exceed lo on every axis",
                                details={"lo": list(self.lo), "hi": list(self.hi)})
        if any(not MIN_POINTS <= p <= MAX_POINTS for p in self.points):
            raise ArgumentError(f"points per axis must lie in [{MIN_POINTS}, {MAX_POINTS}]",
                                details={"points": list(self.points)})
        if not self.dt > 0:
            raise ArgumentError("dt must be positive", details={"dt": self.dt})
        if not self.t1 > self.t0:
            raise ArgumentError("t1 must exceed t0", details={"t0": self.t0, "t1": self.t1})

    @classmethod
    def from_config(cls, config: GridConfig) -> "GridSpec":
        return cls(config.n, tuple(config.lo), tuple(config.hi), tuple(config.points),
                   config.dt, config.t0, config.t1)

    @property
    def h(self) -> Tuple[float, ...]:
        return tuple((b - a) / (p - 1) for a, b, p in zip(self.lo, self.hi, self.points))

    @property
    def frames(self) -> int:
        return int(math.floor((self.t1 - self.t0) / self.dt + 1e-9)) + 1

    @property
    def axes(self) -> List[np.ndarray]:
        return [np.linspace(a, b, p) for a, b, p in zip(self.lo, self.hi, self.points)]

    @property
    def coordinates(self) -> np.ndarray:
        """Point coordinates, shape (*points, n)."""
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.frames)

    def interior(self, margin: int = 1) -> Tuple[slice, ...]:
        if any(p <= 2 * margin for p in self.points):
            raise ArgumentError("grid too small for the requested margin",
                                details={"points": list(self.points), "margin": margin})
        return tuple(slice(margin, p - margin) for p in self.points)

    def boundary_mask(self) -> np.ndarray:
        mask = np.ones(self.points, dtype=bool)
        mask[self.interior(1)] = False
        return mask

    def to_dict(self) -> dict:
        return {"n": self.n, "lo": list(self.lo), "hi": list(self.hi), "points": list(self.points),
                "dt": self.dt, "t0": self.t0, "t1": self.t1}


@dataclass(frozen=True)
class SolutionField:
    """
    Solution u sampled on every grid point and time level.

    Attributes:
        grid: the spacetime grid
        frames: read-only array of shape (grid.frames, *grid.points)
    """
    grid: GridSpec
    frames: np.ndarray

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=float)
        expected = (self.grid.frames,) + self.grid.points
        if frames.shape != expected:
            raise ArgumentError("solution frames do not match the grid",
                                details={"shape": list(frames.shape), "expected": list(expected)})
        if not np.all(np.isfinite(frames)):
            bad = int(np.argmax(~np.all(np.isfinite(frames.reshape(frames.shape[0], -1)), axis=1)))
            raise ArgumentError("solution contains non-finite values", details={"frame": bad})
        object.__setattr__(self, "frames", _frozen(frames))

    @property
    def count(self) -> int:
        return int(self.frames.shape[0])

    def time(self, m: int) -> float:
        return float(self.grid.times[m])


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClosedForm:
    """
    u(x, t) = Σ_k exp(a_k·x + |a_k|² t) + ½xᵀQx + b·x + c + tr(Q) t.

    Every such u solves u_t = Δu and is spacetime convex when Q is PSD.
    """
    n: int
    waves: np.ndarray = None
    Q: np.ndarray = None
    b: np.ndarray = None
    c: float = 0.0
    label: str = "superposition"

    def __post_init__(self):
        n = self.n
        waves = np.zeros((0, n)) if self.waves is None else np.atleast_2d(np.asarray(self.waves, dtype=float))
        if waves.size and waves.shape[1] != n:
            raise ArgumentError("wave vectors must have the grid dimension",
                                details={"n": n, "wave": list(waves.shape)})
        waves = waves.reshape(-1, n)
        Q = np.zeros((n, n)) if self.Q is None else np.asarray(self.Q, dtype=float)
        if Q.shape != (n, n):
            raise ArgumentError("Q must be n x n", details={"n": n, "shape": list(Q.shape)})
        Q = SymMatrix(Q)
        if eigenvalues(Q)[0] < -1e-12 * max(1.0, float(np.max(np.abs(Q.entries)))):
            raise ArgumentError("Q must be positive semidefinite", details={"Q": Q.entries.tolist()})
        b = np.zeros(n) if self.b is None else np.asarray(self.b, dtype=float).reshape(-1)
        if b.size != n:
            raise ArgumentError("b must have the grid dimension", details={"n": n, "b": int(b.size)})
        object.__setattr__(self, "waves", _frozen(waves))
        object.__setattr__(self, "Q", Q.entries)
        object.__setattr__(self, "b", _frozen(b))
        object.__setattr__(self, "c", float(self.c))

    def value(self, x: ArrayLike, t: float) -> np.ndarray:
        """u at points x of shape (..., n)."""
        x = np.asarray(x, dtype=float)
        speeds = np.sum(self.waves ** 2, axis=1)
        u = np.sum(np.exp(x @ self.waves.T + speeds * t), axis=-1)
        u = u + 0.5 * np.einsum("...i,ij,...j->...", x, self.Q, x) + x @ self.b
        return u + self.c + np.trace(self.Q) * t

    def spacetime_hessian(self, x: ArrayLike, t: float) -> np.ndarray:
        """Exact spacetime Hessians, shape (..., n+1, n+1)."""
        x = np.asarray(x, dtype=float)
        n = self.n
        speeds = np.sum(self.waves ** 2, axis=1)
        lifted = np.concatenate([self.waves, speeds[:, None]], axis=1)
        weights = np.exp(x @ self.waves.T + speeds * t)
        H = np.einsum("...k,ki,kj->...ij", weights, lifted, lifted)
        H[..., :n, :n] += self.Q
        return H

    def sampler(self, grid: GridSpec) -> Callable[[float], np.ndarray]:
        """Frame sampler t ↦ u(·, t) on the grid points."""
        coordinates = grid.coordinates
        return lambda t: self.value(coordinates, t)

    def sample(self, grid: GridSpec) -> "SolutionField":
        frame = self.sampler(grid)
        return SolutionField(grid, np.stack([frame(t) for t in grid.times]))

    def describe(self) -> dict:
        return {"kind": self.label, "waves": self.waves, "Q": self.Q, "b": self.b, "c": self.c}


def exp_wave(*waves: ArrayLike) -> ClosedForm:
    """Σ_k exp(a_k·x + |a_k|² t); each wave a_k is a vector of length n."""
    waves = np.atleast_2d(np.asarray(waves, dtype=float))
    if waves.size == 0:
        raise ArgumentError("exp_wave needs at least one wave vector")
    return ClosedForm(waves.shape[1], waves=waves, label="exp_wave")


def quadratic_drift(Q: ArrayLike, b: Optional[ArrayLike] = None, c: float = 0.0) -> ClosedForm:
    """½xᵀQx + b·x + c + tr(Q) t for PSD Q."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    return ClosedForm(Q.shape[0], Q=Q, b=b, c=c, label="quadratic_drift")


def superposition(waves: ArrayLike, Q: Optional[ArrayLike] = None, b: Optional[ArrayLike] = None,
                  c: float = 0.0, n: Optional[int] = None) -> ClosedForm:
    waves = np.asarray(waves, dtype=float)
    if n is None:
        n = waves.shape[-1] if waves.size else np.atleast_2d(np.asarray(Q)).shape[0]
    return ClosedForm(n, waves=waves if waves.size else None, Q=Q, b=b, c=c)


def closed_form_from_config(config: InitialConfig, n: int) -> ClosedForm:
    """Build the closed form named by an experiment's ``initial.*`` keys."""
    if config.kind == "exp_wave":
        if not config.waves:
            raise ArgumentError("initial.waves is required for exp_wave")
        return ClosedForm(n, waves=config.waves, label="exp_wave")
    if config.kind == "quadratic_drift":
        if config.q is None:
            raise ArgumentError("initial.q is required for quadratic_drift")
        return ClosedForm(n, Q=config.q, b=config.b, c=config.c, label="quadratic_drift")
    return ClosedForm(n, waves=config.waves or None, Q=config.q, b=config.b, c=config.c)


def exact_solution(closed_form: ClosedForm, grid: GridSpec) -> SolutionField:
    """Sample a closed-form heat solution on every grid point and time level."""
    if closed_form.n != grid.n:
        raise ArgumentError("closed form and grid dimensions differ",
                            details={"closed_form": closed_form.n, "grid": grid.n})
    return closed_form.sample(grid)


# ---------------------------------------------------------------------------
# Stencils
# ---------------------------------------------------------------------------

def _window(u: np.ndarray, margin: int, offsets: Sequence[int] = ()) -> np.ndarray:
    """u on the interior window at the given margin, shifted by offsets per axis."""
    offsets = list(offsets) + [0] * (u.ndim - len(offsets))
    return u[tuple(slice(margin + o, n - margin + o) for n, o in zip(u.shape, offsets))]


def _unit(n: int, *pairs: Tuple[int, int]) -> List[int]:
    offset = [0] * n
    for axis, step in pairs:
        offset[axis] += step
    return offset


def spatial_derivatives(u: np.ndarray, h: Sequence[float], margin: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """
    Central-difference D²u and Du on the interior window.

    Returns:
        (D2, Du) of shapes (*interior, n, n) and (*interior, n); D2 is exactly
        symmetric since each mixed entry comes from a single formula
    """
    n = u.ndim
    center = _window(u, margin)
    D2 = np.empty(center.shape + (n, n))
    Du = np.empty(center.shape + (n,))
    for i in range(n):
        plus = _window(u, margin, _unit(n, (i, 1)))
        minus = _window(u, margin, _unit(n, (i, -1)))
        D2[..., i, i] = (plus - 2.0 * center + minus) / h[i] ** 2
        Du[..., i] = (plus - minus) / (2.0 * h[i])
        for j in range(i + 1, n):
            mixed = (
                _window(u, margin, _unit(n, (i, 1), (j, 1)))
                - _window(u, margin, _unit(n, (i, 1), (j, -1)))
                - _window(u, margin, _unit(n, (i, -1), (j, 1)))
                + _window(u, margin, _unit(n, (i, -1), (j, -1)))
            ) / (4.0 * h[i] * h[j])
            D2[..., i, j] = D2[..., j, i] = mixed
    return D2, Du


def _gradient(u: np.ndarray, h: Sequence[float], margin: int) -> np.ndarray:
    n = u.ndim
    return np.stack([
        (_window(u, margin, _unit(n, (i, 1))) - _window(u, margin, _unit(n, (i, -1)))) / (2.0 * h[i])
        for i in range(n)
    ], axis=-1)


def _evaluate(spec: OperatorSpec, D2: np.ndarray, Du: np.ndarray, u: np.ndarray, x: np.ndarray,
              t: float, threads: int = 1) -> np.ndarray:
    """F over interior points, optionally split into chunks along the first axis."""
    if threads <= 1 or D2.shape[0] < 2 * threads:
        return np.asarray(spec.value_field(D2, Du, u, x, t), dtype=float)
    chunks = np.array_split(np.arange(D2.shape[0]), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = pool.map(lambda rows: np.asarray(
            spec.value_field(D2[rows], Du[rows], u[rows], x[rows], t), dtype=float), chunks)
        return np.concatenate(list(parts), axis=0)


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Boundary:
    """Boundary values: ``exact`` from a frame sampler, ``frozen`` at initial values."""
    kind: str = "frozen"
    sampler: Optional[Callable[[float], np.ndarray]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("exact", "frozen"):
            raise ArgumentError(f"unknown boundary kind: {self.kind}", details={"kind": self.kind})
        if self.kind == "exact" and self.sampler is None:
            raise ArgumentError("exact boundary needs a sampler")

    @classmethod
    def frozen(cls) -> "Boundary":
        return cls("frozen")

    @classmethod
    def exact(cls, sampler: Callable[[float], np.ndarray]) -> "Boundary":
        return cls("exact", sampler)


def _linear_bound(spec: LinearOperator, grid: GridSpec) -> float:
    lam_max = float(eigenvalues(SymMatrix(spec.coefficient(grid.n)))[-1])
    if lam_max <= 0:
        return math.inf
    return min(grid.h) ** 2 / (2 * grid.n * lam_max)


def stability_bound(spec: OperatorSpec, grid: GridSpec, u: Optional[np.ndarray] = None,
                    t: Optional[float] = None) -> float:
    """
    Explicit Euler bound dt <= h_min² / (2n λ_max(F_A)).

    Linear operators use their coefficient; other operators sample F_A on up
    to 16 interior points of the frame u.
    """
    if isinstance(spec, LinearOperator):
        return _linear_bound(spec, grid)
    if u is None:
        raise ArgumentError("a frame is needed for the stability bound of a nonlinear operator")
    t = grid.t0 if t is None else t
    D2, Du = spatial_derivatives(np.asarray(u, dtype=float), grid.h)
    values = _window(np.asarray(u, dtype=float), 1)
    x = grid.coordinates[grid.interior(1)]
    count = values.size
    picks = np.unique(np.linspace(0, count - 1, min(CFL_SAMPLES, count)).round().astype(int))
    lam_max = 0.0
    sampled = 0
    for flat in picks:
        idx = np.unravel_index(int(flat), values.shape)
        A = D2[idx]
        pt = BasePoint(0.5 * (A + A.T), Du[idx], float(values[idx]), x[idx], float(t))
        try:
            F_A = spec.grad_A(pt)
        except DomainError:
            continue
        sampled += 1
        lam_max = max(lam_max, float(np.linalg.eigvalsh(0.5 * (F_A + F_A.T))[-1]))
    if not sampled:
        logger.warning("No admissible points for the stability bound; skipping the check")
        return math.inf
    if lam_max <= 0:
        return math.inf
    return min(grid.h) ** 2 / (2 * grid.n * lam_max)


def solve(spec: OperatorSpec, u0: ArrayLike, grid: GridSpec, boundary: Optional[Boundary] = None,
          threads: int = 1) -> SolutionField:
    """
    Explicit forward-Euler time stepping

        u^{m+1} = u^m + dt·F(D²u^m, Du^m, u^m, x, t_m)

    at interior points with central second-order stencils. Boundary values come
    from the exact sampler when given, else stay at their initial values.

    Raises:
        StabilityError: dt exceeds the explicit stability bound
        DivergenceError: non-finite or overflowing values, with the frame index
    """
    boundary = boundary or Boundary.frozen()
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != grid.points:
        raise ArgumentError("initial frame does not match the grid",
                            details={"shape": list(u0.shape), "points": list(grid.points)})
    if not np.all(np.isfinite(u0)):
        raise ArgumentError("initial frame contains non-finite values")
    if boundary.kind == "exact" and not (isinstance(spec, LinearOperator) and spec.is_heat):
        logger.warning(f"Exact boundary sampler used with {spec.term()}; closed forms solve the heat equation")

    linear = isinstance(spec, LinearOperator)
    if linear:
        bound = _linear_bound(spec, grid)
        if grid.dt > bound * (1 + 1e-12):
            raise StabilityError(grid.dt, bound)

    interior = grid.interior(1)
    x = grid.coordinates[interior]
    mask = grid.boundary_mask()
    times = grid.times
    frames = np.empty((grid.frames,) + grid.points)
    frames[0] = u0
    logger.info(f"Solving {spec.term()} on {grid.points} points, {grid.frames} frames, dt={grid.dt:g}")

    u = u0
    for m in range(grid.frames - 1):
        if not linear:
            bound = stability_bound(spec, grid, u, times[m])
            if grid.dt > bound * (1 + 1e-12):
                raise StabilityError(grid.dt, bound, frame=m)
        D2, Du = spatial_derivatives(u, grid.h)
        with np.errstate(over="ignore", invalid="ignore"):
            F = _evaluate(spec, D2, Du, u[interior], x, float(times[m]), threads)
            u_next = u.copy()
            u_next[interior] += grid.dt * F
        if boundary.kind == "exact":
            u_next[mask] = np.asarray(boundary.sampler(float(times[m + 1])))[mask]
        if not np.all(np.isfinite(u_next)) or np.max(np.abs(u_next)) > OVERFLOW_LIMIT:
            raise DivergenceError(m + 1)
        frames[m + 1] = u_next
        u = u_next
        logger.debug(f"Frame {m + 1} at t={times[m + 1]:g}")

    logger.info(f"Solve finished at t={times[-1]:g}")
    return SolutionField(grid, frames)


# ---------------------------------------------------------------------------
# Derivative fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HessianField:
    """
    Spacetime Hessians of one frame at interior points.

    Attributes:
        grid: the spacetime grid
        frame: frame index m
        t: time of the frame
        margin: interior margin in grid points
        matrices: read-only array (*interior, n+1, n+1)
    """
    grid: GridSpec
    frame: int
    t: float
    margin: int
    matrices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrices", _frozen(self.matrices))

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.matrices.shape[:-2]

    @property
    def spatial(self) -> np.ndarray:
        return self.matrices[..., : self.n, : self.n]

    @property
    def mixed(self) -> np.ndarray:
        return self.matrices[..., self.n, : self.n]

    @property
    def temporal(self) -> np.ndarray:
        return self.matrices[..., self.n, self.n]

    def hessian(self, index: Tuple[int, ...]) -> SpacetimeHessian:
        return SpacetimeHessian.from_matrix(self.matrices[tuple(index)])

    def points(self):
        """Iterate (interior index, SpacetimeHessian)."""
        for index in np.ndindex(*self.shape):
            yield index, self.hessian(index)

    def point_indices(self) -> np.ndarray:
        """Flat indices into the full grid of every interior point."""
        full = np.arange(int(np.prod(self.grid.points))).reshape(self.grid.points)
        return full[self.grid.interior(self.margin)]

    def coordinates(self) -> np.ndarray:
        return self.grid.coordinates[self.grid.interior(self.margin)]


def _check_frame(sol: SolutionField, m: int, lo: int, hi: int) -> None:
    if not lo <= m <= hi:
        raise ArgumentError(f"frame {m} out of range [{lo}, {hi}]",
                            details={"frame": m, "frames": sol.count})


def hessian_field(sol: SolutionField, m: int, margin: int = 1) -> HessianField:
    """
    Spacetime Hessians at frame m: central D²u in space, central Du_t and
    central u_tt in time.

    Raises:
        ArgumentError: m outside [1, frames-2] or margin < 1
    """
    _check_frame(sol, m, 1, sol.count - 2)
    if margin < 1:
        raise ArgumentError(f"margin must be >= 1, got {margin}", details={"margin": margin})
    grid = sol.grid
    grid.interior(margin)
    n, dt = grid.n, grid.dt
    before, current, after = sol.frames[m - 1], sol.frames[m], sol.frames[m + 1]

    D2, _ = spatial_derivatives(current, grid.h, margin)
    mixed = (_gradient(after, grid.h, margin) - _gradient(before, grid.h, margin)) / (2.0 * dt)
    temporal = (_window(after, margin) - 2.0 * _window(current, margin) + _window(before, margin)) / dt ** 2

    matrices = np.empty(D2.shape[:-2] + (n + 1, n + 1))
    matrices[..., :n, :n] = D2
    matrices[..., n, :n] = mixed
    matrices[..., :n, n] = mixed
    matrices[..., n, n] = temporal
    return HessianField(grid, m, sol.time(m), margin, matrices)


def spatial_hessian_field(sol: SolutionField, m: int, margin: int = 1) -> np.ndarray:
    """D²u at frame m on the interior window, shape (*interior, n, n)."""
    _check_frame(sol, m, 0, sol.count - 1)
    sol.grid.interior(margin)
    D2, _ = spatial_derivatives(sol.frames[m], sol.grid.h, margin)
    return D2


def residual_field(sol: SolutionField, spec: OperatorSpec, m: int, margin: int = 1) -> np.ndarray:
    """Forward-difference residual u_t - F(D²u, Du, u, x, t) at frame m."""
    _check_frame(sol, m, 0, sol.count - 2)
    grid = sol.grid
    window = grid.interior(margin)
    current = sol.frames[m]
    D2, Du = spatial_derivatives(current, grid.h, margin)
    u_t = (_window(sol.frames[m + 1], margin) - _window(current, margin)) / grid.dt
    F = spec.value_field(D2, Du, current[window], grid.coordinates[window], sol.time(m))
    return u_t - np.asarray(F, dtype=float)
