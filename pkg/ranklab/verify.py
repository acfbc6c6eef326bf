"""
Verification of Constant Rank Statements

Test functions φ built from σ_{l+1} of the spacetime (or spatial) Hessian,
rank timelines, the CASE 1 / CASE 2 classification of every interior point,
the differential inequality Σ F^{ij}φ_ij - φ_t <= C(φ + |∇φ|) and the
orchestration that turns a solution into CSV rows and a JSON summary.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .common.exceptions import ArgumentError, InconsistencyError, PreconditionError
from .matrixkit import (
    Case,
    CaseReport,
    bordered_sigma,
    classify_case,
    diagonalize_spatial,
    quarter_ratio,
)
from .models.experiment import VerifyConfig
from .operators import BasePoint, LinearOperator, OperatorSpec
from .pde import HessianField, SolutionField, hessian_field, spatial_derivatives
from .symm import sigma, sigma_all

logger = logging.getLogger(__name__)

VARIANTS = ("simple", "bian_guan", "bian_guan_spacetime")
BLOCKS = ("spacetime", "spatial")
DEFAULT_FLOOR = 1e-12
DEFAULT_ZERO_BRANCH = 1e-10
BORDERLINE_FACTOR = 10.0
# multiple of eps·max|u| per difference quotient below which φ is rounding noise
ROUNDING_FACTOR = 8.0

CSV_COLUMNS = [
    "frame", "t", "point_index", "rank", "case", "gap",
    "phi_simple", "phi_bg", "psd_defect", "lhs", "ratio",
]


def _spectra(matrices: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of stacked symmetric matrices; exactly diagonal ones are read off."""
    matrices = np.asarray(matrices, dtype=float)
    values = np.linalg.eigvalsh(matrices)
    diag = np.diagonal(matrices, axis1=-2, axis2=-1)
    off = matrices - diag[..., None] * np.eye(matrices.shape[-1])
    exact = ~np.any(off != 0, axis=(-2, -1))
    values[exact] = np.sort(diag[exact], axis=-1)
    return values


def _block(hf: HessianField, block: str) -> np.ndarray:
    if block not in BLOCKS:
        raise ArgumentError(f"unknown block: {block}", details={"block": block, "blocks": list(BLOCKS)})
    return hf.matrices if block == "spacetime" else hf.spatial


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhiField:
    """
    Test function φ at the interior points of one frame.

    Attributes:
        variant: simple, bian_guan or bian_guan_spacetime
        l: the rank the test function is built for
        values: array of the interior shape
    """
    variant: str
    l: int
    values: np.ndarray
    frame: int
    t: float


def phi_values(matrices: np.ndarray, l: int, quotient: bool,
               zero_branch: float = DEFAULT_ZERO_BRANCH) -> np.ndarray:
    """
    σ_{l+1}(W), plus q(W) = σ_{l+2}(W)/σ_{l+1}(W) when ``quotient`` is set.

    q takes its zero branch wherever σ_{l+1} <= zero_branch·(1 + |σ_l|).
    """
    e = sigma_all(_spectra(matrices), l + 2)
    phi = e[..., l + 1].copy()
    if quotient:
        live = e[..., l + 1] > zero_branch * (1.0 + np.abs(e[..., l]))
        safe = np.where(live, e[..., l + 1], 1.0)
        phi += np.where(live, e[..., l + 2] / safe, 0.0)
    return phi


def phi_field(hf: HessianField, l: int, variant: str = "simple",
              zero_branch: float = DEFAULT_ZERO_BRANCH) -> PhiField:
    """
    φ per interior point:

        simple               σ_{l+1}(D²_{x,t}u)
        bian_guan            σ_{l+1}(D²u) + q(D²u)
        bian_guan_spacetime  σ_{l+1}(D²_{x,t}u) + q(D²_{x,t}u)

    Raises:
        ArgumentError: l outside [0, n] or unknown variant
    """
    if variant not in VARIANTS:
        raise ArgumentError(f"unknown variant: {variant}", details={"variant": variant, "variants": list(VARIANTS)})
    if not 0 <= l <= hf.n:
        raise ArgumentError(f"l must lie in [0, {hf.n}], got {l}", details={"l": l, "n": hf.n})
    matrices = hf.spatial if variant == "bian_guan" else hf.matrices
    values = phi_values(matrices, l, quotient=variant != "simple", zero_branch=zero_branch)
    values.setflags(write=False)
    return PhiField(variant, l, values, hf.frame, hf.t)


def phi_noise(sol: SolutionField, hf: HessianField, l: int, variant: str = "simple") -> float:
    """
    Rounding level of φ on one frame.

    The difference quotients of D²_{x,t}u carry an absolute error of about
    eps·max|u|·(1/dt² + 1/(h dt) + 1/h²); σ_{l+1} scales it by max(1, |W|)^l.
    Values of φ at or below this level are indistinguishable from zero.
    """
    m = hf.frame
    u_scale = max(float(np.abs(sol.frames[k]).max()) for k in range(max(m - 1, 0), min(m + 2, sol.count)))
    h = min(sol.grid.h)
    dt = sol.grid.dt
    if variant == "bian_guan":
        inverse_steps = 1.0 / h ** 2
        matrices = hf.spatial
    else:
        inverse_steps = 1.0 / dt ** 2 + 1.0 / (h * dt) + 1.0 / h ** 2
        matrices = hf.matrices
    entry = ROUNDING_FACTOR * np.finfo(float).eps * u_scale * inverse_steps
    return entry * max(1.0, float(np.abs(matrices).max())) ** l


def snap_phi(values: np.ndarray, noise: float) -> np.ndarray:
    """φ with rounding-level values set to exactly zero."""
    return np.where(np.abs(values) <= noise, 0.0, values)


# ---------------------------------------------------------------------------
# Ranks
# ---------------------------------------------------------------------------

def rank_map(matrices: np.ndarray, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    """Numerical ranks of stacked matrices and a mask of points with borderline eigenvalues."""
    if tol <= 0:
        raise ArgumentError(f"tol must be positive, got {tol}", details={"tol": tol})
    values = _spectra(matrices)
    threshold = tol * np.maximum(1.0, values[..., -1])[..., None]
    ranks = np.count_nonzero(values > threshold, axis=-1)
    borderline = np.any((values > threshold / BORDERLINE_FACTOR) & (values <= threshold * BORDERLINE_FACTOR),
                        axis=-1)
    return ranks, borderline


@dataclass
class RankTimeline:
    """
    Minimal interior rank l(t) per verified frame.

    Attributes:
        frames: frame indices covered
        times: times of those frames
        rank_maps: per frame, the rank of every interior point
        l_per_frame: minimal rank per frame
        constancy: per frame, whether every interior rank equals l(t)
        monotone: l nondecreasing in frame index
        borderline_points: points with an eigenvalue within a factor 10 of the threshold
    """
    block: str
    tol: float
    frames: List[int]
    times: List[float]
    rank_maps: List[np.ndarray]
    l_per_frame: List[int]
    constancy: List[bool]
    monotone: bool
    borderline_points: int

    @property
    def constant(self) -> bool:
        return all(self.constancy)

    def rank_at(self, frame: int) -> np.ndarray:
        return self.rank_maps[self.frames.index(frame)]

    def l_at(self, frame: int) -> int:
        return self.l_per_frame[self.frames.index(frame)]

    def to_dict(self) -> dict:
        return {
            "block": self.block,
            "rank_tol": self.tol,
            "frames": self.frames,
            "l_per_frame": self.l_per_frame,
            "constancy": self.constant,
            "constancy_per_frame": self.constancy,
            "monotone": self.monotone,
            "borderline_points": self.borderline_points,
        }


def rank_timeline(sol: SolutionField, tol: float = 1e-8, block: str = "spacetime",
                  margin: int = 1) -> RankTimeline:
    """
    Rank of every interior Hessian on frames 1..M-2.

    ``block="spatial"`` ranks D²u only; the default ranks the full spacetime
    Hessian.

    Raises:
        ArgumentError: fewer than 3 frames
    """
    if sol.count < 3:
        raise ArgumentError("rank timeline needs at least 3 frames", details={"frames": sol.count})
    frames = list(range(1, sol.count - 1))
    rank_maps, l_per_frame, constancy = [], [], []
    borderline = 0
    for m in frames:
        ranks, near = rank_map(_block(hessian_field(sol, m, margin), block), tol)
        rank_maps.append(ranks)
        l_per_frame.append(int(ranks.min()))
        constancy.append(bool(np.all(ranks == ranks.min())))
        borderline += int(np.count_nonzero(near))
    monotone = all(a <= b for a, b in zip(l_per_frame, l_per_frame[1:]))
    if borderline:
        logger.warning(f"{borderline} point(s) have eigenvalues within a factor "
                       f"{BORDERLINE_FACTOR:g} of the rank threshold {tol:g}")
    logger.info(f"Rank timeline ({block}): l = {sorted(set(l_per_frame))}, "
                f"constant={all(constancy)}, monotone={monotone}")
    return RankTimeline(block, tol, frames, [float(sol.time(m)) for m in frames], rank_maps,
                        l_per_frame, constancy, monotone, borderline)


# ---------------------------------------------------------------------------
# CASE classification
# ---------------------------------------------------------------------------

@dataclass
class CaseSummary:
    """Per-frame aggregate of the CASE classification."""
    counts: Dict[str, int]
    max_case2_residual: float
    min_case1_gap: Optional[float]
    failures: int
    reports: Dict[Tuple[int, ...], Optional[CaseReport]] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "counts": self.counts,
            "max_case2_residual": self.max_case2_residual,
            "min_case1_gap": self.min_case1_gap,
            "failures": self.failures,
        }


def case_residuals(hf: HessianField, tol: float = 1e-8, psd_tol: Optional[float] = None,
                   strict: bool = True) -> CaseSummary:
    """
    classify_case at every interior point.

    With ``strict`` a failure is re-raised with the point index added to its
    details; otherwise it is counted and the point is reported as None.
    """
    counts = {Case.CASE1.value: 0, Case.CASE2.value: 0}
    max_residual = 0.0
    min_gap = None
    failures = 0
    reports: Dict[Tuple[int, ...], Optional[CaseReport]] = {}
    for index, W in hf.points():
        try:
            report = classify_case(W, tol, psd_tol)
        except (PreconditionError, InconsistencyError) as e:
            if strict:
                raise type(e)(e.message, details={**e.details, "point": list(index), "frame": hf.frame}) from e
            failures += 1
            reports[index] = None
            continue
        reports[index] = report
        counts[report.case_tag.value] += 1
        if report.case_tag is Case.CASE2:
            max_residual = max(max_residual, report.residual)
        else:
            min_gap = report.gap if min_gap is None else min(min_gap, report.gap)
    if failures:
        logger.warning(f"Frame {hf.frame}: {failures} point(s) could not be classified")
    return CaseSummary(counts, max_residual, min_gap, failures, reports)


def psd_monitor(hf: HessianField) -> float:
    """sup over the interior of max(0, -λ_min) of the spacetime Hessian."""
    return float(max(0.0, -float(np.min(_spectra(hf.matrices)[..., 0]))))


def psd_defects(hf: HessianField) -> np.ndarray:
    return np.maximum(0.0, -_spectra(hf.matrices)[..., 0])


def bordered_consistency(hf: HessianField, l: int) -> Dict[str, float]:
    """
    Check the bordered expansion at every interior point after rotating x so
    that D²u is diagonal:

        σ_{l+1}(D²_{x,t}u) = σ_{l+1}(D²u) + u_tt σ_l(D²u) - Σ u_it² σ_{l-1}(D²u|i)

    Returns the largest deviation relative to max(1, max|W|)^{l+1} and the
    largest violation of σ_{l+1}(D²_{x,t}u) <= σ_{l+1}(D²u) + u_tt σ_l(D²u).
    """
    if not 0 <= l <= hf.n:
        raise ArgumentError(f"l must lie in [0, {hf.n}], got {l}", details={"l": l, "n": hf.n})
    deviation = 0.0
    violation = 0.0
    for _, W in hf.points():
        full = sigma(np.linalg.eigvalsh(W.matrix), l + 1)
        rotated, _ = diagonalize_spatial(W)
        expansion = bordered_sigma(rotated.spatial, rotated.mixed, rotated.temporal, l)
        scale = max(1.0, float(np.max(np.abs(W.matrix)))) ** (l + 1)
        deviation = max(deviation, abs(full - expansion) / scale)
        d = rotated.spatial.diagonal()
        upper = sigma(d, l + 1) + rotated.temporal * sigma(d, l)
        violation = max(violation, (full - upper) / scale)
    return {"max_deviation": deviation, "upper_bound_violation": max(0.0, violation)}


def hessian_quarter_ratio(hf: HessianField, psd_tol: float = 1e-2) -> float:
    """Quarter-power gradient ratio of the spacetime Hessian field of one frame."""
    return quarter_ratio(hf.matrices, hf.grid.h, margin=1, psd_tol=psd_tol)


# ---------------------------------------------------------------------------
# Differential inequality
# ---------------------------------------------------------------------------

@dataclass
class ResidualReport:
    """
    LHS = Σ F^{ij}φ_ij - φ_t and its ratio to φ + |∇φ| + floor.

    Attributes:
        sup_lhs: sup over frames and interior points of LHS
        sup_ratio: sup of LHS/(|φ| + |∇φ| + floor), the empirical constant C
        floor: the ratio floor
        max_phi_noise: largest rounding level below which φ was set to zero
        frames: frames covered
        lhs, ratio, phi: per-frame arrays on the interior window
    """
    variant: str
    floor: float
    frames: List[int]
    l_per_frame: List[int]
    sup_lhs: float
    sup_ratio: float
    max_abs_lhs: float
    max_abs_phi: float
    max_phi_noise: float = 0.0
    lhs: Dict[int, np.ndarray] = field(repr=False, default_factory=dict)
    ratio: Dict[int, np.ndarray] = field(repr=False, default_factory=dict)
    phi: Dict[int, np.ndarray] = field(repr=False, default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "floor": self.floor,
            "frames": self.frames,
            "l_per_frame": self.l_per_frame,
            "sup_lhs": self.sup_lhs,
            "sup_ratio": self.sup_ratio,
            "max_abs_lhs": self.max_abs_lhs,
            "max_abs_phi": self.max_abs_phi,
            "max_phi_noise": self.max_phi_noise,
        }


def _coefficients(spec: OperatorSpec, sol: SolutionField, m: int, margin: int) -> np.ndarray:
    """F^{ij} at interior points of frame m, shape (*interior, n, n)."""
    grid = sol.grid
    n = grid.n
    if isinstance(spec, LinearOperator):
        shape = tuple(p - 2 * margin for p in grid.points)
        return np.broadcast_to(spec.coefficient(n), shape + (n, n))
    window = grid.interior(margin)
    u = sol.frames[m]
    D2, Du = spatial_derivatives(u, grid.h, margin)
    values = u[window]
    x = grid.coordinates[window]
    coefficients = np.empty(D2.shape)
    for index in np.ndindex(*values.shape):
        pt = BasePoint(D2[index], Du[index], float(values[index]), x[index], sol.time(m))
        coefficients[index] = spec.grad_A(pt)
    return coefficients


def diff_inequality(sol: SolutionField, spec: OperatorSpec, l: Optional[int] = None,
                    variant: str = "simple", margin: int = 2, floor: float = DEFAULT_FLOOR,
                    rank_tol: float = 1e-8, zero_branch: float = DEFAULT_ZERO_BRANCH) -> ResidualReport:
    """
    Measure Σ F^{ij}φ_ij - φ_t <= C(φ + |∇φ|) on frames 2..M-2.

    φ is evaluated on the window with margin - 1 so that its central
    stencils land on the window with the requested margin; φ_t is the
    backward difference. Values of φ at the rounding level of the frame
    (see phi_noise) are set to zero before differencing. Without an explicit
    l, each frame uses its own minimal rank (spatial for bian_guan, spacetime
    otherwise), capped at n.

    Raises:
        ArgumentError: fewer than 4 frames, margin < 2 or unknown variant
    """
    if variant not in VARIANTS:
        raise ArgumentError(f"unknown variant: {variant}", details={"variant": variant})
    if sol.count < 4:
        raise ArgumentError("differential inequality needs at least 4 frames", details={"frames": sol.count})
    if margin < 2:
        raise ArgumentError(f"margin must be >= 2, got {margin}", details={"margin": margin})
    if floor <= 0:
        raise ArgumentError("floor must be positive", details={"floor": floor})
    grid = sol.grid
    n = grid.n
    if l is not None and not 0 <= l <= n:
        raise ArgumentError(f"l must lie in [0, {n}], got {l}", details={"l": l, "n": n})

    cache: Dict[Tuple[int, int], np.ndarray] = {}
    fields: Dict[int, HessianField] = {}

    def hf_at(m: int) -> HessianField:
        if m not in fields:
            fields[m] = hessian_field(sol, m, margin - 1)
        return fields[m]

    noise_seen = [0.0]

    def phi_at(m: int, level: int) -> np.ndarray:
        if (m, level) not in cache:
            hf = hf_at(m)
            noise = phi_noise(sol, hf, level, variant)
            noise_seen[0] = max(noise_seen[0], noise)
            cache[(m, level)] = snap_phi(phi_field(hf, level, variant, zero_branch).values, noise)
        return cache[(m, level)]

    block = "spatial" if variant == "bian_guan" else "spacetime"
    frames = list(range(2, sol.count - 1))
    report = ResidualReport(variant, floor, frames, [], -np.inf, -np.inf, 0.0, 0.0)
    for m in frames:
        if l is None:
            ranks, _ = rank_map(_block(hf_at(m), block), rank_tol)
            level = min(int(ranks.min()), n)
        else:
            level = l
        phi = phi_at(m, level)
        phi_t = (phi - phi_at(m - 1, level))[(slice(1, -1),) * n] / grid.dt
        D2, Dphi = spatial_derivatives(phi, grid.h, 1)
        coefficients = _coefficients(spec, sol, m, margin)
        lhs = np.einsum("...ij,...ij->...", coefficients, D2) - phi_t
        center = phi[(slice(1, -1),) * n]
        ratio = lhs / (np.abs(center) + np.linalg.norm(Dphi, axis=-1) + floor)

        report.l_per_frame.append(level)
        report.lhs[m] = lhs
        report.ratio[m] = ratio
        report.phi[m] = center
        report.sup_lhs = max(report.sup_lhs, float(lhs.max()))
        report.sup_ratio = max(report.sup_ratio, float(ratio.max()))
        report.max_abs_lhs = max(report.max_abs_lhs, float(np.abs(lhs).max()))
        report.max_abs_phi = max(report.max_abs_phi, float(np.abs(center).max()))
        logger.debug(f"Frame {m}: l={level}, sup LHS={lhs.max():.3e}, sup ratio={ratio.max():.3e}")

    report.max_phi_noise = noise_seen[0]
    logger.info(f"Differential inequality ({variant}): sup LHS={report.sup_lhs:.6g}, "
                f"sup ratio={report.sup_ratio:.6g}")
    return report


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------

def _frame_rows(sol: SolutionField, m: int, timeline: RankTimeline, residual: ResidualReport,
                options: VerifyConfig) -> Tuple[List[List[Any]], Dict[str, Any]]:
    hf = hessian_field(sol, m, options.margin)
    n = hf.n
    ranks = timeline.rank_at(m)
    level = options.l if options.l is not None else min(timeline.l_at(m), n)
    cases = case_residuals(hf, options.rank_tol, options.psd_tol, strict=False)
    phi_simple = snap_phi(phi_field(hf, level, "simple", options.zero_branch).values,
                          phi_noise(sol, hf, level, "simple"))
    phi_bg = snap_phi(phi_field(hf, level, "bian_guan", options.zero_branch).values,
                      phi_noise(sol, hf, level, "bian_guan"))
    defects = psd_defects(hf)
    lhs = residual.lhs[m]
    ratio = residual.ratio[m]
    indices = hf.point_indices()

    rows = []
    for index in np.ndindex(*hf.shape):
        report = cases.reports[index]
        rows.append([
            m,
            hf.t,
            int(indices[index]),
            int(ranks[index]),
            report.case_tag.value if report else "NA",
            report.gap if report else float("nan"),
            float(phi_simple[index]),
            float(phi_bg[index]),
            float(defects[index]),
            float(lhs[index]),
            float(ratio[index]),
        ])
    stats = {
        "cases": cases,
        "psd_defect": float(defects.max()),
        "bordered": bordered_consistency(hf, level),
    }
    return rows, stats


def verify_solution(sol: SolutionField, spec: OperatorSpec, options: Optional[VerifyConfig] = None,
                    threads: int = 1) -> Tuple[Dict[str, Any], List[List[Any]]]:
    """
    Run every check on a solution.

    Returns:
        (summary, rows): the JSON summary (no paths or timestamps) and one CSV
        row per verified frame and interior point, columns as CSV_COLUMNS
    """
    options = options or VerifyConfig()
    if sol.count < 4:
        raise ArgumentError("verification needs at least 4 frames", details={"frames": sol.count})
    timeline = rank_timeline(sol, options.rank_tol, options.block, options.margin)
    residual = diff_inequality(sol, spec, options.l, options.variant, options.margin,
                               options.residual_floor, options.rank_tol, options.zero_branch)
    frames = residual.frames[:: options.stride]

    def run(m: int):
        return _frame_rows(sol, m, timeline, residual, options)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, frames))
    else:
        results = [run(m) for m in frames]

    rows: List[List[Any]] = []
    counts = {Case.CASE1.value: 0, Case.CASE2.value: 0}
    max_case2 = 0.0
    failures = 0
    max_defect = 0.0
    max_deviation = 0.0
    max_violation = 0.0
    for frame_rows, stats in results:
        rows.extend(frame_rows)
        cases: CaseSummary = stats["cases"]
        for tag, count in cases.counts.items():
            counts[tag] += count
        max_case2 = max(max_case2, cases.max_case2_residual)
        failures += cases.failures
        max_defect = max(max_defect, stats["psd_defect"])
        max_deviation = max(max_deviation, stats["bordered"]["max_deviation"])
        max_violation = max(max_violation, stats["bordered"]["upper_bound_violation"])

    middle = frames[len(frames) // 2]
    try:
        ratio = hessian_quarter_ratio(hessian_field(sol, middle, options.margin), options.psd_tol)
    except (PreconditionError, ArgumentError) as e:
        logger.warning(f"Quarter ratio skipped on frame {middle}: {e.message}")
        ratio = None

    summary = {
        "grid": sol.grid.to_dict(),
        "operator": spec.describe(),
        "block": options.block,
        "variant": options.variant,
        "rank_tol": options.rank_tol,
        "l": options.l,
        "frames_verified": frames,
        "timeline_frames": timeline.frames,
        "l_per_frame": timeline.l_per_frame,
        "constancy": timeline.constant,
        "constancy_per_frame": timeline.constancy,
        "monotone": timeline.monotone,
        "borderline_points": timeline.borderline_points,
        "sup_lhs": residual.sup_lhs,
        "sup_ratio": residual.sup_ratio,
        "max_abs_phi": residual.max_abs_phi,
        "max_phi_noise": residual.max_phi_noise,
        "max_case2_residual": max_case2,
        "case_counts": counts,
        "unclassified_points": failures,
        "max_psd_defect": max_defect,
        "bordered_max_deviation": max_deviation,
        "bordered_upper_bound_violation": max_violation,
        "quarter_ratio": ratio,
    }
    logger.info(f"Verified {len(frames)} frame(s): constancy={timeline.constant}, "
                f"monotone={timeline.monotone}, sup ratio={residual.sup_ratio:.6g}")
    return summary, rows
