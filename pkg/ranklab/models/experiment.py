"""
Experiment Models

Pydantic models for experiment files. An experiment file is a flat text
file of ``section.key = value`` lines:

    # heat flow of a single exponential wave
    grid.n = 1
    grid.points = 17
    grid.dt = 0.001
    grid.t1 = 0.01
    operator.kind = heat
    initial.kind = exp_wave
    initial.waves = 1

Vectors are comma separated, matrices separate rows with ``;``.
"""

import logging
import re
from pathlib import Path
from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..common.exceptions import ArgumentError, ConfigError

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e6


def parse_vector(text: Union[str, float, List[float]]) -> List[float]:
    """Parse ``"1,2,3"`` into a list of floats."""
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    parts = [p.strip() for p in str(text).split(",") if p.strip()]
    if not parts:
        raise ArgumentError(f"empty vector literal: {text!r}")
    try:
        return [float(p) for p in parts]
    except ValueError as e:
        raise ArgumentError(f"cannot parse vector literal {text!r}", details={"literal": str(text)}) from e


def parse_matrix(text: Union[str, List[List[float]]]) -> List[List[float]]:
    """Parse ``"1,0;0,2"`` into a list of rows; rows must have equal length."""
    if isinstance(text, (list, tuple)):
        rows = [parse_vector(r) for r in text]
    else:
        rows = [parse_vector(r) for r in str(text).split(";") if r.strip()]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ArgumentError(f"ragged or empty matrix literal: {text!r}", details={"literal": str(text)})
    return rows


def parse_waves(text: Union[str, List[List[float]]]) -> List[List[float]]:
    """Wave vectors are rows of a matrix literal; an empty value means no waves."""
    if isinstance(text, str) and not text.strip():
        return []
    return parse_matrix(text)


def split_terms(text: Union[str, List[str]]) -> List[str]:
    """Split ``"linear, hessian_quotient(3,1)"`` on commas outside parentheses."""
    if isinstance(text, (list, tuple)):
        return [str(t).strip() for t in text]
    terms = re.findall(r"[A-Za-z_][A-Za-z0-9_]*(?:\([^)]*\))?", str(text))
    if not terms:
        raise ArgumentError(f"cannot parse operator children {text!r}")
    return terms


def _words(text: Union[str, List[str]]) -> List[str]:
    if isinstance(text, (list, tuple)):
        return [str(t).strip() for t in text]
    return [w.strip() for w in str(text).split(",") if w.strip()]


class GridConfig(BaseModel):
    """Uniform spacetime grid of the experiment."""
    model_config = ConfigDict(extra="forbid")

    n: int = Field(1, ge=1, le=3, description="Spatial dimension")
    lo: List[float] = Field(default_factory=lambda: [0.0], description="Box lower corner")
    hi: List[float] = Field(default_factory=lambda: [1.0], description="Box upper corner")
    points: List[int] = Field(default_factory=lambda: [17], description="Points per axis")
    dt: float = Field(1e-3, gt=0, description="Time step")
    t0: float = Field(0.0, description="Initial time")
    t1: float = Field(0.01, description="Final time")

    @field_validator("lo", "hi", mode="before")
    @classmethod
    def _vector(cls, value):
        return parse_vector(value)

    @field_validator("points", mode="before")
    @classmethod
    def _points(cls, value):
        return [int(round(v)) for v in parse_vector(value)]

    @model_validator(mode="after")
    def _broadcast(self):
        for name in ("lo", "hi", "points"):
            values = getattr(self, name)
            if len(values) == 1:
                setattr(self, name, values * self.n)
            elif len(values) != self.n:
                raise ValueError(f"grid.{name} needs 1 or {self.n} entries")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValueError("grid.hi must exceed grid.lo on every axis")
        if any(not 8 <= p <= 257 for p in self.points):
            raise ValueError("grid.points must lie in [8, 257]")
        if self.t1 <= self.t0:
            raise ValueError("grid.t1 must exceed grid.t0")
        return self


class OperatorConfig(BaseModel):
    """Operator F(A, p, u, x, t) of the flow u_t = F(D²u, Du, u, x, t)."""
    model_config = ConfigDict(extra="forbid")

    kind: Literal["heat", "linear", "hessian_power", "hessian_quotient", "composition", "custom"] = "heat"
    k: Optional[int] = Field(None, ge=1)
    l: Optional[int] = Field(None, ge=1)
    coeff: Optional[List[List[float]]] = None
    drift: Optional[List[float]] = None
    potential: float = 0.0
    source: float = 0.0
    children: List[str] = Field(default_factory=list)
    g: str = "sum"
    alpha: Optional[float] = None
    weights: Optional[List[float]] = None
    name: Optional[str] = None

    @field_validator("coeff", mode="before")
    @classmethod
    def _matrix(cls, value):
        return None if value is None else parse_matrix(value)

    @field_validator("drift", "weights", mode="before")
    @classmethod
    def _vector(cls, value):
        return None if value is None else parse_vector(value)

    @field_validator("children", mode="before")
    @classmethod
    def _children(cls, value):
        return split_terms(value)

    @model_validator(mode="after")
    def _required(self):
        if self.kind in ("hessian_power", "hessian_quotient") and self.k is None:
            raise ValueError(f"operator.k is required for {self.kind}")
        if self.kind == "hessian_quotient" and self.l is None:
            raise ValueError("operator.l is required for hessian_quotient")
        if self.kind == "composition" and not self.children:
            raise ValueError("operator.children is required for composition")
        if self.kind == "custom" and not self.name:
            raise ValueError("operator.name is required for custom")
        return self


class InitialConfig(BaseModel):
    """Closed-form initial data; with source = closed_form the whole run is sampled."""
    model_config = ConfigDict(extra="forbid")

    kind: Literal["exp_wave", "quadratic_drift", "superposition"] = "exp_wave"
    waves: List[List[float]] = Field(default_factory=list)
    q: Optional[List[List[float]]] = None
    b: Optional[List[float]] = None
    c: float = 0.0
    source: Literal["solve", "closed_form"] = "solve"

    @field_validator("waves", mode="before")
    @classmethod
    def _waves(cls, value):
        return parse_waves(value)

    @field_validator("q", mode="before")
    @classmethod
    def _matrix(cls, value):
        return None if value is None else parse_matrix(value)

    @field_validator("b", mode="before")
    @classmethod
    def _vector(cls, value):
        return None if value is None else parse_vector(value)


class BoundaryConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["exact", "frozen"] = "exact"


class VerifyConfig(BaseModel):
    """Verification tolerances and test-function variants."""
    model_config = ConfigDict(extra="forbid")

    l: Optional[int] = Field(None, ge=0, description="Fixed l; default is the frame's minimal rank")
    rank_tol: float = Field(1e-8, gt=0)
    psd_tol: float = Field(1e-2, gt=0, description="Relative PSD slack for the CASE classifier")
    zero_branch: float = Field(1e-10, gt=0)
    residual_floor: float = Field(1e-12, gt=0)
    margin: int = Field(2, ge=2)
    stride: int = Field(1, ge=1, description="Verify every stride-th frame")
    block: Literal["spacetime", "spatial"] = "spacetime"
    variant: Literal["simple", "bian_guan", "bian_guan_spacetime"] = "simple"

    @field_validator("variant", "block", mode="before")
    @classmethod
    def _strip(cls, value):
        return str(value).strip()


class CheckConfig(BaseModel):
    """Sampling domain for the ellipticity and structure-condition checks."""
    model_config = ConfigDict(extra="forbid")

    num_points: int = Field(200, ge=1)
    num_directions: int = Field(16, ge=1)
    num_chords: int = Field(4, ge=0)
    chord_points: int = Field(64, ge=3)
    chord_scale: float = Field(0.25, gt=0, le=1)
    seed: Optional[int] = Field(None, ge=0)
    eig_lo: float = Field(0.2, gt=0)
    eig_hi: float = Field(5.0, gt=0)
    p_lo: float = -1.0
    p_hi: float = 1.0
    u_lo: float = -1.0
    u_hi: float = 1.0
    x_lo: float = -1.0
    x_hi: float = 1.0
    t_lo: float = 0.0
    t_hi: float = 1.0
    tol_abs: float = Field(1e-10, gt=0)
    tol_rel: float = Field(1e-6, gt=0)
    chord_tol: float = Field(1e-8, gt=0)
    ellipticity_tol: float = Field(1e-12, gt=0)

    @model_validator(mode="after")
    def _boxes(self):
        if self.eig_hi <= self.eig_lo:
            raise ValueError("check.eig_hi must exceed check.eig_lo")
        if self.eig_hi / self.eig_lo > MAX_CONDITION:
            raise ValueError(f"condition number eig_hi/eig_lo exceeds {MAX_CONDITION:g}")
        for name in ("p", "u", "x", "t"):
            if getattr(self, f"{name}_hi") < getattr(self, f"{name}_lo"):
                raise ValueError(f"check.{name}_hi must not be below check.{name}_lo")
        return self

    def domain(self) -> Dict[str, List[float]]:
        """The sampling box, as recorded in verdicts."""
        return {
            "eigenvalues": [self.eig_lo, self.eig_hi],
            "p": [self.p_lo, self.p_hi],
            "u": [self.u_lo, self.u_hi],
            "x": [self.x_lo, self.x_hi],
            "t": [self.t_lo, self.t_hi],
        }


class OutputConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dir: Optional[str] = None
    formats: List[Literal["binary", "csv", "json"]] = Field(
        default_factory=lambda: ["binary", "csv", "json"]
    )

    @field_validator("formats", mode="before")
    @classmethod
    def _formats(cls, value):
        return _words(value)


class ExperimentConfig(BaseModel):
    """A complete experiment: grid, operator, initial data, verification and output."""
    model_config = ConfigDict(extra="forbid")

    grid: GridConfig = Field(default_factory=GridConfig)
    operator: OperatorConfig = Field(default_factory=OperatorConfig)
    initial: InitialConfig = Field(default_factory=InitialConfig)
    boundary: BoundaryConfig = Field(default_factory=BoundaryConfig)
    verify: VerifyConfig = Field(default_factory=VerifyConfig)
    check: CheckConfig = Field(default_factory=CheckConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)


def parse_flat(text: str, source: str = "<string>") -> Dict[str, Dict[str, str]]:
    """
    Parse flat ``section.key = value`` text into a nested dict of strings.

    Raises:
        ConfigError: on a malformed line or a duplicate key
    """
    tree: Dict[str, Dict[str, str]] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        section, dot, name = key.partition(".")
        if not sep or not dot or not section or not name:
            raise ConfigError(
                f"{source}:{number}: expected 'section.key = value'",
                details={"line": number, "text": raw},
            )
        entries = tree.setdefault(section, {})
        if name in entries:
            raise ConfigError(f"{source}:{number}: duplicate key {key}", details={"line": number, "key": key})
        entries[name] = value.strip()
    return tree


def config_from_text(text: str, source: str = "<string>") -> ExperimentConfig:
    """Validate flat experiment text into an ExperimentConfig."""
    tree = parse_flat(text, source)
    try:
        return ExperimentConfig.model_validate(tree)
    except ValidationError as e:
        errors = [
            {"loc": ".".join(str(part) for part in err["loc"]), "msg": err["msg"]}
            for err in e.errors()
        ]
        raise ConfigError(f"{source}: invalid experiment configuration", details={"errors": errors}) from e


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Load an experiment file.

    Raises:
        ConfigError: missing file, malformed line, unknown key or invalid value
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}", details={"path": str(path)}) from e
    config = config_from_text(text, source=str(path))
    logger.debug(f"Loaded experiment config from {path}")
    return config
