"""
Data models for engine settings, sampling, run configs and reports.
"""

import math
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator, validator

SCHEMA_VERSION = "1.0"
COEFFICIENT_NAMES: Tuple[str, ...] = ("A", "B", "C", "D", "E")
TWO_FORM_NAMES: Tuple[str, ...] = ("c_xy", "c_xp", "c_xq", "c_yp", "c_yq", "c_pq")
VARIABLE_NAMES: Tuple[str, ...] = ("x", "y", "p", "q")


class ExpressionValueError(ValueError):
    """Validation failure of an expression string; keeps the byte offset."""

    def __init__(self, message: str, offset: Optional[int] = None) -> None:
        self.offset = offset
        super().__init__(message)


def check_expression(source: str, allowed: Tuple[str, ...] = VARIABLE_NAMES) -> str:
    """Parse an expression string and check the variables it uses."""
    from .exceptions import ParseError
    from .expr import parse, variables

    try:
        tree = parse(source)
    except ParseError as exc:
        raise ExpressionValueError(str(exc), exc.offset) from exc
    extra = sorted(var.value for var in variables(tree) if var.value not in allowed)
    if extra:
        raise ExpressionValueError(f"Expression '{source}' may only use {', '.join(allowed)}; found {', '.join(extra)}")
    return source


class EngineSettings(BaseModel):
    """
    Engine-wide defaults, read from the environment.

    Attributes:
        zero_tol: Absolute tolerance of the numeric zero test
        matrix_tol: Max-norm tolerance for generalized-structure classification
        family_tol: Tolerance for the quadric family identities
        pfaffian_floor: Points with |Pf| below this are treated as degenerate
        points: Default number of sample points
        seed: Default RNG seed
        box: Default per-variable sampling interval
        retry_cap: Maximum number of draws of the rejection sampler
    """
    zero_tol: float = Field(1e-9, gt=0)
    matrix_tol: float = Field(1e-10, gt=0)
    family_tol: float = Field(1e-9, gt=0)
    pfaffian_floor: float = Field(1e-6, ge=0)
    points: int = Field(32, ge=1)
    seed: int = 0
    box: Tuple[float, float] = (-2.0, 2.0)
    retry_cap: int = Field(1_000_000, ge=1)

    @validator("box")
    def validate_box(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        """Ensure the default box is a proper finite interval."""
        lo, hi = v
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
            raise ValueError(f"Box must be a finite interval with lo < hi, got {v}")
        return v


class SamplePlan(BaseModel):
    """
    How to draw points of phase space for numeric verification.

    Attributes:
        count: Number of points to return
        seed: RNG seed; equal seeds give equal point lists
        bounds: One (lo, hi) interval per variable in the order x, y, p, q
        pfaffian_floor: When set together with a reference structure, only
            points with |Pf| >= floor are kept
        reference: MAStructure whose Pfaffian drives the rejection
        retry_cap: Maximum number of draws before giving up
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    count: int = Field(..., ge=1)
    seed: int = 0
    bounds: Tuple[Tuple[float, float], ...] = ((-2.0, 2.0),) * 4
    pfaffian_floor: Optional[float] = None
    reference: Optional[Any] = None
    retry_cap: int = Field(1_000_000, ge=1)

    @model_validator(mode="after")
    def validate_bounds(self) -> "SamplePlan":
        """Four finite intervals with lo < hi."""
        if len(self.bounds) != 4:
            raise ValueError(f"Need one interval per variable (4), got {len(self.bounds)}")
        for name, (lo, hi) in zip(VARIABLE_NAMES, self.bounds):
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
                raise ValueError(f"Interval for {name} must be finite with lo < hi, got ({lo}, {hi})")
        if self.pfaffian_floor is not None and self.pfaffian_floor < 0:
            raise ValueError("pfaffian_floor must be non-negative")
        return self

    @classmethod
    def default(cls, **overrides: Any) -> "SamplePlan":
        """Plan built from the environment defaults, with keyword overrides."""
        from .config import ENGINE_SETTINGS

        values: Dict[str, Any] = {
            "count": ENGINE_SETTINGS.points,
            "seed": ENGINE_SETTINGS.seed,
            "bounds": (ENGINE_SETTINGS.box,) * 4,
            "retry_cap": ENGINE_SETTINGS.retry_cap,
        }
        values.update(overrides)
        return cls(**values)

    def with_reference(self, reference: Any, floor: Optional[float] = None) -> "SamplePlan":
        """Same plan, rejecting points where the reference Pfaffian is below the floor."""
        from .config import ENGINE_SETTINGS

        floor = ENGINE_SETTINGS.pfaffian_floor if floor is None else floor
        return self.model_copy(update={"reference": reference, "pfaffian_floor": floor})

    def with_bounds(self, **intervals: Tuple[float, float]) -> "SamplePlan":
        """Same plan with some per-variable intervals replaced, e.g. p=(0.1, 2)."""
        bounds = list(self.bounds)
        for name, interval in intervals.items():
            bounds[VARIABLE_NAMES.index(name)] = tuple(interval)
        return SamplePlan(
            count=self.count,
            seed=self.seed,
            bounds=tuple(bounds),
            pfaffian_floor=self.pfaffian_floor,
            reference=self.reference,
            retry_cap=self.retry_cap,
        )

    @property
    def floor(self) -> float:
        """Degeneracy floor used for classification."""
        from .config import ENGINE_SETTINGS

        return ENGINE_SETTINGS.pfaffian_floor if self.pfaffian_floor is None else self.pfaffian_floor


# ---------------------------------------------------------------------------
# Run config
# ---------------------------------------------------------------------------

class TwoFormConfig(BaseModel):
    """A 2-form given by its six coefficients in the basis dx^dy, dx^dp, dx^dq, dy^dp, dy^dq, dp^dq."""
    model_config = ConfigDict(extra="forbid")

    c_xy: str
    c_xp: str
    c_xq: str
    c_yp: str
    c_yq: str
    c_pq: str

    @validator("c_xy", "c_xp", "c_xq", "c_yp", "c_yq", "c_pq")
    def validate_expression(cls, v: str) -> str:
        return check_expression(v)


class PresetConfig(BaseModel):
    """Reference to a structure preset in custom/structures."""
    name: str
    input: Dict[str, Any] = Field(default_factory=dict)


class StructureConfig(BaseModel):
    """
    Monge-Ampere structure, given in exactly one of three forms: the five
    effective coefficients A..E, a general two_form, or a named preset.
    """
    model_config = ConfigDict(extra="forbid")

    A: Optional[str] = None
    B: Optional[str] = None
    C: Optional[str] = None
    D: Optional[str] = None
    E: Optional[str] = None
    two_form: Optional[TwoFormConfig] = None
    preset: Optional[PresetConfig] = None

    @validator("A", "B", "C", "D", "E")
    def validate_expression(cls, v: Optional[str]) -> Optional[str]:
        return None if v is None else check_expression(v)

    @model_validator(mode="after")
    def validate_form(self) -> "StructureConfig":
        """Exactly one representation, and no coefficient missing."""
        given = [name for name in COEFFICIENT_NAMES if getattr(self, name) is not None]
        forms = sum([bool(given), self.two_form is not None, self.preset is not None])
        if forms != 1:
            raise ValueError("structure needs exactly one of: coefficients A..E, two_form, preset")
        missing = [name for name in COEFFICIENT_NAMES if given and getattr(self, name) is None]
        if missing:
            raise ValueError(f"missing coefficient(s): {', '.join(missing)}")
        return self

    def coefficients(self) -> Optional[Dict[str, str]]:
        if self.A is None:
            return None
        return {name: getattr(self, name) for name in COEFFICIENT_NAMES}


class SampleConfig(BaseModel):
    """Sampling section of the config; unset fields fall back to the environment."""
    model_config = ConfigDict(extra="forbid")

    count: Optional[int] = Field(None, ge=1)
    seed: Optional[int] = None
    bounds: Dict[str, Tuple[float, float]] = Field(default_factory=dict)
    pfaffian_floor: Optional[float] = Field(None, ge=0)

    @validator("bounds")
    def validate_bounds(cls, v: Dict[str, Tuple[float, float]]) -> Dict[str, Tuple[float, float]]:
        for name, (lo, hi) in v.items():
            if name not in VARIABLE_NAMES:
                raise ValueError(f"Unknown variable '{name}' in bounds")
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
                raise ValueError(f"Interval for {name} must be finite with lo < hi")
        return v


class ToleranceConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    zero: Optional[float] = Field(None, gt=0)
    matrix: Optional[float] = Field(None, gt=0)
    family: Optional[float] = Field(None, gt=0)


class RunConfig(BaseModel):
    """
    A complete engine run.

    Attributes:
        schema_version: Must match SCHEMA_VERSION
        name: Optional label echoed into the report
        structure: The Monge-Ampere structure under study
        sample: Sample plan settings
        eps2: Sign used for J_alpha
        eps3: Sign used for J_Omega
        region_sign: Declared Pfaffian sign for normalization; inferred from
            the classification when omitted
        family: Coefficient triples (a1, a2, a3) of family members to build
        solutions: Candidate solutions f(x, y) of the Monge-Ampere equation
        rescale: Rescaling function h to analyse
        divergence_phi: Function phi for the divergence condition
        probe_point: Point of the Nijenhuis probe; defaults to the first sample
        tolerances: Tolerance overrides
    """
    model_config = ConfigDict(extra="forbid")

    schema_version: str = SCHEMA_VERSION
    name: Optional[str] = None
    structure: StructureConfig
    sample: SampleConfig = Field(default_factory=SampleConfig)
    eps2: int = 1
    eps3: int = 1
    region_sign: Optional[Literal["+", "-"]] = None
    family: List[Tuple[float, float, float]] = Field(default_factory=list)
    solutions: List[str] = Field(default_factory=list)
    rescale: Optional[str] = None
    divergence_phi: Optional[str] = None
    probe_point: Optional[Tuple[float, float, float, float]] = None
    tolerances: ToleranceConfig = Field(default_factory=ToleranceConfig)

    @validator("schema_version")
    def validate_schema_version(cls, v: str) -> str:
        if v != SCHEMA_VERSION:
            raise ValueError(f"Unsupported schema_version '{v}', expected '{SCHEMA_VERSION}'")
        return v

    @validator("eps2", "eps3")
    def validate_sign(cls, v: int) -> int:
        if v not in (1, -1):
            raise ValueError("epsilon must be +1 or -1")
        return v

    @validator("solutions")
    def validate_solutions(cls, v: List[str]) -> List[str]:
        return [check_expression(source, allowed=("x", "y")) for source in v]

    @validator("rescale", "divergence_phi")
    def validate_expression(cls, v: Optional[str]) -> Optional[str]:
        return None if v is None else check_expression(v)


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

class StepRecord(BaseModel):
    """Outcome of one pipeline step."""
    name: str
    success: bool
    result: Optional[Dict[str, Any]] = None
    error: Optional[Dict[str, Any]] = None


class Report(BaseModel):
    """
    JSON report of a run.

    Attributes:
        tool: Tool name
        version: Tool version
        schema_version: Config schema version
        generated_at: UTC timestamp; the only field that varies between identical runs
        config: Echo of the validated config
        pfaffian_class: Classification of the structure on the sample set
        lr_integrability: Closedness verdict of the normalized form
        verification_failed: True when any step failed or any residual exceeded its tolerance
        steps: Per-step results in execution order
    """
    tool: str
    version: str
    schema_version: str = SCHEMA_VERSION
    generated_at: str
    config: Dict[str, Any]
    pfaffian_class: Optional[str] = None
    lr_integrability: Optional[str] = None
    verification_failed: bool = False
    steps: List[StepRecord] = Field(default_factory=list)

    def step(self, name: str) -> Optional[StepRecord]:
        for record in self.steps:
            if record.name == name:
                return record
        return None
