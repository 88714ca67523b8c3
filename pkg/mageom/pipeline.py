"""
Run orchestration: load a JSON config, execute the verification steps in
order and assemble the report.

Each step returns a (success, result, error) tuple. Engine errors raised
inside a step become a structured step error; the run goes on with the next
step unless the failed step is required by everything after it.
"""

import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from . import __version__
from .config import ENGINE_SETTINGS
from .courant import divergence_check, lr_integrability, nijenhuis_probe
from .exceptions import ConfigError, DomainError, FamilyGateError, MageomError, SignValidationError
from .expr import Expr, Point, as_expr, evaluate, is_zero, parse, simplify, to_text
from .gen import (
    BUILDER_TYPES,
    ISOTROPIC_TYPES,
    RHO_TYPES,
    Classification,
    GenEndo,
    GenType,
    build_banos,
    builder_table,
    certify_isotropic,
    classify_gen,
    hitchin_residual,
    isotropy_check,
    j_alpha,
    j_omega,
    j_rho,
    j_rho_field,
)
from .ma import (
    MAStructure,
    PfaffianClass,
    SignedRegion,
    classify,
    det_check,
    equation_text,
    from_two_form,
    normalize,
    pfaffian,
    pfaffian_oracle,
    pullback_oracle,
    residual,
    rho_at,
)
from .models import ExpressionValueError, Report, RunConfig, SamplePlan, StepRecord, StructureConfig
from .phase import TwoForm, sample
from .quadric import (
    EPS1,
    FamilyCoeffs,
    anticommutativity_check,
    anticommutator_residuals,
    build_family_member,
    distinctness_check,
    k_value,
    member_residuals,
    quadric_type,
    relaxed_pair_check,
    rescale_transform,
    sample_admissible,
    structure_type,
    sweep,
)
from .utils import IDENTITY4, max_norm, setup_logging

logger = setup_logging(__name__)

TOOL_NAME = "mageom"
ORACLE_TOL = 1e-9
SPHERE_PAIRS = 100
INTEGRABLE, NOT_INTEGRABLE = "Integrable", "NotIntegrable"

StepOutcome = Tuple[bool, Optional[Dict[str, Any]], Optional[Dict[str, Any]]]


# ---------------------------------------------------------------------------
# Config loading
# ---------------------------------------------------------------------------

def _config_error(exc: ValidationError) -> ConfigError:
    """First validation error, with its location and parse offset when known."""
    first = exc.errors()[0]
    location = ".".join(str(part) for part in first.get("loc", ())) or "config"
    cause = (first.get("ctx") or {}).get("error")
    offset = cause.offset if isinstance(cause, ExpressionValueError) else None
    return ConfigError(first.get("msg", str(exc)), location, offset)


def parse_config(data: Any) -> RunConfig:
    """
    Validate a decoded config document.

    Raises:
        ConfigError: the document does not match the schema
    """
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise _config_error(exc) from exc


def load_config(path: Union[str, Path]) -> RunConfig:
    """
    Read and validate a JSON config file.

    Raises:
        OSError: the file cannot be read
        ConfigError: the file is not UTF-8, not valid JSON or not a valid config
    """
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError("invalid UTF-8", str(path), exc.start) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, f"line {exc.lineno} column {exc.colno}", exc.pos) from exc
    return parse_config(data)


@dataclass
class ResolvedStructure:
    """The structure of a config, plus what its preset says about it."""
    structure: MAStructure
    preset: Optional[str] = None
    stated_equation: Optional[str] = None
    notes: List[str] = field(default_factory=list)


def _parse_coefficients(coefficients: Dict[str, str], location: str) -> Dict[str, Expr]:
    parsed = {}
    for name, source in coefficients.items():
        try:
            parsed[name] = parse(source)
        except MageomError as exc:
            raise ConfigError(str(exc), f"{location}.{name}", getattr(exc, "offset", None)) from exc
    return parsed


def resolve_structure(config: StructureConfig, plan: Optional[SamplePlan] = None) -> ResolvedStructure:
    """
    Turn the structure section into an MAStructure.

    A general two_form is only tested for effectiveness when a plan is given.

    Raises:
        ConfigError: unknown preset, bad preset input or bad coefficients
        NotEffectiveError: the two_form is not effective on the plan's points
    """
    if config.preset is not None:
        from custom.structures import load_preset

        name = config.preset.name
        try:
            result = load_preset(name, config.preset.input)
        except FileNotFoundError as exc:
            raise ConfigError(f"Unknown preset '{name}'", "structure.preset.name") from exc
        except (AttributeError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "structure.preset.input") from exc
        coefficients = _parse_coefficients(result.coefficients, "structure.preset")
        return ResolvedStructure(
            MAStructure.from_mapping(coefficients), name, result.stated_equation, list(result.notes)
        )

    if config.two_form is not None:
        form = TwoForm(**_parse_coefficients(config.two_form.model_dump(), "structure.two_form"))
        return ResolvedStructure(from_two_form(form, plan, verify=plan is not None))

    return ResolvedStructure(MAStructure.from_mapping(_parse_coefficients(config.coefficients(), "structure")))


def validate_config(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Schema and expression check of a config file; no computation.

    Raises:
        OSError: the file cannot be read
        ConfigError: schema, JSON, expression or preset error
    """
    config = load_config(path)
    resolved = resolve_structure(config.structure)
    return {
        "status": "ok",
        "name": config.name,
        "structure": resolved.structure.to_dict(),
        "preset": resolved.preset,
    }


# ---------------------------------------------------------------------------
# Run context
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Tolerances:
    zero: float
    matrix: float
    family: float

    @classmethod
    def resolve(cls, config: RunConfig, override: Optional[float] = None) -> "Tolerances":
        """--tol beats the config file, which beats the environment."""
        if override is not None:
            return cls(override, override, override)
        given = config.tolerances
        return cls(
            given.zero if given.zero is not None else ENGINE_SETTINGS.zero_tol,
            given.matrix if given.matrix is not None else ENGINE_SETTINGS.matrix_tol,
            given.family if given.family is not None else ENGINE_SETTINGS.family_tol,
        )


def build_plan(config: RunConfig, seed: Optional[int] = None, points: Optional[int] = None) -> SamplePlan:
    """
    Sample plan from CLI overrides, then the config's sample section, then the environment.

    Raises:
        ConfigError: the merged values do not make a valid plan
    """
    section = config.sample
    overrides: Dict[str, Any] = {}
    count = points if points is not None else section.count
    if count is not None:
        overrides["count"] = count
    seed = seed if seed is not None else section.seed
    if seed is not None:
        overrides["seed"] = seed
    if section.pfaffian_floor is not None:
        overrides["pfaffian_floor"] = section.pfaffian_floor
    try:
        plan = SamplePlan.default(**overrides)
        if section.bounds:
            plan = plan.with_bounds(**section.bounds)
    except ValidationError as exc:
        raise _config_error(exc) from exc
    return plan


@dataclass
class RunContext:
    """State shared by the steps of one run."""
    config: RunConfig
    plan: SamplePlan
    tolerances: Tolerances
    resolved: Optional[ResolvedStructure] = None
    pf_class: Optional[PfaffianClass] = None
    region: Optional[SignedRegion] = None
    lr_verdict: Optional[str] = None

    @property
    def structure(self) -> MAStructure:
        return self.resolved.structure

    @property
    def regular_plan(self) -> SamplePlan:
        """The plan restricted to points with |Pf| >= floor."""
        return self.plan.with_reference(self.structure, self.plan.floor)

    def require_region(self) -> SignedRegion:
        """
        Raises:
            SignValidationError: no region of constant Pfaffian sign was established
        """
        if self.region is None:
            kind = self.pf_class.kind.value if self.pf_class else "unknown"
            witness = next(iter(self.pf_class.witnesses.values()), None) if self.pf_class else None
            raise SignValidationError(
                f"No region of constant Pfaffian sign (class {kind}); set region_sign and restrict the bounds",
                witness,
            )
        return self.region


def _outcome(result: Dict[str, Any], failures: List[str]) -> StepOutcome:
    if failures:
        return False, result, {"kind": "verification_failed", "message": "; ".join(failures)}
    return True, result, None


def _skipped(reason: str) -> StepOutcome:
    return True, {"skipped": reason}, None


# ---------------------------------------------------------------------------
# Steps
# ---------------------------------------------------------------------------

def _step_structure(ctx: RunContext) -> StepOutcome:
    ctx.resolved = resolve_structure(ctx.config.structure, ctx.plan)
    s = ctx.structure
    return True, {
        "coefficients": s.to_dict(),
        "two_form": s.to_two_form().to_dict(),
        "preset": ctx.resolved.preset,
        "notes": ctx.resolved.notes,
    }, None


def _step_classify(ctx: RunContext) -> StepOutcome:
    s = ctx.structure
    ctx.pf_class = classify(s, ctx.plan)
    pf = pfaffian(s)
    worst = 0.0
    for pt in sample(ctx.plan):
        try:
            value = evaluate(pf, pt)
            oracle = pfaffian_oracle(s, pt)
        except DomainError:
            continue
        worst = max(worst, abs(value - oracle) / (1.0 + abs(value)))
    result = {"pfaffian": to_text(pf), **ctx.pf_class.to_dict(), "oracle_max_residual": worst}
    failures = [] if worst <= ORACLE_TOL else [f"closed-form Pfaffian and wedge quotient differ by {worst:.3e}"]
    return _outcome(result, failures)


def _step_normalize(ctx: RunContext) -> StepOutcome:
    symbol = ctx.config.region_sign
    if symbol is None and ctx.pf_class is not None:
        symbol = {1: "+", -1: "-"}.get(ctx.pf_class.sign)
    if symbol is None:
        ctx.require_region()
    region = SignedRegion.parse(symbol, ctx.regular_plan)
    normalized = normalize(ctx.structure, region)
    ctx.region = region
    check = is_zero(simplify(pfaffian(normalized) - region.sign), region.plan, ctx.tolerances.zero)
    result = {
        "region_sign": symbol,
        "inferred": ctx.config.region_sign is None,
        "coefficients": normalized.to_dict(),
        "pfaffian_is_sign": check.to_dict(),
    }
    failures = [] if check.is_zero else [f"Pf(n(alpha)) != {region.sign} at {tuple(check.witness)}"]
    return _outcome(result, failures)


def _step_rho(ctx: RunContext) -> StepOutcome:
    s, plan = ctx.structure, ctx.regular_plan
    pf = pfaffian(s)
    worst, example = 0.0, None
    for pt in sample(plan):
        rho = rho_at(s, pt, plan.floor)
        sign = 1.0 if evaluate(pf, pt) > 0 else -1.0
        worst = max(worst, max_norm(rho @ rho + sign * IDENTITY4))
        if example is None:
            example = {"point": list(pt), "rho": rho.tolist()}
    determinant = det_check(s, plan)
    result = {"square_max_residual": worst, "example": example, "determinant": determinant}
    failures = []
    if worst > ctx.tolerances.matrix:
        failures.append(f"rho^2 + sgn(Pf) Id reaches {worst:.3e}")
    if not determinant["ok"]:
        failures.append(f"det(alpha) - Pf^2 reaches {determinant['max_residual']:.3e}")
    return _outcome(result, failures)


def _selected_residual(c: Classification) -> float:
    residuals = c.residuals
    square = residuals["square_plus"] if c.gamma1 == 1 else residuals["square_minus"]
    eta = residuals["eta_plus"] if c.gamma2 == 1 else residuals["eta_minus"]
    return max(square, eta)


def _classify_over(
    build: Callable[[Point], GenEndo],
    expected: Callable[[int], GenType],
    points: List[Tuple[Point, int]],
    tol: float,
) -> Dict[str, Any]:
    """Classify a builder at every point against the expected type for the point's Pf sign."""
    measured, wanted = [], []
    mismatches = isotropy_mismatches = 0
    worst = 0.0
    first = None
    for pt, sign in points:
        J = build(pt)
        classification = classify_gen(J, tol)
        target = expected(sign)
        measured.append(classification.gen_type.value)
        wanted.append(target.value)
        if classification.gen_type != target:
            mismatches += 1
            continue
        worst = max(worst, _selected_residual(classification))
        isotropy = isotropy_check(J, tol)
        if isotropy.isotropic != (classification.gen_type in ISOTROPIC_TYPES):
            isotropy_mismatches += 1
        if first is None:
            first = {"point": list(pt), "classification": classification.to_dict(), "isotropy": isotropy.to_dict()}
    return {
        "types": sorted(set(measured)),
        "expected": sorted(set(wanted)),
        "mismatches": mismatches,
        "isotropy_mismatches": isotropy_mismatches,
        "max_residual": worst,
        "first": first,
        "ok": mismatches == 0 and isotropy_mismatches == 0,
    }


def _step_structures(ctx: RunContext) -> StepOutcome:
    s, plan, tol = ctx.structure, ctx.regular_plan, ctx.tolerances.matrix
    eps2, eps3 = ctx.config.eps2, ctx.config.eps3
    pf = pfaffian(s)
    points = [(pt, 1 if evaluate(pf, pt) > 0 else -1) for pt in sample(plan)]
    builders: Dict[str, Tuple[Callable[[Point], GenEndo], Callable[[int], GenType]]] = {
        "J_rho(eps1=+1)": (lambda pt: j_rho(s, pt, 1, plan.floor), lambda sign: RHO_TYPES[(sign, 1)]),
        "J_rho(eps1=-1)": (lambda pt: j_rho(s, pt, -1, plan.floor), lambda sign: RHO_TYPES[(sign, -1)]),
        "J_alpha": (lambda pt: j_alpha(s, pt, eps2), lambda sign: BUILDER_TYPES[("J_alpha", eps2)]),
        "J_Omega": (lambda pt: j_omega(eps3), lambda sign: BUILDER_TYPES[("J_alpha", eps3)]),
    }
    result: Dict[str, Any] = {
        name: _classify_over(build, expected, points, tol) for name, (build, expected) in builders.items()
    }

    first = points[0][0]
    banos = build_banos(s, first, plan.floor)
    hitchin = max(hitchin_residual(s, pt) for pt, _ in points)
    result["banos"] = {
        "point": list(first),
        "classification": classify_gen(banos, tol).to_dict(),
        "ct_norm": max_norm(banos.ct),
        "hitchin_max_residual": hitchin,
    }
    failures = [f"{name} does not match the expected type" for name in builders if not result[name]["ok"]]
    if hitchin > tol:
        failures.append(f"Omega A - A^T Omega reaches {hitchin:.3e}")
    return _outcome(result, failures)


def _step_anticommutativity(ctx: RunContext) -> StepOutcome:
    s, plan, tol = ctx.structure, ctx.regular_plan, ctx.tolerances.family
    eps2, eps3 = ctx.config.eps2, ctx.config.eps3
    check = anticommutativity_check(s, eps2, eps3, plan, tol)
    pt = sample(plan)[0]
    forced = anticommutator_residuals(s, pt, EPS1, eps2, eps3)
    flipped = anticommutator_residuals(s, pt, -EPS1, eps2, eps3)
    limit = tol * (1.0 + max_norm(j_alpha(s, pt, eps2).matrix()))
    result = {
        **check.to_dict(),
        "point": list(pt),
        "residuals": {"eps1=-1": forced, "eps1=+1": flipped},
        "relaxed_pair": relaxed_pair_check(s, pt, eps2, eps3, tol),
    }
    failures = []
    # J_rho anticommutes with J_alpha and J_Omega for eps1 = -1 whatever alpha is
    for pair in ("rho_alpha", "rho_omega"):
        if forced[pair] > limit:
            failures.append(f"{{J_rho, J_{pair[4:]}}} = {forced[pair]:.3e} with eps1 = -1")
    if check.holds and forced["alpha_omega"] > limit:
        failures.append(f"Pf = eps2 eps3 holds but {{J_alpha, J_Omega}} = {forced['alpha_omega']:.3e}")
    return _outcome(result, failures)


def _family_member(ctx: RunContext, c: FamilyCoeffs, points: List[Point]) -> Dict[str, Any]:
    s, tol, floor = ctx.structure, ctx.tolerances.family, ctx.regular_plan.floor
    pf = pfaffian(s)
    cells: Dict[Tuple[int, int], Dict[str, Any]] = {}
    worst_square = worst_eta = 0.0
    type_mismatches = 0
    for pt in points:
        member = build_family_member(s, c, pt, floor, tol)
        sgn_pf = 1 if evaluate(pf, pt) > 0 else -1
        k = 1 if k_value(c, sgn_pf) > 0 else -1
        residuals = member_residuals(member, k)
        worst_square = max(worst_square, residuals["square"])
        worst_eta = max(worst_eta, residuals["eta"])
        if classify_gen(member, tol).gen_type != structure_type(k):
            type_mismatches += 1
        if (sgn_pf, k) not in cells:
            cells[(sgn_pf, k)] = {
                "sgn_pf": sgn_pf,
                "k": k,
                "quadric": quadric_type(sgn_pf, k, c.eps2, c.eps3).value,
                "structure_type": structure_type(k).value,
            }
    return {
        **c.to_dict(),
        "cells": [cells[key] for key in sorted(cells)],
        "max_square_residual": worst_square,
        "max_eta_residual": worst_eta,
        "type_mismatches": type_mismatches,
        "ok": type_mismatches == 0 and max(worst_square, worst_eta) <= tol,
    }


def _step_family(ctx: RunContext) -> StepOutcome:
    if not ctx.config.family:
        return _skipped("no family triples in config")
    points = sample(ctx.regular_plan)
    members, failures = [], []
    for triple in ctx.config.family:
        c = FamilyCoeffs(*triple, ctx.config.eps2, ctx.config.eps3)
        try:
            member = _family_member(ctx, c, points)
        except FamilyGateError as exc:
            logger.warning(f"Family member {triple} rejected: {exc}")
            members.append({**c.to_dict(), "error": exc.to_dict()})
            failures.append(f"{list(triple)}: {exc}")
            continue
        members.append(member)
        if not member["ok"]:
            failures.append(f"{list(triple)}: family identities fail")
    return _outcome({"members": members}, failures)


def _same_equation(left: str, right: str) -> bool:
    return "".join(left.split()) == "".join(right.split())


def _step_equation(ctx: RunContext) -> StepOutcome:
    s = ctx.structure
    derived = equation_text(s)
    stated = ctx.resolved.stated_equation
    matches = None
    if stated is not None:
        # an equation and its negative describe the same solutions
        matches = _same_equation(stated, derived) or _same_equation(stated, equation_text(s.scaled(as_expr(-1))))
        if not matches:
            logger.warning(f"Derived equation '{derived}' differs from the stated '{stated}'")
    return True, {"derived": derived, "stated": stated, "matches": matches}, None


def _step_solutions(ctx: RunContext) -> StepOutcome:
    if not ctx.config.solutions:
        return _skipped("no solution candidates in config")
    s, plan, tol = ctx.structure, ctx.plan, ctx.tolerances.zero
    entries, failures = [], []
    for source in ctx.config.solutions:
        f = parse(source)
        try:
            value = residual(s, f)
            pulled = pullback_oracle(s, f)
            test = is_zero(value, plan, tol)
            agreement = is_zero(simplify(value - pulled), plan, tol)
        except MageomError as exc:
            entries.append({"f": source, "error": exc.to_dict()})
            failures.append(f"{source}: {exc}")
            continue
        entries.append(
            {
                "f": source,
                "residual": to_text(value),
                "zero_test": test.to_dict(),
                "pullback": to_text(pulled),
                "pullback_agrees": agreement.to_dict(),
            }
        )
        if not test.is_zero:
            failures.append(f"{source} is not a solution (residual {test.value:.3e} at {tuple(test.witness)})")
        if not agreement.is_zero:
            failures.append(f"{source}: residual and pullback differ")
    return _outcome({"solutions": entries}, failures)


def _step_integrability(ctx: RunContext) -> StepOutcome:
    region = ctx.require_region()
    s, tol = ctx.structure, ctx.tolerances
    closedness = lr_integrability(s, region, tol=tol.zero)
    ctx.lr_verdict = INTEGRABLE if closedness.closed else NOT_INTEGRABLE
    result: Dict[str, Any] = closedness.to_dict(INTEGRABLE, NOT_INTEGRABLE)

    probe_point = Point.of(ctx.config.probe_point) if ctx.config.probe_point else sample(region.plan)[0]
    try:
        certified = certify_isotropic(j_rho_field(s, region.sign, EPS1), region.plan, tol.matrix)
        probe = nijenhuis_probe(certified, probe_point, tol.matrix)
    except MageomError as exc:
        result["nijenhuis_probe"] = {"point": list(probe_point), "error": exc.to_dict()}
        return False, result, exc.to_dict()
    result["nijenhuis_probe"] = {"point": list(probe_point), "type": certified.gen_type.value, **probe.to_dict()}
    # a vanishing probe at one point does not prove integrability, so disagreement is only reported
    result["consistent"] = probe.vanishes == closedness.closed
    return True, result, None


def _step_divergence(ctx: RunContext) -> StepOutcome:
    if ctx.config.divergence_phi is None:
        return _skipped("no divergence_phi in config")
    phi = parse(ctx.config.divergence_phi)
    check = divergence_check(ctx.structure, phi, ctx.plan, ctx.tolerances.zero)
    return True, {"phi": ctx.config.divergence_phi, **check.to_dict("Holds", "Fails")}, None


def _step_rescale(ctx: RunContext) -> StepOutcome:
    if ctx.config.rescale is None:
        return _skipped("no rescale function in config")
    h = parse(ctx.config.rescale)
    result = rescale_transform(
        ctx.structure, h, ctx.regular_plan, ctx.config.eps2, ctx.config.eps3, tol=ctx.tolerances.matrix
    )
    failures = [
        f"{name} law fails"
        for name in ("pfaffian", "rho_sign", "a2_zero_correspondence")
        if not result[name]["ok"]
    ]
    return _outcome(result, failures)


Step = Callable[[RunContext], StepOutcome]

# (name, step, required): a failed required step stops the run
RUN_STEPS: List[Tuple[str, Step, bool]] = [
    ("structure", _step_structure, True),
    ("classify", _step_classify, False),
    ("normalize", _step_normalize, False),
    ("rho", _step_rho, False),
    ("structures", _step_structures, False),
    ("anticommutativity", _step_anticommutativity, False),
    ("family", _step_family, False),
    ("equation", _step_equation, False),
    ("solutions", _step_solutions, False),
    ("integrability", _step_integrability, False),
    ("divergence", _step_divergence, False),
    ("rescale", _step_rescale, False),
]

RESIDUAL_STEPS: List[Tuple[str, Step, bool]] = [
    ("structure", _step_structure, True),
    ("equation", _step_equation, False),
    ("solutions", _step_solutions, False),
]

INTEGRABILITY_STEPS: List[Tuple[str, Step, bool]] = [
    ("structure", _step_structure, True),
    ("classify", _step_classify, False),
    ("normalize", _step_normalize, False),
    ("integrability", _step_integrability, False),
    ("divergence", _step_divergence, False),
]


# ---------------------------------------------------------------------------
# Execution and reporting
# ---------------------------------------------------------------------------

def sanitize(value: Any) -> Any:
    """JSON-ready copy: numpy scalars and arrays to Python, non-finite floats to None."""
    if isinstance(value, dict):
        return {str(key): sanitize(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [sanitize(item) for item in value]
    if isinstance(value, np.ndarray):
        return sanitize(value.tolist())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Expr):
        return to_text(value)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            logger.warning(f"Non-finite value {value} replaced by null in the report")
            return None
        return value
    return value


def _run_step(name: str, step: Step, ctx: RunContext) -> StepRecord:
    logger.info(f"Running step '{name}'")
    try:
        success, result, error = step(ctx)
    except MageomError as exc:
        logger.warning(f"Step '{name}' failed: {exc}")
        return StepRecord(name=name, success=False, error=exc.to_dict())
    except Exception as exc:
        logger.exception(f"Error in step '{name}': {str(exc)}")
        return StepRecord(name=name, success=False, error={"kind": "internal_error", "message": str(exc)})

    if success:
        logger.info(f"Step '{name}' completed successfully")
    else:
        logger.warning(f"Step '{name}' failed verification: {error['message'] if error else ''}")
    return StepRecord(name=name, success=success, result=sanitize(result), error=sanitize(error))


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def execute(
    config: RunConfig,
    steps: List[Tuple[str, Step, bool]] = RUN_STEPS,
    seed: Optional[int] = None,
    points: Optional[int] = None,
    tol: Optional[float] = None,
) -> Report:
    """
    Run steps in order on a validated config.

    Args:
        config: Validated run config
        steps: (name, step, required) triples, e.g. RUN_STEPS
        seed: RNG seed override
        points: Sample count override
        tol: Single tolerance overriding zero, matrix and family tolerances

    Returns:
        Report with one record per executed step
    """
    ctx = RunContext(config, build_plan(config, seed, points), Tolerances.resolve(config, tol))
    logger.info(f"Executing run '{config.name or 'unnamed'}' with {len(steps)} steps on {ctx.plan.count} points")

    records: List[StepRecord] = []
    for name, step, required in steps:
        record = _run_step(name, step, ctx)
        records.append(record)
        if required and not record.success:
            logger.warning(f"Stopping run: required step '{name}' failed")
            break

    report = Report(
        tool=TOOL_NAME,
        version=__version__,
        generated_at=_timestamp(),
        config=sanitize(config.model_dump(mode="json")),
        pfaffian_class=ctx.pf_class.kind.value if ctx.pf_class else None,
        lr_integrability=ctx.lr_verdict,
        verification_failed=any(not record.success for record in records),
        steps=records,
    )
    if report.verification_failed:
        logger.warning(f"Run '{config.name or 'unnamed'}' completed with failures")
    else:
        logger.info(f"Run '{config.name or 'unnamed'}' completed successfully")
    return report


# ---------------------------------------------------------------------------
# Quadric tables
# ---------------------------------------------------------------------------

_LAPLACE = MAStructure.from_strings(A="-1", C="-1")
_WAVE = MAStructure.from_strings(A="1", C="-1")


def _builder_table(tol: float) -> StepOutcome:
    rows = builder_table(tol)
    origin = Point(0.0, 0.0, 0.0, 0.0)
    rho_rows = []
    for sign, structure in ((1, _LAPLACE), (-1, _WAVE)):
        for eps1 in (1, -1):
            measured = classify_gen(j_rho(structure, origin, eps1), tol)
            expected = RHO_TYPES[(sign, eps1)]
            rho_rows.append(
                {
                    "sgn_pf": sign,
                    "eps1": eps1,
                    "expected": expected.value,
                    "measured": measured.to_dict(),
                    "ok": measured.gen_type == expected,
                }
            )
    failures = [f"{row['builder']} eps={row['eps']}" for row in rows if not row["ok"]]
    failures += [f"J_rho sgn_pf={row['sgn_pf']} eps1={row['eps1']}" for row in rho_rows if not row["ok"]]
    return _outcome({"builders": rows, "rho": rho_rows}, [f"type mismatch: {name}" for name in failures])


def _sphere_distinctness(seed: int, pairs: int, tol: float) -> StepOutcome:
    """Random pairs on the sphere cell (sgn Pf = -1, k = 1, eps2 = eps3 = 1) on the wave structure."""
    triples = sample_admissible(-1, 1, 1, 1, 2 * pairs, seed)
    plan = SamplePlan.default(count=4, seed=seed)
    worst_identical = None
    distinct = 0
    for c1, c2 in zip(triples[0::2], triples[1::2]):
        check = distinctness_check(_WAVE, c1, c2, plan)
        if check.distinct:
            distinct += 1
        elif worst_identical is None:
            worst_identical = {"c1": list(c1.triple), "c2": list(c2.triple), **check.to_dict()}
    pairs_checked = len(triples) // 2
    result = {"pairs": pairs_checked, "distinct": distinct, "first_identical": worst_identical}
    failures = [] if distinct == pairs_checked else [f"{pairs_checked - distinct} pairs gave identical members"]
    return _outcome(result, failures)


def run_quadric(seed: Optional[int] = None, points: Optional[int] = None, tol: Optional[float] = None) -> Report:
    """
    Builder tables, the 16-cell quadric sweep and a distinctness check.

    Args:
        seed: RNG seed (environment default when None)
        points: Admissible triples per cell (50 when None)
        tol: Tolerance for all checks (environment family tolerance when None)
    """
    seed = ENGINE_SETTINGS.seed if seed is None else seed
    per_cell = 50 if points is None else points
    family_tol = ENGINE_SETTINGS.family_tol if tol is None else tol
    matrix_tol = ENGINE_SETTINGS.matrix_tol if tol is None else tol

    def sweep_step(_: RunContext) -> StepOutcome:
        cells = sweep(samples_per_cell=per_cell, seed=seed, tol=family_tol)
        failures = [
            f"cell sgn_pf={cell['sgn_pf']} k={cell['k']} eps=({cell['eps2']},{cell['eps3']})"
            for cell in cells
            if not cell["ok"]
        ]
        return _outcome({"cells": cells}, failures)

    steps: List[Tuple[str, Step, bool]] = [
        ("builder_table", lambda _: _builder_table(matrix_tol), False),
        ("sweep", sweep_step, False),
        ("distinctness", lambda _: _sphere_distinctness(seed, SPHERE_PAIRS, family_tol), False),
    ]
    config = {"command": "quadric", "seed": seed, "samples_per_cell": per_cell, "tol": tol}
    logger.info(f"Running quadric tables with {per_cell} triples per cell")
    records = [_run_step(name, step, None) for name, step, _ in steps]
    return Report(
        tool=TOOL_NAME,
        version=__version__,
        generated_at=_timestamp(),
        config=sanitize(config),
        verification_failed=any(not record.success for record in records),
        steps=records,
    )


def report_json(report: Report) -> str:
    """Serialize a report; key order is fixed, so equal runs give equal text up to generated_at."""
    return json.dumps(report.model_dump(mode="json"), indent=2, allow_nan=False)
