"""
Three-parameter families A = a1 J_rho + a2 J_alpha + a3 J_Omega.

With eps1 = -1 and pairwise anticommuting summands, A^2 = k Id and
A^T eta A = -k eta for k = -sgn(Pf) a1^2 + eps2 a2^2 + eps3 a3^2, so the
admissible triples (|k| = 1) lie on quadric surfaces: GaPC structures for
k = 1, GaC structures for k = -1.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import ENGINE_SETTINGS
from .exceptions import DegeneratePointError, FamilyGateError, RescaleError
from .expr import Expr, Point, evaluate, is_zero, simplify
from .gen import (
    IDENTITY8,
    ETA,
    GenEndo,
    GenType,
    anticommutator,
    classify_gen,
    j_alpha,
    j_omega,
    j_rho,
)
from .ma import MAStructure, pfaffian, rho_at, to_two_form
from .models import SamplePlan
from .phase import matrix_at, sample
from .utils.linalg import OMEGA, max_norm

logger = logging.getLogger(__name__)

# forced by pairwise anticommutativity
EPS1 = -1
ADMISSIBILITY_TOL = 1e-12
DISTINCT_TOL = 1e-8


@dataclass(frozen=True)
class FamilyCoeffs:
    """Coefficients (a1, a2, a3) of a family member and the signs of J_alpha, J_Omega."""
    a1: float
    a2: float
    a3: float
    eps2: int = 1
    eps3: int = 1

    def __post_init__(self) -> None:
        if not all(math.isfinite(a) for a in (self.a1, self.a2, self.a3)):
            raise ValueError("Family coefficients must be finite")
        if self.eps2 not in (1, -1) or self.eps3 not in (1, -1):
            raise ValueError("eps2 and eps3 must be +1 or -1")

    @property
    def triple(self) -> Tuple[float, float, float]:
        return (self.a1, self.a2, self.a3)

    def to_dict(self) -> dict:
        return {"a": list(self.triple), "eps2": self.eps2, "eps3": self.eps3}


class QuadricType(str, Enum):
    SPHERE = "Sphere"
    HYPERBOLOID_1 = "Hyperboloid1Sheet"
    HYPERBOLOID_2 = "Hyperboloid2Sheet"
    EMPTY = "Empty"


def k_value(c: FamilyCoeffs, sgn_pf: int) -> float:
    """k = -sgn(Pf) a1^2 + eps2 a2^2 + eps3 a3^2."""
    return -sgn_pf * c.a1 ** 2 + c.eps2 * c.a2 ** 2 + c.eps3 * c.a3 ** 2


def is_admissible(c: FamilyCoeffs, sgn_pf: int, tol: float = ADMISSIBILITY_TOL) -> bool:
    return abs(abs(k_value(c, sgn_pf)) - 1.0) <= tol


# (sgn Pf, k) -> type per (eps2, eps3) in the order (+,+), (+,-), (-,+), (-,-)
_S, _H1, _H2, _E = QuadricType.SPHERE, QuadricType.HYPERBOLOID_1, QuadricType.HYPERBOLOID_2, QuadricType.EMPTY
QUADRIC_TABLE: Dict[Tuple[int, int], Tuple[QuadricType, ...]] = {
    (1, 1): (_H1, _H2, _H2, _E),
    (1, -1): (_H2, _H1, _H1, _S),
    (-1, 1): (_S, _H1, _H1, _H2),
    (-1, -1): (_E, _H2, _H2, _H1),
}
_EPS_ORDER = ((1, 1), (1, -1), (-1, 1), (-1, -1))


def _quadric_signs(sgn_pf: int, k: int, eps2: int, eps3: int) -> Tuple[int, int, int]:
    """Signs t_i of sum t_i a_i^2 = 1."""
    return (-sgn_pf * k, eps2 * k, eps3 * k)


def quadric_from_signs(signs: Sequence[int]) -> QuadricType:
    positives = sum(1 for t in signs if t > 0)
    return {3: QuadricType.SPHERE, 2: QuadricType.HYPERBOLOID_1, 1: QuadricType.HYPERBOLOID_2}.get(
        positives, QuadricType.EMPTY
    )


def quadric_type(sgn_pf: int, k: int, eps2: int, eps3: int) -> QuadricType:
    """
    Type of the quadric of admissible triples.

    Raises:
        ValueError: |k| != 1 or a sign is not +-1
    """
    if k not in (1, -1):
        raise ValueError(f"k must be +1 or -1, got {k}")
    if sgn_pf not in (1, -1) or eps2 not in (1, -1) or eps3 not in (1, -1):
        raise ValueError("sgn Pf, eps2 and eps3 must be +1 or -1")
    listed = QUADRIC_TABLE[(sgn_pf, k)][_EPS_ORDER.index((eps2, eps3))]
    derived = quadric_from_signs(_quadric_signs(sgn_pf, k, eps2, eps3))
    if listed != derived:
        raise AssertionError(f"Quadric table disagrees with the signature: {listed.value} != {derived.value}")
    return listed


def structure_type(k: int) -> GenType:
    """GaPC for k = 1, GaC for k = -1."""
    return GenType.GAPC if k == 1 else GenType.GAC


def induced_conic(sgn_pf: int, k: int, eps2: int, eps3: int) -> str:
    """Curve left in the (a1, a3) plane when a2 = 0."""
    positives = sum(1 for t in (-sgn_pf * k, eps3 * k) if t > 0)
    return {2: "Ellipse", 1: "Hyperbola"}.get(positives, "Empty")


# ---------------------------------------------------------------------------
# Anticommutativity
# ---------------------------------------------------------------------------

@dataclass
class AnticommutativityResult:
    holds: bool
    eps1_forced: int = EPS1
    max_deviation: float = 0.0
    witness: Optional[Point] = None

    def to_dict(self) -> dict:
        return {
            "verdict": "Holds" if self.holds else "Fails",
            "eps1_forced": self.eps1_forced,
            "max_deviation": self.max_deviation,
            "witness": list(self.witness) if self.witness is not None else None,
        }


def anticommutativity_check(
    s: MAStructure, eps2: int, eps3: int, plan: SamplePlan, tol: Optional[float] = None
) -> AnticommutativityResult:
    """
    J_rho, J_alpha, J_Omega pairwise anticommute iff eps1 = -1 and Pf = eps2 eps3.

    Raises:
        DegeneratePointError: |Pf| below the floor at a sample point
    """
    tol = ENGINE_SETTINGS.family_tol if tol is None else tol
    pf = pfaffian(s)
    target = eps2 * eps3
    worst, witness = 0.0, None
    for pt in sample(plan):
        value = evaluate(pf, pt)
        if abs(value) < plan.floor:
            raise DegeneratePointError(pt, value, plan.floor)
        deviation = abs(value - target)
        if deviation > worst:
            worst = deviation
            if deviation > tol:
                witness = pt
    return AnticommutativityResult(holds=worst <= tol, max_deviation=worst, witness=witness)


def anticommutator_residuals(s: MAStructure, pt: Point, eps1: int, eps2: int, eps3: int) -> Dict[str, float]:
    """Max-norms of the three pairwise anticommutators."""
    jr, ja, jo = j_rho(s, pt, eps1), j_alpha(s, pt, eps2), j_omega(eps3)
    return {
        "rho_alpha": max_norm(anticommutator(jr, ja).matrix()),
        "rho_omega": max_norm(anticommutator(jr, jo).matrix()),
        "alpha_omega": max_norm(anticommutator(ja, jo).matrix()),
    }


def relaxed_pair_check(s: MAStructure, pt: Point, eps2: int, eps3: int, tol: Optional[float] = None) -> dict:
    """
    Whether {J_alpha, J_Omega} is a multiple c Id and [alpha, Omega] vanishes.

    A diagnostic only; family members are always built with eps1 = -1.
    """
    tol = ENGINE_SETTINGS.family_tol if tol is None else tol
    alpha = matrix_at(to_two_form(s), pt)
    anti = anticommutator(j_alpha(s, pt, eps2), j_omega(eps3)).matrix()
    constant = float(np.trace(anti)) / 8.0
    residual = max_norm(anti - constant * IDENTITY8)
    return {
        "commutator_norm": max_norm(alpha @ OMEGA - OMEGA @ alpha),
        "constant": constant if residual <= tol else None,
        "residual": residual,
    }


# ---------------------------------------------------------------------------
# Family members
# ---------------------------------------------------------------------------

def assemble_member(s: MAStructure, c: FamilyCoeffs, pt: Point, floor: Optional[float] = None) -> GenEndo:
    """a1 J_rho(eps1=-1) + a2 J_alpha + a3 J_Omega without precondition gates."""
    member = GenEndo.zero()
    if c.a1:
        member = member + c.a1 * j_rho(s, pt, EPS1, floor)
    if c.a2:
        member = member + c.a2 * j_alpha(s, pt, c.eps2)
    if c.a3:
        member = member + c.a3 * j_omega(c.eps3)
    return member


def build_family_member(
    s: MAStructure, c: FamilyCoeffs, pt: Point, floor: Optional[float] = None, tol: Optional[float] = None
) -> GenEndo:
    """
    Build a family member after checking its gates.

    Gates, in order: non_degeneracy (|Pf(pt)| >= floor), admissibility
    (|k| = 1), anticommutativity (Pf(pt) = eps2 eps3). The last gate is
    weaker than requiring anticommutativity_check to hold: it is checked
    only when a2 a3 != 0, since {J_rho, J_alpha} and {J_rho, J_Omega}
    vanish for any alpha and A^2 = k Id then needs no condition on Pf.

    Raises:
        FamilyGateError: a gate failed; the error names it
    """
    floor = ENGINE_SETTINGS.pfaffian_floor if floor is None else floor
    tol = ENGINE_SETTINGS.family_tol if tol is None else tol
    pf = evaluate(pfaffian(s), pt)
    if abs(pf) < floor:
        raise FamilyGateError("non_degeneracy", f"|Pf| = {abs(pf):.3e} below floor {floor:.1e} at {tuple(pt)}")
    sgn_pf = 1 if pf > 0 else -1
    if not is_admissible(c, sgn_pf):
        raise FamilyGateError("admissibility", f"k = {k_value(c, sgn_pf):.12g}, expected |k| = 1")
    if c.a2 and c.a3 and abs(pf - c.eps2 * c.eps3) > tol:
        raise FamilyGateError(
            "anticommutativity", f"Pf = {pf:.12g} differs from eps2*eps3 = {c.eps2 * c.eps3} at {tuple(pt)}"
        )
    return assemble_member(s, c, pt, floor)


def member_residuals(member: GenEndo, k: float) -> Dict[str, float]:
    """||A^2 - k Id|| and ||A^T eta A + k eta||."""
    matrix = member.matrix()
    return {
        "square": max_norm(matrix @ matrix - k * IDENTITY8),
        "eta": max_norm(matrix.T @ ETA @ matrix + k * ETA),
    }


# ---------------------------------------------------------------------------
# Sampling the quadrics
# ---------------------------------------------------------------------------

def _project(directions: np.ndarray, signs: Sequence[int]) -> np.ndarray:
    """Scale each direction onto sum t_i a_i^2 = 1; rows that cannot reach it are dropped."""
    q = directions ** 2 @ np.asarray(signs, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ok = q > 1e-12
        scale = np.sqrt(1.0 / q[ok])
    return directions[ok] * scale[:, None]


def search_admissible(sgn_pf: int, k: int, eps2: int, eps3: int, draws: int, seed: int = 0) -> int:
    """Number of random directions that project onto the quadric."""
    rng = np.random.default_rng(seed)
    directions = rng.normal(size=(draws, 3))
    return int(_project(directions, _quadric_signs(sgn_pf, k, eps2, eps3)).shape[0])


def sample_admissible(
    sgn_pf: int,
    k: int,
    eps2: int,
    eps3: int,
    count: int,
    seed: int = 0,
    restrict_a2a3: bool = False,
    max_draws: int = 100_000,
    max_coefficient: float = 10.0,
) -> List[FamilyCoeffs]:
    """
    Random admissible triples on the quadric, or on its a2 a3 = 0 curves.

    Returns fewer than count triples (possibly none) when the quadric or the
    curves are empty.
    """
    rng = np.random.default_rng(seed)
    signs = np.array(_quadric_signs(sgn_pf, k, eps2, eps3), dtype=float)
    masks = [np.ones(3)]
    if restrict_a2a3:
        masks = [np.array([1.0, 0.0, 1.0]), np.array([1.0, 1.0, 0.0])]
    found: List[np.ndarray] = []
    draws = 0
    while len(found) < count and draws < max_draws:
        batch = min(max(4 * count, 64), max_draws - draws)
        directions = rng.normal(size=(batch, 3))
        # alternate the vanishing coefficient between rows
        directions *= np.array([masks[i % len(masks)] for i in range(batch)])
        draws += batch
        projected = _project(directions, signs)
        # large triples only amplify rounding in A^2
        found.extend(projected[np.abs(projected).max(axis=1) <= max_coefficient])
    triples = [
        FamilyCoeffs(float(a1), float(a2), float(a3), eps2, eps3) for a1, a2, a3 in found[:count]
    ]
    return [c for c in triples if is_admissible(c, sgn_pf)]


def _reference(sgn_pf: int) -> MAStructure:
    # Laplace (Pf = 1) and wave (Pf = -1)
    if sgn_pf > 0:
        return MAStructure.from_strings(A="-1", C="-1")
    return MAStructure.from_strings(A="1", C="-1")


def sweep(
    samples_per_cell: int = 50,
    seed: int = 0,
    empty_draws: int = 100_000,
    points: Optional[Sequence[Point]] = None,
    tol: Optional[float] = None,
) -> List[dict]:
    """
    Walk all 16 (sgn Pf, k, eps2, eps3) cells.

    Members are built on a normalized reference structure with the cell's
    Pfaffian sign. Where Pf = eps2 eps3 fails on the reference, sampling is
    restricted to the a2 a3 = 0 curves, on which anticommutativity holds for
    any alpha.
    """
    tol = ENGINE_SETTINGS.family_tol if tol is None else tol
    points = list(points) if points else [Point(0.0, 0.0, 0.0, 0.0), Point(0.5, -1.0, 1.5, 0.25)]
    cells = []
    for sgn_pf in (1, -1):
        reference = _reference(sgn_pf)
        for k in (1, -1):
            for eps2, eps3 in _EPS_ORDER:
                quadric = quadric_type(sgn_pf, k, eps2, eps3)
                restricted = sgn_pf != eps2 * eps3
                cell: dict = {
                    "sgn_pf": sgn_pf,
                    "k": k,
                    "eps2": eps2,
                    "eps3": eps3,
                    "quadric": quadric.value,
                    "structure_type": structure_type(k).value,
                    "induced_conic": induced_conic(sgn_pf, k, eps2, eps3),
                    "sampling": "a2a3=0 curves" if restricted else "surface",
                }
                if quadric == QuadricType.EMPTY:
                    found = search_admissible(sgn_pf, k, eps2, eps3, empty_draws, seed)
                    cell.update({"samples": 0, "empty_search": {"draws": empty_draws, "found": found}, "ok": found == 0})
                    cells.append(cell)
                    continue

                triples = sample_admissible(sgn_pf, k, eps2, eps3, samples_per_cell, seed, restricted)
                worst_square = worst_eta = 0.0
                types_ok = True
                for c in triples:
                    for pt in points:
                        member = build_family_member(reference, c, pt, tol=tol)
                        residuals = member_residuals(member, k)
                        worst_square = max(worst_square, residuals["square"])
                        worst_eta = max(worst_eta, residuals["eta"])
                        types_ok &= classify_gen(member, tol).gen_type == structure_type(k)
                cell.update(
                    {
                        "samples": len(triples),
                        "examples": [list(c.triple) for c in triples[:3]],
                        "max_square_residual": worst_square,
                        "max_eta_residual": worst_eta,
                        "types_ok": types_ok,
                        "ok": bool(triples) and types_ok and max(worst_square, worst_eta) <= tol,
                    }
                )
                logger.debug(f"Quadric cell {cell['sgn_pf']},{k},{eps2},{eps3}: {len(triples)} triples")
                cells.append(cell)
    return cells


# ---------------------------------------------------------------------------
# Distinctness and rescaling
# ---------------------------------------------------------------------------

@dataclass
class DistinctnessResult:
    distinct: bool
    max_difference: float
    witness: Optional[Point] = None

    def to_dict(self) -> dict:
        return {
            "verdict": "Distinct" if self.distinct else "Identical",
            "max_difference": self.max_difference,
            "witness": list(self.witness) if self.witness is not None else None,
        }


def distinctness_check(
    s: MAStructure, c1: FamilyCoeffs, c2: FamilyCoeffs, plan: SamplePlan, tol: float = DISTINCT_TOL
) -> DistinctnessResult:
    """
    Compare two members by their assembled matrices at the plan's points.

    Raises:
        FamilyGateError: a triple is not admissible for the structure
    """
    pf = pfaffian(s)
    worst, witness = 0.0, None
    for pt in sample(plan):
        sgn_pf = 1 if evaluate(pf, pt) > 0 else -1
        for c in (c1, c2):
            if not is_admissible(c, sgn_pf):
                raise FamilyGateError("admissibility", f"{c.triple} has k = {k_value(c, sgn_pf):.12g}")
        difference = max_norm(assemble_member(s, c1, pt).matrix() - assemble_member(s, c2, pt).matrix())
        if difference > worst:
            worst, witness = difference, pt
        if worst > tol:
            break
    return DistinctnessResult(worst > tol, worst, witness if worst > tol else None)


def rescale_transform(
    s: MAStructure,
    h: Expr,
    plan: SamplePlan,
    eps2: int = 1,
    eps3: int = 1,
    correspondence: Tuple[float, float] = (0.6, 0.8),
    tol: Optional[float] = None,
) -> dict:
    """
    Analyse alpha -> h alpha.

    Checks Pf(h alpha) = h^2 Pf(alpha) symbolically and at the sample points,
    rho(h alpha) = sgn(h) rho(alpha), the transformed J_alpha blocks
    (TC / h, h CT), the a2 = 0 correspondence a1 -> sgn(h) a1, whether the
    rescaled structure keeps Pf = eps2 eps3, and whether the family is
    preserved (only for h = 1).

    Raises:
        RescaleError: h vanishes at a sample point
    """
    tol = ENGINE_SETTINGS.matrix_tol if tol is None else tol
    floor = plan.floor
    scaled = s.scaled(h)
    pf, pf_scaled = pfaffian(s), pfaffian(scaled)
    pf_identity = is_zero(pf_scaled - h * h * pf, plan)

    worst_pf = worst_rho = worst_tc = worst_ct = worst_member = 0.0
    keeps_anticommutativity = True
    blocks = None
    a1, a3 = correspondence
    for pt in sample(plan):
        h_value = evaluate(h, pt)
        if abs(h_value) < floor:
            raise RescaleError(f"h = {h_value:.3e} vanishes at {tuple(pt)}", pt)
        pf_value, pf_scaled_value = evaluate(pf, pt), evaluate(pf_scaled, pt)
        worst_pf = max(worst_pf, abs(pf_scaled_value - h_value ** 2 * pf_value) / (1.0 + abs(pf_scaled_value)))
        keeps_anticommutativity &= abs(pf_scaled_value - eps2 * eps3) <= ENGINE_SETTINGS.family_tol
        if abs(pf_value) < floor:
            continue
        sign_h = 1.0 if h_value > 0 else -1.0
        worst_rho = max(worst_rho, max_norm(rho_at(scaled, pt, floor) - sign_h * rho_at(s, pt, floor)))

        ja, ja_scaled = j_alpha(s, pt, eps2), j_alpha(scaled, pt, eps2)
        worst_tc = max(worst_tc, max_norm(ja_scaled.tc - ja.tc / h_value))
        worst_ct = max(worst_ct, max_norm(ja_scaled.ct - h_value * ja.ct))
        if blocks is None:
            blocks = {"point": list(pt), "h": h_value, "j_alpha": ja_scaled.to_dict()}

        member_scaled = assemble_member(scaled, FamilyCoeffs(a1, 0.0, a3, eps2, eps3), pt, floor)
        member = assemble_member(s, FamilyCoeffs(sign_h * a1, 0.0, a3, eps2, eps3), pt, floor)
        worst_member = max(worst_member, max_norm(member_scaled.matrix() - member.matrix()))

    preserved = is_zero(simplify(h - 1), plan).is_zero
    return {
        "h": str(h),
        "pfaffian": {
            "symbolic": pf_identity.verdict.value,
            "max_residual": worst_pf,
            "ok": pf_identity.is_zero and worst_pf <= 1e-9,
        },
        "rho_sign": {"max_residual": worst_rho, "ok": worst_rho <= tol},
        "j_alpha": {"tc_residual": worst_tc, "ct_residual": worst_ct, "blocks": blocks},
        "a2_zero_correspondence": {"a1": a1, "a3": a3, "max_residual": worst_member, "ok": worst_member <= tol},
        "keeps_anticommutativity": keeps_anticommutativity,
        "family_preserved": preserved,
    }
