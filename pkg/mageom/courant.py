"""
Courant bracket, generalized Nijenhuis torsion and closedness-based
integrability checks, all on expression-valued sections of T + T*.
"""

import logging
from dataclasses import dataclass, field
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import ENGINE_SETTINGS
from .exceptions import NotIsotropicError
from .expr import ONE, ZERO, Expr, Point, ZeroTest, as_expr, evaluate, fold, is_zero, simplify
from .gen import GenEndoField
from .ma import MAStructure, SignedRegion, normalize, to_two_form
from .models import SamplePlan
from .phase import (
    ThreeForm,
    TwoForm,
    differential,
    exterior_derivative,
    interior,
    one_form_derivative,
    pairing,
)

logger = logging.getLogger(__name__)

Components = Tuple[Expr, Expr, Expr, Expr]
_ZEROS: Components = (ZERO, ZERO, ZERO, ZERO)


@dataclass(frozen=True)
class Section:
    """A section (X, xi) of T + T*: vector components on d_x..d_q, form components on dx..dq."""
    vector: Components = _ZEROS
    form: Components = _ZEROS

    @classmethod
    def of(cls, vector: Sequence = (0, 0, 0, 0), form: Sequence = (0, 0, 0, 0)) -> "Section":
        return cls(tuple(as_expr(v) for v in vector), tuple(as_expr(v) for v in form))

    def __add__(self, other: "Section") -> "Section":
        return Section(
            tuple(fold(a + b) for a, b in zip(self.vector, other.vector)),
            tuple(fold(a + b) for a, b in zip(self.form, other.form)),
        )

    def __sub__(self, other: "Section") -> "Section":
        return self + other.scale(-1.0)

    def scale(self, factor) -> "Section":
        factor = as_expr(factor)
        return Section(
            tuple(fold(factor * v) for v in self.vector),
            tuple(fold(factor * v) for v in self.form),
        )

    def simplified(self) -> "Section":
        return Section(tuple(simplify(v) for v in self.vector), tuple(simplify(v) for v in self.form))

    def components(self) -> Tuple[Expr, ...]:
        return self.vector + self.form

    def at(self, pt: Point) -> np.ndarray:
        return np.array([evaluate(c, pt) for c in self.components()])

    def to_dict(self) -> Dict[str, List[str]]:
        return {
            "vector": [str(simplify(v)) for v in self.vector],
            "form": [str(simplify(v)) for v in self.form],
        }


def basis_sections() -> List[Section]:
    """(d_x, 0), ..., (d_q, 0), (0, dx), ..., (0, dq)."""
    sections = []
    for i in range(8):
        unit = [ZERO] * 8
        unit[i] = ONE
        sections.append(Section(tuple(unit[:4]), tuple(unit[4:])))
    return sections


def lie_bracket(X: Sequence[Expr], Y: Sequence[Expr]) -> Components:
    """[X, Y]^i = X^j d_j Y^i - Y^j d_j X^i."""
    dX = [differential(component) for component in X]
    dY = [differential(component) for component in Y]
    result = []
    for i in range(4):
        total: Expr = ZERO
        for j in range(4):
            total = total + X[j] * dY[i][j] - Y[j] * dX[i][j]
        result.append(simplify(total))
    return tuple(result)


def lie_derivative(X: Sequence[Expr], xi: Sequence[Expr]) -> Components:
    """L_X xi = d(X _| xi) + X _| d xi."""
    exact = differential(pairing(X, xi))
    contracted = interior(X, one_form_derivative(xi))
    return tuple(simplify(a + b) for a, b in zip(exact, contracted))


def courant_bracket(s1: Section, s2: Section) -> Section:
    """
    ([X, Y], L_X zeta - L_Y xi - 1/2 d(X _| zeta - Y _| xi)).

    Raises:
        NonDifferentiableError: a component is not differentiable
    """
    X, xi = s1.vector, s1.form
    Y, zeta = s2.vector, s2.form
    correction = differential(pairing(X, zeta) - pairing(Y, xi))
    form = tuple(
        simplify(a - b - 0.5 * c)
        for a, b, c in zip(lie_derivative(X, zeta), lie_derivative(Y, xi), correction)
    )
    return Section(lie_bracket(X, Y), form)


def apply_field(J: GenEndoField, s: Section) -> Section:
    vector, form = J.apply(s.vector, s.form)
    return Section(vector, form)


def nijenhuis(J: GenEndoField, s1: Section, s2: Section) -> Section:
    """
    N_J(x, y) = [Jx, Jy] + J^2 [x, y] - J([Jx, y] + [x, Jy]).

    Raises:
        NotIsotropicError: J has not been certified isotropic; for
            non-isotropic structures the torsion is not a tensor
    """
    if not J.certified:
        raise NotIsotropicError(
            "Nijenhuis torsion needs a structure certified isotropic (certify_isotropic); "
            "for non-isotropic structures it is not well-defined as a tensor"
        )
    Jx, Jy = apply_field(J, s1), apply_field(J, s2)
    bracket = courant_bracket(s1, s2)
    mixed = courant_bracket(Jx, s2) + courant_bracket(s1, Jy)
    result = courant_bracket(Jx, Jy) + apply_field(J, apply_field(J, bracket)) - apply_field(J, mixed)
    return result.simplified()


@dataclass
class ProbeResult:
    """Largest Nijenhuis component over all basis pairs at one point."""
    max_norm: float
    worst_pair: Optional[Tuple[int, int]]
    pairs: int
    tol: float

    @property
    def vanishes(self) -> bool:
        return self.max_norm <= self.tol

    def to_dict(self) -> dict:
        return {
            "max_norm": self.max_norm,
            "worst_pair": list(self.worst_pair) if self.worst_pair else None,
            "pairs": self.pairs,
            "vanishes": self.vanishes,
            "kind": "probe",
        }


def nijenhuis_probe(J: GenEndoField, pt: Point, tol: Optional[float] = None) -> ProbeResult:
    """Evaluate N_J on all 64 pairs of coordinate basis sections at pt."""
    tol = ENGINE_SETTINGS.matrix_tol if tol is None else tol
    basis = basis_sections()
    worst, worst_pair = 0.0, None
    for i, j in product(range(8), range(8)):
        value = float(np.max(np.abs(nijenhuis(J, basis[i], basis[j]).at(pt))))
        if value > worst:
            worst, worst_pair = value, (i, j)
    logger.debug(f"Nijenhuis probe at {tuple(pt)}: max {worst:.3e} at pair {worst_pair}")
    return ProbeResult(worst, worst_pair, len(basis) ** 2, tol)


# ---------------------------------------------------------------------------
# Closedness
# ---------------------------------------------------------------------------

_THREE_FORM_NAMES = ("c_xyp", "c_xyq", "c_xpq", "c_ypq")


@dataclass
class ClosednessResult:
    """Zero tests of the four coefficients of a 3-form."""
    closed: bool
    coefficients: Dict[str, ZeroTest] = field(default_factory=dict)
    derivative: Optional[ThreeForm] = None

    @property
    def witness(self) -> Optional[Point]:
        for test in self.coefficients.values():
            if not test.is_zero:
                return test.witness
        return None

    def to_dict(self, closed_label: str = "Closed", open_label: str = "NotClosed") -> dict:
        return {
            "verdict": closed_label if self.closed else open_label,
            "coefficients": {name: test.to_dict() for name, test in self.coefficients.items()},
            "derivative": {name: str(c) for name, c in self.derivative.named().items()} if self.derivative else None,
            "witness": list(self.witness) if self.witness is not None else None,
        }


def closedness(b: TwoForm, plan: SamplePlan, tol: Optional[float] = None) -> ClosednessResult:
    """is_zero on every coefficient of db."""
    derivative = exterior_derivative(b)
    simplified = ThreeForm(*(simplify(c) for c in derivative.coefficients()))
    tests = {name: is_zero(c, plan, tol) for name, c in zip(_THREE_FORM_NAMES, simplified.coefficients())}
    return ClosednessResult(all(t.is_zero for t in tests.values()), tests, simplified)


def lr_integrability(
    s: MAStructure, region: SignedRegion, plan: Optional[SamplePlan] = None, tol: Optional[float] = None
) -> ClosednessResult:
    """
    The structure is integrable iff alpha / sqrt|Pf| is closed.

    Zero tests run on the region's plan unless another plan is given.

    Raises:
        DegeneratePointError, SignValidationError: the region check failed
    """
    normalized = normalize(s, region)
    return closedness(to_two_form(normalized), plan or region.plan, tol)


def divergence_check(s: MAStructure, phi: Expr, plan: SamplePlan, tol: Optional[float] = None) -> ClosednessResult:
    """Whether d(alpha + phi Omega) = 0."""
    return closedness(to_two_form(s) + TwoForm.omega().scale(phi), plan, tol)
