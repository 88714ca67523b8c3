"""
Monge-Ampere structures on T*R^2.

An effective 2-form alpha = A dp^dy + B (dx^dp - dy^dq) + C dx^dq + D dp^dq
+ E dx^dy together with Omega = dx^dp + dy^dq encodes the equation

    A f_xx + 2B f_xy + C f_yy + D (f_xx f_yy - f_xy^2) + E = 0

with the coefficients evaluated at (x, y, f_x, f_y).
"""

import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .config import ENGINE_SETTINGS
from .exceptions import (
    DegeneratePointError,
    DomainError,
    InconclusiveError,
    NotEffectiveError,
    ResidualInputError,
    SignValidationError,
)
from .expr import (
    ZERO,
    Expr,
    Func,
    Neg,
    Num,
    Point,
    Pow,
    Sym,
    Var,
    as_expr,
    differentiate,
    evaluate,
    evaluate_array,
    is_zero,
    simplify,
    substitute,
    to_text,
    variables,
)
from .models import SamplePlan
from .phase import TwoForm, matrix_at, sample, wedge_top

logger = logging.getLogger(__name__)

# (df)^* alpha against the coordinate residual; fixed by the Laplace example
PULLBACK_SIGN = 1

Matrix4Expr = Tuple[Tuple[Expr, ...], ...]


@dataclass(frozen=True)
class MAStructure:
    """The five effective coefficients of alpha."""
    A: Expr
    B: Expr
    C: Expr
    D: Expr
    E: Expr

    @classmethod
    def from_strings(cls, A="0", B="0", C="0", D="0", E="0") -> "MAStructure":
        return cls(as_expr(A), as_expr(B), as_expr(C), as_expr(D), as_expr(E))

    @classmethod
    def from_mapping(cls, coefficients: Mapping[str, object]) -> "MAStructure":
        return cls(*(as_expr(coefficients[name]) for name in ("A", "B", "C", "D", "E")))

    def coefficients(self) -> Tuple[Expr, Expr, Expr, Expr, Expr]:
        return (self.A, self.B, self.C, self.D, self.E)

    def pfaffian(self) -> Expr:
        return pfaffian(self)

    def to_two_form(self) -> TwoForm:
        return to_two_form(self)

    def scaled(self, h: Expr) -> "MAStructure":
        """The structure of h * alpha."""
        return MAStructure(*(simplify(h * c) for c in self.coefficients()))

    def values_at(self, pt: Point) -> Tuple[float, ...]:
        return tuple(evaluate(c, pt) for c in self.coefficients())

    def to_dict(self) -> Dict[str, str]:
        return {name: to_text(c) for name, c in zip("ABCDE", self.coefficients())}


def to_two_form(s: MAStructure) -> TwoForm:
    """(c_xy, c_xp, c_xq, c_yp, c_yq, c_pq) = (E, B, C, -A, -B, D)."""
    return TwoForm(c_xy=s.E, c_xp=s.B, c_xq=s.C, c_yp=Neg(s.A), c_yq=Neg(s.B), c_pq=s.D)


def _unneg(e: Expr) -> Expr:
    return e.arg if isinstance(e, Neg) else Neg(e)


def from_two_form(b: TwoForm, plan: Optional[SamplePlan] = None, verify: bool = True) -> MAStructure:
    """
    Read the effective coefficients off a 2-form.

    With verify=False the effectiveness test is skipped and c_yq is ignored.

    Raises:
        NotEffectiveError: c_xp + c_yq does not vanish (Omega ^ b != 0)
    """
    test = is_zero(b.c_xp + b.c_yq, plan or SamplePlan.default()) if verify else None
    if test is not None and not test.is_zero:
        raise NotEffectiveError(
            f"Form is not effective: c_xp + c_yq = {test.value:.6g} at {tuple(test.witness)}",
            test.witness,
        )
    return MAStructure(A=_unneg(b.c_yp), B=b.c_xp, C=b.c_xq, D=b.c_pq, E=b.c_xy)


def pfaffian(s: MAStructure) -> Expr:
    """Pf = -B^2 + AC - DE, in normal form."""
    return simplify(Neg(Pow(s.B, 2)) + s.A * s.C - s.D * s.E)


def pfaffian_oracle(s: MAStructure, pt: Point) -> float:
    """Pf through the defining identity alpha ^ alpha = Pf Omega ^ Omega."""
    alpha = to_two_form(s)
    omega = TwoForm.omega()
    return evaluate(wedge_top(alpha, alpha), pt) / evaluate(wedge_top(omega, omega), pt)


class PfaffianKind(str, Enum):
    ELLIPTIC = "Elliptic"
    HYPERBOLIC = "Hyperbolic"
    DEGENERATE = "Degenerate"
    MIXED = "Mixed"


@dataclass
class PfaffianClass:
    """Sign type of Pf over a sample set, with witness points."""
    kind: PfaffianKind
    witnesses: Dict[str, Point] = field(default_factory=dict)
    min_pfaffian: float = 0.0
    max_pfaffian: float = 0.0
    skipped: int = 0

    @property
    def sign(self) -> Optional[int]:
        return {PfaffianKind.ELLIPTIC: 1, PfaffianKind.HYPERBOLIC: -1}.get(self.kind)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "witnesses": {name: list(pt) for name, pt in self.witnesses.items()},
            "min_pfaffian": self.min_pfaffian,
            "max_pfaffian": self.max_pfaffian,
            "skipped": self.skipped,
        }


def classify(s: MAStructure, plan: SamplePlan) -> PfaffianClass:
    """
    Classify by the sign of Pf at the plan's points, with tol = plan floor.

    Raises:
        InconclusiveError: Pf is undefined at every sample point
    """
    tol = plan.floor
    pf = pfaffian(s)
    points = sample(plan)
    values = evaluate_array(pf, np.array(points))
    defined = ~np.isnan(values)
    if not defined.any():
        raise InconclusiveError(points)

    witnesses: Dict[str, Point] = {}
    for name, mask in (
        ("positive", values >= tol),
        ("negative", values <= -tol),
        ("degenerate", np.abs(values) < tol),
    ):
        hits = np.flatnonzero(mask & defined)
        if hits.size:
            witnesses[name] = points[int(hits[0])]

    if "positive" in witnesses and "negative" in witnesses:
        kind = PfaffianKind.MIXED
    elif "degenerate" in witnesses:
        kind = PfaffianKind.DEGENERATE
    elif "positive" in witnesses:
        kind = PfaffianKind.ELLIPTIC
    else:
        kind = PfaffianKind.HYPERBOLIC

    result = PfaffianClass(
        kind=kind,
        witnesses=witnesses,
        min_pfaffian=float(np.nanmin(values)),
        max_pfaffian=float(np.nanmax(values)),
        skipped=int((~defined).sum()),
    )
    logger.debug(f"Pfaffian {to_text(pf)} classified {kind.value} on {len(points)} points")
    return result


@dataclass(frozen=True)
class SignedRegion:
    """A region of phase space (the plan's box) on which Pf has a declared sign."""
    sign: int
    plan: SamplePlan

    def __post_init__(self) -> None:
        if self.sign not in (1, -1):
            raise ValueError(f"Region sign must be +1 or -1, got {self.sign}")

    @classmethod
    def parse(cls, sign: str, plan: SamplePlan) -> "SignedRegion":
        if sign not in ("+", "-"):
            raise ValueError(f"Region sign must be '+' or '-', got '{sign}'")
        return cls(1 if sign == "+" else -1, plan)

    @property
    def symbol(self) -> str:
        return "+" if self.sign > 0 else "-"

    def validate(self, s: MAStructure) -> None:
        """
        Check the declared sign at every sample point.

        Raises:
            SignValidationError: Pf has the wrong sign at a point
            DegeneratePointError: |Pf| is below the floor at a point
        """
        pf = pfaffian(s)
        floor = self.plan.floor
        for pt in sample(self.plan):
            value = evaluate(pf, pt)
            if abs(value) < floor:
                raise DegeneratePointError(pt, value, floor)
            if value * self.sign < 0:
                raise SignValidationError(
                    f"Pf = {value:.6g} contradicts the declared sign '{self.symbol}' at {tuple(pt)}", pt
                )


def signed_pfaffian(s: MAStructure, sign: int) -> Expr:
    """|Pf| rewritten as +Pf or -Pf on a region of constant sign."""
    pf = pfaffian(s)
    return pf if sign > 0 else simplify(Neg(pf))


def normalization_factor(s: MAStructure, sign: int) -> Expr:
    """(sign * Pf)^(-1/2)."""
    return simplify(Pow(Func("sqrt", signed_pfaffian(s, sign)), -1))


def normalize(s: MAStructure, region: SignedRegion) -> MAStructure:
    """
    n(alpha) = |Pf|^(-1/2) alpha on a region of constant sign; Pf(n(alpha)) = sign.

    Raises:
        SignValidationError, DegeneratePointError: the region check failed
    """
    region.validate(s)
    factor = normalization_factor(s, region.sign)
    return MAStructure(*(simplify(c * factor) for c in s.coefficients()))


def _rho_rows(A: float, B: float, C: float, D: float, E: float) -> Tuple[Tuple[float, ...], ...]:
    # Omega^-1 alpha before the |Pf|^(-1/2) scaling
    return (
        (B, -A, 0.0, -D),
        (C, -B, D, 0.0),
        (0.0, E, B, C),
        (-E, 0.0, -A, -B),
    )


def rho_at(s: MAStructure, pt: Point, floor: Optional[float] = None) -> np.ndarray:
    """
    rho = |Pf|^(-1/2) Omega^-1 alpha at a point.

    Raises:
        DegeneratePointError: |Pf(pt)| < floor
    """
    floor = ENGINE_SETTINGS.pfaffian_floor if floor is None else floor
    A, B, C, D, E = s.values_at(pt)
    pf = -B * B + A * C - D * E
    if abs(pf) < floor:
        raise DegeneratePointError(pt, pf, floor)
    return np.array(_rho_rows(A, B, C, D, E), dtype=float) / math.sqrt(abs(pf))


def rho_expr(s: MAStructure, sign: int) -> Matrix4Expr:
    """Symbolic rho on a region where sgn Pf = sign."""
    factor = normalization_factor(s, sign)
    A, B, C, D, E = s.coefficients()
    rows = (
        (B, Neg(A), ZERO, Neg(D)),
        (C, Neg(B), D, ZERO),
        (ZERO, E, B, C),
        (Neg(E), ZERO, Neg(A), Neg(B)),
    )
    return tuple(tuple(simplify(entry * factor) for entry in row) for row in rows)


def det_check(s: MAStructure, plan: SamplePlan, tol: float = 1e-8) -> dict:
    """det(alpha) = Pf^2 at the plan's points, relative tolerance."""
    pf = pfaffian(s)
    alpha = to_two_form(s)
    worst = 0.0
    witness = None
    for pt in sample(plan):
        try:
            det = float(np.linalg.det(matrix_at(alpha, pt)))
            pf_value = evaluate(pf, pt)
        except DomainError:
            continue
        residual = abs(det - pf_value ** 2) / (1.0 + pf_value ** 2)
        if residual > worst:
            worst, witness = residual, pt
    return {"max_residual": worst, "witness": list(witness) if witness else None, "ok": worst <= tol}


# ---------------------------------------------------------------------------
# Monge-Ampere equation
# ---------------------------------------------------------------------------

def _solution_jet(f: Expr) -> Tuple[Expr, Expr, Expr, Expr, Expr]:
    extra = sorted(var.value for var in variables(f) if var not in (Var.X, Var.Y))
    if extra:
        raise ResidualInputError(f"Solution candidate '{f}' may only use x and y; found {', '.join(extra)}")
    fx = differentiate(f, Var.X)
    fy = differentiate(f, Var.Y)
    return fx, fy, differentiate(fx, Var.X), differentiate(fx, Var.Y), differentiate(fy, Var.Y)


def _on_graph(s: MAStructure, fx: Expr, fy: Expr) -> MAStructure:
    mapping = {Var.P: fx, Var.Q: fy}
    return MAStructure(*(substitute(c, mapping) for c in s.coefficients()))


def residual(s: MAStructure, f: Expr) -> Expr:
    """
    A f_xx + 2B f_xy + C f_yy + D (f_xx f_yy - f_xy^2) + E with p -> f_x, q -> f_y.

    Raises:
        ResidualInputError: f mentions p or q
    """
    fx, fy, fxx, fxy, fyy = _solution_jet(f)
    g = _on_graph(s, fx, fy)
    return simplify(g.A * fxx + 2 * g.B * fxy + g.C * fyy + g.D * (fxx * fyy - Pow(fxy, 2)) + g.E)


def pullback_oracle(s: MAStructure, f: Expr) -> Expr:
    """
    dx^dy coefficient of the pullback of alpha along (x, y) -> (x, y, f_x, f_y).

    Raises:
        ResidualInputError: f mentions p or q
    """
    fx, fy, fxx, fxy, fyy = _solution_jet(f)
    alpha = to_two_form(_on_graph(s, fx, fy))
    # pulled-back 1-forms dx, dy, dp, dq as (dx, dy) components
    pulled = ((Num(1.0), ZERO), (ZERO, Num(1.0)), (fxx, fxy), (fxy, fyy))
    total: Expr = ZERO
    for (i, j), coefficient in zip(((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)), alpha.coefficients()):
        u, v = pulled[i], pulled[j]
        total = total + coefficient * (u[0] * v[1] - u[1] * v[0])
    return simplify(PULLBACK_SIGN * total)


_TERM_MONOMIALS = (
    ("A", "f_xx"),
    ("B", "f_xy"),
    ("C", "f_yy"),
    ("D", "(f_xx*f_yy - f_xy^2)"),
    ("E", ""),
)


def _graph_text(e: Expr) -> str:
    return re.sub(r"\bq\b", "f_y", re.sub(r"\bp\b", "f_x", to_text(e)))


def equation_text(s: MAStructure) -> str:
    """The coordinate equation with the coefficients substituted, e.g. '-f_xx - f_yy = 0'."""
    terms: List[Tuple[bool, str]] = []
    for name, monomial in _TERM_MONOMIALS:
        coefficient = getattr(s, name)
        coefficient = simplify(2 * coefficient) if name == "B" else simplify(coefficient)
        if coefficient == ZERO:
            continue
        negative = isinstance(coefficient, Num) and coefficient.value < 0 or isinstance(coefficient, Neg)
        magnitude = simplify(Neg(coefficient)) if negative else coefficient
        if not monomial:
            text = _graph_text(magnitude)
        elif magnitude == Num(1.0):
            text = monomial
        elif isinstance(magnitude, (Num, Sym, Func)):
            text = f"{_graph_text(magnitude)}*{monomial}"
        else:
            text = f"({_graph_text(magnitude)})*{monomial}"
        terms.append((negative, text))
    if not terms:
        return "0 = 0"
    first_negative, first = terms[0]
    parts = [f"-{first}" if first_negative else first]
    for negative, text in terms[1:]:
        parts.append(f"- {text}" if negative else f"+ {text}")
    return " ".join(parts) + " = 0"
