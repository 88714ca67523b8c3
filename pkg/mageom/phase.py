"""
Differential forms on the 4D phase space with expression coefficients.

Basis conventions: vectors (d_x, d_y, d_p, d_q); 2-forms dx^dy, dx^dp, dx^dq,
dy^dp, dy^dq, dp^dq; 3-forms dx^dy^dp, dx^dy^dq, dx^dp^dq, dy^dp^dq; the top
form is dx^dy^dp^dq, so wedge_top(Omega, Omega) = -2.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .exceptions import SamplingError
from .expr import (
    ONE,
    ZERO,
    Expr,
    Point,
    VARIABLES,
    as_expr,
    differentiate,
    evaluate,
    evaluate_array,
    fold,
    simplify,
)
from .models import SamplePlan

logger = logging.getLogger(__name__)

OneForm = Tuple[Expr, Expr, Expr, Expr]
VectorField = Tuple[Expr, Expr, Expr, Expr]

TWO_FORM_BASIS: Tuple[Tuple[int, int], ...] = tuple(combinations(range(4), 2))
THREE_FORM_BASIS: Tuple[Tuple[int, int, int], ...] = tuple(combinations(range(4), 3))


@dataclass(frozen=True)
class TwoForm:
    """A 2-form sum c_ij dx_i ^ dx_j over i < j."""
    c_xy: Expr = ZERO
    c_xp: Expr = ZERO
    c_xq: Expr = ZERO
    c_yp: Expr = ZERO
    c_yq: Expr = ZERO
    c_pq: Expr = ZERO

    @classmethod
    def omega(cls) -> "TwoForm":
        """The symplectic form dx^dp + dy^dq."""
        return cls(c_xp=ONE, c_yq=ONE)

    @classmethod
    def zero(cls) -> "TwoForm":
        return cls()

    @classmethod
    def from_coefficients(cls, coefficients: Sequence) -> "TwoForm":
        return cls(*(as_expr(c) for c in coefficients))

    def coefficients(self) -> Tuple[Expr, ...]:
        return (self.c_xy, self.c_xp, self.c_xq, self.c_yp, self.c_yq, self.c_pq)

    def component(self, i: int, j: int) -> Expr:
        """Value on (d_i, d_j); antisymmetric in i, j."""
        if i == j:
            return ZERO
        if i < j:
            return self.coefficients()[TWO_FORM_BASIS.index((i, j))]
        return fold(-self.component(j, i))

    def map(self, func) -> "TwoForm":
        return TwoForm(*(func(c) for c in self.coefficients()))

    def __add__(self, other: "TwoForm") -> "TwoForm":
        return TwoForm(*(a + b for a, b in zip(self.coefficients(), other.coefficients())))

    def scale(self, factor: Expr) -> "TwoForm":
        return TwoForm(*(factor * c for c in self.coefficients()))

    def simplified(self) -> "TwoForm":
        return self.map(simplify)

    def to_dict(self) -> Dict[str, str]:
        names = ("c_xy", "c_xp", "c_xq", "c_yp", "c_yq", "c_pq")
        return {name: str(simplify(c)) for name, c in zip(names, self.coefficients())}


@dataclass(frozen=True)
class ThreeForm:
    """A 3-form in the basis dx^dy^dp, dx^dy^dq, dx^dp^dq, dy^dp^dq."""
    c_xyp: Expr = ZERO
    c_xyq: Expr = ZERO
    c_xpq: Expr = ZERO
    c_ypq: Expr = ZERO

    def coefficients(self) -> Tuple[Expr, ...]:
        return (self.c_xyp, self.c_xyq, self.c_xpq, self.c_ypq)

    def named(self) -> Dict[str, Expr]:
        return dict(zip(("c_xyp", "c_xyq", "c_xpq", "c_ypq"), self.coefficients()))


def wedge_top(a: TwoForm, b: TwoForm) -> Expr:
    """Coefficient of a ^ b on dx^dy^dp^dq, in normal form."""
    return simplify(
        a.c_xy * b.c_pq
        - a.c_xp * b.c_yq
        + a.c_xq * b.c_yp
        + a.c_yp * b.c_xq
        - a.c_yq * b.c_xp
        + a.c_pq * b.c_xy
    )


def differential(f: Expr) -> OneForm:
    """df as its four components (d_x f, d_y f, d_p f, d_q f)."""
    return tuple(differentiate(f, var) for var in VARIABLES)


def one_form_derivative(gamma: Sequence[Expr]) -> TwoForm:
    """d of a 1-form: (d gamma)_ij = d_i gamma_j - d_j gamma_i."""
    return TwoForm(
        *(
            fold(differentiate(gamma[j], VARIABLES[i]) - differentiate(gamma[i], VARIABLES[j]))
            for i, j in TWO_FORM_BASIS
        )
    )


def exterior_derivative(b: TwoForm) -> ThreeForm:
    """
    d of a 2-form: (db)_ijk = d_i b_jk - d_j b_ik + d_k b_ij.

    Raises:
        NonDifferentiableError: a coefficient has abs/sign depending on a variable
    """
    coefficients = []
    for i, j, k in THREE_FORM_BASIS:
        term = (
            differentiate(b.component(j, k), VARIABLES[i])
            - differentiate(b.component(i, k), VARIABLES[j])
            + differentiate(b.component(i, j), VARIABLES[k])
        )
        coefficients.append(fold(term))
    return ThreeForm(*coefficients)


def interior(vector: Sequence[Expr], b: TwoForm) -> OneForm:
    """X contracted into the first slot: (X _| b)_j = X^i b_ij."""
    components = []
    for j in range(4):
        total: Expr = ZERO
        for i in range(4):
            total = total + vector[i] * b.component(i, j)
        components.append(fold(total))
    return tuple(components)


def pairing(vector: Sequence[Expr], gamma: Sequence[Expr]) -> Expr:
    """X _| gamma for a 1-form gamma."""
    total: Expr = ZERO
    for component, coefficient in zip(vector, gamma):
        total = total + component * coefficient
    return fold(total)


def wedge_one_forms(a: Sequence[Expr], b: Sequence[Expr]) -> TwoForm:
    """a ^ b for two 1-forms."""
    return TwoForm(*(fold(a[i] * b[j] - a[j] * b[i]) for i, j in TWO_FORM_BASIS))


def matrix_at(b: TwoForm, pt: Point) -> np.ndarray:
    """
    Antisymmetric 4x4 matrix with entry (i, j) = b(d_i, d_j).

    Raises:
        DomainError: a coefficient is undefined at pt
    """
    matrix = np.zeros((4, 4))
    for (i, j), coefficient in zip(TWO_FORM_BASIS, b.coefficients()):
        value = evaluate(coefficient, pt)
        matrix[i, j] = value
        matrix[j, i] = -value
    return matrix


def matrices_at(b: TwoForm, coords: np.ndarray) -> np.ndarray:
    """Vectorised matrix_at over an (n, 4) array; NaN entries mark domain errors."""
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    matrices = np.zeros((coords.shape[0], 4, 4))
    for (i, j), coefficient in zip(TWO_FORM_BASIS, b.coefficients()):
        values = evaluate_array(coefficient, coords)
        matrices[:, i, j] = values
        matrices[:, j, i] = -values
    return matrices


def _reference_pfaffian(reference) -> Expr:
    if isinstance(reference, Expr):
        return reference
    return reference.pfaffian()


def _draw(plan: SamplePlan) -> Tuple[Point, ...]:
    rng = np.random.default_rng(plan.seed)
    lows = np.array([lo for lo, _ in plan.bounds])
    highs = np.array([hi for _, hi in plan.bounds])

    if plan.reference is None or plan.pfaffian_floor is None:
        coords = rng.uniform(lows, highs, size=(plan.count, 4))
        return tuple(Point(*row) for row in coords.tolist())

    pfaffian = _reference_pfaffian(plan.reference)
    accepted: List[List[float]] = []
    draws = 0
    batch = max(plan.count, 64)
    while len(accepted) < plan.count:
        if draws >= plan.retry_cap:
            raise SamplingError(
                f"Only {len(accepted)} of {plan.count} points satisfy |Pf| >= {plan.pfaffian_floor} "
                f"after {draws} draws; the structure is degenerate on most of the box",
                draws,
            )
        size = min(batch, plan.retry_cap - draws)
        coords = rng.uniform(lows, highs, size=(size, 4))
        draws += size
        values = evaluate_array(pfaffian, coords)
        with np.errstate(invalid="ignore"):
            keep = np.abs(values) >= plan.pfaffian_floor
        accepted.extend(coords[keep].tolist())
        batch = min(batch * 2, 1 << 16)

    logger.debug(f"Drew {draws} points to accept {plan.count} with |Pf| >= {plan.pfaffian_floor}")
    return tuple(Point(*row) for row in accepted[: plan.count])


@lru_cache(maxsize=128)
def _draw_cached(plan: SamplePlan) -> Tuple[Point, ...]:
    return _draw(plan)


def sample(plan: SamplePlan) -> List[Point]:
    """
    Draw the plan's points; the same plan always yields the same list.

    Raises:
        SamplingError: the retry cap was hit before enough points passed the
            Pfaffian floor
    """
    if not _hashable(plan):
        return list(_draw(plan))
    return list(_draw_cached(plan))


def _hashable(plan: SamplePlan) -> bool:
    # a reference structure may hold unhashable coefficients
    try:
        hash(plan)
    except TypeError:
        return False
    return True


def sample_array(plan: SamplePlan) -> np.ndarray:
    """The plan's points as an (n, 4) array."""
    return np.array(sample(plan), dtype=float)
