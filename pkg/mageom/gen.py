"""
Generalized endomorphisms of T + T* and their classification.

An endomorphism acts on columns (X, xi) in the basis
(d_x, d_y, d_p, d_q, dx, dy, dp, dq) and is stored as four 4x4 blocks

    J = | TT  TC |      TT: T -> T     TC: T* -> T
        | CT  CC |      CT: T -> T*    CC: T* -> T*

The pairing is eta((X, xi), (Y, zeta)) = 1/2 (xi(Y) + zeta(X)) and the
compatibility J.eta is realized as J^T eta J.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import ENGINE_SETTINGS
from .exceptions import DegeneratePointError, NotIsotropicError, SingularMatrixError, UnclassifiableError
from .expr import ONE, ZERO, Expr, Neg, Num, Point, evaluate, fold, simplify
from .ma import MAStructure, Matrix4Expr, pfaffian, rho_at, rho_expr, to_two_form
from .models import SamplePlan
from .phase import matrix_at, sample
from .utils.linalg import IDENTITY4, OMEGA, OMEGA_INV, max_norm

logger = logging.getLogger(__name__)

IDENTITY8 = np.eye(8)
ZERO4 = np.zeros((4, 4))
ETA = 0.5 * np.block([[ZERO4, IDENTITY4], [IDENTITY4, ZERO4]])

# singularity threshold for the antidiagonal builders
DET_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class GenEndo:
    """A numeric generalized endomorphism at a point."""
    tt: np.ndarray
    tc: np.ndarray
    ct: np.ndarray
    cc: np.ndarray

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "GenEndo":
        matrix = np.asarray(matrix)
        return cls(matrix[:4, :4], matrix[:4, 4:], matrix[4:, :4], matrix[4:, 4:])

    @classmethod
    def zero(cls) -> "GenEndo":
        return cls(ZERO4, ZERO4, ZERO4, ZERO4)

    @classmethod
    def identity(cls) -> "GenEndo":
        return cls(IDENTITY4, ZERO4, ZERO4, IDENTITY4)

    def matrix(self) -> np.ndarray:
        return np.block([[self.tt, self.tc], [self.ct, self.cc]])

    def __add__(self, other: "GenEndo") -> "GenEndo":
        return GenEndo(self.tt + other.tt, self.tc + other.tc, self.ct + other.ct, self.cc + other.cc)

    def __sub__(self, other: "GenEndo") -> "GenEndo":
        return self + (-1.0) * other

    def __mul__(self, factor: float) -> "GenEndo":
        return GenEndo(factor * self.tt, factor * self.tc, factor * self.ct, factor * self.cc)

    __rmul__ = __mul__

    def __matmul__(self, other: "GenEndo") -> "GenEndo":
        return GenEndo.from_matrix(self.matrix() @ other.matrix())

    def to_dict(self) -> Dict[str, List[List[float]]]:
        """Four named blocks, row-major."""
        return {name: getattr(self, name).tolist() for name in ("tt", "tc", "ct", "cc")}


class GenType(str, Enum):
    GAP = "GaP"
    GAPC = "GaPC"
    GAC = "GaC"
    GAAC = "GaAC"
    NONE = "None"


# (gamma1, gamma2) -> type
TYPE_TABLE: Dict[Tuple[int, int], GenType] = {
    (1, 1): GenType.GAP,
    (1, -1): GenType.GAPC,
    (-1, 1): GenType.GAC,
    (-1, -1): GenType.GAAC,
}

ISOTROPIC_TYPES = frozenset({GenType.GAC, GenType.GAPC})


@dataclass
class Classification:
    """Measured type of J with the residuals behind each sign decision."""
    gen_type: GenType
    gamma1: Optional[int]
    gamma2: Optional[int]
    residuals: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "type": self.gen_type.value,
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "residuals": dict(self.residuals),
        }


def _pick_sign(plus: float, minus: float, tol: float) -> Optional[int]:
    if plus <= tol and plus <= minus:
        return 1
    if minus <= tol:
        return -1
    return None


def classify_gen(J: GenEndo, tol: Optional[float] = None) -> Classification:
    """Read (gamma1, gamma2) off J^2 = gamma1 Id and J^T eta J = gamma2 eta."""
    tol = ENGINE_SETTINGS.matrix_tol if tol is None else tol
    matrix = J.matrix()
    square = matrix @ matrix
    compat = matrix.T @ ETA @ matrix
    residuals = {
        "square_plus": max_norm(square - IDENTITY8),
        "square_minus": max_norm(square + IDENTITY8),
        "eta_plus": max_norm(compat - ETA),
        "eta_minus": max_norm(compat + ETA),
    }
    gamma1 = _pick_sign(residuals["square_plus"], residuals["square_minus"], tol)
    gamma2 = _pick_sign(residuals["eta_plus"], residuals["eta_minus"], tol)
    gen_type = TYPE_TABLE.get((gamma1, gamma2), GenType.NONE)
    return Classification(gen_type, gamma1, gamma2, residuals)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

class Symmetry(str, Enum):
    ANTISYMMETRIC = "antisymmetric"
    SYMMETRIC = "symmetric"


def _check_eps(eps: int) -> None:
    if eps not in (1, -1):
        raise ValueError(f"epsilon must be +1 or -1, got {eps}")


def build_diag(K: np.ndarray, eps: int) -> GenEndo:
    """(K, 0; 0, eps K^T)."""
    _check_eps(eps)
    K = np.asarray(K, dtype=float)
    return GenEndo(K, ZERO4, ZERO4, eps * K.T)


def build_antidiag(M: np.ndarray, symmetry: Symmetry, eps: int) -> GenEndo:
    """
    (0, M^-1; eps M, 0) for a non-degenerate 2-form or symmetric form M.

    Raises:
        SingularMatrixError: |det M| < 1e-12
        ValueError: M does not have the declared symmetry
    """
    _check_eps(eps)
    M = np.asarray(M, dtype=float)
    sign = -1.0 if Symmetry(symmetry) == Symmetry.ANTISYMMETRIC else 1.0
    if max_norm(M - sign * M.T) > 1e-12 * (1.0 + max_norm(M)):
        raise ValueError(f"Matrix is not {Symmetry(symmetry).value}")
    det = float(np.linalg.det(M))
    if abs(det) < DET_FLOOR:
        raise SingularMatrixError(f"|det M| = {abs(det):.3e} below {DET_FLOOR:.0e}")
    return GenEndo(ZERO4, np.linalg.inv(M), eps * M, ZERO4)


def j_complex(J: np.ndarray, eps: int) -> GenEndo:
    """J_J for an almost complex J."""
    return build_diag(J, eps)


def j_product(P: np.ndarray, eps: int) -> GenEndo:
    """J_P for an almost product P."""
    return build_diag(P, eps)


def j_metric(g: np.ndarray, eps: int) -> GenEndo:
    """J_g for a non-degenerate symmetric g."""
    return build_antidiag(g, Symmetry.SYMMETRIC, eps)


def j_rho(s: MAStructure, pt: Point, eps1: int, floor: Optional[float] = None) -> GenEndo:
    return build_diag(rho_at(s, pt, floor), eps1)


def j_alpha(s: MAStructure, pt: Point, eps2: int) -> GenEndo:
    return build_antidiag(matrix_at(to_two_form(s), pt), Symmetry.ANTISYMMETRIC, eps2)


def j_omega(eps3: int) -> GenEndo:
    return build_antidiag(OMEGA, Symmetry.ANTISYMMETRIC, eps3)


def build_banos(s: MAStructure, pt: Point, floor: Optional[float] = None) -> GenEndo:
    """
    (A, Omega^-1; -(Omega + Omega A^2), -A^T) with A = Omega^-1 alpha, unnormalized.

    Raises:
        DegeneratePointError: |Pf(pt)| < floor
    """
    floor = ENGINE_SETTINGS.pfaffian_floor if floor is None else floor
    pf = evaluate(pfaffian(s), pt)
    if abs(pf) < floor:
        raise DegeneratePointError(pt, pf, floor)
    A = OMEGA_INV @ matrix_at(to_two_form(s), pt)
    return GenEndo(A, OMEGA_INV, -(OMEGA + OMEGA @ A @ A), -A.T)


def hitchin_residual(s: MAStructure, pt: Point) -> float:
    """||Omega A - A^T Omega|| for A = Omega^-1 alpha; zero for effective alpha."""
    A = OMEGA_INV @ matrix_at(to_two_form(s), pt)
    return max_norm(OMEGA @ A - A.T @ OMEGA)


def anticommutator(J1: GenEndo, J2: GenEndo) -> GenEndo:
    """J1 J2 + J2 J1."""
    m1, m2 = J1.matrix(), J2.matrix()
    return GenEndo.from_matrix(m1 @ m2 + m2 @ m1)


# expected types of the diagonal and antidiagonal builders per sign of epsilon
BUILDER_TYPES: Dict[Tuple[str, int], GenType] = {
    ("J_J", 1): GenType.GAAC,
    ("J_J", -1): GenType.GAC,
    ("J_P", 1): GenType.GAP,
    ("J_P", -1): GenType.GAPC,
    ("J_alpha", 1): GenType.GAPC,
    ("J_alpha", -1): GenType.GAC,
    ("J_g", 1): GenType.GAP,
    ("J_g", -1): GenType.GAAC,
}

# J_rho per sign of Pf and eps1; the elliptic eps1 = +1 cell follows the J_J column
RHO_TYPES: Dict[Tuple[int, int], GenType] = {
    (1, 1): GenType.GAAC,
    (1, -1): GenType.GAC,
    (-1, 1): GenType.GAP,
    (-1, -1): GenType.GAPC,
}

_STANDARD_COMPLEX = OMEGA
_STANDARD_PRODUCT = np.diag([1.0, 1.0, -1.0, -1.0])
# Laplace alpha: a non-degenerate effective 2-form
_STANDARD_TWO_FORM = np.array(
    [
        [0.0, 0.0, 0.0, -1.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
    ]
)


def builder_table(tol: Optional[float] = None, metric: Optional[np.ndarray] = None) -> List[dict]:
    """Classify J_J, J_P, J_alpha, J_g for both signs of epsilon against the expected table."""
    metric = IDENTITY4 if metric is None else np.asarray(metric, dtype=float)
    builders = {
        "J_J": lambda eps: j_complex(_STANDARD_COMPLEX, eps),
        "J_P": lambda eps: j_product(_STANDARD_PRODUCT, eps),
        "J_alpha": lambda eps: build_antidiag(_STANDARD_TWO_FORM, Symmetry.ANTISYMMETRIC, eps),
        "J_g": lambda eps: j_metric(metric, eps),
    }
    rows = []
    for (name, eps), expected in BUILDER_TYPES.items():
        measured = classify_gen(builders[name](eps), tol)
        rows.append(
            {
                "builder": name,
                "eps": eps,
                "expected": expected.value,
                "measured": measured.to_dict(),
                "ok": measured.gen_type == expected,
            }
        )
    return rows


# ---------------------------------------------------------------------------
# Eigenbundles and isotropy
# ---------------------------------------------------------------------------

@dataclass
class EigenProjectors:
    """Projectors onto the +1/-1 (real case) or +i/-i (complex case) eigenbundles."""
    plus: np.ndarray
    minus: np.ndarray
    is_complex: bool
    ranks: Tuple[int, int]

    @property
    def non_degenerate(self) -> bool:
        return self.ranks == (4, 4)


def eigen_projectors(J: GenEndo, tol: Optional[float] = None) -> EigenProjectors:
    """
    P_+- = (Id +- J)/2 when J^2 = Id, P_+- = (Id -+ iJ)/2 when J^2 = -Id.

    Raises:
        UnclassifiableError: J^2 is neither Id nor -Id within tol
    """
    tol = ENGINE_SETTINGS.matrix_tol if tol is None else tol
    classification = classify_gen(J, tol)
    matrix = J.matrix()
    if classification.gamma1 == 1:
        plus, minus = (IDENTITY8 + matrix) / 2.0, (IDENTITY8 - matrix) / 2.0
        is_complex = False
    elif classification.gamma1 == -1:
        iJ = 1j * matrix.astype(np.complex128)
        plus, minus = (IDENTITY8 - iJ) / 2.0, (IDENTITY8 + iJ) / 2.0
        is_complex = True
    else:
        raise UnclassifiableError(
            f"J^2 is neither Id nor -Id (residuals {classification.residuals['square_plus']:.3e}, "
            f"{classification.residuals['square_minus']:.3e})"
        )
    ranks = (int(np.linalg.matrix_rank(plus, tol=1e-8)), int(np.linalg.matrix_rank(minus, tol=1e-8)))
    return EigenProjectors(plus, minus, is_complex, ranks)


@dataclass
class IsotropyResult:
    isotropic: bool
    residuals: Dict[str, float]
    witness: Optional[dict] = None

    def to_dict(self) -> dict:
        return {
            "verdict": "Isotropic" if self.isotropic else "NonIsotropic",
            "residuals": dict(self.residuals),
            "witness": self.witness,
        }


def isotropy_check(J: GenEndo, tol: Optional[float] = None) -> IsotropyResult:
    """
    Both eigenbundles totally isotropic: P^T eta P = 0 (complex-bilinear pairing).

    Raises:
        UnclassifiableError: J^2 is neither Id nor -Id within tol
    """
    tol = ENGINE_SETTINGS.matrix_tol if tol is None else tol
    projectors = eigen_projectors(J, tol)
    residuals: Dict[str, float] = {}
    witness = None
    for sign, projector in (("+", projectors.plus), ("-", projectors.minus)):
        gram = projector.T @ ETA @ projector
        residuals[sign] = max_norm(gram)
        if residuals[sign] > tol and witness is None:
            i, j = np.unravel_index(int(np.argmax(np.abs(gram))), gram.shape)
            witness = {"eigenbundle": sign, "columns": [int(i), int(j)], "pairing": float(abs(gram[i, j]))}
    return IsotropyResult(witness is None, residuals, witness)


# ---------------------------------------------------------------------------
# Expression-valued fields
# ---------------------------------------------------------------------------

def _const_block(matrix: np.ndarray) -> Matrix4Expr:
    return tuple(tuple(Num(float(v)) for v in row) for row in np.asarray(matrix, dtype=float))


def _transpose(block: Matrix4Expr) -> Matrix4Expr:
    return tuple(tuple(block[j][i] for j in range(4)) for i in range(4))


def _scale_block(block: Matrix4Expr, factor: float) -> Matrix4Expr:
    return tuple(tuple(simplify(factor * entry) for entry in row) for row in block)


def _matvec(block: Matrix4Expr, vector: Sequence[Expr]) -> Tuple[Expr, ...]:
    result = []
    for row in block:
        total: Expr = ZERO
        for entry, component in zip(row, vector):
            total = total + entry * component
        result.append(fold(total))
    return tuple(result)


_ZERO_BLOCK: Matrix4Expr = _const_block(ZERO4)


@dataclass(frozen=True)
class GenEndoField:
    """
    A generalized endomorphism with expression entries.

    Numeric checks evaluate the field at points; Courant-bracket computations
    apply it symbolically to sections. Only certified (isotropic) fields are
    accepted by the Nijenhuis tensor.
    """
    tt: Matrix4Expr
    tc: Matrix4Expr
    ct: Matrix4Expr
    cc: Matrix4Expr
    certified: bool = False
    gen_type: Optional[GenType] = None

    @classmethod
    def constant(cls, J: GenEndo) -> "GenEndoField":
        return cls(_const_block(J.tt), _const_block(J.tc), _const_block(J.ct), _const_block(J.cc))

    def at(self, pt: Point) -> GenEndo:
        blocks = [
            np.array([[evaluate(entry, pt) for entry in row] for row in block])
            for block in (self.tt, self.tc, self.ct, self.cc)
        ]
        return GenEndo(*blocks)

    def apply(self, vector: Sequence[Expr], covector: Sequence[Expr]) -> Tuple[Tuple[Expr, ...], Tuple[Expr, ...]]:
        """J (X, xi) = (TT X + TC xi, CT X + CC xi)."""
        top = tuple(fold(a + b) for a, b in zip(_matvec(self.tt, vector), _matvec(self.tc, covector)))
        bottom = tuple(fold(a + b) for a, b in zip(_matvec(self.ct, vector), _matvec(self.cc, covector)))
        return top, bottom


def j_rho_field(s: MAStructure, sign: int, eps1: int) -> GenEndoField:
    """J_rho as a field on a region where sgn Pf = sign."""
    _check_eps(eps1)
    rho = rho_expr(s, sign)
    return GenEndoField(rho, _ZERO_BLOCK, _ZERO_BLOCK, _scale_block(_transpose(rho), eps1))


def j_alpha_field(s: MAStructure, eps2: int) -> GenEndoField:
    """J_alpha as a field, with alpha^-1 = -(1/Pf) Omega^-1 alpha Omega^-1."""
    _check_eps(eps2)
    alpha = to_two_form(s)
    entries = [[alpha.component(i, j) for j in range(4)] for i in range(4)]
    alpha_block = tuple(tuple(simplify(e) for e in row) for row in entries)
    inverse_pf = Neg(ONE) / pfaffian(s)
    product = [[ZERO] * 4 for _ in range(4)]
    for i in range(4):
        for j in range(4):
            total: Expr = ZERO
            for k in range(4):
                for m in range(4):
                    coefficient = OMEGA_INV[i, k] * OMEGA_INV[m, j]
                    if coefficient:
                        total = total + coefficient * alpha_block[k][m]
            product[i][j] = simplify(inverse_pf * total)
    inverse = tuple(tuple(row) for row in product)
    return GenEndoField(_ZERO_BLOCK, inverse, _scale_block(alpha_block, eps2), _ZERO_BLOCK)


def j_omega_field(eps3: int) -> GenEndoField:
    return GenEndoField.constant(j_omega(eps3))


def certify_isotropic(J: GenEndoField, plan: SamplePlan, tol: Optional[float] = None) -> GenEndoField:
    """
    Certify that J is an isotropic structure of one type at every sample point.

    Raises:
        NotIsotropicError: J is unclassifiable, changes type or has a
            non-isotropic eigenbundle at some point
    """
    tol = ENGINE_SETTINGS.matrix_tol if tol is None else tol
    seen: Optional[GenType] = None
    for pt in sample(plan):
        numeric = J.at(pt)
        classification = classify_gen(numeric, tol)
        if classification.gen_type == GenType.NONE:
            raise NotIsotropicError(f"Structure is not a generalized almost structure at {tuple(pt)}")
        if seen is not None and classification.gen_type != seen:
            raise NotIsotropicError(f"Structure changes type from {seen.value} to {classification.gen_type.value}")
        seen = classification.gen_type
        result = isotropy_check(numeric, tol)
        if not result.isotropic:
            raise NotIsotropicError(
                f"{seen.value} structure is not isotropic at {tuple(pt)}; its Nijenhuis torsion "
                "is not a tensor for non-isotropic structures"
            )
    logger.debug(f"Certified isotropic {seen.value if seen else '?'} field on {plan.count} points")
    return replace(J, certified=True, gen_type=seen)
