import numpy as np
import pytest

from mageom.exceptions import NotIsotropicError, SingularMatrixError, UnclassifiableError
from mageom.expr import Point
from mageom.gen import (
    RHO_TYPES,
    GenEndo,
    GenEndoField,
    GenType,
    Symmetry,
    anticommutator,
    build_antidiag,
    build_banos,
    build_diag,
    builder_table,
    certify_isotropic,
    classify_gen,
    eigen_projectors,
    hitchin_residual,
    isotropy_check,
    j_alpha,
    j_alpha_field,
    j_complex,
    j_metric,
    j_omega,
    j_rho,
    j_rho_field,
)
from mageom.ma import rho_at
from mageom.models import SamplePlan
from mageom.phase import sample
from mageom.quadric import anticommutator_residuals
from mageom.utils import IDENTITY4, OMEGA, max_norm

ORIGIN = Point(0.0, 0.0, 0.0, 0.0)


def _assert_same(J1: GenEndo, J2: GenEndo, atol: float = 1e-12) -> None:
    np.testing.assert_allclose(J1.matrix(), J2.matrix(), atol=atol)


def test_builder_table():
    rows = builder_table()
    assert len(rows) == 8
    assert all(row["ok"] for row in rows), [row for row in rows if not row["ok"]]


@pytest.mark.parametrize(
    "structure, eps1, expected",
    [
        ("laplace", -1, GenType.GAC),
        ("laplace", 1, GenType.GAAC),
        ("wave", 1, GenType.GAP),
        ("wave", -1, GenType.GAPC),
    ],
)
def test_j_rho_types(structure, eps1, expected, request):
    s = request.getfixturevalue(structure)
    J = build_diag(rho_at(s, ORIGIN), eps1)
    assert classify_gen(J).gen_type == expected


def test_rho_types_follow_pfaffian_sign(von_karman, positive_p_plan):
    for pt in sample(positive_p_plan)[:4]:
        for eps1 in (1, -1):
            assert classify_gen(j_rho(von_karman, pt, eps1)).gen_type == RHO_TYPES[(1, eps1)]
    negative = Point(0.3, -0.2, -1.5, 0.7)
    assert classify_gen(j_rho(von_karman, negative, -1)).gen_type == RHO_TYPES[(-1, -1)]


def test_classification_residuals():
    c = classify_gen(j_omega(-1))
    assert c.gen_type == GenType.GAC
    assert (c.gamma1, c.gamma2) == (-1, 1)
    assert c.residuals["square_minus"] <= 1e-12
    assert classify_gen(2.0 * GenEndo.identity()).gen_type == GenType.NONE


def test_banos_structure_of_laplace(laplace):
    J = build_banos(laplace, ORIGIN)
    assert max_norm(J.ct) <= 1e-12
    c = classify_gen(J)
    assert c.gen_type == GenType.GAC
    assert c.residuals["square_minus"] <= 1e-10


def test_hitchin_residual_vanishes(random_structure):
    rng = np.random.default_rng(30)
    for _ in range(20):
        s = random_structure(rng)
        pt = Point(*rng.uniform(-2.0, 2.0, size=4))
        assert hitchin_residual(s, pt) <= 1e-12 * (1.0 + max(abs(v) for v in s.values_at(pt)))


def test_isotropy_by_type(laplace):
    assert isotropy_check(build_diag(rho_at(laplace, ORIGIN), -1)).isotropic
    assert isotropy_check(j_omega(-1)).isotropic
    assert isotropy_check(j_omega(1)).isotropic
    assert not isotropy_check(j_metric(IDENTITY4, 1)).isotropic
    assert not isotropy_check(j_complex(OMEGA, 1)).isotropic


def test_eigen_projectors():
    projectors = eigen_projectors(j_omega(-1))
    assert projectors.is_complex
    assert projectors.non_degenerate
    real = eigen_projectors(j_metric(IDENTITY4, 1))
    assert not real.is_complex
    assert real.ranks == (4, 4)
    with pytest.raises(UnclassifiableError):
        eigen_projectors(2.0 * GenEndo.identity())


def test_antidiag_checks_its_input():
    with pytest.raises(ValueError):
        build_antidiag(IDENTITY4, Symmetry.ANTISYMMETRIC, 1)
    with pytest.raises(SingularMatrixError):
        build_antidiag(np.zeros((4, 4)), Symmetry.ANTISYMMETRIC, 1)
    with pytest.raises(ValueError):
        build_diag(IDENTITY4, 0)


def test_rho_anticommutes_with_omega_only_for_negative_eps1(laplace):
    for eps3 in (1, -1):
        forced = anticommutator(j_rho(laplace, ORIGIN, -1), j_omega(eps3))
        assert max_norm(forced.matrix()) <= 1e-10
        flipped = anticommutator(j_rho(laplace, ORIGIN, 1), j_omega(eps3))
        assert max_norm(flipped.matrix()) > 0.1


def test_family_generators_anticommute_only_with_matching_signs(anticommuting):
    # Pf = -1, so eps2 eps3 = -1 is required
    points = sample(SamplePlan(count=100, seed=5))
    assert len(points) == 100
    for pt in points:
        matched = anticommutator_residuals(anticommuting, pt, -1, 1, -1)
        assert max(matched.values()) <= 1e-10
        assert max(anticommutator_residuals(anticommuting, pt, 1, 1, -1).values()) >= 0.1
        assert max(anticommutator_residuals(anticommuting, pt, -1, 1, 1).values()) >= 0.1


def test_fields_match_pointwise_builders(laplace, von_karman, positive_p_plan):
    pt = Point(0.2, -0.4, 0.9, 1.1)
    _assert_same(j_rho_field(laplace, 1, -1).at(pt), j_rho(laplace, pt, -1))
    _assert_same(j_rho_field(von_karman, 1, -1).at(pt), j_rho(von_karman, pt, -1))
    for pt in sample(positive_p_plan)[:4]:
        _assert_same(j_alpha_field(von_karman, 1).at(pt), j_alpha(von_karman, pt, 1), atol=1e-10)
    _assert_same(GenEndoField.constant(j_omega(-1)).at(pt), j_omega(-1))


def test_certify_isotropic(laplace, von_karman, plan, positive_p_plan):
    certified = certify_isotropic(j_rho_field(laplace, 1, -1), plan)
    assert certified.certified
    assert certified.gen_type == GenType.GAC

    elliptic = certify_isotropic(j_rho_field(von_karman, 1, -1), positive_p_plan)
    assert elliptic.gen_type == GenType.GAC

    with pytest.raises(NotIsotropicError):
        certify_isotropic(j_rho_field(laplace, 1, 1), plan)
