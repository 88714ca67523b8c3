import math

import pytest

from mageom.exceptions import DegeneratePointError, FamilyGateError
from mageom.expr import Point, evaluate, parse
from mageom.gen import GenType, classify_gen
from mageom.ma import pfaffian
from mageom.models import SamplePlan
from mageom.quadric import (
    FamilyCoeffs,
    QuadricType,
    anticommutativity_check,
    anticommutator_residuals,
    build_family_member,
    distinctness_check,
    induced_conic,
    is_admissible,
    k_value,
    member_residuals,
    quadric_type,
    relaxed_pair_check,
    rescale_transform,
    sample_admissible,
    search_admissible,
    structure_type,
    sweep,
)

ORIGIN = Point(0.0, 0.0, 0.0, 0.0)


def test_k_value():
    assert k_value(FamilyCoeffs(1.0, 0.0, 0.0), 1) == -1.0
    assert k_value(FamilyCoeffs(1.0, 0.0, 0.0), -1) == 1.0
    assert k_value(FamilyCoeffs(1.0, 1.0, 1.0), 1) == 1.0
    assert k_value(FamilyCoeffs(0.0, 2.0, 1.0, eps2=1, eps3=-1), 1) == 3.0
    assert is_admissible(FamilyCoeffs(0.0, 0.6, 0.8), 1)
    assert not is_admissible(FamilyCoeffs(1.0, 1.0, 0.0), 1)


def test_coefficients_are_validated():
    with pytest.raises(ValueError):
        FamilyCoeffs(math.inf, 0.0, 0.0)
    with pytest.raises(ValueError):
        FamilyCoeffs(1.0, 0.0, 0.0, eps2=0)


@pytest.mark.parametrize(
    "sgn_pf, k, eps2, eps3, expected",
    [
        (1, 1, 1, 1, QuadricType.HYPERBOLOID_1),
        (1, 1, -1, -1, QuadricType.EMPTY),
        (1, -1, -1, -1, QuadricType.SPHERE),
        (1, -1, 1, 1, QuadricType.HYPERBOLOID_2),
        (-1, 1, 1, 1, QuadricType.SPHERE),
        (-1, 1, -1, -1, QuadricType.HYPERBOLOID_2),
        (-1, -1, 1, 1, QuadricType.EMPTY),
        (-1, -1, 1, -1, QuadricType.HYPERBOLOID_2),
    ],
)
def test_quadric_type(sgn_pf, k, eps2, eps3, expected):
    assert quadric_type(sgn_pf, k, eps2, eps3) == expected


def test_quadric_type_rejects_bad_k():
    with pytest.raises(ValueError):
        quadric_type(1, 0, 1, 1)


def test_structure_type_and_conic():
    assert structure_type(1) == GenType.GAPC
    assert structure_type(-1) == GenType.GAC
    assert induced_conic(-1, 1, 1, 1) == "Ellipse"
    assert induced_conic(1, -1, 1, 1) == "Hyperbola"
    assert induced_conic(1, 1, -1, -1) == "Empty"


def test_member_squares_to_k(laplace):
    member = build_family_member(laplace, FamilyCoeffs(1.0, 1.0, 1.0), ORIGIN)
    residuals = member_residuals(member, 1.0)
    assert residuals["square"] <= 1e-12
    assert residuals["eta"] <= 1e-12
    assert classify_gen(member).gen_type == GenType.GAPC


def test_member_on_hyperbolic_structure(wave):
    # sgn Pf = -1: k = a1^2 + eps2 a2^2 + eps3 a3^2
    c = FamilyCoeffs(0.6, 0.0, 0.8, eps2=1, eps3=-1)
    assert k_value(c, -1) == pytest.approx(-0.28)
    assert not is_admissible(c, -1)

    c = FamilyCoeffs(1.0, 0.5, 0.5, eps2=1, eps3=-1)
    member = build_family_member(wave, c, ORIGIN)
    assert member_residuals(member, 1.0)["square"] <= 1e-12


def test_gate_non_degeneracy(von_karman):
    with pytest.raises(FamilyGateError) as excinfo:
        build_family_member(von_karman, FamilyCoeffs(1.0, 0.0, 0.0), ORIGIN)
    assert excinfo.value.gate == "non_degeneracy"


def test_gate_admissibility(laplace):
    with pytest.raises(FamilyGateError) as excinfo:
        build_family_member(laplace, FamilyCoeffs(1.0, 1.0, 0.0), ORIGIN)
    assert excinfo.value.gate == "admissibility"


def test_gate_anticommutativity(laplace):
    c = FamilyCoeffs(0.0, 1.5, math.sqrt(1.25), eps2=1, eps3=-1)
    with pytest.raises(FamilyGateError) as excinfo:
        build_family_member(laplace, c, ORIGIN)
    assert excinfo.value.gate == "anticommutativity"


def test_anticommutativity_gate_skipped_on_a2a3_zero(laplace):
    member = build_family_member(laplace, FamilyCoeffs(0.0, 1.0, 0.0, eps2=1, eps3=-1), ORIGIN)
    assert member_residuals(member, 1.0)["square"] <= 1e-12


def test_sample_admissible():
    triples = sample_admissible(1, 1, 1, 1, 20, seed=4)
    assert len(triples) == 20
    assert all(is_admissible(c, 1) for c in triples)
    restricted = sample_admissible(1, -1, 1, -1, 10, seed=4, restrict_a2a3=True)
    assert restricted
    assert all(c.a2 * c.a3 == 0.0 for c in restricted)
    assert sample_admissible(1, 1, -1, -1, 5, max_draws=2_000) == []


def test_search_admissible_on_empty_quadric():
    assert search_admissible(1, 1, -1, -1, 5_000) == 0
    assert search_admissible(-1, 1, 1, 1, 100) == 100


def test_sweep():
    cells = sweep(samples_per_cell=4, seed=2, empty_draws=2_000)
    assert len(cells) == 16
    assert all(cell["ok"] for cell in cells), [cell for cell in cells if not cell["ok"]]
    empty = [cell for cell in cells if cell["quadric"] == QuadricType.EMPTY.value]
    assert len(empty) == 2
    assert all(cell["empty_search"]["found"] == 0 for cell in empty)


def test_sweep_at_full_scale():
    cells = sweep(samples_per_cell=50, seed=0, empty_draws=100_000)
    assert all(cell["ok"] for cell in cells), [cell for cell in cells if not cell["ok"]]
    for cell in cells:
        if cell["quadric"] == QuadricType.EMPTY.value:
            assert cell["empty_search"] == {"draws": 100_000, "found": 0}
        else:
            assert cell["samples"] == 50
            assert cell["max_square_residual"] <= 1e-9
            assert cell["max_eta_residual"] <= 1e-9


def test_distinct_members_on_the_sphere(wave):
    # sgn Pf = -1, k = 1, eps2 = eps3 = 1 is a sphere
    triples = sample_admissible(-1, 1, 1, 1, 200, seed=1)
    assert len(triples) == 200
    plan = SamplePlan(count=4, seed=1)
    for c1, c2 in zip(triples[0::2], triples[1::2]):
        assert distinctness_check(wave, c1, c2, plan).distinct


def test_anticommutativity_check(laplace, anticommuting, plan):
    assert anticommutativity_check(laplace, 1, 1, plan).holds
    assert anticommutativity_check(anticommuting, 1, -1, plan).holds

    failed = anticommutativity_check(laplace, 1, -1, plan)
    assert not failed.holds
    assert failed.max_deviation == pytest.approx(2.0)
    assert failed.witness is not None
    assert failed.to_dict()["eps1_forced"] == -1


def test_anticommutativity_check_on_degenerate_point(von_karman, plan):
    near_zero = plan.with_bounds(p=(-1e-8, 1e-8))
    with pytest.raises(DegeneratePointError):
        anticommutativity_check(von_karman, 1, 1, near_zero)


def test_anticommutator_residuals(laplace):
    forced = anticommutator_residuals(laplace, ORIGIN, -1, 1, 1)
    assert max(forced.values()) <= 1e-12
    mismatched = anticommutator_residuals(laplace, ORIGIN, -1, 1, -1)
    assert mismatched["rho_omega"] <= 1e-12
    assert mismatched["alpha_omega"] > 0.1


def test_relaxed_pair_check(laplace):
    result = relaxed_pair_check(laplace, ORIGIN, 1, 1)
    assert result["constant"] == 0.0
    assert result["residual"] <= 1e-12


def test_distinctness(laplace, plan):
    a = FamilyCoeffs(1.0, 0.0, 0.0)
    b = FamilyCoeffs(0.0, 0.0, 1.0, eps3=-1)
    distinct = distinctness_check(laplace, a, b, plan)
    assert distinct.distinct
    assert distinct.witness is not None
    same = distinctness_check(laplace, a, a, plan)
    assert not same.distinct
    assert same.witness is None
    with pytest.raises(FamilyGateError):
        distinctness_check(laplace, a, FamilyCoeffs(1.0, 1.0, 0.0), plan)


def test_rescale_by_minus_one(laplace, plan):
    result = rescale_transform(laplace, parse("-1"), plan)
    assert result["pfaffian"]["ok"]
    assert result["rho_sign"]["ok"]
    assert result["a2_zero_correspondence"]["ok"]
    assert result["j_alpha"]["tc_residual"] <= 1e-12
    assert result["j_alpha"]["ct_residual"] <= 1e-12
    assert result["keeps_anticommutativity"]
    assert not result["family_preserved"]


def test_rescale_by_two(laplace, plan):
    h = parse("2")
    result = rescale_transform(laplace, h, plan)
    assert result["pfaffian"]["symbolic"] == "ProvenZero"
    assert result["pfaffian"]["ok"]
    assert evaluate(pfaffian(laplace.scaled(h)), ORIGIN) == pytest.approx(4.0 * evaluate(pfaffian(laplace), ORIGIN))
    assert result["rho_sign"]["ok"]
    assert result["a2_zero_correspondence"]["ok"]
    # Pf = 4 no longer matches eps2 eps3
    assert not result["keeps_anticommutativity"]
    assert not result["family_preserved"]


def test_rescale_by_non_constant_factor(laplace, plan):
    result = rescale_transform(laplace, parse("1 + p^2"), plan)
    assert result["pfaffian"]["symbolic"] == "ProvenZero"
    assert result["pfaffian"]["ok"]
    assert result["rho_sign"]["ok"]
    assert not result["keeps_anticommutativity"]
    assert not result["family_preserved"]


def test_rescale_by_one_preserves_the_family(anticommuting, plan):
    result = rescale_transform(anticommuting, parse("1"), plan, eps2=1, eps3=-1)
    assert result["family_preserved"]
    assert result["keeps_anticommutativity"]
