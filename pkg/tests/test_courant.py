import pytest

from mageom.courant import (
    Section,
    basis_sections,
    closedness,
    courant_bracket,
    divergence_check,
    lie_bracket,
    lie_derivative,
    lr_integrability,
    nijenhuis,
    nijenhuis_probe,
)
from mageom.exceptions import NotIsotropicError
from mageom.expr import ONE, ZERO, Point, constant_value, parse, simplify
from mageom.gen import GenEndoField, GenType, certify_isotropic, j_omega, j_rho_field
from mageom.ma import SignedRegion
from mageom.phase import TwoForm, differential, one_form_derivative


def test_basis_sections_commute():
    basis = basis_sections()
    assert len(basis) == 8
    for s1 in basis:
        for s2 in basis:
            bracket = courant_bracket(s1, s2)
            assert all(c == ZERO for c in bracket.components())


def test_lie_bracket():
    X = (ZERO, parse("x"), ZERO, ZERO)
    d_x = (ONE, ZERO, ZERO, ZERO)
    assert [constant_value(c) for c in lie_bracket(X, d_x)] == [0.0, -1.0, 0.0, 0.0]
    assert all(c == ZERO for c in lie_bracket(X, X))


def test_lie_derivative():
    d_x = (ONE, ZERO, ZERO, ZERO)
    result = lie_derivative(d_x, (ZERO, parse("x"), ZERO, ZERO))
    assert [constant_value(c) for c in result] == [0.0, 1.0, 0.0, 0.0]


def test_courant_bracket_is_skew():
    s1 = Section.of(vector=("y", 0, "p", 0), form=(0, "x*q", 0, 1))
    s2 = Section.of(vector=(0, "x^2", 0, "q"), form=("p", 0, "y", 0))
    total = (courant_bracket(s1, s2) + courant_bracket(s2, s1)).simplified()
    assert all(c == ZERO for c in total.components())


def test_courant_bracket_of_forms_vanishes():
    s1 = Section.of(form=("x*y", "p", 0, "q^2"))
    s2 = Section.of(form=(0, "sin(x)", "y", 0))
    assert all(c == ZERO for c in courant_bracket(s1, s2).components())


def test_courant_bracket_of_vector_and_exact_form():
    # [(X, 0), (0, df)] = (0, d(X f)) - 1/2 d(X f) = (0, 1/2 d(X f))
    f = parse("x*p")
    s1 = Section.of(vector=(1, 0, 0, 0))
    s2 = Section(form=differential(f))
    form = courant_bracket(s1, s2).form
    expected = differential(parse("0.5*p"))
    assert all(simplify(a - b) == ZERO for a, b in zip(form, expected))


def test_nijenhuis_requires_certified_field():
    J = GenEndoField.constant(j_omega(-1))
    s = basis_sections()
    with pytest.raises(NotIsotropicError):
        nijenhuis(J, s[0], s[1])


def test_nijenhuis_probe_of_constant_structure(laplace, plan):
    J = certify_isotropic(j_rho_field(laplace, 1, -1), plan)
    assert J.gen_type == GenType.GAC
    probe = nijenhuis_probe(J, Point(0.3, -0.2, 0.5, 1.0))
    assert probe.vanishes
    assert probe.pairs == 64
    assert probe.to_dict()["kind"] == "probe"


def test_von_karman_torsion_is_nonzero(von_karman, positive_p_plan):
    J = certify_isotropic(j_rho_field(von_karman, 1, -1), positive_p_plan)
    torsion = nijenhuis_probe(J, Point(0.0, 0.0, 1.0, 0.0))
    assert torsion.max_norm >= 1e-3
    assert not torsion.vanishes
    assert torsion.worst_pair is not None


def test_exact_forms_are_closed(plan):
    b = one_form_derivative((ZERO, parse("x*q"), ZERO, parse("p^2")))
    assert closedness(b, plan).closed


def test_laplace_is_integrable(laplace, plan):
    result = lr_integrability(laplace, SignedRegion.parse("+", plan))
    assert result.closed
    assert result.to_dict("Integrable", "NotIntegrable")["verdict"] == "Integrable"


def test_von_karman_is_not_integrable(von_karman, positive_p_plan):
    result = lr_integrability(von_karman, SignedRegion.parse("+", positive_p_plan))
    assert not result.closed
    assert result.witness is not None
    assert not result.coefficients["c_xpq"].is_zero
    assert result.to_dict("Integrable", "NotIntegrable")["verdict"] == "NotIntegrable"


def test_divergence_check(laplace, plan):
    assert divergence_check(laplace, ZERO, plan).closed
    # d(p Omega) = dp ^ dy ^ dq
    result = divergence_check(laplace, parse("p"), plan)
    assert not result.closed
    assert not result.coefficients["c_ypq"].is_zero


def test_omega_is_closed(plan):
    assert closedness(TwoForm.omega(), plan).closed
