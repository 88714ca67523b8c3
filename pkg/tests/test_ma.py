import math

import numpy as np
import pytest

from mageom.exceptions import DegeneratePointError, NotEffectiveError, ResidualInputError, SignValidationError
from mageom.expr import (
    ONE,
    VARIABLES,
    ZERO,
    Num,
    Point,
    Sym,
    Var,
    ZeroVerdict,
    constant_value,
    evaluate,
    is_zero,
    parse,
    simplify,
    substitute,
)
from mageom.ma import (
    MAStructure,
    PfaffianKind,
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
    rho_expr,
    to_two_form,
)
from mageom.models import SamplePlan
from mageom.phase import TwoForm, sample
from mageom.utils import IDENTITY4, max_norm

X, Y, P, Q = (Sym(var) for var in VARIABLES)


def _random_linear_structure(rng: np.random.Generator) -> MAStructure:
    coefficients = []
    for _ in range(5):
        c = [float(v) for v in rng.uniform(-1.0, 1.0, size=5)]
        coefficients.append(Num(c[0]) + Num(c[1]) * X + Num(c[2]) * Y + Num(c[3]) * P + Num(c[4]) * Q)
    return MAStructure(*coefficients)


def test_to_two_form_of_laplace(laplace):
    b = to_two_form(laplace)
    assert constant_value(b.c_xq) == -1.0
    assert constant_value(b.c_yp) == 1.0
    assert all(constant_value(c) == 0.0 for c in (b.c_xy, b.c_xp, b.c_yq, b.c_pq))


def test_two_form_round_trip(random_structure):
    rng = np.random.default_rng(20)
    for _ in range(10):
        s = random_structure(rng)
        assert from_two_form(to_two_form(s)) == s


def test_from_two_form_rejects_non_effective_forms():
    with pytest.raises(NotEffectiveError) as excinfo:
        from_two_form(TwoForm(c_xp=ONE), SamplePlan(count=4))
    assert excinfo.value.witness is not None


def test_pfaffian_golden_values(laplace, wave, von_karman, anticommuting):
    assert pfaffian(laplace) == ONE
    assert pfaffian(wave) == simplify(parse("-1"))
    assert pfaffian(von_karman) == parse("p")
    assert constant_value(pfaffian(anticommuting)) == pytest.approx(-1.0)
    family = MAStructure.from_strings(A="0.3", B="2", C="-0.3")
    assert constant_value(pfaffian(family)) == pytest.approx(-4.09)


def test_pfaffian_matches_wedge_quotient(random_structure):
    rng = np.random.default_rng(21)
    for _ in range(500):
        s = random_structure(rng)
        pf = pfaffian(s)
        for _ in range(20):
            pt = Point(*rng.uniform(-2.0, 2.0, size=4))
            value = evaluate(pf, pt)
            assert abs(value - pfaffian_oracle(s, pt)) <= 1e-9 * (1.0 + abs(value))


def test_classify(laplace, wave, von_karman, plan):
    assert classify(laplace, plan).kind == PfaffianKind.ELLIPTIC
    assert classify(wave, plan).kind == PfaffianKind.HYPERBOLIC
    assert classify(MAStructure.from_strings(), plan).kind == PfaffianKind.DEGENERATE

    mixed = classify(von_karman, plan.with_bounds(p=(-1.0, 1.0)))
    assert mixed.kind == PfaffianKind.MIXED
    assert mixed.witnesses["positive"].p > 0 > mixed.witnesses["negative"].p
    assert mixed.sign is None


def test_normalize_von_karman(von_karman, positive_p_plan):
    region = SignedRegion.parse("+", positive_p_plan)
    n = normalize(von_karman, region)
    for pt in sample(positive_p_plan):
        assert evaluate(n.A, pt) == pytest.approx(math.sqrt(pt.p))
        assert evaluate(n.C, pt) == pytest.approx(1.0 / math.sqrt(pt.p))
        assert evaluate(n.B, pt) == 0.0
    assert is_zero(simplify(pfaffian(n) - 1), positive_p_plan).verdict == ZeroVerdict.PROVEN_ZERO


def test_normalize_hyperbolic(anticommuting, plan):
    n = normalize(anticommuting, SignedRegion.parse("-", plan))
    assert constant_value(pfaffian(n)) == pytest.approx(-1.0)


def test_normalize_rejects_wrong_sign(von_karman, plan):
    regular = plan.with_reference(von_karman, 1e-6)
    with pytest.raises(SignValidationError) as excinfo:
        normalize(von_karman, SignedRegion.parse("+", regular))
    assert excinfo.value.witness[2] < 0


def test_region_sign_must_be_symbol(plan):
    with pytest.raises(ValueError):
        SignedRegion.parse("0", plan)


def test_rho_of_laplace_and_wave(laplace, wave):
    origin = Point(0.0, 0.0, 0.0, 0.0)
    np.testing.assert_allclose(
        rho_at(laplace, origin),
        [[0, 1, 0, 0], [-1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]],
    )
    np.testing.assert_allclose(
        rho_at(wave, origin),
        [[0, -1, 0, 0], [-1, 0, 0, 0], [0, 0, 0, -1], [0, 0, -1, 0]],
    )


def _check_rho_squares(s: MAStructure, plan: SamplePlan) -> None:
    pf = pfaffian(s)
    for pt in sample(plan):
        rho = rho_at(s, pt, plan.floor)
        sign = 1.0 if evaluate(pf, pt) > 0 else -1.0
        assert max_norm(rho @ rho + sign * IDENTITY4) <= 1e-10


def test_rho_squares_to_minus_sign_id(laplace, wave, von_karman, anticommuting, plan, positive_p_plan):
    _check_rho_squares(laplace, plan)
    _check_rho_squares(wave, plan)
    _check_rho_squares(anticommuting, plan)
    _check_rho_squares(von_karman, positive_p_plan)


def test_rho_squares_on_random_structures():
    rng = np.random.default_rng(22)
    box = SamplePlan(count=10, seed=5, bounds=((-1.0, 1.0),) * 4)
    for _ in range(100):
        s = _random_linear_structure(rng)
        plan = box.with_reference(s, 1e-2)
        _check_rho_squares(s, plan)
        assert det_check(s, plan)["ok"]


def test_rho_at_degenerate_point(von_karman):
    with pytest.raises(DegeneratePointError):
        rho_at(von_karman, Point(0.0, 0.0, 0.0, 0.0))


def test_rho_expr_matches_rho_at(von_karman, positive_p_plan):
    symbolic = rho_expr(von_karman, 1)
    for pt in sample(positive_p_plan)[:4]:
        values = np.array([[evaluate(entry, pt) for entry in row] for row in symbolic])
        np.testing.assert_allclose(values, rho_at(von_karman, pt), atol=1e-12)


def test_det_check(von_karman, positive_p_plan):
    result = det_check(von_karman, positive_p_plan)
    assert result["ok"]
    assert result["max_residual"] <= 1e-8


def test_residual_examples(laplace, von_karman, plan):
    assert is_zero(residual(laplace, parse("x^2 - y^2")), plan).verdict == ZeroVerdict.PROVEN_ZERO
    assert is_zero(residual(laplace, parse("exp(x)*sin(y)")), plan).verdict == ZeroVerdict.PROVEN_ZERO
    assert is_zero(residual(von_karman, parse("x")), plan).verdict == ZeroVerdict.PROVEN_ZERO
    # -(2a + 2c) for a x^2 + b x y + c y^2
    assert constant_value(residual(laplace, parse("x^2 + 2*x*y + 3*y^2"))) == -8.0


def test_residual_rejects_phase_variables(laplace):
    with pytest.raises(ResidualInputError):
        residual(laplace, parse("x + p"))


def test_pullback_matches_residual(laplace, von_karman):
    f = parse("x^3 + x*y^2")
    assert simplify(pullback_oracle(laplace, f) - residual(laplace, f)) == ZERO
    # f_x f_xx + f_yy
    expected = parse("(3*x^2 + y^2)*(6*x) + 2*x")
    assert simplify(pullback_oracle(von_karman, f) - expected) == ZERO


def test_pullback_matches_residual_on_random_pairs(random_polynomial, random_structure):
    rng = np.random.default_rng(23)
    to_plane = {Var.P: X, Var.Q: Y}
    for _ in range(50):
        s = random_structure(rng)
        f = substitute(random_polynomial(rng, 2), to_plane)
        r, pulled = residual(s, f), pullback_oracle(s, f)
        for _ in range(100):
            pt = Point(*rng.uniform(-2.0, 2.0, size=4))
            value = evaluate(r, pt)
            assert abs(value - evaluate(pulled, pt)) <= 1e-8 * (1.0 + abs(value))


def test_equation_text(laplace, wave, von_karman):
    assert equation_text(laplace) == "-f_xx - f_yy = 0"
    assert equation_text(wave) == "f_xx - f_yy = 0"
    assert equation_text(von_karman) == "f_x*f_xx + f_yy = 0"
    assert equation_text(MAStructure.from_strings()) == "0 = 0"
