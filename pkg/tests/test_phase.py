import numpy as np
import pytest

from mageom.exceptions import SamplingError
from mageom.expr import ONE, ZERO, Point, constant_value, parse, simplify
from mageom.ma import pfaffian, to_two_form
from mageom.models import SamplePlan
from mageom.phase import (
    TwoForm,
    differential,
    exterior_derivative,
    matrix_at,
    one_form_derivative,
    sample,
    sample_array,
    wedge_one_forms,
    wedge_top,
)
from mageom.utils import OMEGA


def test_omega_wedge_omega():
    omega = TwoForm.omega()
    assert constant_value(wedge_top(omega, omega)) == -2.0


def test_wedge_top_of_complementary_planes():
    a = TwoForm(c_xy=ONE)
    b = TwoForm(c_pq=ONE)
    assert wedge_top(a, b) == ONE
    assert wedge_top(TwoForm(c_xp=ONE), TwoForm(c_xp=ONE)) == ZERO


def test_wedge_top_is_symmetric(random_polynomial):
    rng = np.random.default_rng(10)
    for _ in range(20):
        a = TwoForm(*(random_polynomial(rng, 2) for _ in range(6)))
        b = TwoForm(*(random_polynomial(rng, 2) for _ in range(6)))
        assert wedge_top(a, b) == wedge_top(b, a)


def test_wedge_of_one_forms_squares_to_zero():
    a = differential(parse("x*p + y^2"))
    b = differential(parse("q"))
    ab = wedge_one_forms(a, b)
    assert wedge_top(ab, ab) == ZERO


def test_exterior_derivative_example():
    d = exterior_derivative(TwoForm(c_xy=parse("p")))
    assert d.c_xyp == ONE
    assert d.c_xyq == ZERO and d.c_xpq == ZERO and d.c_ypq == ZERO


def test_constant_forms_are_closed(laplace):
    d = exterior_derivative(to_two_form(laplace))
    assert all(simplify(c) == ZERO for c in d.coefficients())


def test_d_squared_vanishes(random_polynomial):
    rng = np.random.default_rng(11)
    for _ in range(20):
        gamma = tuple(random_polynomial(rng, 3) for _ in range(4))
        dd = exterior_derivative(one_form_derivative(gamma))
        assert all(simplify(c) == ZERO for c in dd.coefficients())


def test_exact_one_forms_are_closed(random_polynomial):
    rng = np.random.default_rng(12)
    for _ in range(20):
        f = random_polynomial(rng, 3)
        d2 = one_form_derivative(differential(f))
        assert all(simplify(c) == ZERO for c in d2.coefficients())


def test_matrix_of_omega():
    np.testing.assert_array_equal(matrix_at(TwoForm.omega(), Point(0.0, 0.0, 0.0, 0.0)), OMEGA)


def test_matrix_of_effective_form(random_structure):
    rng = np.random.default_rng(13)
    pt = Point(0.3, -0.7, 1.2, 0.4)
    for _ in range(10):
        s = random_structure(rng)
        A, B, C, D, E = s.values_at(pt)
        expected = np.array(
            [
                [0.0, E, B, C],
                [-E, 0.0, -A, -B],
                [-B, A, 0.0, D],
                [-C, B, -D, 0.0],
            ]
        )
        m = matrix_at(to_two_form(s), pt)
        np.testing.assert_allclose(m, expected)
        np.testing.assert_allclose(m, -m.T)


def test_sample_is_deterministic():
    plan = SamplePlan(count=5, seed=7, bounds=((-1.0, 1.0),) * 4)
    first, second = sample(plan), sample(plan)
    assert first == second
    assert len(first) == 5
    assert all(-1.0 <= v <= 1.0 for pt in first for v in pt)
    assert sample(SamplePlan(count=5, seed=8, bounds=((-1.0, 1.0),) * 4)) != first


def test_sample_with_floor_keeps_regular_points(von_karman):
    plan = SamplePlan(count=20, seed=1).with_reference(von_karman, 0.5)
    points = sample_array(plan)
    assert points.shape == (20, 4)
    assert np.all(np.abs(points[:, 2]) >= 0.5)


def test_sample_constant_structure_never_rejects(laplace):
    plan = SamplePlan(count=5, seed=2).with_reference(laplace, 0.5)
    assert len(sample(plan)) == 5
    assert constant_value(pfaffian(laplace)) == 1.0


def test_sampling_error_when_floor_unreachable(von_karman):
    plan = SamplePlan(
        count=4,
        seed=0,
        bounds=((-1.0, 1.0),) * 4,
        retry_cap=10_000,
    ).with_reference(von_karman, 10.0)
    with pytest.raises(SamplingError):
        sample(plan)


class _CountingReference:
    """Reference structure that records how often its Pfaffian is asked for."""

    def __init__(self, pf=None):
        self.pf = pf
        self.calls = 0

    def pfaffian(self):
        self.calls += 1
        if self.pf is None:
            raise TypeError("no Pfaffian")
        return self.pf


class _UnhashableReference(_CountingReference):
    __hash__ = None


def test_sample_draws_once_when_the_reference_fails():
    reference = _CountingReference()
    plan = SamplePlan(count=3, seed=0).with_reference(reference, 0.5)
    with pytest.raises(TypeError):
        sample(plan)
    assert reference.calls == 1


def test_sample_with_unhashable_reference():
    reference = _UnhashableReference(parse("1"))
    plan = SamplePlan(count=3, seed=0).with_reference(reference, 0.5)
    assert sample(plan) == sample(plan)
    assert len(sample(plan)) == 3
    assert reference.calls == 3


def test_plan_rejects_bad_bounds():
    with pytest.raises(ValueError):
        SamplePlan(count=4, bounds=((1.0, -1.0),) * 4)
    with pytest.raises(ValueError):
        SamplePlan(count=4, bounds=((-1.0, 1.0),) * 3)
