from pathlib import Path

import numpy as np
import pytest

from mageom.expr import VARIABLES, Add, Expr, Mul, Neg, Num, Pow, Sub, Sym
from mageom.ma import MAStructure
from mageom.models import SamplePlan

DATA_DIR = Path(__file__).parent / "data"


def _random_polynomial(rng: np.random.Generator, depth: int = 3) -> Expr:
    """Random tree over x, y, p, q built from + - * ^ and non-negative integers."""
    if depth == 0 or rng.random() < 0.3:
        if rng.random() < 0.4:
            return Num(float(rng.integers(0, 4)))
        return Sym(VARIABLES[int(rng.integers(0, 4))])
    op = int(rng.integers(0, 5))
    if op == 4:
        return Neg(_random_polynomial(rng, depth - 1))
    left = _random_polynomial(rng, depth - 1)
    if op == 3:
        return Pow(left, int(rng.integers(0, 3)))
    right = _random_polynomial(rng, depth - 1)
    return (Add, Sub, Mul)[op](left, right)


def _random_structure(rng: np.random.Generator, depth: int = 1) -> MAStructure:
    return MAStructure(*(_random_polynomial(rng, depth) for _ in range(5)))


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def random_polynomial():
    return _random_polynomial


@pytest.fixture
def random_structure():
    return _random_structure


@pytest.fixture
def laplace() -> MAStructure:
    return MAStructure.from_strings(A="-1", B="0", C="-1", D="0", E="0")


@pytest.fixture
def wave() -> MAStructure:
    return MAStructure.from_strings(A="1", B="0", C="-1", D="0", E="0")


@pytest.fixture
def von_karman() -> MAStructure:
    return MAStructure.from_strings(A="p", B="0", C="1", D="0", E="0")


@pytest.fixture
def anticommuting() -> MAStructure:
    """(a, b, -a, 0, 0) with a = 0.6, b = 0.8; Pf = -1."""
    return MAStructure.from_strings(A="0.6", B="0.8", C="-0.6", D="0", E="0")


@pytest.fixture
def plan() -> SamplePlan:
    return SamplePlan(count=16, seed=3)


@pytest.fixture
def positive_p_plan() -> SamplePlan:
    return SamplePlan(count=16, seed=3, bounds=((-2.0, 2.0), (-2.0, 2.0), (0.1, 2.0), (-2.0, 2.0)))
