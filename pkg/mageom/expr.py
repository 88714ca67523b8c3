"""
Expression language for scalar fields on the 4D phase space.

Trees are immutable values over the Darboux variables x, y, p, q. The module
parses the text grammar, prints it back, evaluates (pointwise and vectorised
over numpy arrays), differentiates symbolically, rewrites to a polynomial
normal form and decides vanishing with a numeric fallback.

Grammar (lowest to highest precedence)::

    expr    := expr ('+' | '-') term | term            left-assoc
    term    := term ('*' | '/') unary | unary          left-assoc
    unary   := '-' unary | power
    power   := atom '^' exponent                       right-assoc, integer
    atom    := number | variable | func '(' expr ')' | '(' expr ')'
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache, singledispatch
from typing import (
    TYPE_CHECKING,
    Callable,
    Dict,
    FrozenSet,
    Iterator,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np

from .config import ENGINE_SETTINGS
from .exceptions import (
    DomainError,
    InconclusiveError,
    NonDifferentiableError,
    NonIntegerExponentError,
    ParseError,
    UnknownIdentifierError,
)

if TYPE_CHECKING:
    from .models import SamplePlan


class Var(str, Enum):
    """Darboux coordinates of the phase space, in their fixed order."""
    X = "x"
    Y = "y"
    P = "p"
    Q = "q"

    @property
    def index(self) -> int:
        return _VAR_INDEX[self]


VARIABLES: Tuple[Var, ...] = (Var.X, Var.Y, Var.P, Var.Q)
_VAR_INDEX: Dict[Var, int] = {var: i for i, var in enumerate(VARIABLES)}
_VAR_BY_NAME: Dict[str, Var] = {var.value: var for var in VARIABLES}


class Point(NamedTuple):
    """A point of T*B in Darboux coordinates."""
    x: float
    y: float
    p: float
    q: float

    @classmethod
    def of(cls, values: Sequence[float]) -> "Point":
        """Build a point, rejecting non-finite coordinates."""
        coords = tuple(float(v) for v in values)
        if len(coords) != 4 or not all(math.isfinite(v) for v in coords):
            raise ValueError(f"A point needs four finite coordinates, got {values}")
        return cls(*coords)

    def coordinate(self, var: Var) -> float:
        return self[var.index]


# ---------------------------------------------------------------------------
# Tree nodes
# ---------------------------------------------------------------------------

Operand = Union["Expr", int, float, str]


class Expr:
    """Base class of expression nodes; supports building trees with operators."""

    __slots__ = ()

    def __add__(self, other: Operand) -> "Expr":
        return Add(self, as_expr(other))

    def __radd__(self, other: Operand) -> "Expr":
        return Add(as_expr(other), self)

    def __sub__(self, other: Operand) -> "Expr":
        return Sub(self, as_expr(other))

    def __rsub__(self, other: Operand) -> "Expr":
        return Sub(as_expr(other), self)

    def __mul__(self, other: Operand) -> "Expr":
        return Mul(self, as_expr(other))

    def __rmul__(self, other: Operand) -> "Expr":
        return Mul(as_expr(other), self)

    def __truediv__(self, other: Operand) -> "Expr":
        return Div(self, as_expr(other))

    def __rtruediv__(self, other: Operand) -> "Expr":
        return Div(as_expr(other), self)

    def __neg__(self) -> "Expr":
        return Neg(self)

    def __pow__(self, exponent: int) -> "Expr":
        if isinstance(exponent, bool) or not isinstance(exponent, int):
            raise TypeError("Exponents must be Python integers")
        return Pow(self, exponent)

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True, eq=True, repr=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Sym(Expr):
    var: Var


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True)
class Func(Expr):
    name: str
    arg: Expr


BinaryNode = Union[Add, Sub, Mul, Div]

ZERO = Num(0.0)
ONE = Num(1.0)
SYMBOLS: Dict[Var, Sym] = {var: Sym(var) for var in VARIABLES}

FUNCTION_NAMES: Tuple[str, ...] = ("sin", "cos", "exp", "ln", "sqrt", "abs", "sign")
NON_SMOOTH_FUNCTIONS: FrozenSet[str] = frozenset({"abs", "sign"})


def as_expr(value: Operand) -> Expr:
    """Coerce numbers and DSL strings to expression trees."""
    if isinstance(value, Expr):
        return value
    if isinstance(value, bool):
        raise TypeError("Booleans are not expressions")
    if isinstance(value, (int, float, np.floating, np.integer)):
        return Num(float(value))
    if isinstance(value, str):
        return parse(value)
    raise TypeError(f"Cannot convert {type(value).__name__} to an expression")


def children(e: Expr) -> Tuple[Expr, ...]:
    if isinstance(e, (Add, Sub, Mul, Div)):
        return (e.left, e.right)
    if isinstance(e, Neg):
        return (e.arg,)
    if isinstance(e, Func):
        return (e.arg,)
    if isinstance(e, Pow):
        return (e.base,)
    return ()


def walk(e: Expr) -> Iterator[Expr]:
    """Pre-order traversal."""
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def node_count(e: Expr) -> int:
    return sum(1 for _ in walk(e))


@lru_cache(maxsize=8192)
def variables(e: Expr) -> FrozenSet[Var]:
    """Variables occurring in the expression."""
    if isinstance(e, Sym):
        return frozenset({e.var})
    found: FrozenSet[Var] = frozenset()
    for child in children(e):
        found = found | variables(child)
    return found


def depends_on(e: Expr, var: Var) -> bool:
    return var in variables(e)


def substitute(e: Expr, mapping: Mapping[Var, Expr]) -> Expr:
    """Replace variables by expressions (tree substitution)."""
    if isinstance(e, Sym):
        return mapping.get(e.var, e)
    if isinstance(e, Num):
        return e
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, mapping))
    if isinstance(e, Func):
        return Func(e.name, substitute(e.arg, mapping))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, mapping), e.exponent)
    return type(e)(substitute(e.left, mapping), substitute(e.right, mapping))


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

class Token(NamedTuple):
    kind: str  # number | ident | op | end
    text: str
    offset: int  # byte offset into the UTF-8 source


_NUMBER_RE = re.compile(r"(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_OPERATORS = "+-*/^()"

_PREFIX_EXPECTED = frozenset({"number", "variable", "function", "'('", "'-'"})

# binding powers
_ADDITIVE_BP = 10
_MULTIPLICATIVE_BP = 20
_UNARY_BP = 30
_POWER_BP = 40

_INFIX: Dict[str, Tuple[int, Optional[type]]] = {
    "+": (_ADDITIVE_BP, Add),
    "-": (_ADDITIVE_BP, Sub),
    "*": (_MULTIPLICATIVE_BP, Mul),
    "/": (_MULTIPLICATIVE_BP, Div),
    "^": (_POWER_BP, None),
}


def tokenize(source: str) -> List[Token]:
    """Split source text into tokens carrying UTF-8 byte offsets."""
    tokens: List[Token] = []
    i = 0
    byte_offset = 0
    while i < len(source):
        ch = source[i]
        if ch.isspace():
            byte_offset += len(ch.encode("utf-8"))
            i += 1
            continue
        if ch in _OPERATORS:
            tokens.append(Token("op", ch, byte_offset))
            i += 1
            byte_offset += 1
            continue
        match = _NUMBER_RE.match(source, i)
        kind = "number"
        if match is None:
            match = _IDENT_RE.match(source, i)
            kind = "ident"
        if match is None:
            raise ParseError(f"Unexpected character '{ch}'", byte_offset, _PREFIX_EXPECTED | {"operator"})
        tokens.append(Token(kind, match.group(0), byte_offset))
        i = match.end()
        byte_offset += len(match.group(0).encode("utf-8"))
    tokens.append(Token("end", "", byte_offset))
    return tokens


class _Parser:
    """Pratt parser over a token list; one instance per parse call."""

    def __init__(self, source: str) -> None:
        self.tokens = tokenize(source)
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        token = self.tokens[self.pos]
        if token.kind != "end":
            self.pos += 1
        return token

    def expect(self, text: str) -> Token:
        token = self.peek()
        if token.kind != "op" or token.text != text:
            raise ParseError(f"Expected '{text}'", token.offset, {f"'{text}'"})
        return self.advance()

    def parse(self) -> Expr:
        result = self.expression(0)
        token = self.peek()
        if token.kind != "end":
            raise ParseError(f"Unexpected token '{token.text}'", token.offset, {"operator", "end of input"})
        return result

    def expression(self, rbp: int) -> Expr:
        left = self.prefix()
        while True:
            token = self.peek()
            if token.kind != "op" or token.text not in _INFIX:
                break
            lbp, node_type = _INFIX[token.text]
            if lbp <= rbp:
                break
            self.advance()
            if node_type is None:
                exponent_token = self.peek()
                # right-associative: parse with a slightly lower binding power
                exponent = self.expression(lbp - 1)
                left = Pow(left, _integer_exponent(exponent, exponent_token.offset))
            else:
                left = node_type(left, self.expression(lbp))
        return left

    def prefix(self) -> Expr:
        token = self.advance()
        if token.kind == "number":
            return Num(float(token.text))
        if token.kind == "ident":
            if token.text in _VAR_BY_NAME:
                return SYMBOLS[_VAR_BY_NAME[token.text]]
            if token.text in FUNCTION_NAMES:
                self.expect("(")
                arg = self.expression(0)
                self.expect(")")
                return Func(token.text, arg)
            raise UnknownIdentifierError(token.text, token.offset)
        if token.kind == "op" and token.text == "(":
            inner = self.expression(0)
            self.expect(")")
            return inner
        if token.kind == "op" and token.text == "-":
            return Neg(self.expression(_UNARY_BP))
        found = "end of input" if token.kind == "end" else f"'{token.text}'"
        raise ParseError(f"Unexpected {found}", token.offset, _PREFIX_EXPECTED)


def _integer_exponent(exponent: Expr, offset: int) -> int:
    if variables(exponent):
        raise NonIntegerExponentError(offset)
    value = constant_value(exponent)
    if value is None or not float(value).is_integer():
        raise NonIntegerExponentError(offset)
    return int(value)


def parse(source: str) -> Expr:
    """
    Parse DSL text into an expression tree.

    Raises:
        ParseError: syntax error (with byte offset and expected tokens)
        UnknownIdentifierError: identifier that is neither a variable nor a function
        NonIntegerExponentError: exponent is not an integer constant
    """
    return _Parser(source).parse()


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

_PREC_ADD = 1
_PREC_MUL = 2
_PREC_NEG = 3
_PREC_POW = 4
_PREC_ATOM = 5


def _format_number(value: float) -> str:
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def _fmt(e: Expr) -> Tuple[str, int]:
    if isinstance(e, Num):
        text = _format_number(abs(e.value))
        if e.value < 0:
            return f"(-{text})", _PREC_ATOM
        return text, _PREC_ATOM
    if isinstance(e, Sym):
        return e.var.value, _PREC_ATOM
    if isinstance(e, Func):
        return f"{e.name}({_fmt(e.arg)[0]})", _PREC_ATOM
    if isinstance(e, Neg):
        return f"-{_wrap(e.arg, _PREC_NEG)}", _PREC_NEG
    if isinstance(e, Pow):
        exponent = str(e.exponent) if e.exponent >= 0 else f"({e.exponent})"
        return f"{_wrap(e.base, _PREC_ATOM)}^{exponent}", _PREC_POW
    if isinstance(e, (Add, Sub)):
        op = "+" if isinstance(e, Add) else "-"
        return f"{_wrap(e.left, _PREC_ADD)} {op} {_wrap(e.right, _PREC_ADD + 1)}", _PREC_ADD
    if isinstance(e, (Mul, Div)):
        op = "*" if isinstance(e, Mul) else "/"
        return f"{_wrap(e.left, _PREC_MUL)} {op} {_wrap(e.right, _PREC_MUL + 1)}", _PREC_MUL
    raise TypeError(f"Unknown node {e!r}")


def _wrap(e: Expr, min_prec: int) -> str:
    text, prec = _fmt(e)
    return text if prec >= min_prec else f"({text})"


@lru_cache(maxsize=16384)
def to_text(e: Expr) -> str:
    """Render an expression in the DSL; the output reparses to the same tree."""
    return _fmt(e)[0]


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _sign(value: float) -> float:
    return float((value > 0) - (value < 0))


_SCALAR_FUNCTIONS: Dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "ln": math.log,
    "sqrt": math.sqrt,
    "abs": abs,
    "sign": _sign,
}


@singledispatch
def _eval(e: Expr, pt: Point) -> float:
    raise TypeError(f"Cannot evaluate {type(e).__name__}")


@_eval.register
def _(e: Num, pt: Point) -> float:
    return e.value


@_eval.register
def _(e: Sym, pt: Point) -> float:
    return pt[e.var.index]


@_eval.register
def _(e: Neg, pt: Point) -> float:
    return -_eval(e.arg, pt)


@_eval.register
def _(e: Add, pt: Point) -> float:
    return _eval(e.left, pt) + _eval(e.right, pt)


@_eval.register
def _(e: Sub, pt: Point) -> float:
    return _eval(e.left, pt) - _eval(e.right, pt)


@_eval.register
def _(e: Mul, pt: Point) -> float:
    return _eval(e.left, pt) * _eval(e.right, pt)


@_eval.register
def _(e: Div, pt: Point) -> float:
    denominator = _eval(e.right, pt)
    if denominator == 0.0:
        raise DomainError(e, pt, "division by zero")
    return _eval(e.left, pt) / denominator


@_eval.register
def _(e: Pow, pt: Point) -> float:
    base = _eval(e.base, pt)
    if base == 0.0 and e.exponent < 0:
        raise DomainError(e, pt, "zero to a negative power")
    try:
        return base ** e.exponent
    except OverflowError as exc:
        raise DomainError(e, pt, "overflow") from exc


@_eval.register
def _(e: Func, pt: Point) -> float:
    arg = _eval(e.arg, pt)
    if e.name == "ln" and arg <= 0.0:
        raise DomainError(e, pt, "logarithm of a non-positive number")
    if e.name == "sqrt" and arg < 0.0:
        raise DomainError(e, pt, "square root of a negative number")
    try:
        return _SCALAR_FUNCTIONS[e.name](arg)
    except (OverflowError, ValueError) as exc:
        raise DomainError(e, pt, str(exc)) from exc


def evaluate(e: Expr, pt: Point) -> float:
    """
    Evaluate at a point in IEEE double precision.

    Raises:
        DomainError: ln/sqrt of an invalid argument, division by zero or a
            non-finite result
    """
    value = _eval(e, pt)
    if not math.isfinite(value):
        raise DomainError(e, pt, "non-finite result")
    return value


_ARRAY_FUNCTIONS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "ln": lambda a: np.where(a > 0.0, np.log(np.where(a > 0.0, a, 1.0)), np.nan),
    "sqrt": lambda a: np.where(a >= 0.0, np.sqrt(np.abs(a)), np.nan),
    "abs": np.abs,
    "sign": np.sign,
}


def _eval_array(e: Expr, coords: np.ndarray) -> np.ndarray:
    if isinstance(e, Num):
        return np.full(coords.shape[0], e.value)
    if isinstance(e, Sym):
        return coords[:, e.var.index]
    if isinstance(e, Neg):
        return -_eval_array(e.arg, coords)
    if isinstance(e, Func):
        return _ARRAY_FUNCTIONS[e.name](_eval_array(e.arg, coords))
    if isinstance(e, Pow):
        base = _eval_array(e.base, coords)
        if e.exponent < 0:
            base = np.where(base == 0.0, np.nan, base)
        return base ** float(e.exponent)
    left = _eval_array(e.left, coords)
    right = _eval_array(e.right, coords)
    if isinstance(e, Add):
        return left + right
    if isinstance(e, Sub):
        return left - right
    if isinstance(e, Mul):
        return left * right
    return left / np.where(right == 0.0, np.nan, right)


def evaluate_array(e: Expr, coords: np.ndarray) -> np.ndarray:
    """
    Evaluate at many points at once.

    Args:
        e: Expression
        coords: Array of shape (n, 4) in the variable order x, y, p, q

    Returns:
        Array of n values; NaN marks points outside the domain
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    with np.errstate(all="ignore"):
        values = np.asarray(_eval_array(e, coords), dtype=float)
    return np.where(np.isfinite(values), values, np.nan)


def constant_value(e: Expr) -> Optional[float]:
    """Value of a variable-free expression, or None if undefined."""
    if variables(e):
        return None
    try:
        return evaluate(e, Point(0.0, 0.0, 0.0, 0.0))
    except DomainError:
        return None


# ---------------------------------------------------------------------------
# Light rewriting: constant folding and 0/1 identities
# ---------------------------------------------------------------------------

def _is_num(e: Expr, value: Optional[float] = None) -> bool:
    return isinstance(e, Num) and (value is None or e.value == value)


def fold(e: Expr) -> Expr:
    """Bottom-up constant folding with the 0/1 identities."""
    if isinstance(e, (Num, Sym)):
        return e
    if isinstance(e, Neg):
        arg = fold(e.arg)
        if isinstance(arg, Num):
            return Num(-arg.value)
        if isinstance(arg, Neg):
            return arg.arg
        return Neg(arg)
    if isinstance(e, Func):
        arg = fold(e.arg)
        if isinstance(arg, Num):
            value = constant_value(Func(e.name, arg))
            if value is not None:
                return Num(value)
        return Func(e.name, arg)
    if isinstance(e, Pow):
        base = fold(e.base)
        if e.exponent == 0:
            return ONE
        if e.exponent == 1:
            return base
        if isinstance(base, Num):
            value = constant_value(Pow(base, e.exponent))
            if value is not None:
                return Num(value)
        return Pow(base, e.exponent)
    left, right = fold(e.left), fold(e.right)
    if isinstance(left, Num) and isinstance(right, Num):
        value = constant_value(type(e)(left, right))
        if value is not None:
            return Num(value)
    if isinstance(e, Add):
        if _is_num(left, 0.0):
            return right
        if _is_num(right, 0.0):
            return left
        return Add(left, right)
    if isinstance(e, Sub):
        if _is_num(right, 0.0):
            return left
        if _is_num(left, 0.0):
            return fold(Neg(right))
        return Sub(left, right)
    if isinstance(e, Mul):
        if _is_num(left, 0.0) or _is_num(right, 0.0):
            return ZERO
        if _is_num(left, 1.0):
            return right
        if _is_num(right, 1.0):
            return left
        if _is_num(left, -1.0):
            return fold(Neg(right))
        if _is_num(right, -1.0):
            return fold(Neg(left))
        return Mul(left, right)
    if _is_num(right, 1.0):
        return left
    if _is_num(left, 0.0) and not _is_num(right, 0.0):
        return ZERO
    return Div(left, right)


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------

@singledispatch
def _diff(e: Expr, var: Var) -> Expr:
    raise TypeError(f"Cannot differentiate a {type(e).__name__}")


@_diff.register
def _(e: Num, var: Var) -> Expr:
    return ZERO


@_diff.register
def _(e: Sym, var: Var) -> Expr:
    return ONE if e.var == var else ZERO


@_diff.register
def _(e: Neg, var: Var) -> Expr:
    return Neg(_diff(e.arg, var))


@_diff.register
def _(e: Add, var: Var) -> Expr:
    return Add(_diff(e.left, var), _diff(e.right, var))


@_diff.register
def _(e: Sub, var: Var) -> Expr:
    return Sub(_diff(e.left, var), _diff(e.right, var))


@_diff.register
def _(e: Mul, var: Var) -> Expr:
    # (f g)' = f' g + f g'
    return Add(Mul(_diff(e.left, var), e.right), Mul(e.left, _diff(e.right, var)))


@_diff.register
def _(e: Div, var: Var) -> Expr:
    # (f / g)' = (f' g - f g') / g^2
    f, g = e.left, e.right
    return Div(Sub(Mul(_diff(f, var), g), Mul(f, _diff(g, var))), Pow(g, 2))


@_diff.register
def _(e: Pow, var: Var) -> Expr:
    if e.exponent == 0:
        return ZERO
    return Mul(Mul(Num(float(e.exponent)), Pow(e.base, e.exponent - 1)), _diff(e.base, var))


@_diff.register
def _(e: Func, var: Var) -> Expr:
    if not depends_on(e.arg, var):
        return ZERO
    inner = _diff(e.arg, var)
    if e.name == "sin":
        outer: Expr = Func("cos", e.arg)
    elif e.name == "cos":
        outer = Neg(Func("sin", e.arg))
    elif e.name == "exp":
        outer = e
    elif e.name == "ln":
        return Div(inner, e.arg)
    elif e.name == "sqrt":
        return Div(inner, Mul(Num(2.0), e))
    else:
        raise NonDifferentiableError(e)
    return Mul(outer, inner)


def differentiate(e: Expr, var: Var) -> Expr:
    """
    Exact partial derivative with respect to one variable.

    Raises:
        NonDifferentiableError: an abs/sign node depends on the variable
    """
    return fold(_diff(e, var))


# ---------------------------------------------------------------------------
# Polynomial normal form
# ---------------------------------------------------------------------------

# A monomial is a sorted tuple of (atom, nonzero integer exponent); atoms are
# variables or normalized non-polynomial subtrees (function calls and
# multi-term denominators).
Monomial = Tuple[Tuple[Expr, int], ...]


@lru_cache(maxsize=16384)
def _atom_key(atom: Expr) -> Tuple[int, int, str]:
    if isinstance(atom, Sym):
        return (0, atom.var.index, "")
    return (1, 0, to_text(atom))


def _monomial_key(monomial: Monomial) -> Tuple:
    return (sum(abs(exp) for _, exp in monomial), tuple((_atom_key(a), exp) for a, exp in monomial))


class _Poly:
    """Sparse Laurent polynomial over atoms with float coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Monomial, float]) -> None:
        self.terms: Dict[Monomial, float] = {m: c for m, c in terms.items() if c != 0.0}

    @classmethod
    def constant(cls, value: float) -> "_Poly":
        return cls({(): value})

    @classmethod
    def atom(cls, atom: Expr, exponent: int = 1) -> "_Poly":
        return _monomial_poly({atom: exponent}, 1.0)

    def constant_value(self) -> Optional[float]:
        if not self.terms:
            return 0.0
        if len(self.terms) == 1 and () in self.terms:
            return self.terms[()]
        return None

    def __add__(self, other: "_Poly") -> "_Poly":
        terms = dict(self.terms)
        for m, c in other.terms.items():
            terms[m] = terms.get(m, 0.0) + c
        return _Poly(terms)

    def __neg__(self) -> "_Poly":
        return _Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "_Poly") -> "_Poly":
        return self + (-other)

    def scale(self, factor: float) -> "_Poly":
        return _Poly({m: c * factor for m, c in self.terms.items()})

    def __mul__(self, other: "_Poly") -> "_Poly":
        result = _Poly({})
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                exps: Dict[Expr, int] = dict(m1)
                for atom, exp in m2:
                    exps[atom] = exps.get(atom, 0) + exp
                result = result + _monomial_poly(exps, c1 * c2)
        return result

    def power(self, n: int) -> "_Poly":
        if n < 0:
            return self.inverse().power(-n)
        result = _Poly.constant(1.0)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def inverse(self) -> "_Poly":
        if len(self.terms) == 1:
            (monomial, coeff), = self.terms.items()
            return _monomial_poly({atom: -exp for atom, exp in monomial}, 1.0 / coeff)
        # zero or multi-term: keep the normalized denominator as an atom
        return _Poly.atom(self.to_expr(), -1)

    def to_expr(self) -> Expr:
        if not self.terms:
            return ZERO
        result: Optional[Expr] = None
        for monomial in sorted(self.terms, key=_monomial_key):
            coeff = self.terms[monomial]
            term = _monomial_expr(monomial, abs(coeff))
            if result is None:
                result = Neg(term) if coeff < 0 else term
            elif coeff < 0:
                result = Sub(result, term)
            else:
                result = Add(result, term)
        return result


def _monomial_expr(monomial: Monomial, coeff: float) -> Expr:
    factors = [atom if exp == 1 else Pow(atom, exp) for atom, exp in monomial]
    if not factors:
        return Num(coeff)
    product = factors[0]
    for factor in factors[1:]:
        product = Mul(product, factor)
    return product if coeff == 1.0 else Mul(Num(coeff), product)


def _monomial_poly(exps: Mapping[Expr, int], coeff: float) -> _Poly:
    """Canonical polynomial of coeff * prod(atom^exp); sqrt(u)^2 folds into u."""
    kept: Dict[Expr, int] = {}
    extra = _Poly.constant(coeff)
    for atom, exp in exps.items():
        if exp == 0:
            continue
        if isinstance(atom, Func) and atom.name == "sqrt" and exp != 1:
            # sqrt(u)^(2k + r) = u^k sqrt(u)^r with r in {0, 1}
            half, rest = divmod(exp, 2)
            extra = extra * _to_poly(atom.arg).power(half)
            if rest:
                kept[atom] = kept.get(atom, 0) + rest
            continue
        kept[atom] = kept.get(atom, 0) + exp
    monomial: Monomial = tuple(
        sorted(((a, e) for a, e in kept.items() if e != 0), key=lambda item: _atom_key(item[0]))
    )
    base = _Poly({monomial: 1.0})
    if extra.constant_value() is not None:
        return base.scale(extra.constant_value())
    return extra * base


@lru_cache(maxsize=16384)
def _to_poly(e: Expr) -> _Poly:
    if isinstance(e, Num):
        return _Poly.constant(e.value)
    if isinstance(e, Sym):
        return _Poly({((e, 1),): 1.0})
    if isinstance(e, Neg):
        return -_to_poly(e.arg)
    if isinstance(e, Add):
        return _to_poly(e.left) + _to_poly(e.right)
    if isinstance(e, Sub):
        return _to_poly(e.left) - _to_poly(e.right)
    if isinstance(e, Mul):
        return _to_poly(e.left) * _to_poly(e.right)
    if isinstance(e, Div):
        return _to_poly(e.left) * _to_poly(e.right).inverse()
    if isinstance(e, Pow):
        return _to_poly(e.base).power(e.exponent)
    if isinstance(e, Func):
        arg = simplify(e.arg)
        if not variables(arg):
            value = constant_value(Func(e.name, arg))
            if value is not None:
                return _Poly.constant(value)
        return _Poly.atom(Func(e.name, arg))
    raise TypeError(f"Unknown node {e!r}")


@lru_cache(maxsize=16384)
def simplify(e: Expr) -> Expr:
    """
    Rewrite to the polynomial normal form.

    Constant folding, 0/1 identities, expansion of +, * and integer powers,
    collection of like terms and sqrt(u)^2 -> u. Non-polynomial subtrees are
    kept as atoms with their arguments normalized. Two expressions equal as
    polynomials over the same atoms simplify to the same tree.
    """
    return _to_poly(e).to_expr()


# ---------------------------------------------------------------------------
# Zero test
# ---------------------------------------------------------------------------

class ZeroVerdict(str, Enum):
    PROVEN_ZERO = "ProvenZero"
    NUMERICALLY_ZERO = "NumericallyZero"
    NON_ZERO = "NonZero"


@dataclass
class ZeroTest:
    """Outcome of is_zero with the evidence behind it."""
    verdict: ZeroVerdict
    witness: Optional[Point] = None
    value: Optional[float] = None
    max_abs: float = 0.0
    skipped: List[Point] = field(default_factory=list)

    @property
    def is_zero(self) -> bool:
        return self.verdict != ZeroVerdict.NON_ZERO

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "witness": list(self.witness) if self.witness is not None else None,
            "value": self.value,
            "max_abs": self.max_abs,
            "skipped": len(self.skipped),
        }


def is_zero(e: Expr, plan: "SamplePlan", tol: Optional[float] = None) -> ZeroTest:
    """
    Decide whether an expression vanishes identically.

    ProvenZero when the normal form is the literal 0; NumericallyZero when
    |e| <= tol at every sampled point; NonZero with a witness otherwise.
    Sample points outside the domain are skipped and reported.

    Raises:
        InconclusiveError: every sample point was outside the domain
    """
    from .phase import sample

    tol = ENGINE_SETTINGS.zero_tol if tol is None else tol
    if simplify(e) == ZERO:
        return ZeroTest(ZeroVerdict.PROVEN_ZERO)

    points = sample(plan)
    skipped: List[Point] = []
    max_abs = 0.0
    for pt in points:
        try:
            value = evaluate(e, pt)
        except DomainError:
            skipped.append(pt)
            continue
        if abs(value) > tol:
            return ZeroTest(ZeroVerdict.NON_ZERO, witness=pt, value=value, max_abs=abs(value), skipped=skipped)
        max_abs = max(max_abs, abs(value))

    if len(skipped) == len(points):
        raise InconclusiveError(skipped)
    return ZeroTest(ZeroVerdict.NUMERICALLY_ZERO, max_abs=max_abs, skipped=skipped)
