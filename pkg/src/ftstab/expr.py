"""Tiny arithmetic expression language for coefficient functions.

Coefficients of the hyperbolic system (speeds, dampings, boundary gains,
initial profiles) are given as strings over the variables x and t, the four
arithmetic operators, integer powers, and the functions sin, cos, exp, abs.
Expressions parse to immutable ASTs that can be evaluated pointwise or
compiled to vectorized numpy callables.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, FrozenSet, Union

import numpy as np

FUNCTIONS = ("sin", "cos", "exp", "abs")
VARIABLES = ("x", "t")

_MATH_FUNCS = {"sin": math.sin, "cos": math.cos, "exp": math.exp, "abs": abs}
_NUMPY_FUNCS = {"sin": "np.sin", "cos": "np.cos", "exp": "np.exp", "abs": "np.abs"}


class ExprError(Exception):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    """Parse failure, carrying the byte offset and what was expected."""

    def __init__(self, message: str, offset: int, expected: str | None = None):
        self.offset = offset
        self.expected = expected
        detail = f" (expected {expected})" if expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class UnknownIdentifierError(ExprSyntaxError):
    """Identifier that is neither x, t, nor a known function."""


class ExprEvalError(ExprError):
    """Runtime evaluation failure, e.g. division by zero."""


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Pow, Call]


_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^()])"
    r")"
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == pos:
            # skip whitespace-only tail
            rest = source[pos:]
            if rest.strip() == "":
                break
            bad = pos + len(rest) - len(rest.lstrip())
            raise ExprSyntaxError(f"unexpected character {source[bad]!r}", bad)
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.group("ident") is not None:
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            op = m.group("op")
            tokens.append(("op", "^" if op == "**" else op, m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, text, pos = self.peek()
        if kind == "op" and text == op:
            return self.advance()
        raise ExprSyntaxError(
            "end of input" if kind == "end" else f"unexpected token {text!r}",
            pos,
            expected=f"'{op}'",
        )

    def parse(self) -> Expr:
        e = self.sum()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {text!r}", pos, expected="end of input")
        return e

    def sum(self) -> Expr:
        e = self.product()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                e = BinOp(text, e, self.product())
            else:
                return e

    def product(self) -> Expr:
        e = self.unary()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                e = BinOp(text, e, self.unary())
            else:
                return e

    def unary(self) -> Expr:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            return Pow(base, self.integer_exponent())
        return base

    def integer_exponent(self) -> int:
        sign = 1
        kind, text, pos = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            sign = -1
            kind, text, pos = self.peek()
        if kind != "num":
            raise ExprSyntaxError(
                "end of input" if kind == "end" else f"unexpected token {text!r}",
                pos,
                expected="integer exponent",
            )
        self.advance()
        if any(c in text for c in ".eE"):
            raise ExprSyntaxError(f"exponent must be an integer, got {text!r}", pos)
        return sign * int(text)

    def atom(self) -> Expr:
        kind, text, pos = self.advance()
        if kind == "num":
            return Num(float(text))
        if kind == "ident":
            if text in VARIABLES:
                return Var(text)
            if text in FUNCTIONS:
                self.expect_op("(")
                arg = self.sum()
                self.expect_op(")")
                return Call(text, arg)
            raise UnknownIdentifierError(f"unknown identifier {text!r}", pos)
        if kind == "op" and text == "(":
            e = self.sum()
            self.expect_op(")")
            return e
        raise ExprSyntaxError(
            "end of input" if kind == "end" else f"unexpected token {text!r}",
            pos,
            expected="number, variable, function, or '('",
        )


def parse_expr(source: str) -> Expr:
    """Parse an expression string into an AST.

    Grammar is standard infix with precedence power > unary minus > * / > + -,
    left-associative for operators of equal precedence. Power exponents must
    be integer literals.
    """
    return _Parser(source).parse()


def eval_expr(e: Expr, x: float, t: float) -> float:
    """Evaluate at a point in IEEE double precision.

    Raises ExprEvalError on division by zero. Overflow saturates to +-inf so
    that evaluation is total away from zero denominators.
    """
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return x if e.name == "x" else t
    if isinstance(e, Neg):
        return -eval_expr(e.operand, x, t)
    if isinstance(e, BinOp):
        a = eval_expr(e.left, x, t)
        b = eval_expr(e.right, x, t)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if b == 0.0:
            raise ExprEvalError(f"division by zero at (x={x}, t={t})")
        return a / b
    if isinstance(e, Pow):
        base = eval_expr(e.base, x, t)
        if base == 0.0 and e.exponent < 0:
            raise ExprEvalError(f"zero raised to negative power at (x={x}, t={t})")
        try:
            return float(base**e.exponent)
        except OverflowError:
            return math.inf if base > 0 or e.exponent % 2 == 0 else -math.inf
    if isinstance(e, Call):
        v = eval_expr(e.arg, x, t)
        try:
            return _MATH_FUNCS[e.func](v)
        except OverflowError:
            return math.inf
    raise TypeError(f"not an expression node: {e!r}")


def variables(e: Expr) -> FrozenSet[str]:
    """The set of variables referenced by the expression."""
    if isinstance(e, Num):
        return frozenset()
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Neg):
        return variables(e.operand)
    if isinstance(e, BinOp):
        return variables(e.left) | variables(e.right)
    if isinstance(e, Pow):
        return variables(e.base)
    if isinstance(e, Call):
        return variables(e.arg)
    raise TypeError(f"not an expression node: {e!r}")


def is_constant(e: Expr) -> bool:
    return not variables(e)


def constant_value(e: Expr) -> float | None:
    """Value of a variable-free expression, else None."""
    if is_constant(e):
        return eval_expr(e, 0.0, 0.0)
    return None


_PREC_SUM, _PREC_PROD, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC_SUM if e.op in "+-" else _PREC_PROD
    if isinstance(e, Neg):
        return _PREC_NEG
    if isinstance(e, Pow):
        return _PREC_POW
    return _PREC_ATOM


def _wrap(e: Expr, minimum: int) -> str:
    s = to_source(e)
    return f"({s})" if _prec(e) < minimum else s


def to_source(e: Expr) -> str:
    """Canonical textual form; parse(to_source(e)) reproduces the AST."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return "-" + _wrap(e.operand, _PREC_NEG)
    if isinstance(e, BinOp):
        level = _prec(e)
        left = _wrap(e.left, level)
        right = _wrap(e.right, level + 1)
        return f"{left} {e.op} {right}"
    if isinstance(e, Pow):
        return f"{_wrap(e.base, _PREC_ATOM)}^{e.exponent}"
    if isinstance(e, Call):
        return f"{e.func}({to_source(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")


def _codegen(e: Expr) -> str:
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{_codegen(e.operand)})"
    if isinstance(e, BinOp):
        return f"({_codegen(e.left)} {e.op} {_codegen(e.right)})"
    if isinstance(e, Pow):
        return f"({_codegen(e.base)} ** {e.exponent})"
    if isinstance(e, Call):
        return f"{_NUMPY_FUNCS[e.func]}({_codegen(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")


@lru_cache(maxsize=None)
def compile_numpy(e: Expr) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Compile to a vectorized callable f(x, t) over numpy arrays.

    The vectorized path does not police division by zero; callers that need
    the strict check use eval_expr. Nonfinite outputs propagate so grid-based
    validation can flag them.
    """
    raw = eval(f"lambda x, t: ({_codegen(e)})", {"np": np, "__builtins__": {}})

    def fn(x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = raw(x, t)
        out = np.asarray(out, dtype=float)
        shape = np.broadcast_shapes(x.shape, t.shape)
        if out.shape != shape:
            out = np.broadcast_to(out, shape)
        return out

    return fn
