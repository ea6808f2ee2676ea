"""Arithmetic expressions in one variable ``x``.

Coefficient functions r, p, q are given per subinterval as short strings such
as ``"1 + 0.5*sin(x)"``.  This module parses them into a small immutable tree
that evaluates on floats or numpy arrays.

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ['^' unary]
    atom    := NUMBER | 'x' | FUNC '(' expr ')' | '(' expr ')'

``^`` is right associative and binds tighter than unary minus, so ``-2^2``
is ``-4`` and ``2^3^2`` is ``512``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

__all__ = [
    "Expr",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "ExprSyntaxError",
    "DomainError",
    "FUNCTIONS",
    "parse",
    "evaluate",
    "to_string",
]

ArrayLike = Union[float, np.ndarray]


class ExprSyntaxError(SyntaxError):
    """Malformed expression text.  ``offset`` is the 0-based byte offset."""

    def __init__(self, message: str, text: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.msg = message
        self.text = text
        self.offset = offset


class DomainError(ArithmeticError):
    """Division by zero or square root of a negative number."""


def _checked_sqrt(v):
    if np.any(np.asarray(v) < 0):
        raise DomainError("sqrt of negative argument")
    return np.sqrt(v)


FUNCTIONS: dict[str, Callable] = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "sqrt": _checked_sqrt,
    "abs": np.abs,
}

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


class Expr:
    """Base node.  Calling a node evaluates it at ``x``."""

    prec = _PREC_ATOM

    def __call__(self, x: ArrayLike) -> ArrayLike:
        return self.eval(x)

    def eval(self, x: ArrayLike) -> ArrayLike:  # pragma: no cover - abstract
        raise NotImplementedError

    def __str__(self) -> str:
        return to_string(self)

    @property
    def is_constant(self) -> bool:
        return False


@dataclass(frozen=True)
class Num(Expr):
    value: float

    @property
    def prec(self) -> int:  # type: ignore[override]
        # a negative literal prints with a leading minus, so it binds like one
        return _PREC_NEG if np.signbit(self.value) else _PREC_ATOM

    def eval(self, x):
        if isinstance(x, np.ndarray):
            return np.full(x.shape, self.value)
        return self.value

    @property
    def is_constant(self) -> bool:
        return True


@dataclass(frozen=True)
class Var(Expr):
    def eval(self, x):
        return x


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr
    prec = _PREC_NEG

    def eval(self, x):
        return -self.operand.eval(x)

    @property
    def is_constant(self) -> bool:
        return self.operand.is_constant


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    @property
    def prec(self) -> int:  # type: ignore[override]
        return {"+": _PREC_ADD, "-": _PREC_ADD, "*": _PREC_MUL, "/": _PREC_MUL, "^": _PREC_POW}[self.op]

    def eval(self, x):
        a = self.left.eval(x)
        b = self.right.eval(x)
        op = self.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if np.any(np.asarray(b) == 0):
                raise DomainError("division by zero")
            return a / b
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.power(np.asarray(a, dtype=float), b)
        if np.any(np.isnan(out) & ~np.isnan(np.asarray(a) + np.asarray(b))):
            raise DomainError("non-integer power of a negative base")
        if np.any(np.isinf(out) & (np.asarray(a) == 0)):
            raise DomainError("negative power of zero")
        return out if isinstance(out, np.ndarray) and out.ndim else float(out)

    @property
    def is_constant(self) -> bool:
        return self.left.is_constant and self.right.is_constant


@dataclass(frozen=True)
class Call(Expr):
    name: str
    arg: Expr

    def eval(self, x):
        out = FUNCTIONS[self.name](self.arg.eval(x))
        return out if isinstance(out, np.ndarray) and out.ndim else float(out)

    @property
    def is_constant(self) -> bool:
        return self.arg.is_constant


# --------------------------------------------------------------------------
# tokenizer / parser

_NUMBER = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        m = _NUMBER.match(text, i)
        if m:
            tokens.append(("num", m.group(), i))
            i = m.end()
            continue
        m = _IDENT.match(text, i)
        if m:
            tokens.append(("ident", m.group(), i))
            i = m.end()
            continue
        if c in "+-*/^()":
            tokens.append(("op", c, i))
            i += 1
            continue
        raise ExprSyntaxError(f"unexpected character {c!r}", text, i)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        if tok[0] == "end":
            message = f"{message}; reached end of input"
        return ExprSyntaxError(message, self.text, tok[2])

    def expect(self, value):
        tok = self.peek()
        if tok[0] != "op" or tok[1] != value:
            raise self.error(f"expected {value!r}")
        return self.advance()

    def parse(self) -> Expr:
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise self.error(f"unexpected {tok[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.peek()
        kind, value, _ = tok
        if kind == "num":
            self.advance()
            return Num(float(value))
        if kind == "ident":
            self.advance()
            if value == "x":
                return Var()
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(value, arg)
            raise self.error(f"unknown identifier {value!r}", tok)
        if kind == "op" and value == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise self.error("expected an operand")
        raise self.error(f"unexpected {value!r}")


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree.

    Raises
    ------
    ExprSyntaxError
        With ``offset`` pointing at the offending token (``len(text)`` when the
        input ends early).
    """
    return _Parser(text).parse()


def evaluate(e: Expr, x: ArrayLike) -> ArrayLike:
    """Evaluate ``e`` at ``x`` (float or ndarray) in double precision."""
    return e.eval(x)


# --------------------------------------------------------------------------
# printing


def _format_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def to_string(e: Expr) -> str:
    """Canonical text form; ``parse(to_string(e))`` rebuilds the same tree."""
    if isinstance(e, Num):
        return _format_number(e.value)
    if isinstance(e, Var):
        return "x"
    if isinstance(e, Call):
        return f"{e.name}({to_string(e.arg)})"
    if isinstance(e, Neg):
        inner = to_string(e.operand)
        if e.operand.prec < _PREC_NEG:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, BinOp):
        left, right = to_string(e.left), to_string(e.right)
        if e.op == "^":
            if e.left.prec <= _PREC_POW:
                left = f"({left})"
            if e.right.prec < _PREC_NEG:
                right = f"({right})"
        else:
            if e.left.prec < e.prec:
                left = f"({left})"
            if e.right.prec <= e.prec:
                right = f"({right})"
        return f"{left} {e.op} {right}"
    raise TypeError(f"not an expression node: {e!r}")


def constant_value(text: str) -> float:
    """Parse a constant expression such as ``"-1/3"`` and return its value."""
    e = parse(text)
    if not e.is_constant:
        raise ValueError(f"expression {text!r} depends on x")
    return float(e.eval(0.0))
