"""Tiny expression language for scalar functions on the torus.

Expressions are written in terms of the coordinates ``x1 .. xN`` and the
constant ``pi``::

    >>> e = parse("1 - cos(2*pi*x1)")
    >>> evaluate(e, (0.5,))
    2.0

Grammar (``^`` binds tightest and takes integer literal exponents only)::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := atom ('^' ['-'] INT)*
    atom   := NUMBER | IDENT | FUNC '(' expr (',' expr)? ')' | '(' expr ')' | '-' factor

Evaluation works on floats and on numpy arrays alike, so an expression can be
sampled on a whole grid in one call.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

__all__ = [
    "Expr",
    "Num",
    "Var",
    "Const",
    "Neg",
    "BinOp",
    "Pow",
    "Call",
    "ExprSyntaxError",
    "ExprEvalError",
    "parse",
    "evaluate",
    "pretty",
    "sample",
]

FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "sqrt": 1, "abs": 1, "min": 2, "max": 2}


class ExprSyntaxError(ValueError):
    """Raised for malformed input; ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class ExprEvalError(ArithmeticError):
    """Raised when evaluation hits sqrt of a negative number or a zero divisor."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (expression offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class Num:
    value: float
    pos: int = 0


@dataclass(frozen=True)
class Var:
    index: int  # 1-based coordinate index
    pos: int = 0


@dataclass(frozen=True)
class Const:
    name: str
    pos: int = 0


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    pos: int = 0


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    pos: int = 0


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int
    pos: int = 0


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple
    pos: int = 0


Expr = Union[Num, Var, Const, Neg, BinOp, Pow, Call]

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        match = _TOKEN_RE.match(source, pos)
        if match is None:
            bad = pos + (len(source[pos:]) - len(source[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {source[bad]!r}", bad)
        kind = match.lastgroup
        tokens.append((kind, match.group(kind), match.start(kind)))
        pos = match.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, dim: int):
        self.tokens = _tokenize(source)
        self.i = 0
        self.dim = dim

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.advance()
        if text != value or kind != "op":
            if kind == "end" and value == ")":
                raise ExprSyntaxError("unbalanced parentheses: missing ')'", pos)
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", pos)

    def parse(self) -> Expr:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            if text == ")":
                raise ExprSyntaxError("unbalanced parentheses: unexpected ')'", pos)
            raise ExprSyntaxError(f"unexpected token {text!r}", pos)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            _, op, pos = self.advance()
            node = BinOp(op, node, self.term(), pos)
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            _, op, pos = self.advance()
            node = BinOp(op, node, self.factor(), pos)
        return node

    def factor(self) -> Expr:
        base = self.atom()
        exponents = []
        while self.peek()[0] == "op" and self.peek()[1] == "^":
            _, _, pos = self.advance()
            exponents.append((self._int_literal(), pos))
        # right-associative: a^b^c = a^(b^c)
        if not exponents:
            return base
        value = exponents[-1][0]
        for e, _ in reversed(exponents[:-1]):
            value = e**value
        return Pow(base, value, exponents[0][1])

    def _int_literal(self) -> int:
        sign = 1
        kind, text, pos = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            sign = -1
            kind, text, pos = self.peek()
        if kind != "num" or not text.isdigit():
            raise ExprSyntaxError("exponent must be an integer literal", pos)
        self.advance()
        return sign * int(text)

    def atom(self) -> Expr:
        kind, text, pos = self.advance()
        if kind == "num":
            return Num(float(text), pos)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "op" and text == "-":
            return Neg(self.factor(), pos)
        if kind == "ident":
            if text in FUNCTIONS:
                return self._call(text, pos)
            if text == "pi":
                return Const("pi", pos)
            m = re.fullmatch(r"x([1-9][0-9]*)", text)
            if m and int(m.group(1)) <= self.dim:
                return Var(int(m.group(1)), pos)
            raise ExprSyntaxError(f"unknown identifier {text!r}", pos)
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", pos)
        if text == ")":
            raise ExprSyntaxError("unbalanced parentheses: unexpected ')'", pos)
        raise ExprSyntaxError(f"unexpected token {text!r}", pos)

    def _call(self, name: str, pos: int) -> Expr:
        self.expect("(")
        args = [self.expr()]
        while self.peek()[0] == "op" and self.peek()[1] == ",":
            self.advance()
            args.append(self.expr())
        self.expect(")")
        if len(args) != FUNCTIONS[name]:
            raise ExprSyntaxError(
                f"{name} takes {FUNCTIONS[name]} argument(s), got {len(args)}", pos
            )
        return Call(name, tuple(args), pos)


def parse(source: str, dim: int = 2) -> Expr:
    """Parse ``source`` into an immutable AST.

    ``dim`` bounds the admissible coordinate names (``x1 .. x{dim}``).
    """
    if not isinstance(source, str) or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(source, dim).parse()


def _is_scalar(v) -> bool:
    return np.ndim(v) == 0


def evaluate(e: Expr, point: Sequence) -> float | np.ndarray:
    """Evaluate ``e`` at ``point``; coordinates may be floats or equal-shape arrays."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Const):
        return math.pi
    if isinstance(e, Var):
        if e.index > len(point):
            raise ExprEvalError(f"x{e.index} undefined for a {len(point)}-d point", e.pos)
        return point[e.index - 1]
    if isinstance(e, Neg):
        return -evaluate(e.operand, point)
    if isinstance(e, Pow):
        base = evaluate(e.base, point)
        if e.exponent < 0 and np.any(np.asarray(base) == 0.0):
            raise ExprEvalError("zero raised to a negative power", e.pos)
        if _is_scalar(base):
            return float(base) ** e.exponent
        return np.power(base, float(e.exponent))
    if isinstance(e, BinOp):
        left = evaluate(e.left, point)
        right = evaluate(e.right, point)
        if e.op == "+":
            return left + right
        if e.op == "-":
            return left - right
        if e.op == "*":
            return left * right
        if np.any(np.asarray(right) == 0.0):
            raise ExprEvalError("division by zero", e.pos)
        return left / right
    if isinstance(e, Call):
        args = [evaluate(a, point) for a in e.args]
        scalar = all(_is_scalar(a) for a in args)
        if e.func == "sqrt":
            if np.any(np.asarray(args[0]) < 0.0):
                raise ExprEvalError("sqrt of a negative value", e.pos)
            return math.sqrt(args[0]) if scalar else np.sqrt(args[0])
        if e.func in ("min", "max"):
            if scalar:
                return float(min(args) if e.func == "min" else max(args))
            fn = np.minimum if e.func == "min" else np.maximum
            return fn(args[0], args[1])
        if scalar:
            return float(getattr(math, "fabs" if e.func == "abs" else e.func)(args[0]))
        return getattr(np, e.func)(args[0])
    raise TypeError(f"not an expression node: {e!r}")


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def pretty(e: Expr) -> str:
    """Render ``e`` back to source text; ``parse(pretty(e))`` evaluates identically."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Const):
        return e.name
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Neg):
        return f"(-{_wrap(e.operand)})"
    if isinstance(e, Pow):
        return f"{_wrap(e.base)}^{e.exponent}"
    if isinstance(e, Call):
        return f"{e.func}({', '.join(pretty(a) for a in e.args)})"
    if isinstance(e, BinOp):
        return f"({pretty(e.left)} {e.op} {pretty(e.right)})"
    raise TypeError(f"not an expression node: {e!r}")


def _wrap(e: Expr) -> str:
    text = pretty(e)
    if isinstance(e, (Var, Const, Call)) or text.startswith("("):
        return text
    return f"({text})"


def sample(e: Expr | float | str, coords: Sequence[np.ndarray], dim: int | None = None) -> np.ndarray:
    """Evaluate an expression (or constant, or source string) on coordinate arrays."""
    if isinstance(e, str):
        e = parse(e, dim if dim is not None else len(coords))
    shape = np.shape(coords[0])
    if isinstance(e, (int, float)):
        return np.full(shape, float(e))
    value = evaluate(e, [np.asarray(c, dtype=float) for c in coords])
    return np.broadcast_to(np.asarray(value, dtype=float), shape).copy()
