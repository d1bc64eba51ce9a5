"""Text grammar for model-file expressions.

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' INT)?
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Coordinates are ``x1..xN``; with ``N <= 3`` the aliases ``x, y, z`` may be
used too.  Parameters must be declared by the caller.  ``sin``/``cos`` are
symbolic atoms (argument must be a bare coordinate); ``tanh`` and
composite trig arguments are accepted only by :func:`parse_function`, which
builds a numpy evaluator for test functions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np

from .symexpr import Expr

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)

SYMBOLIC_FUNCS = ("sin", "cos")
NUMERIC_FUNCS = {"sin": np.sin, "cos": np.cos, "tanh": np.tanh, "exp": np.exp, "abs": np.abs, "sqrt": np.sqrt}


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, column: int):
        super().__init__(f"{message} (column {column})")
        self.message = message
        self.column = column


class UnknownVariableError(ExprSyntaxError):
    pass


def coordinate_names(dim: int) -> dict[str, int]:
    names = {f"x{i + 1}": i for i in range(dim)}
    if dim <= 3:
        names.update({a: i for i, a in enumerate("xyz"[:dim])})
    return names


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    col: int  # 1-based


def tokenize(text: str) -> list[_Tok]:
    toks, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            col = pos + 1 + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[col - 1]!r}", col)
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), m.start(kind) + 1))
        pos = m.end()
    toks.append(_Tok("end", "", len(text) + 1))
    return toks


# AST nodes are plain tuples: ("num", Fraction) ("coord", i) ("param", name)
# ("call", fname, arg) ("neg", a) ("bin", op, a, b) ("pow", a, n)


class _Parser:
    def __init__(self, text: str, coords: dict[str, int], params: Iterable[str]):
        self.toks = tokenize(text)
        self.i = 0
        self.coords = coords
        self.params = set(params)

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.take()
        if t.text != text:
            raise ExprSyntaxError(f"expected {text!r}, found {t.text or 'end of input'!r}", t.col)
        return t

    def parse(self):
        if self.peek().kind == "end":
            raise ExprSyntaxError("empty expression", 1)
        node = self.expr()
        t = self.peek()
        if t.kind != "end":
            raise ExprSyntaxError(f"unexpected token {t.text!r}", t.col)
        return node

    def expr(self):
        node = self.term()
        while self.peek().text in ("+", "-"):
            op = self.take().text
            node = ("bin", op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek().text in ("*", "/"):
            t = self.take()
            node = ("bin", t.text, node, self.unary(), t.col)
        return node

    def unary(self):
        if self.peek().text == "-":
            self.take()
            return ("neg", self.unary())
        if self.peek().text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek().text == "^":
            self.take()
            t = self.take()
            if t.kind != "num" or not t.text.isdigit():
                raise ExprSyntaxError("exponent must be a non-negative integer", t.col)
            return ("pow", base, int(t.text))
        return base

    def atom(self):
        t = self.take()
        if t.kind == "num":
            return ("num", Fraction(t.text))
        if t.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if t.kind == "name":
            if self.peek().text == "(":
                if t.text not in NUMERIC_FUNCS:
                    raise ExprSyntaxError(f"unknown function {t.text!r}", t.col)
                self.take()
                arg = self.expr()
                self.expect(")")
                return ("call", t.text, arg, t.col)
            if t.text in self.coords:
                return ("coord", self.coords[t.text])
            if t.text in self.params:
                return ("param", t.text)
            raise UnknownVariableError(f"unknown variable {t.text!r}", t.col)
        raise ExprSyntaxError(f"unexpected token {t.text or 'end of input'!r}", t.col)


def parse_ast(text: str, dim: int, params: Iterable[str] = ()):
    return _Parser(text, coordinate_names(dim), params).parse()


def _to_expr(node, dim: int) -> Expr:
    kind = node[0]
    if kind == "num":
        return Expr.const(node[1], dim)
    if kind == "coord":
        return Expr.var(node[1], dim)
    if kind == "param":
        return Expr.param(node[1], dim)
    if kind == "neg":
        return -_to_expr(node[1], dim)
    if kind == "pow":
        return _to_expr(node[1], dim) ** node[2]
    if kind == "bin":
        a, b = _to_expr(node[2], dim), _to_expr(node[3], dim)
        op = node[1]
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if not b.is_number():
            raise ExprSyntaxError("division only by numeric constants", node[4])
        return a / b
    if kind == "call":
        name, arg, col = node[1], node[2], node[3]
        if name not in SYMBOLIC_FUNCS:
            raise ExprSyntaxError(f"{name!r} is only allowed in test functions", col)
        if arg[0] != "coord":
            raise ExprSyntaxError(f"{name} argument must be a bare coordinate", col)
        return Expr.sin(arg[1], dim) if name == "sin" else Expr.cos(arg[1], dim)
    raise AssertionError(kind)


def parse_expr(text: str, dim: int, params: Iterable[str] = ()) -> Expr:
    """Parse a symbolic coefficient expression."""
    return _to_expr(parse_ast(text, dim, params), dim)


def _to_numpy(node, params: dict[str, float]) -> Callable[[np.ndarray], np.ndarray]:
    kind = node[0]
    if kind == "num":
        c = float(node[1])
        return lambda x: np.full(x.shape[:-1], c)
    if kind == "coord":
        i = node[1]
        return lambda x: x[..., i]
    if kind == "param":
        if node[1] not in params:
            raise ValueError(f"parameter {node[1]!r} has no binding")
        c = float(params[node[1]])
        return lambda x: np.full(x.shape[:-1], c)
    if kind == "neg":
        f = _to_numpy(node[1], params)
        return lambda x: -f(x)
    if kind == "pow":
        f, n = _to_numpy(node[1], params), node[2]
        return lambda x: f(x) ** n
    if kind == "bin":
        a, b = _to_numpy(node[2], params), _to_numpy(node[3], params)
        op = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide}[node[1]]
        return lambda x: op(a(x), b(x))
    if kind == "call":
        fn, arg = NUMERIC_FUNCS[node[1]], _to_numpy(node[2], params)
        return lambda x: fn(arg(x))
    raise AssertionError(kind)


def parse_function(text: str, dim: int, params: dict[str, float] | None = None) -> Callable[[np.ndarray], np.ndarray]:
    """Parse a test function into a vectorised callable on ``(..., dim)`` arrays."""
    params = dict(params or {})
    f = _to_numpy(parse_ast(text, dim, params), params)

    def wrapped(x):
        x = np.asarray(x, dtype=float)
        return np.asarray(f(x), dtype=float)

    wrapped.source = text
    return wrapped
