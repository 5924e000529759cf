"""Tiny expression language for 2-D objectives ``f(x, y)``.

Grammar (``^`` is right-associative and binds tighter than unary minus)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := primary ('^' unary)?
    primary := NUMBER | 'x' | 'y' | FUNC '(' expr ')' | '(' expr ')'

with ``FUNC`` in {sin, cos, exp}. Derivatives are symbolic, with constant
folding so the hessian of a polynomial stays small. Error offsets are
1-based character positions; running off the end reports ``len + 1``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ExpressionError, NumericsError
from .fields import Objective

__all__ = ["parse", "parse_objective", "diff", "compile_node", "Node", "Num", "Var", "Neg",
           "Bin", "Call", "to_str"]

FUNCS = ("sin", "cos", "exp")
VARS = ("x", "y")


# -- tree ---------------------------------------------------------------------

class Node:
    pass


@dataclass(frozen=True)
class Num(Node):
    v: float


@dataclass(frozen=True)
class Var(Node):
    name: str


@dataclass(frozen=True)
class Neg(Node):
    a: Node


@dataclass(frozen=True)
class Bin(Node):
    op: str      # + - * / ^
    a: Node
    b: Node


@dataclass(frozen=True)
class Call(Node):
    fn: str      # sin cos exp, plus log (only produced by differentiation)
    a: Node


ZERO, ONE = Num(0.0), Num(1.0)


def _is(node, v):
    return isinstance(node, Num) and node.v == v


# smart constructors with constant folding

def neg(a):
    if isinstance(a, Num):
        return Num(-a.v)
    if isinstance(a, Neg):
        return a.a
    return Neg(a)


def add(a, b):
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.v + b.v)
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    if isinstance(b, Neg):
        return sub(a, b.a)
    return Bin("+", a, b)


def sub(a, b):
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.v - b.v)
    if _is(b, 0):
        return a
    if _is(a, 0):
        return neg(b)
    if isinstance(b, Neg):
        return add(a, b.a)
    return Bin("-", a, b)


def mul(a, b):
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.v * b.v)
    if _is(a, 0) or _is(b, 0):
        return ZERO
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    if _is(a, -1):
        return neg(b)
    if _is(b, -1):
        return neg(a)
    if isinstance(a, Neg):
        return neg(mul(a.a, b))
    if isinstance(b, Neg):
        return neg(mul(a, b.a))
    if isinstance(b, Num) and not isinstance(a, Num):
        a, b = b, a
    if isinstance(a, Num) and isinstance(b, Bin) and b.op == "*" and isinstance(b.a, Num):
        return mul(Num(a.v * b.a.v), b.b)
    return Bin("*", a, b)


def div(a, b):
    if _is(b, 1):
        return a
    if _is(a, 0) and not _is(b, 0):
        return ZERO
    if isinstance(a, Num) and isinstance(b, Num) and b.v != 0:
        return Num(a.v / b.v)
    return Bin("/", a, b)


def power(a, b):
    if _is(b, 0):
        return ONE
    if _is(b, 1):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        try:
            v = a.v ** b.v
        except (OverflowError, ZeroDivisionError):
            return Bin("^", a, b)
        if isinstance(v, float) and math.isfinite(v):
            return Num(v)
    return Bin("^", a, b)


def call(fn, a):
    if isinstance(a, Num):
        try:
            v = _FN[fn](a.v)
        except (OverflowError, ValueError):
            return Call(fn, a)
        return Num(v)
    return Call(fn, a)


# -- parsing ------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))")


def _tokenize(text):
    toks, pos = [], 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExpressionError(f"unexpected character {text[bad]!r}", bad + 1)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append((kind, m.group(kind), start + 1))
        pos = m.end()
    toks.append(("end", "", len(text) + 1))
    return toks


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, v, off = self.take()
        if v != value or kind == "end":
            what = "end of input" if kind == "end" else repr(v)
            raise ExpressionError(f"expected {value!r}, found {what}", off)

    def parse(self):
        node = self.expr()
        kind, v, off = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected {v!r}", off)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            node = Bin(op, node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            node = Bin(op, node, rhs)
        return node

    def unary(self):
        kind, v, _ = self.peek()
        if kind == "op" and v in ("-", "+"):
            self.take()
            inner = self.unary()
            return Neg(inner) if v == "-" else inner
        return self.power()

    def power(self):
        base = self.primary()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Bin("^", base, self.unary())
        return base

    def primary(self):
        kind, v, off = self.take()
        if kind == "num":
            return Num(float(v))
        if kind == "name":
            if v in VARS:
                return Var(v)
            if v in FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(v, arg)
            raise ExpressionError(f"unknown identifier {v!r}", off)
        if kind == "op" and v == "(":
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(v)
        raise ExpressionError(f"expected a number, variable, function or '(', found {what}", off)


def parse(text: str) -> Node:
    """Expression tree for ``text``; raises :class:`ExpressionError` with an offset."""
    if not isinstance(text, str):
        raise ExpressionError("expression must be a string", 1)
    return _Parser(text).parse()


# -- differentiation ----------------------------------------------------------

def diff(node: Node, var: str) -> Node:
    """Symbolic partial derivative."""
    if isinstance(node, Num):
        return ZERO
    if isinstance(node, Var):
        return ONE if node.name == var else ZERO
    if isinstance(node, Neg):
        return neg(diff(node.a, var))
    if isinstance(node, Call):
        da = diff(node.a, var)
        if _is(da, 0):
            return ZERO
        a = node.a
        outer = {"sin": lambda: call("cos", a),
                 "cos": lambda: neg(call("sin", a)),
                 "exp": lambda: call("exp", a),
                 "log": lambda: div(ONE, a)}[node.fn]()
        return mul(outer, da)
    a, b = node.a, node.b
    da, db = diff(a, var), diff(b, var)
    if node.op == "+":
        return add(da, db)
    if node.op == "-":
        return sub(da, db)
    if node.op == "*":
        return add(mul(da, b), mul(a, db))
    if node.op == "/":
        return div(sub(mul(da, b), mul(a, db)), power(b, Num(2.0)))
    # power
    if isinstance(b, Num):
        return mul(mul(b, power(a, Num(b.v - 1.0))), da)
    # a^b = exp(b log a)
    return mul(power(a, b), add(mul(db, call("log", a)), div(mul(b, da), a)))


# -- evaluation ---------------------------------------------------------------

def _exp(v):
    try:
        return math.exp(v)
    except OverflowError:
        raise NumericsError(f"exp overflow at argument {v:.6g}")


def _log(v):
    if v <= 0:
        raise NumericsError(f"log of nonpositive value {v:.6g}")
    return math.log(v)


_FN = {"sin": math.sin, "cos": math.cos, "exp": _exp, "log": _log}


def _pow(a, b):
    if a == 0.0 and b < 0:
        raise NumericsError("zero raised to a negative power")
    if a < 0 and not float(b).is_integer():
        raise NumericsError(f"complex result of {a:.6g}^{b:.6g}")
    try:
        out = a ** b
    except OverflowError:
        raise NumericsError(f"overflow in {a:.6g}^{b:.6g}")
    return out


def _div(a, b):
    if b == 0.0:
        raise NumericsError("division by zero (pole of the expression)")
    return a / b


def compile_node(node: Node) -> Callable[[float, float], float]:
    """Closure evaluating ``node`` at ``(x, y)``."""
    if isinstance(node, Num):
        v = node.v
        return lambda x, y: v
    if isinstance(node, Var):
        return (lambda x, y: x) if node.name == "x" else (lambda x, y: y)
    if isinstance(node, Neg):
        f = compile_node(node.a)
        return lambda x, y: -f(x, y)
    if isinstance(node, Call):
        f, g = _FN[node.fn], compile_node(node.a)
        return lambda x, y: f(g(x, y))
    fa, fb = compile_node(node.a), compile_node(node.b)
    op = node.op
    if op == "+":
        return lambda x, y: fa(x, y) + fb(x, y)
    if op == "-":
        return lambda x, y: fa(x, y) - fb(x, y)
    if op == "*":
        return lambda x, y: fa(x, y) * fb(x, y)
    if op == "/":
        return lambda x, y: _div(fa(x, y), fb(x, y))
    return lambda x, y: _pow(fa(x, y), fb(x, y))


def to_str(node: Node) -> str:
    """Fully parenthesised text form (re-parseable)."""
    if isinstance(node, Num):
        return repr(node.v) if node.v >= 0 else f"({node.v!r})"
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_str(node.a)})"
    if isinstance(node, Call):
        return f"{node.fn}({to_str(node.a)})"
    return f"({to_str(node.a)} {node.op} {to_str(node.b)})"


def _finite(v, what):
    if not math.isfinite(v):
        raise NumericsError(f"non-finite {what}")
    return v


def parse_objective(text: str, name: str | None = None) -> Objective:
    """Objective with ``n = m = 1`` (``x`` minimised, ``y`` maximised)."""
    root = parse(text)
    g = [diff(root, v) for v in VARS]
    h = [[diff(gi, v) for v in VARS] for gi in g]
    t = [[[diff(hij, v) for v in VARS] for hij in row] for row in h]
    fv = compile_node(root)
    fg = [compile_node(e) for e in g]
    fh = [[compile_node(e) for e in row] for row in h]
    ft = [[[compile_node(e) for e in col] for col in row] for row in t]

    def value(z):
        return _finite(fv(float(z[0]), float(z[1])), "value")

    def grad(z):
        x, y = float(z[0]), float(z[1])
        return np.array([_finite(f(x, y), "gradient") for f in fg])

    def hess(z):
        x, y = float(z[0]), float(z[1])
        return np.array([[_finite(f(x, y), "hessian") for f in row] for row in fh])

    def third_dir(z, v):
        x, y = float(z[0]), float(z[1])
        return np.array([[sum(float(v[k]) * _finite(col[k](x, y), "third derivative") for k in range(2))
                          for col in row] for row in ft])

    return Objective(1, 1, value, grad, hess, third_dir, None, name=name or text.strip())
