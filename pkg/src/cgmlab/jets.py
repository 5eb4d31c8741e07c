"""Third-order jets in two variables and a small expression language.

A :class:`Jet` stores a value together with all partial derivatives up to
order three with respect to the chart coordinates ``(u, v)``, in the order

    value, u, v, uu, uv, vv, uuu, uuv, uvv, vvv

Arithmetic propagates them exactly (truncated Taylor arithmetic), so
evaluating an expression tree on jets gives derivatives without finite
differences.  All arrays broadcast over an arbitrary grid shape.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

ORDER_LABELS = ("value", "u", "v", "uu", "uv", "vv", "uuu", "uuv", "uvv", "vvv")
VAL, DU, DV, DUU, DUV, DVV, DUUU, DUUV, DUVV, DVVV = range(10)


class ExpressionError(ValueError):
    """Syntax or semantic error in an expression string.

    ``offset`` is a byte offset into the UTF-8 encoded source.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.message = message
        self.offset = offset


class JetDomainError(ValueError):
    """Evaluation left the domain of a function (log of a non-positive value...)."""

    def __init__(self, message: str, offset: int | None = None, count: int = 0):
        where = f" (node at offset {offset})" if offset is not None else ""
        super().__init__(f"{message}{where}")
        self.offset = offset
        self.count = count


# ---------------------------------------------------------------------------
# jet arithmetic
# ---------------------------------------------------------------------------


class Jet:
    __slots__ = ("d",)
    __array_priority__ = 100

    def __init__(self, d):
        self.d = np.asarray(d)
        if self.d.shape[0] != 10:
            raise ValueError("a jet needs 10 coefficient slots")

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, value, shape=()) -> "Jet":
        d = np.zeros((10,) + tuple(shape))
        d[VAL] = value
        return cls(d)

    @classmethod
    def variable(cls, name: str, values) -> "Jet":
        values = np.asarray(values, dtype=float)
        d = np.zeros((10,) + values.shape)
        d[VAL] = values
        d[DU if name == "u" else DV] = 1.0
        return cls(d)

    @property
    def shape(self):
        return self.d.shape[1:]

    @property
    def value(self):
        return self.d[VAL]

    def __getitem__(self, label: str):
        return self.d[ORDER_LABELS.index(label)]

    def __repr__(self) -> str:
        return f"Jet(shape={self.shape})"

    # algebra ------------------------------------------------------------
    def _lift(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        other = np.asarray(other)
        d = np.zeros((10,) + np.broadcast_shapes(other.shape, self.shape), dtype=np.result_type(other, self.d))
        d[VAL] = other
        return Jet(d)

    def __add__(self, other):
        other = self._lift(other)
        return Jet(self.d + other.d)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.d)

    def __sub__(self, other):
        other = self._lift(other)
        return Jet(self.d - other.d)

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.d * other)
        return Jet(_mul(self.d, other.d))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.d / other)
        return self * reciprocal(other)

    def __rtruediv__(self, other):
        return self._lift(other) * reciprocal(self)

    def __pow__(self, n: int):
        return powi(self, n)


def _mul(f, g):
    h = np.empty(np.broadcast_shapes(f.shape, g.shape), dtype=np.result_type(f, g))
    f0, fu, fv, fuu, fuv, fvv, fuuu, fuuv, fuvv, fvvv = f
    g0, gu, gv, guu, guv, gvv, guuu, guuv, guvv, gvvv = g
    h[VAL] = f0 * g0
    h[DU] = fu * g0 + f0 * gu
    h[DV] = fv * g0 + f0 * gv
    h[DUU] = fuu * g0 + 2 * fu * gu + f0 * guu
    h[DUV] = fuv * g0 + fu * gv + fv * gu + f0 * guv
    h[DVV] = fvv * g0 + 2 * fv * gv + f0 * gvv
    h[DUUU] = fuuu * g0 + 3 * fuu * gu + 3 * fu * guu + f0 * guuu
    h[DUUV] = fuuv * g0 + fuu * gv + 2 * fuv * gu + 2 * fu * guv + fv * guu + f0 * guuv
    h[DUVV] = fuvv * g0 + fvv * gu + 2 * fuv * gv + 2 * fv * guv + fu * gvv + f0 * guvv
    h[DVVV] = fvvv * g0 + 3 * fvv * gv + 3 * fv * gvv + f0 * gvvv
    return h


def compose(g: Jet, d0, d1, d2, d3) -> Jet:
    """Chain rule for f(g) given f and its first three derivatives at g.value."""
    _, gu, gv, guu, guv, gvv, guuu, guuv, guvv, gvvv = g.d
    h = np.empty(np.broadcast_shapes(g.d.shape, (10,) + np.shape(d0)))
    h[VAL] = d0
    h[DU] = d1 * gu
    h[DV] = d1 * gv
    h[DUU] = d2 * gu * gu + d1 * guu
    h[DUV] = d2 * gu * gv + d1 * guv
    h[DVV] = d2 * gv * gv + d1 * gvv
    h[DUUU] = d3 * gu**3 + 3 * d2 * gu * guu + d1 * guuu
    h[DUUV] = d3 * gu * gu * gv + d2 * (2 * gu * guv + gv * guu) + d1 * guuv
    h[DUVV] = d3 * gu * gv * gv + d2 * (2 * gv * guv + gu * gvv) + d1 * guvv
    h[DVVV] = d3 * gv**3 + 3 * d2 * gv * gvv + d1 * gvvv
    return Jet(h)


def _check(mask, message, offset):
    if np.any(mask):
        raise JetDomainError(message, offset, int(np.count_nonzero(mask)))


def reciprocal(g: Jet, offset: int | None = None) -> Jet:
    x = g.value
    _check(x == 0, "division by zero", offset)
    r = 1.0 / x
    return compose(g, r, -r * r, 2 * r**3, -6 * r**4)


def powi(g: Jet, n: int, offset: int | None = None) -> Jet:
    n = int(n)
    if n == 0:
        return Jet.constant(1.0, g.shape)
    if n < 0:
        return powi(reciprocal(g, offset), -n, offset)
    x = g.value
    coeffs = []
    for k in range(4):
        c = 1.0
        for j in range(k):
            c *= n - j
        coeffs.append(c * x ** (n - k) if c != 0 and n - k >= 0 else np.zeros_like(x))
    return compose(g, *coeffs)


def sin(g: Jet) -> Jet:
    s, c = np.sin(g.value), np.cos(g.value)
    return compose(g, s, c, -s, -c)


def cos(g: Jet) -> Jet:
    s, c = np.sin(g.value), np.cos(g.value)
    return compose(g, c, -s, -c, s)


def sinh(g: Jet) -> Jet:
    s, c = np.sinh(g.value), np.cosh(g.value)
    return compose(g, s, c, s, c)


def cosh(g: Jet) -> Jet:
    s, c = np.sinh(g.value), np.cosh(g.value)
    return compose(g, c, s, c, s)


def exp(g: Jet) -> Jet:
    e = np.exp(g.value)
    return compose(g, e, e, e, e)


def log(g: Jet, offset: int | None = None) -> Jet:
    x = g.value
    _check(x <= 0, "log of a non-positive value", offset)
    r = 1.0 / x
    return compose(g, np.log(x), r, -r * r, 2 * r**3)


def sqrt(g: Jet, offset: int | None = None) -> Jet:
    x = g.value
    _check(x <= 0, "sqrt of a non-positive value", offset)
    s = np.sqrt(x)
    return compose(g, s, 0.5 / s, -0.25 / (s * x), 0.375 / (s * x * x))


def atan(g: Jet) -> Jet:
    x = g.value
    q = 1.0 / (1.0 + x * x)
    return compose(g, np.arctan(x), q, -2 * x * q * q, (6 * x * x - 2) * q**3)


def atan2(y: Jet, x: Jet, offset: int | None = None) -> Jet:
    x0, y0 = x.value, y.value
    _check((x0 == 0) & (y0 == 0), "atan2(0, 0)", offset)
    # atan2(y, x) - atan2(y0, x0) = atan((x0 y - y0 x) / (x0 x + y0 y)) near the base point
    ratio = (y * x0 - x * y0) / (x * x0 + y * y0)
    out = atan(ratio)
    out.d[VAL] = np.arctan2(y0, x0)
    return out


# ---------------------------------------------------------------------------
# complex derivatives
# ---------------------------------------------------------------------------


def complex_derivatives(j: Jet) -> dict[str, np.ndarray]:
    """Formal Wirtinger derivatives d_z = (d_u - i d_v)/2, d_zbar = (d_u + i d_v)/2."""
    f0, fu, fv, fuu, fuv, fvv, fuuu, fuuv, fuvv, fvvv = j.d
    return {
        "value": f0,
        "z": 0.5 * (fu - 1j * fv),
        "zb": 0.5 * (fu + 1j * fv),
        "zz": 0.25 * (fuu - fvv - 2j * fuv),
        "zzb": 0.25 * (fuu + fvv),
        "zbzb": 0.25 * (fuu - fvv + 2j * fuv),
        "zzz": 0.125 * (fuuu - 3 * fuvv - 1j * (3 * fuuv - fvvv)),
        "zzzb": 0.125 * (fuuu + fuvv - 1j * (fuuv + fvvv)),
        "zzbzb": 0.125 * (fuuu + fuvv + 1j * (fuuv + fvvv)),
        "zbzbzb": 0.125 * (fuuu - 3 * fuvv + 1j * (3 * fuuv - fvvv)),
    }


# ---------------------------------------------------------------------------
# expression language
# ---------------------------------------------------------------------------

FUNCTIONS = {"sin": 1, "cos": 1, "sinh": 1, "cosh": 1, "exp": 1, "log": 1, "sqrt": 1, "atan2": 2}
VARIABLES = ("u", "v")


@dataclass(frozen=True)
class Node:
    pos: int


@dataclass(frozen=True)
class Const(Node):
    value: float

    def __str__(self):
        return f"Const {self.value!r}"


@dataclass(frozen=True)
class Var(Node):
    name: str

    def __str__(self):
        return f"Var {self.name}"


@dataclass(frozen=True)
class Neg(Node):
    arg: Node

    def __str__(self):
        return f"Neg({self.arg})"


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node

    _NAMES = {"+": "Add", "-": "Sub", "*": "Mul", "/": "Div"}

    def __str__(self):
        return f"{self._NAMES[self.op]}({self.left}, {self.right})"


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: int

    def __str__(self):
        return f"Pow({self.base}, {self.exponent})"


@dataclass(frozen=True)
class Call(Node):
    func: str
    args: tuple

    def __str__(self):
        inner = ", ".join(str(a) for a in self.args)
        return f"{self.func.capitalize()}({inner})"


class _Token:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind, text, pos):
        self.kind, self.text, self.pos = kind, text, pos


def _tokenize(src: str) -> list[_Token]:
    raw = src.encode("utf-8")
    tokens = []
    i = 0
    n = len(raw)
    while i < n:
        c = chr(raw[i]) if raw[i] < 128 else None
        if c is not None and c.isspace():
            i += 1
            continue
        if c is not None and (c.isdigit() or (c == "." and i + 1 < n and chr(raw[i + 1]).isdigit())):
            j = i
            while j < n and (chr(raw[j]).isdigit() or chr(raw[j]) == "."):
                j += 1
            if j < n and chr(raw[j]) in "eE":
                k = j + 1
                if k < n and chr(raw[k]) in "+-":
                    k += 1
                if k < n and chr(raw[k]).isdigit():
                    j = k
                    while j < n and chr(raw[j]).isdigit():
                        j += 1
            text = raw[i:j].decode()
            try:
                float(text)
            except ValueError:
                raise ExpressionError(f"malformed number {text!r}", i) from None
            tokens.append(_Token("num", text, i))
            i = j
            continue
        if c is not None and (c.isalpha() or c == "_"):
            j = i
            while j < n and raw[j] < 128 and (chr(raw[j]).isalnum() or chr(raw[j]) == "_"):
                j += 1
            tokens.append(_Token("id", raw[i:j].decode(), i))
            i = j
            continue
        if c is not None and c in "+-*/^(),":
            tokens.append(_Token("op", c, i))
            i += 1
            continue
        raise ExpressionError("unexpected character", i)
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def take(self) -> _Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Token:
        t = self.peek()
        if t.kind != "op" or t.text != text:
            raise ExpressionError(f"expected {text!r}", t.pos)
        return self.take()

    def parse(self) -> Node:
        node = self.expr()
        t = self.peek()
        if t.kind != "end":
            raise ExpressionError(f"unexpected token {t.text!r}", t.pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            t = self.take()
            node = BinOp(t.pos, t.text, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            t = self.take()
            node = BinOp(t.pos, t.text, node, self.unary())
        return node

    def unary(self) -> Node:
        t = self.peek()
        if t.kind == "op" and t.text == "-":
            self.take()
            return Neg(t.pos, self.unary())
        if t.kind == "op" and t.text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        t = self.peek()
        if t.kind == "op" and t.text == "^":
            self.take()
            exponent = self.integer_exponent()
            if self.peek().kind == "op" and self.peek().text == "^":
                raise ExpressionError("chained '^' is not supported; use parentheses", self.peek().pos)
            return Pow(t.pos, base, exponent)
        return base

    def integer_exponent(self) -> int:
        t = self.peek()
        sign = 1
        paren = False
        if t.kind == "op" and t.text == "(":
            paren = True
            self.take()
            t = self.peek()
        if t.kind == "op" and t.text == "-":
            sign = -1
            self.take()
            t = self.peek()
        if t.kind != "num":
            raise ExpressionError("exponent must be an integer literal", t.pos)
        value = float(t.text)
        if value != int(value) or any(ch in t.text for ch in ".eE"):
            raise ExpressionError("exponent must be an integer literal", t.pos)
        self.take()
        if paren:
            self.expect(")")
        return sign * int(value)

    def atom(self) -> Node:
        t = self.take()
        if t.kind == "num":
            return Const(t.pos, float(t.text))
        if t.kind == "id":
            if t.text in FUNCTIONS:
                self.expect("(")
                args = [self.expr()]
                while self.peek().kind == "op" and self.peek().text == ",":
                    self.take()
                    args.append(self.expr())
                close = self.peek()
                self.expect(")")
                if len(args) != FUNCTIONS[t.text]:
                    raise ExpressionError(
                        f"{t.text} expects {FUNCTIONS[t.text]} argument(s), got {len(args)}", close.pos
                    )
                return Call(t.pos, t.text, tuple(args))
            if t.text in VARIABLES:
                return Var(t.pos, t.text)
            if t.text == "pi":
                return Const(t.pos, float(np.pi))
            raise ExpressionError(f"unknown identifier {t.text!r}", t.pos)
        if t.kind == "op" and t.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if t.kind == "end":
            raise ExpressionError("unexpected end of input", t.pos)
        raise ExpressionError(f"unexpected token {t.text!r}", t.pos)


def parse_expression(src: str) -> Node:
    """Parse an infix expression in ``u``, ``v`` and ``pi`` into an AST."""
    return _Parser(src).parse()


def evaluate(node: Node, u, v) -> Jet:
    """Evaluate an AST on third-order jets at the points ``(u, v)``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    shape = np.broadcast_shapes(u.shape, v.shape)
    env = {
        "u": Jet.variable("u", np.broadcast_to(u, shape)),
        "v": Jet.variable("v", np.broadcast_to(v, shape)),
    }
    return _eval(node, env, shape)


def _eval(node: Node, env, shape) -> Jet:
    if isinstance(node, Const):
        return Jet.constant(node.value, shape)
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -_eval(node.arg, env, shape)
    if isinstance(node, BinOp):
        a = _eval(node.left, env, shape)
        b = _eval(node.right, env, shape)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        return a * reciprocal(b, node.pos)
    if isinstance(node, Pow):
        return powi(_eval(node.base, env, shape), node.exponent, node.pos)
    if isinstance(node, Call):
        args = [_eval(a, env, shape) for a in node.args]
        f = node.func
        if f == "log":
            return log(args[0], node.pos)
        if f == "sqrt":
            return sqrt(args[0], node.pos)
        if f == "atan2":
            return atan2(args[0], args[1], node.pos)
        return _UNARY[f](args[0])
    raise TypeError(f"unknown node {node!r}")


_UNARY: dict[str, Callable[[Jet], Jet]] = {"sin": sin, "cos": cos, "sinh": sinh, "cosh": cosh, "exp": exp}


def stack(jets: Sequence[Jet]) -> np.ndarray:
    """Stack component jets into an array of shape (10, ncomp, *grid)."""
    shape = np.broadcast_shapes(*(j.d.shape for j in jets))
    return np.stack([np.broadcast_to(j.d, shape) for j in jets], axis=1)


def eval_jet3(chart, u, v) -> np.ndarray:
    """Jet of a chart (list of ASTs, expression strings, or a callable) at (u, v).

    Returns an array of shape (10, ncomp, *grid).
    """
    if callable(chart):
        return chart(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    if isinstance(chart, (str, Node)):
        chart = [chart]
    comps = [parse_expression(c) if isinstance(c, str) else c for c in chart]
    return stack([evaluate(c, u, v) for c in comps])
