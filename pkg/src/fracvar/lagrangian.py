"""A small expression language for Lagrangians and constraint integrands.

Grammar (EBNF)::

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = "-" unary | power ;
    power   = atom [ "^" unary ] ;              (* right associative *)
    atom    = number | name | func "(" expr ")" | "(" expr ")" ;
    func    = "sin" | "cos" | "exp" | "ln" | "sqrt" | "abs" | "sign" ;
    name    = "x" | "pi" | "y" index | "dy" index | "Dy" index ;
    index   = nonzero { digit } ;
    number  = ( digit { digit } [ "." { digit } ] | "." digit { digit } )
              [ ( "e" | "E" ) [ "+" | "-" ] digit { digit } ] ;

``yi`` is the ``i``-th component of the path, ``dyi`` its classical derivative
and ``Dyi`` its combined fractional derivative (``1 <= i <= N``). ``sign`` is
included because it appears in derivatives of ``abs``; ``sign(0) = 0``.

Expressions evaluate on scalars or, element-wise, on numpy arrays of node
values.
"""

from __future__ import annotations

import math
import re
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Union

import numpy as np

__all__ = [
    "BinOp",
    "Call",
    "Const",
    "ExpressionDomainError",
    "ExpressionSyntaxError",
    "Neg",
    "PointBinding",
    "Var",
    "diff",
    "evaluate",
    "parse",
    "to_text",
    "variable_names",
]

FUNCTIONS = ("sin", "cos", "exp", "ln", "sqrt", "abs", "sign")
KINDS = ("y", "dy", "Dy")


class ExpressionSyntaxError(ValueError):
    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class ExpressionDomainError(ArithmeticError):
    """Evaluation left the domain of an operation (``ln(0)``, ``1/0``, ...).

    *offset* locates the offending operation in the source text and *node*
    is the first grid node at which it failed (``None`` for scalar input).
    """

    def __init__(self, message: str, offset: int, node: int | None = None) -> None:
        where = f"offset {offset}" + ("" if node is None else f", node {node}")
        super().__init__(f"{message} ({where})")
        self.offset = offset
        self.node = node


# {{{ tree


@dataclass(frozen=True)
class Const:
    value: float
    offset: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    """``x`` (kind ``"x"``, index 0) or one of ``yi``, ``dyi``, ``Dyi``."""

    kind: str
    index: int = 0
    offset: int = field(default=-1, compare=False, repr=False)

    @property
    def name(self) -> str:
        return "x" if self.kind == "x" else f"{self.kind}{self.index}"


@dataclass(frozen=True)
class Neg:
    arg: Expr
    offset: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Expr
    right: Expr
    offset: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    func: str
    arg: Expr
    offset: int = field(default=-1, compare=False, repr=False)


Expr = Union[Const, Var, Neg, BinOp, Call]


@dataclass(frozen=True)
class PointBinding:
    """Values of ``x``, ``y``, ``y'`` and the fractional derivative at one point."""

    x: float
    y: tuple[float, ...]
    dy: tuple[float, ...]
    Dy: tuple[float, ...]

    def __post_init__(self) -> None:
        if not len(self.y) == len(self.dy) == len(self.Dy):
            raise ValueError("y, dy and Dy must have the same length")

    def env(self) -> dict[str, float]:
        out = {"x": float(self.x)}
        for kind, vals in (("y", self.y), ("dy", self.dy), ("Dy", self.Dy)):
            for i, v in enumerate(vals, start=1):
                out[f"{kind}{i}"] = float(v)
        return out


# }}}


# {{{ parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)
_VARIABLE = re.compile(r"(y|dy|Dy)([1-9][0-9]*)")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            start = len(text) - len(text[pos:].lstrip())
            raise ExpressionSyntaxError(f"unexpected character {text[start]!r}", start)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, n: int) -> None:
        self.tokens = _tokenize(text)
        self.pos = 0
        self.n = n

    @property
    def current(self) -> tuple[str, str, int]:
        return self.tokens[self.pos]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value: str) -> None:
        kind, text, offset = self.current
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ExpressionSyntaxError(f"expected {value!r}, found {found}", offset)
        self.advance()

    def parse(self) -> Expr:
        expr = self.expr()
        kind, text, offset = self.current
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected token {text!r}", offset)
        return expr

    def expr(self) -> Expr:
        node = self.term()
        while self.current[1] in ("+", "-") and self.current[0] == "op":
            _, op, offset = self.advance()
            node = BinOp(op, node, self.term(), offset)
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.current[1] in ("*", "/") and self.current[0] == "op":
            _, op, offset = self.advance()
            node = BinOp(op, node, self.unary(), offset)
        return node

    def unary(self) -> Expr:
        if self.current[:2] == ("op", "-"):
            _, _, offset = self.advance()
            arg = self.unary()
            if isinstance(arg, Const):
                return Const(-arg.value, offset)
            return Neg(arg, offset)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.current[:2] == ("op", "^"):
            _, _, offset = self.advance()
            return BinOp("^", base, self.unary(), offset)
        return base

    def atom(self) -> Expr:
        kind, text, offset = self.advance()
        if kind == "num":
            return Const(float(text), offset)
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg, offset)
            if text == "x":
                return Var("x", 0, offset)
            if text == "pi":
                return Const(math.pi, offset)
            m = _VARIABLE.fullmatch(text)
            if m is None:
                raise ExpressionSyntaxError(f"unknown identifier {text!r}", offset)
            index = int(m.group(2))
            if index > self.n:
                raise ExpressionSyntaxError(
                    f"variable {text!r} exceeds the number of components N={self.n}",
                    offset,
                )
            return Var(m.group(1), index, offset)
        if (kind, text) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExpressionSyntaxError(f"unexpected {found}", offset)


def parse(text: str, n: int) -> Expr:
    """Parse *text* into an expression over ``N = n`` path components."""
    if n < 1:
        raise ValueError(f"N must be positive: got {n}")
    if not text or not text.strip():
        raise ExpressionSyntaxError("empty expression", 0)
    return _Parser(text, n).parse()


# }}}


# {{{ printing

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PRECEDENCE[e.op]
    if isinstance(e, Neg) or (isinstance(e, Const) and e.value < 0):
        return _PRECEDENCE["neg"]
    return 5


def _format_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_text(e: Expr) -> str:
    """Print an expression so that :func:`parse` rebuilds the same tree."""
    if isinstance(e, Const):
        return _format_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({to_text(e.arg)})"
    if isinstance(e, Neg):
        inner = to_text(e.arg)
        # a bare negative literal would fold into a constant on re-parse
        if _prec(e.arg) < _PRECEDENCE["neg"] or isinstance(e.arg, (Const, Neg)):
            inner = f"({inner})"
        return f"-{inner}"

    p = _PRECEDENCE[e.op]
    left, right = to_text(e.left), to_text(e.right)
    if e.op == "^":
        if _prec(e.left) <= p:
            left = f"({left})"
        if _prec(e.right) < _PRECEDENCE["neg"]:
            right = f"({right})"
    else:
        if _prec(e.left) < p:
            left = f"({left})"
        # left associative: equal precedence on the right needs parentheses
        if _prec(e.right) <= p:
            right = f"({right})"
    return f"{left}{e.op}{right}"


# }}}


# {{{ evaluation


def variable_names(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Const):
        return set()
    if isinstance(e, (Neg, Call)):
        return variable_names(e.arg)
    return variable_names(e.left) | variable_names(e.right)


def _first_bad(mask) -> int | None:
    if np.ndim(mask) == 0:
        return None
    return int(np.flatnonzero(mask)[0])


def _domain_check(mask, message: str, e: Expr) -> None:
    if np.any(mask):
        raise ExpressionDomainError(message, e.offset, _first_bad(mask))


def evaluate(e: Expr, at: PointBinding | Mapping[str, object]):
    """Evaluate *e* at a :class:`PointBinding` or a name -> value mapping.

    Mapping values may be numpy arrays, in which case evaluation is
    element-wise and a domain error reports the first failing index.
    """
    env = at.env() if isinstance(at, PointBinding) else at
    return _eval(e, env)


def _eval(e: Expr, env: Mapping[str, object]):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise ExpressionDomainError(f"no value bound to {e.name!r}", e.offset) from None
    if isinstance(e, Neg):
        return -_eval(e.arg, env)
    if isinstance(e, Call):
        v = _eval(e.arg, env)
        if e.func == "ln":
            _domain_check(np.asarray(v) <= 0, "ln of a non-positive value", e)
            return np.log(v)
        if e.func == "sqrt":
            _domain_check(np.asarray(v) < 0, "sqrt of a negative value", e)
            return np.sqrt(v)
        return {
            "sin": np.sin,
            "cos": np.cos,
            "exp": np.exp,
            "abs": np.abs,
            "sign": np.sign,
        }[e.func](v)

    a = _eval(e.left, env)
    b = _eval(e.right, env)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "/":
        _domain_check(np.asarray(b) == 0, "division by zero", e)
        return a / b

    # power
    if isinstance(e.right, Const) and e.right.value == int(e.right.value):
        _domain_check(
            (np.asarray(a) == 0) & (e.right.value < 0), "zero to a negative power", e
        )
        return a ** int(e.right.value)
    base = np.asarray(a)
    _domain_check(base < 0, "non-integer power of a negative value", e)
    _domain_check((base == 0) & (np.asarray(b) < 0), "zero to a negative power", e)
    out = np.power(base, b)
    return float(out) if np.ndim(out) == 0 else out


# }}}


# {{{ differentiation


def _is(e: Expr, v: float) -> bool:
    return isinstance(e, Const) and e.value == v


def _add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    return BinOp("+", a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is(b, 0):
        return a
    if _is(a, 0):
        return _neg(b)
    return BinOp("-", a, b)


def _neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is(a, 0) or _is(b, 0):
        return Const(0.0)
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    return BinOp("*", a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0:
        return Const(a.value / b.value)
    if _is(a, 0):
        return Const(0.0)
    if _is(b, 1):
        return a
    return BinOp("/", a, b)


def _pow(a: Expr, b: Expr) -> Expr:
    if _is(b, 1):
        return a
    if _is(b, 0):
        return Const(1.0)
    return BinOp("^", a, b)


def diff(e: Expr, var: str) -> Expr:
    """Symbolic partial derivative of *e* with respect to the variable named *var*.

    Only constant folding and 0/1 elimination are applied to the result.
    """
    if not (var == "x" or _VARIABLE.fullmatch(var)):
        raise ValueError(f"cannot differentiate with respect to {var!r}")
    return _diff(e, var)


def _diff(e: Expr, v: str) -> Expr:
    if isinstance(e, Const):
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0 if e.name == v else 0.0)
    if isinstance(e, Neg):
        return _neg(_diff(e.arg, v))
    if isinstance(e, Call):
        u, du = e.arg, _diff(e.arg, v)
        if _is(du, 0):
            return Const(0.0)
        outer = {
            "sin": lambda: Call("cos", u),
            "cos": lambda: _neg(Call("sin", u)),
            "exp": lambda: Call("exp", u),
            "ln": lambda: _div(Const(1.0), u),
            "sqrt": lambda: _div(Const(1.0), _mul(Const(2.0), Call("sqrt", u))),
            "abs": lambda: Call("sign", u),
            "sign": lambda: Const(0.0),
        }[e.func]()
        return _mul(outer, du)

    a, b = e.left, e.right
    da, db = _diff(a, v), _diff(b, v)
    if e.op == "+":
        return _add(da, db)
    if e.op == "-":
        return _sub(da, db)
    if e.op == "*":
        return _add(_mul(da, b), _mul(a, db))
    if e.op == "/":
        return _sub(_div(da, b), _div(_mul(a, db), _pow(b, Const(2.0))))

    # power
    if _is(db, 0):
        if _is(da, 0):
            return Const(0.0)
        if isinstance(b, Const):
            return _mul(_mul(b, _pow(a, Const(b.value - 1.0))), da)
        return _mul(_mul(b, _pow(a, _sub(b, Const(1.0)))), da)
    # a^b * (b' ln a + b a'/a)
    rate = _add(_mul(db, Call("ln", a)), _div(_mul(b, da), a))
    return _mul(e, rate)


# }}}
