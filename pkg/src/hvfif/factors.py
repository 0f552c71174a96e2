"""Contractivity-factor expressions: parsing, evaluation and bounds.

Factors are written in a tiny expression language::

    expr   := term (('+' | '-') term)*
    term   := factor ('*' factor)*
    factor := number | ident | ident '(' expr ')' | '(' expr ')' | '-' factor

with identifiers ``x``, ``y`` (variables) and ``sin``, ``cos``, ``abs``.
There is no division, so every expression is total on finite input.
Implicit multiplication (``2.9x``) is rejected; write ``2.9*x``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

FUNCTIONS = ("sin", "cos", "abs")
VARIABLES = ("x", "y")
SPLITS = 64


class FactorSyntaxError(ValueError):
    """Raised for malformed expressions; ``offset`` is the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class DimensionMismatchError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Expression tree
# ---------------------------------------------------------------------------


class FactorExpr:
    """Base class of the immutable expression tree."""

    def __call__(self, x, y=None):
        return evaluate(self, x, y)

    def __str__(self):
        return serialize(self)

    @property
    def variables(self) -> frozenset:
        return _variables(self)


@dataclass(frozen=True, eq=True)
class Num(FactorExpr):
    value: float


@dataclass(frozen=True, eq=True)
class Var(FactorExpr):
    name: str


@dataclass(frozen=True, eq=True)
class Neg(FactorExpr):
    arg: FactorExpr


@dataclass(frozen=True, eq=True)
class Func(FactorExpr):
    name: str
    arg: FactorExpr


@dataclass(frozen=True, eq=True)
class BinOp(FactorExpr):
    op: str
    left: FactorExpr
    right: FactorExpr


def _variables(e: FactorExpr) -> frozenset:
    if isinstance(e, Var):
        return frozenset([e.name])
    if isinstance(e, (Neg, Func)):
        return _variables(e.arg)
    if isinstance(e, BinOp):
        return _variables(e.left) | _variables(e.right)
    return frozenset()


# Small constructors used when assembling composite expressions (q_i etc.).

def const(v: float) -> FactorExpr:
    return Num(float(v))


def add(a: FactorExpr, b: FactorExpr) -> FactorExpr:
    return BinOp("+", a, b)


def sub(a: FactorExpr, b: FactorExpr) -> FactorExpr:
    return BinOp("-", a, b)


def mul(a: FactorExpr, b: FactorExpr) -> FactorExpr:
    return BinOp("*", a, b)


def affine(scale: float, shift: float, var: str = "x") -> FactorExpr:
    """``scale*var + shift``."""
    return add(mul(const(scale), Var(var)), const(shift))


def substitute(e: FactorExpr, mapping: dict) -> FactorExpr:
    """Replace variables by expressions (used for composition with affine maps)."""
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, mapping))
    if isinstance(e, Func):
        return Func(e.name, substitute(e.arg, mapping))
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    return e


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_]\w*)|(?P<op>[-+*()]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise FactorSyntaxError(f"unexpected character {text[start]!r}", start)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, off = self.take()
        if val != value or kind == "end":
            what = "end of input" if kind == "end" else repr(val)
            raise FactorSyntaxError(f"expected {value!r}, found {what}", off)

    def expr(self) -> FactorExpr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> FactorExpr:
        node = self.factor()
        while self.peek()[:2] == ("op", "*"):
            self.take()
            node = BinOp("*", node, self.factor())
        return node

    def factor(self) -> FactorExpr:
        kind, val, off = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "ident":
            if val in VARIABLES:
                return Var(val)
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(val, arg)
            raise FactorSyntaxError(f"unknown identifier {val!r}", off)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "op" and val == "-":
            return Neg(self.factor())
        what = "end of input" if kind == "end" else repr(val)
        raise FactorSyntaxError(f"unexpected {what}", off)


def parse(text: str) -> FactorExpr:
    """Parse a factor expression such as ``"0.9 - abs(sin(x))"``."""
    if not isinstance(text, str) or text.strip() == "":
        raise FactorSyntaxError("empty expression", 0)
    try:
        text.encode("ascii")
    except UnicodeEncodeError as exc:
        raise FactorSyntaxError("non-ASCII character", exc.start) from None
    p = _Parser(text)
    node = p.expr()
    kind, val, off = p.peek()
    if kind != "end":
        raise FactorSyntaxError(f"unexpected {val!r}", off)
    return node


def as_expr(value: Union[str, float, int, FactorExpr]) -> FactorExpr:
    if isinstance(value, FactorExpr):
        return value
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return Num(float(value))
    return parse(value)


_PREC = {"+": 1, "-": 1, "*": 2}


def serialize(e: FactorExpr) -> str:
    """Concrete syntax accepted by :func:`parse`; round-trips exactly."""
    if isinstance(e, Num):
        s = repr(float(e.value))
        return f"({s})" if e.value < 0 or s.startswith("-") else s
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Func):
        return f"{e.name}({serialize(e.arg)})"
    if isinstance(e, Neg):
        inner = serialize(e.arg)
        if isinstance(e.arg, BinOp):
            inner = f"({inner})"
        return f"-{inner}"
    p = _PREC[e.op]
    left = serialize(e.left)
    right = serialize(e.right)
    if isinstance(e.left, BinOp) and _PREC[e.left.op] < p:
        left = f"({left})"
    # floating-point + and * are not associative, so a right operand of equal rank keeps its brackets
    if isinstance(e.right, BinOp) and _PREC[e.right.op] <= p:
        right = f"({right})"
    return f"{left} {e.op} {right}"


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def evaluate(e: FactorExpr, x, y=None):
    """Evaluate on a scalar (or numpy array) point.

    Scalars give a Python float; arrays broadcast elementwise.
    """
    if y is None and "y" in e.variables:
        raise DimensionMismatchError("bivariate expression evaluated at a scalar point")
    scalar = np.ndim(x) == 0 and (y is None or np.ndim(y) == 0)
    out = _eval(e, x, y)
    if scalar:
        return float(out)
    return np.broadcast_to(out, np.broadcast(np.asarray(x), np.asarray(0.0 if y is None else y)).shape).astype(float)


def _eval(e, x, y):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return x if e.name == "x" else y
    if isinstance(e, Neg):
        return -_eval(e.arg, x, y)
    if isinstance(e, Func):
        a = _eval(e.arg, x, y)
        if e.name == "sin":
            return np.sin(a)
        if e.name == "cos":
            return np.cos(a)
        return np.abs(a)
    a = _eval(e.left, x, y)
    b = _eval(e.right, x, y)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    return a * b


# ---------------------------------------------------------------------------
# Interval bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def split(self, k: int) -> list:
        edges = np.linspace(self.lo, self.hi, k + 1)
        edges[0], edges[-1] = self.lo, self.hi
        return [Interval(float(a), float(b)) for a, b in zip(edges[:-1], edges[1:])]

    def __add__(self, o):
        return Interval(self.lo + o.lo, self.hi + o.hi)

    def __sub__(self, o):
        return Interval(self.lo - o.hi, self.hi - o.lo)

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __mul__(self, o):
        p = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        return Interval(min(p), max(p))

    def abs(self):
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return -self
        return Interval(0.0, max(-self.lo, self.hi))

    def mag(self) -> float:
        return max(abs(self.lo), abs(self.hi))

    def mig(self) -> float:
        if self.lo <= 0.0 <= self.hi:
            return 0.0
        return min(abs(self.lo), abs(self.hi))


Box = tuple  # (Interval, Interval) for bivariate domains


def _trig_range(a: float, b: float, fn, offset: float) -> Interval:
    # extrema of fn sit at offset + k*pi with value (-1)**k
    if b - a >= 2 * math.pi:
        return Interval(-1.0, 1.0)
    fa, fb = fn(a), fn(b)
    lo, hi = min(fa, fb), max(fa, fb)
    k0 = math.ceil((a - offset) / math.pi)
    k1 = math.floor((b - offset) / math.pi)
    for k in range(k0, k1 + 1):
        if k % 2 == 0:
            hi = 1.0
        else:
            lo = -1.0
    return Interval(lo, hi)


def interval_eval(e: FactorExpr, dom_x: Interval, dom_y: Interval | None = None) -> Interval:
    """Natural interval extension with exact sin/cos ranges on monotone branches."""
    if isinstance(e, Num):
        return Interval(e.value, e.value)
    if isinstance(e, Var):
        if e.name == "x":
            return dom_x
        if dom_y is None:
            raise DimensionMismatchError("bivariate expression bounded over an interval")
        return dom_y
    if isinstance(e, Neg):
        return -interval_eval(e.arg, dom_x, dom_y)
    if isinstance(e, Func):
        a = interval_eval(e.arg, dom_x, dom_y)
        if e.name == "abs":
            return a.abs()
        if e.name == "sin":
            return _trig_range(a.lo, a.hi, math.sin, math.pi / 2)
        return _trig_range(a.lo, a.hi, math.cos, 0.0)
    a = interval_eval(e.left, dom_x, dom_y)
    b = interval_eval(e.right, dom_x, dom_y)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    return a * b


def _pieces(domain):
    if isinstance(domain, Interval):
        return [(p, None) for p in domain.split(SPLITS)]
    dx, dy = domain
    k = int(round(math.sqrt(SPLITS)))
    return [(px, py) for px in dx.split(k) for py in dy.split(k)]


def range_pieces(e: FactorExpr, domain) -> list:
    """Enclosures of ``e`` over the 64 sub-pieces of ``domain``."""
    return [interval_eval(e, px, py) for px, py in _pieces(domain)]


def sup_abs_bound(e: FactorExpr, domain) -> float:
    """Upper bound on sup |e| over an Interval or a (Interval, Interval) box."""
    return max(r.mag() for r in range_pieces(e, domain))


def inf_abs_bound(e: FactorExpr, domain) -> float:
    """Lower bound on inf |e| over the domain."""
    return min(r.mig() for r in range_pieces(e, domain))


def lipschitz_bound(e: FactorExpr, domain) -> float:
    """Upper bound on the Lipschitz constant of ``e`` over ``domain``.

    For bivariate domains the bound is with respect to the max-norm.
    """
    if isinstance(e, Num):
        return 0.0
    if isinstance(e, Var):
        return 1.0
    if isinstance(e, (Neg, Func)):
        return lipschitz_bound(e.arg, domain)
    la = lipschitz_bound(e.left, domain)
    lb = lipschitz_bound(e.right, domain)
    if e.op in "+-":
        return la + lb
    total = 0.0
    if lb:
        total += sup_abs_bound(e.left, domain) * lb
    if la:
        total += sup_abs_bound(e.right, domain) * la
    return total


def same_sign_on(a: FactorExpr, b: FactorExpr, domain) -> bool:
    """True when ``a*b >= 0`` is certified on every sub-piece of ``domain``."""
    for px, py in _pieces(domain):
        ra = interval_eval(a, px, py)
        rb = interval_eval(b, px, py)
        if (ra.lo >= 0 and rb.lo >= 0) or (ra.hi <= 0 and rb.hi <= 0):
            continue
        if (ra.lo == ra.hi == 0.0) or (rb.lo == rb.hi == 0.0):
            continue
        if (ra * rb).lo >= 0:
            continue
        return False
    return True
