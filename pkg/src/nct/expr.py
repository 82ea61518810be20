"""Map-definition expressions: parsing, printing, checked evaluation and
exact symbolic differentiation.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := atom ('^' number)?
    atom   := number | 'x' | 'y' | 't1' | 't2'
            | ident '(' expr ')' | '(' expr ')' | '-' atom
    ident  := sin | cos | exp | log | sqrt

Unary minus binds tighter than ``^``, so ``-x^2`` is ``(-x)^2``.  Exponents
are literal non-negative numbers, which keeps every derivative closed-form.

Trees keep parenthesis groups and the literal text of numbers, so printing a
parsed tree reproduces the source up to whitespace.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable

import numpy as np

VARIABLES = ("x", "y", "t1", "t2")
FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")
DERIVATIVE_ORDERS = ("x", "y", "xx", "xy", "yy")


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, offset: int, expected: Iterable[str], found: str):
        self.offset = offset
        self.expected = tuple(sorted(set(expected)))
        self.found = found
        super().__init__(
            f"syntax error at offset {offset}: found {found!r}, "
            f"expected one of {', '.join(self.expected)}"
        )


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown identifier {name!r} at offset {offset}")


class DomainError(ExprError, ArithmeticError):
    """Evaluation left a function's domain; ``node`` is the offending subtree."""

    def __init__(self, message: str, node: "Expression"):
        self.node = node
        super().__init__(f"{message} in {to_source(node)!r}")


# --------------------------------------------------------------------------
# nodes


class Expression:
    """Immutable expression tree node."""

    __slots__ = ()

    def __str__(self) -> str:
        return to_source(self)

    def variables(self) -> frozenset:
        return _variables(self)

    def derivative(self, order: str) -> "Expression":
        """Exact partial derivative for ``order`` in {x, y, xx, xy, yy} (or t1/t2)."""
        out = self
        for var in canonical_order(order):
            out = diff(out, var)
        return out


@dataclass(frozen=True, eq=True)
class Const(Expression):
    value: float
    text: str = ""

    def __post_init__(self):
        if not self.text:
            object.__setattr__(self, "text", _format_float(self.value))


@dataclass(frozen=True)
class Var(Expression):
    name: str


@dataclass(frozen=True)
class Neg(Expression):
    arg: Expression


@dataclass(frozen=True)
class Call(Expression):
    func: str
    arg: Expression


@dataclass(frozen=True)
class BinOp(Expression):
    op: str
    left: Expression
    right: Expression


@dataclass(frozen=True)
class Pow(Expression):
    base: Expression
    exponent: Const


@dataclass(frozen=True)
class Group(Expression):
    inner: Expression


def Add(a, b):
    return BinOp("+", a, b)


def Sub(a, b):
    return BinOp("-", a, b)


def Mul(a, b):
    return BinOp("*", a, b)


def Div(a, b):
    return BinOp("/", a, b)


def _format_float(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


# --------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)
_ATOM_START = ("number", "x", "y", "t1", "t2", *FUNCTIONS, "(", "-")


class _Parser:
    def __init__(self, source: str):
        self.src = source
        self.toks: list[tuple[str, str, int]] = []
        pos = 0
        while True:
            m = _TOKEN.match(source, pos)
            if m is None:
                rest = source[pos:]
                stripped = rest.lstrip()
                if not stripped:
                    break
                off = len(source) - len(stripped)
                raise ExprSyntaxError(self._byte(off), ["token"], stripped[0])
            kind = m.lastgroup
            self.toks.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.toks.append(("end", "", len(source)))
        self.i = 0

    def _byte(self, off: int) -> int:
        return len(self.src[:off].encode("utf-8"))

    def peek(self):
        return self.toks[self.i]

    def fail(self, expected):
        kind, text, off = self.peek()
        raise ExprSyntaxError(self._byte(off), expected, text or "end of input")

    def expect(self, text):
        if self.peek()[1] != text or self.peek()[0] != "op":
            self.fail([text])
        self.i += 1

    def parse(self) -> Expression:
        e = self.expr()
        if self.peek()[0] != "end":
            self.fail(["+", "-", "*", "/", "^", "end of input"])
        return e

    def expr(self):
        left = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.peek()[1]
            self.i += 1
            left = BinOp(op, left, self.term())
        return left

    def term(self):
        left = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.peek()[1]
            self.i += 1
            left = BinOp(op, left, self.factor())
        return left

    def factor(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.i += 1
            kind, text, _ = self.peek()
            if kind != "num":
                self.fail(["number"])
            self.i += 1
            return Pow(base, Const(float(text), text))
        return base

    def atom(self):
        kind, text, off = self.peek()
        if kind == "num":
            self.i += 1
            return Const(float(text), text)
        if kind == "name":
            self.i += 1
            if text in VARIABLES:
                return Var(text)
            if text in FUNCTIONS:
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                return Call(text, inner)
            raise UnknownIdentifierError(text, self._byte(off))
        if kind == "op" and text == "(":
            self.i += 1
            inner = self.expr()
            self.expect(")")
            return Group(inner)
        if kind == "op" and text == "-":
            self.i += 1
            return Neg(self.atom())
        self.fail(_ATOM_START)


def parse(source: str) -> Expression:
    """Parse ``source`` into an expression tree."""
    if not isinstance(source, str) or not source.strip():
        raise ExprSyntaxError(0, _ATOM_START, "end of input")
    return _Parser(source).parse()


# --------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(e: Expression) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Pow):
        return 3
    return 4  # atoms, including Neg and Group


def to_source(e: Expression) -> str:
    """Print in the input grammar; adds parentheses only where precedence needs them."""
    if isinstance(e, Const):
        return e.text if e.value >= 0 else "-" + Const(-e.value).text
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Group):
        return "(" + to_source(e.inner) + ")"
    if isinstance(e, Call):
        return f"{e.func}({to_source(e.arg)})"
    if isinstance(e, Neg):
        return "-" + _wrap(e.arg, 4)
    if isinstance(e, Pow):
        return _wrap(e.base, 4) + "^" + e.exponent.text
    p = _PREC[e.op]
    left = _wrap(e.left, p)
    right = _wrap(e.right, p + (1 if e.op in "-/" else 0))
    return f"{left}{e.op}{right}"


def _wrap(e: Expression, need: int) -> str:
    s = to_source(e)
    if isinstance(e, Const) and e.value < 0 and need > 1:
        return "(" + s + ")"
    return s if _prec(e) >= need else "(" + s + ")"


# --------------------------------------------------------------------------
# structure helpers


def _unwrap(e: Expression) -> Expression:
    while isinstance(e, Group):
        e = e.inner
    return e


@lru_cache(maxsize=None)
def _variables(e: Expression) -> frozenset:
    if isinstance(e, Var):
        return frozenset([e.name])
    if isinstance(e, Const):
        return frozenset()
    return frozenset().union(*(_variables(c) for c in _children(e)))


def _children(e: Expression) -> tuple:
    if isinstance(e, BinOp):
        return (e.left, e.right)
    if isinstance(e, (Neg, Call)):
        return (e.arg,)
    if isinstance(e, Pow):
        return (e.base,)
    if isinstance(e, Group):
        return (e.inner,)
    return ()


def depth(e: Expression) -> int:
    kids = _children(e)
    return 1 + (max(depth(k) for k in kids) if kids else 0)


def canonical_order(order) -> tuple:
    """Normalize a derivative order to a sorted tuple of variable names.

    ``"yx"`` and ``("y", "x")`` both become ``("x", "y")``, so mixed partials are
    always taken x first.  Translation symbols are allowed for first order.
    """
    if isinstance(order, str):
        parts = [order] if order in ("t1", "t2") else list(order)
    else:
        parts = list(order)
    if not 1 <= len(parts) <= 2 or any(p not in VARIABLES for p in parts):
        raise ValueError(f"invalid derivative order {order!r}")
    return tuple(sorted(parts, key=VARIABLES.index))


# --------------------------------------------------------------------------
# symbolic differentiation with light constant folding


def _is_const(e, value=None) -> bool:
    e = _unwrap(e)
    return isinstance(e, Const) and (value is None or e.value == value)


def _cval(e) -> float:
    return _unwrap(e).value


def _add(a, b):
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(_cval(a) + _cval(b))
    return Add(a, b)


def _sub(a, b):
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return _neg(b)
    if _is_const(a) and _is_const(b):
        return Const(_cval(a) - _cval(b))
    return Sub(a, b)


def _mul(a, b):
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return Const(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(_cval(a) * _cval(b))
    return Mul(a, b)


def _div(a, b):
    if _is_const(a, 0.0):
        return Const(0.0)
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b) and _cval(b) != 0.0:
        return Const(_cval(a) / _cval(b))
    return Div(a, b)


def _neg(a):
    if _is_const(a):
        return Const(-_cval(a))
    u = _unwrap(a)
    if isinstance(u, Neg):
        return u.arg
    return Neg(a)


def _pow(base, c: float):
    if c == 0.0:
        return Const(1.0)
    if c == 1.0:
        return base
    if c < 0.0:
        return _div(Const(1.0), _pow(base, -c))
    if _is_const(base) and not (_cval(base) < 0 and c != int(c)):
        return Const(_cval(base) ** c)
    return Pow(base, Const(c))


@lru_cache(maxsize=4096)
def diff(e: Expression, var: str) -> Expression:
    """Exact partial derivative of ``e`` with respect to one variable."""
    if var not in VARIABLES:
        raise ValueError(f"cannot differentiate with respect to {var!r}")
    if var not in _variables(e):
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0)
    if isinstance(e, Group):
        return diff(e.inner, var)
    if isinstance(e, Neg):
        return _neg(diff(e.arg, var))
    if isinstance(e, BinOp):
        da, db = diff(e.left, var), diff(e.right, var)
        if e.op == "+":
            return _add(da, db)
        if e.op == "-":
            return _sub(da, db)
        if e.op == "*":
            return _add(_mul(da, e.right), _mul(e.left, db))
        # quotient rule written as da/b - a*db/b^2
        return _sub(_div(da, e.right), _div(_mul(e.left, db), _pow(e.right, 2.0)))
    if isinstance(e, Pow):
        c = e.exponent.value
        return _mul(_mul(Const(c), _pow(e.base, c - 1.0)), diff(e.base, var))
    if isinstance(e, Call):
        du = diff(e.arg, var)
        u = e.arg
        if e.func == "sin":
            outer = Call("cos", u)
        elif e.func == "cos":
            outer = _neg(Call("sin", u))
        elif e.func == "exp":
            outer = e
        elif e.func == "log":
            return _div(du, u)
        else:  # sqrt
            return _div(du, _mul(Const(2.0), e))
        return _mul(outer, du)
    raise TypeError(f"not an expression node: {e!r}")


# --------------------------------------------------------------------------
# checked scalar evaluation


def evaluate(e: Expression, x: float = 0.0, y: float = 0.0, t1: float = 0.0, t2: float = 0.0) -> float:
    """IEEE double evaluation with domain checks."""
    env = {"x": float(x), "y": float(y), "t1": float(t1), "t2": float(t2)}
    return _eval(e, env)


def _eval(e: Expression, env: dict) -> float:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Group):
        return _eval(e.inner, env)
    if isinstance(e, Neg):
        return -_eval(e.arg, env)
    if isinstance(e, BinOp):
        a, b = _eval(e.left, env), _eval(e.right, env)
        if e.op == "+":
            r = a + b
        elif e.op == "-":
            r = a - b
        elif e.op == "*":
            r = a * b
        else:
            if b == 0.0:
                raise DomainError("division by zero", e)
            r = a / b
    elif isinstance(e, Pow):
        b, c = _eval(e.base, env), e.exponent.value
        if b < 0.0 and c != int(c):
            raise DomainError("negative base with fractional exponent", e)
        if b == 0.0 and c < 0.0:
            raise DomainError("zero base with negative exponent", e)
        try:
            r = b ** c
        except OverflowError:
            raise DomainError("overflow", e) from None
    elif isinstance(e, Call):
        a = _eval(e.arg, env)
        if e.func == "log" and a <= 0.0:
            raise DomainError("log of non-positive value", e)
        if e.func == "sqrt" and a < 0.0:
            raise DomainError("sqrt of negative value", e)
        try:
            r = getattr(math, e.func)(a)
        except OverflowError:
            raise DomainError("overflow", e) from None
    else:
        raise TypeError(f"not an expression node: {e!r}")
    if not math.isfinite(r):
        raise DomainError("non-finite result", e)
    return r


def deriv(e: Expression, order, x: float = 0.0, y: float = 0.0, t1: float = 0.0, t2: float = 0.0) -> float:
    """Exact partial derivative value for ``order`` in {x, y, xx, xy, yy}."""
    return evaluate(e.derivative(order), x, y, t1, t2)


# --------------------------------------------------------------------------
# code generation


def to_python(e: Expression, names: dict | None = None, mod: str = "math") -> str:
    """Python source for ``e``; ``names`` renames variables, ``mod`` hosts the functions."""
    names = names or {}
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return names.get(e.name, e.name)
    if isinstance(e, Group):
        return to_python(e.inner, names, mod)
    if isinstance(e, Neg):
        return f"(-{to_python(e.arg, names, mod)})"
    if isinstance(e, BinOp):
        return f"({to_python(e.left, names, mod)} {e.op} {to_python(e.right, names, mod)})"
    if isinstance(e, Pow):
        c = e.exponent.value
        b = to_python(e.base, names, mod)
        if c == 2.0:
            return f"({b} * {b})"
        if c == int(c) and 0 < c <= 4:
            return "(" + " * ".join([b] * int(c)) + ")"
        return f"({b} ** {c!r})"
    if isinstance(e, Call):
        return f"{mod}.{e.func}({to_python(e.arg, names, mod)})"
    raise TypeError(f"not an expression node: {e!r}")


def compile_numpy(e: Expression) -> Callable:
    """Vectorized evaluator ``fn(x, y, t1, t2)`` returning an array shaped like the broadcast inputs."""
    src = to_python(e, mod="np")
    body = eval(f"lambda x, y, t1, t2: {src}", {"np": np})  # noqa: S307 - generated from a parsed tree

    def fn(x, y=0.0, t1=0.0, t2=0.0):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        with np.errstate(all="ignore"):
            r = body(x, y, t1, t2)
        return np.broadcast_to(np.asarray(r, dtype=float), np.broadcast(x, y).shape).copy()

    fn.source = src
    return fn
