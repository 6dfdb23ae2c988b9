"""Coefficient expressions: parsing, evaluation and symbolic differentiation.

Grammar (whitespace-insensitive)::

    expr   := term (("+"|"-") term)* ;
    term   := factor (("*"|"/") factor)* ;
    factor := "-" factor | power ;
    power  := atom ("^" factor)? ;
    atom   := NUMBER | "x" | "t" | IDENT | IDENT "(" expr ")" | "(" expr ")" ;

An identifier followed by ``(`` must name one of :data:`FUNCTIONS`; any
other identifier (except ``x`` and ``t``) is a parameter looked up in a
:class:`ParamEnv` at evaluation time.

Trees are immutable and compare structurally.  Evaluation accepts scalars
or numpy arrays for ``x`` and ``t`` and broadcasts them.
"""

from __future__ import annotations

import math
import re
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy import special

from .errors import (
    DomainError,
    InputError,
    ParseError,
    UnboundParameterError,
    UnknownFunctionError,
)

FUNCTIONS = frozenset(
    {"sin", "cos", "tan", "arctan", "sinh", "cosh", "tanh", "exp", "log", "sqrt", "erf"}
)
UNARY = FUNCTIONS | {"neg"}
BINARY = frozenset({"+", "-", "*", "/", "^"})
VARIABLES = ("x", "t")

_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


@dataclass(frozen=True)
class Expression:
    """A node of a coefficient expression tree.

    ``kind`` is ``"num"``, ``"x"``, ``"t"``, ``"param"``, a unary function
    name (including ``"neg"``) or a binary operator symbol.
    """

    kind: str
    args: tuple = ()
    value: float | None = None
    name: str | None = None

    def __post_init__(self):
        k = self.kind
        if k in ("num", "x", "t", "param"):
            arity = 0
        elif k in UNARY:
            arity = 1
        elif k in BINARY:
            arity = 2
        else:
            raise InputError(f"unknown node kind {k!r}")
        if len(self.args) != arity:
            raise InputError(f"node {k!r} expects {arity} children, got {len(self.args)}")
        if k == "num" and self.value is None:
            raise InputError("numeric node without value")
        if k == "param" and not self.name:
            raise InputError("parameter node without name")

    # -- arithmetic sugar, simplifying as it builds ---------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __pow__(self, other):
        return power(self, other)

    def __rpow__(self, other):
        return power(other, self)

    def __neg__(self):
        return neg(self)

    def __str__(self):
        return render(self)


X = Expression("x")
T = Expression("t")
ZERO = Expression("num", value=0.0)
ONE = Expression("num", value=1.0)


def num(value: float) -> Expression:
    return Expression("num", value=float(value))


def param(name: str) -> Expression:
    return Expression("param", name=name)


def _lift(e) -> Expression:
    if isinstance(e, Expression):
        return e
    if isinstance(e, (int, float, np.floating, np.integer)):
        return num(float(e))
    raise TypeError(f"cannot use {type(e).__name__} in an expression")


def _is_num(e: Expression, v: float | None = None) -> bool:
    return e.kind == "num" and (v is None or e.value == v)


def add(a, b) -> Expression:
    a, b = _lift(a), _lift(b)
    if _is_num(a) and _is_num(b):
        return num(a.value + b.value)
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    return Expression("+", (a, b))


def sub(a, b) -> Expression:
    a, b = _lift(a), _lift(b)
    if _is_num(a) and _is_num(b):
        return num(a.value - b.value)
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return neg(b)
    return Expression("-", (a, b))


def mul(a, b) -> Expression:
    a, b = _lift(a), _lift(b)
    if _is_num(a) and _is_num(b):
        return num(a.value * b.value)
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return ZERO
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    if _is_num(a, -1.0):
        return neg(b)
    if _is_num(b, -1.0):
        return neg(a)
    return Expression("*", (a, b))


def div(a, b) -> Expression:
    a, b = _lift(a), _lift(b)
    if _is_num(a) and _is_num(b) and b.value != 0.0:
        return num(a.value / b.value)
    if _is_num(a, 0.0) and not _is_num(b, 0.0):
        return ZERO
    if _is_num(b, 1.0):
        return a
    return Expression("/", (a, b))


def power(a, b) -> Expression:
    a, b = _lift(a), _lift(b)
    if _is_num(b, 0.0):
        return ONE
    if _is_num(b, 1.0):
        return a
    if _is_num(a) and _is_num(b):
        base, ex = a.value, b.value
        if (base > 0 or float(ex).is_integer()) and not (base == 0 and ex < 0):
            return num(base**ex)
    return Expression("^", (a, b))


def neg(a) -> Expression:
    a = _lift(a)
    if _is_num(a):
        return num(-a.value)
    if a.kind == "neg":
        return a.args[0]
    return Expression("neg", (a,))


def func(name: str, arg) -> Expression:
    if name == "neg":
        return neg(arg)
    if name not in FUNCTIONS:
        raise InputError(f"unknown function {name!r}")
    arg = _lift(arg)
    if _is_num(arg):
        try:
            value = float(_SCALAR_FUNCS[name](arg.value))
        except (ValueError, OverflowError):
            value = None
        if value is not None and math.isfinite(value):
            return num(value)
    return Expression(name, (arg,))


def sqrt(e) -> Expression:
    return func("sqrt", e)


def log(e) -> Expression:
    return func("log", e)


def exp(e) -> Expression:
    return func("exp", e)


_SCALAR_FUNCS = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "arctan": math.atan,
    "sinh": math.sinh,
    "cosh": math.cosh,
    "tanh": math.tanh,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "erf": math.erf,
}


# -- parameters ---------------------------------------------------------------
class ParamEnv(Mapping):
    """Immutable mapping from parameter names to real values."""

    def __init__(self, items: Mapping | Iterable[tuple[str, float]] = ()):
        pairs = items.items() if isinstance(items, Mapping) else items
        data: dict[str, float] = {}
        for name, value in pairs:
            if name in data:
                raise InputError(f"duplicate parameter {name!r}")
            if not _IDENT.fullmatch(name) or name in VARIABLES:
                raise InputError(f"invalid parameter name {name!r}")
            data[name] = float(value)
        self._data = data

    def __getitem__(self, key):
        return self._data[key]

    def __iter__(self):
        return iter(self._data)

    def __len__(self):
        return len(self._data)

    def __hash__(self):
        return hash(tuple(sorted(self._data.items())))

    def __repr__(self):
        return f"ParamEnv({self._data!r})"

    def updated(self, **values) -> "ParamEnv":
        merged = dict(self._data)
        merged.update(values)
        return ParamEnv(merged)


# -- parsing -------------------------------------------------------------------
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_SINGLE = set("+-*/^()")


def _tokenize(source: str):
    tokens = []
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _SINGLE:
            tokens.append((ch, ch, i))
            i += 1
            continue
        m = _NUMBER.match(source, i)
        if m:
            tokens.append(("NUMBER", m.group(), i))
            i = m.end()
            continue
        m = _IDENT.match(source, i)
        if m:
            tokens.append(("IDENT", m.group(), i))
            i = m.end()
            continue
        raise ParseError(f"unexpected character {ch!r}", i, ("NUMBER", "IDENT", "(", "-"))
    tokens.append(("END", "", n))
    return tokens


class _Parser:
    _ATOM_START = ("NUMBER", "IDENT", "(", "-")

    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind):
        tok = self.peek()
        if tok[0] != kind:
            raise ParseError(f"unexpected {tok[1] or 'end of input'!r}", tok[2], (kind,))
        return self.take()

    def parse(self) -> Expression:
        e = self.expr()
        tok = self.peek()
        if tok[0] != "END":
            raise ParseError(
                f"unexpected {tok[1]!r}", tok[2], ("+", "-", "*", "/", "^", "end of input")
            )
        return e

    def expr(self):
        left = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            left = Expression(op, (left, self.term()))
        return left

    def term(self):
        left = self.factor()
        while self.peek()[0] in ("*", "/"):
            op = self.take()[0]
            left = Expression(op, (left, self.factor()))
        return left

    def factor(self):
        if self.peek()[0] == "-":
            self.take()
            return Expression("neg", (self.factor(),))
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "^":
            self.take()
            return Expression("^", (base, self.factor()))
        return base

    def atom(self):
        kind, text, offset = self.peek()
        if kind == "NUMBER":
            self.take()
            return num(float(text))
        if kind == "IDENT":
            self.take()
            if self.peek()[0] == "(":
                if text not in FUNCTIONS:
                    raise UnknownFunctionError(text, offset)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Expression(text, (arg,))
            if text in VARIABLES:
                return Expression(text)
            return param(text)
        if kind == "(":
            self.take()
            inner = self.expr()
            self.expect(")")
            return inner
        what = text or "end of input"
        raise ParseError(f"unexpected {what!r}", offset, ("NUMBER", "IDENT", "("))


def parse(source: str) -> Expression:
    """Parse ``source`` into an expression tree."""
    return _Parser(source).parse()


# -- rendering -----------------------------------------------------------------
_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}
_ATOM_PREC = 5


def _prec(e: Expression) -> int:
    if e.kind == "num" and e.value < 0:
        return 3
    return _PREC.get(e.kind, _ATOM_PREC)


def _fmt_num(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def render(e: Expression) -> str:
    """Render ``e`` as text that parses back to an equal tree."""
    k = e.kind
    if k == "num":
        return _fmt_num(e.value)
    if k in VARIABLES:
        return k
    if k == "param":
        return e.name
    if k == "neg":
        child = e.args[0]
        inner = render(child)
        if _prec(child) < 3:
            inner = f"({inner})"
        return f"-{inner}"
    if k in FUNCTIONS:
        return f"{k}({render(e.args[0])})"
    a, b = e.args
    ra, rb = render(a), render(b)
    p = _PREC[k]
    if k == "^":
        if _prec(a) < _ATOM_PREC:
            ra = f"({ra})"
        if _prec(b) < 3:
            rb = f"({rb})"
        return f"{ra}^{rb}"
    if _prec(a) < p:
        ra = f"({ra})"
    if _prec(b) <= p:
        rb = f"({rb})"
    sep = " " if p == 1 else ""
    return f"{ra}{sep}{k}{sep}{rb}"


# -- inspection ----------------------------------------------------------------
def parameters(e: Expression) -> frozenset:
    """Names of all parameters referenced by ``e``."""
    if e.kind == "param":
        return frozenset({e.name})
    out = frozenset()
    for a in e.args:
        out |= parameters(a)
    return out


def depends_on(e: Expression, var: str) -> bool:
    if e.kind == var:
        return True
    return any(depends_on(a, var) for a in e.args)


def substitute(e: Expression, var: str, replacement) -> Expression:
    """Replace variable ``var`` (``"x"`` or ``"t"``) by ``replacement``."""
    replacement = _lift(replacement)
    if e.kind == var:
        return replacement
    if not e.args:
        return e
    args = [substitute(a, var, replacement) for a in e.args]
    return _rebuild(e.kind, args)


def bind(e: Expression, env: Mapping) -> Expression:
    """Replace bound parameters by numeric constants and fold."""
    if e.kind == "param":
        return num(env[e.name]) if e.name in env else e
    if not e.args:
        return e
    return _rebuild(e.kind, [bind(a, env) for a in e.args])


def _rebuild(kind, args):
    if kind in FUNCTIONS or kind == "neg":
        return func(kind, args[0])
    return {"+": add, "-": sub, "*": mul, "/": div, "^": power}[kind](*args)


# -- differentiation -------------------------------------------------------------
def differentiate(e: Expression, var: str) -> Expression:
    """Exact derivative of ``e`` with respect to ``var`` (``"x"`` or ``"t"``)."""
    if var not in VARIABLES:
        raise InputError(f"can only differentiate with respect to x or t, not {var!r}")
    return _d(e, var)


def _d(e: Expression, v: str) -> Expression:
    k = e.kind
    if k == v:
        return ONE
    if not depends_on(e, v):
        return ZERO
    if k == "neg":
        return neg(_d(e.args[0], v))
    if k in ("+", "-"):
        a, b = e.args
        return add(_d(a, v), _d(b, v)) if k == "+" else sub(_d(a, v), _d(b, v))
    if k == "*":
        a, b = e.args
        return add(mul(_d(a, v), b), mul(a, _d(b, v)))
    if k == "/":
        a, b = e.args
        if not depends_on(b, v):
            return div(_d(a, v), b)
        return div(sub(mul(_d(a, v), b), mul(a, _d(b, v))), power(b, 2))
    if k == "^":
        a, b = e.args
        if not depends_on(b, v):
            return mul(mul(b, power(a, sub(b, 1))), _d(a, v))
        if not depends_on(a, v):
            return mul(mul(e, log(a)), _d(b, v))
        return mul(e, add(mul(_d(b, v), log(a)), div(mul(b, _d(a, v)), a)))
    u = e.args[0]
    du = _d(u, v)
    if k == "sin":
        outer = func("cos", u)
    elif k == "cos":
        outer = neg(func("sin", u))
    elif k == "tan":
        outer = add(1, power(func("tan", u), 2))
    elif k == "arctan":
        outer = div(1, add(1, power(u, 2)))
    elif k == "sinh":
        outer = func("cosh", u)
    elif k == "cosh":
        outer = func("sinh", u)
    elif k == "tanh":
        outer = sub(1, power(func("tanh", u), 2))
    elif k == "exp":
        outer = e
    elif k == "log":
        return div(du, u)
    elif k == "sqrt":
        return div(du, mul(2, e))
    elif k == "erf":
        outer = mul(_TWO_OVER_SQRT_PI, exp(neg(power(u, 2))))
    else:  # pragma: no cover - guarded by node validation
        raise InputError(f"no derivative rule for {k!r}")
    return mul(outer, du)


# -- evaluation ------------------------------------------------------------------
Evaluator = Callable[..., "np.ndarray | float"]

_UFUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "arctan": np.arctan,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "exp": np.exp,
    "erf": special.erf,
}


def _compile(e: Expression, env: Mapping):
    k = e.kind
    if k == "num":
        val = e.value
        return lambda x, t: val
    if k == "x":
        return lambda x, t: x
    if k == "t":
        return lambda x, t: t
    if k == "param":
        if e.name not in env:
            raise UnboundParameterError(e.name)
        val = float(env[e.name])
        return lambda x, t: val
    if k == "neg":
        f = _compile(e.args[0], env)
        return lambda x, t: -f(x, t)
    if k in _UFUNCS:
        f = _compile(e.args[0], env)
        uf = _UFUNCS[k]
        return lambda x, t: uf(f(x, t))
    if k == "log":
        f = _compile(e.args[0], env)

        def _log(x, t):
            u = f(x, t)
            if np.any(np.asarray(u) <= 0):
                raise DomainError("log of a non-positive value", e)
            return np.log(u)

        return _log
    if k == "sqrt":
        f = _compile(e.args[0], env)

        def _sqrt(x, t):
            u = f(x, t)
            if np.any(np.asarray(u) < 0):
                raise DomainError("sqrt of a negative value", e)
            return np.sqrt(u)

        return _sqrt
    fa, fb = (_compile(a, env) for a in e.args)
    if k == "+":
        return lambda x, t: fa(x, t) + fb(x, t)
    if k == "-":
        return lambda x, t: fa(x, t) - fb(x, t)
    if k == "*":
        return lambda x, t: fa(x, t) * fb(x, t)
    if k == "/":

        def _div(x, t):
            den = fb(x, t)
            if np.any(np.asarray(den) == 0):
                raise DomainError("division by zero", e)
            return fa(x, t) / den

        return _div
    if k == "^":
        int_exp = e.args[1].kind == "num" and float(e.args[1].value).is_integer()

        def _pow(x, t):
            base, ex = fa(x, t), fb(x, t)
            b_arr, e_arr = np.asarray(base), np.asarray(ex)
            if not int_exp and np.any((b_arr < 0) & (e_arr != np.round(e_arr))):
                raise DomainError("negative base with non-integer exponent", e)
            if np.any((b_arr == 0) & (e_arr < 0)):
                raise DomainError("zero raised to a negative power", e)
            return np.power(base, ex)

        return _pow
    raise InputError(f"cannot evaluate node {k!r}")  # pragma: no cover


def compile_expr(e: Expression, env: Mapping | None = None) -> Evaluator:
    """Return a vectorised evaluator ``f(x, t)`` for ``e``.

    Unbound parameters are reported here rather than at call time.
    """
    env = env if env is not None else ParamEnv()
    inner = _compile(e, env)

    def evaluator(x, t=0.0):
        with np.errstate(all="ignore"):
            out = inner(x, t)
        if np.ndim(x) or np.ndim(t):
            shape = np.broadcast(np.asarray(x), np.asarray(t)).shape
            out = np.broadcast_to(np.asarray(out, dtype=float), shape).copy()
            return out
        return float(out)

    evaluator.expression = e
    return evaluator


def evaluate(e: Expression, x, t, env: Mapping | None = None):
    """Evaluate ``e`` at ``(x, t)`` with parameters from ``env``."""
    return compile_expr(e, env)(x, t)


def as_expression(source) -> Expression:
    """Accept an :class:`Expression`, a number or source text."""
    if isinstance(source, Expression):
        return source
    if isinstance(source, str):
        return parse(source)
    return _lift(source)
