"""Expression trees for ODE right-hand sides.

Nodes are immutable; derivative construction shares subtrees aggressively,
so evaluation memoizes on node identity and effectively walks a DAG.  The
only rewriting performed is constant folding of arithmetic on literals and
of identity elements (x+0, 1*x, 0*x, x^0, x^1) -- required to keep repeated
Lie derivatives at a tractable size; nothing else is simplified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from . import interval as iv

__all__ = [
    "Expr",
    "Const",
    "Var",
    "Un",
    "Bin",
    "Pow",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "un",
    "pow_int",
    "differentiate",
    "eval_real",
    "eval_interval",
    "evaluate",
    "to_text",
    "EvalError",
]

UNARY_OPS = ("neg", "sin", "cos", "tan", "tanh", "exp", "ln", "sqrt")


class EvalError(ArithmeticError):
    """Domain violation during evaluation, tagged with the subexpression."""

    def __init__(self, msg: str, where: "Expr"):
        super().__init__(f"{msg} in '{to_text(where, limit=60)}'")
        self.where = where


@dataclass(frozen=True, slots=True, eq=False)
class Expr:
    pass


@dataclass(frozen=True, slots=True, eq=False)
class Const(Expr):
    value: float


@dataclass(frozen=True, slots=True, eq=False)
class Var(Expr):
    index: int


@dataclass(frozen=True, slots=True, eq=False)
class Un(Expr):
    op: str
    a: Expr


@dataclass(frozen=True, slots=True, eq=False)
class Bin(Expr):
    op: str  # one of + - * /
    a: Expr
    b: Expr


@dataclass(frozen=True, slots=True, eq=False)
class Pow(Expr):
    a: Expr
    k: int  # integer exponent only


ZERO = Const(0.0)
ONE = Const(1.0)


def _is_const(e: Expr, v: Optional[float] = None) -> bool:
    return isinstance(e, Const) and (v is None or e.value == v)


# -- folding constructors --------------------------------------------------


def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Bin("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return Bin("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, -1.0):
        return neg(b)
    if _is_const(b, -1.0):
        return neg(a)
    return Bin("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(b) and b.value != 0.0:
        if _is_const(a):
            return Const(a.value / b.value)
        if b.value == 1.0:
            return a
    return Bin("/", a, b)


def neg(a: Expr) -> Expr:
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Un) and a.op == "neg":
        return a.a
    return Un("neg", a)


def pow_int(a: Expr, k: int) -> Expr:
    if k == 0:
        return ONE
    if k == 1:
        return a
    if _is_const(a):
        return Const(float(a.value**k)) if a.value != 0.0 or k > 0 else Pow(a, k)
    return Pow(a, k)


def un(op: str, a: Expr) -> Expr:
    if op == "neg":
        return neg(a)
    if op not in UNARY_OPS:
        raise ValueError(f"unknown unary op {op!r}")
    return Un(op, a)


# -- differentiation -------------------------------------------------------


def differentiate(e: Expr, var: int, _memo: Optional[dict] = None) -> Expr:
    """Symbolic partial derivative d e / d x_var (total on the grammar)."""
    if _memo is None:
        _memo = {}
    key = (id(e), var)
    hit = _memo.get(key)
    if hit is not None:
        return hit
    d: Expr
    if isinstance(e, Const):
        d = ZERO
    elif isinstance(e, Var):
        d = ONE if e.index == var else ZERO
    elif isinstance(e, Bin):
        da = differentiate(e.a, var, _memo)
        db = differentiate(e.b, var, _memo)
        if e.op == "+":
            d = add(da, db)
        elif e.op == "-":
            d = sub(da, db)
        elif e.op == "*":
            d = add(mul(da, e.b), mul(e.a, db))
        else:  # quotient rule
            d = div(sub(mul(da, e.b), mul(e.a, db)), Pow(e.b, 2))
    elif isinstance(e, Pow):
        da = differentiate(e.a, var, _memo)
        d = mul(mul(Const(float(e.k)), pow_int(e.a, e.k - 1)), da)
    elif isinstance(e, Un):
        da = differentiate(e.a, var, _memo)
        x = e.a
        if e.op == "neg":
            d = neg(da)
        elif e.op == "sin":
            d = mul(Un("cos", x), da)
        elif e.op == "cos":
            d = neg(mul(Un("sin", x), da))
        elif e.op == "tan":
            d = mul(add(ONE, Pow(Un("tan", x), 2)), da)
        elif e.op == "tanh":
            d = mul(sub(ONE, Pow(Un("tanh", x), 2)), da)
        elif e.op == "exp":
            d = mul(Un("exp", x), da)
        elif e.op == "ln":
            d = div(da, x)
        elif e.op == "sqrt":
            d = div(da, mul(Const(2.0), Un("sqrt", x)))
        else:
            raise ValueError(f"unknown unary op {e.op!r}")
    else:
        raise TypeError(f"not an Expr: {e!r}")
    _memo[key] = d
    return d


# -- evaluation ------------------------------------------------------------


class FloatAlgebra:
    """Plain IEEE evaluation (also broadcasts over numpy arrays)."""

    def const(self, v: float):
        return v

    def neg(self, a):
        return -a

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mul(self, a, b):
        return a * b

    def div(self, a, b):
        return a / b

    def pow_int(self, a, k: int):
        return a**k

    def unary(self, op: str, a):
        import numpy as _np

        if isinstance(a, _np.ndarray):
            fn = getattr(_np, {"ln": "log"}.get(op, op))
        else:
            fn = getattr(math, {"ln": "log"}.get(op, op))
        return fn(a)


class IntervalAlgebra:
    """Outward-rounded evaluation over the interval kernel."""

    def const(self, v: float):
        return iv.Interval.point(v)

    def neg(self, a):
        return iv.neg(a)

    def add(self, a, b):
        return iv.add(a, b)

    def sub(self, a, b):
        return iv.sub(a, b)

    def mul(self, a, b):
        return iv.mul(a, b)

    def div(self, a, b):
        return iv.div(a, b)

    def pow_int(self, a, k: int):
        return iv.pow_int(a, k)

    def unary(self, op: str, a):
        return iv._UNARY[op](a)


FLOAT_ALGEBRA = FloatAlgebra()
INTERVAL_ALGEBRA = IntervalAlgebra()


def evaluate(e: Expr, env: Sequence, alg) -> object:
    """Iterative post-order evaluation with node-identity memoisation."""
    memo: dict[int, object] = {}
    stack: list[tuple[Expr, bool]] = [(e, False)]
    while stack:
        node, ready = stack.pop()
        key = id(node)
        if key in memo:
            continue
        if isinstance(node, Const):
            memo[key] = alg.const(node.value)
        elif isinstance(node, Var):
            memo[key] = env[node.index]
        elif not ready:
            stack.append((node, True))
            if isinstance(node, (Un, Pow)):
                stack.append((node.a, False))
            else:
                stack.append((node.b, False))
                stack.append((node.a, False))
        else:
            try:
                if isinstance(node, Un):
                    if node.op == "neg":
                        memo[key] = alg.neg(memo[id(node.a)])
                    else:
                        memo[key] = alg.unary(node.op, memo[id(node.a)])
                elif isinstance(node, Pow):
                    memo[key] = alg.pow_int(memo[id(node.a)], node.k)
                else:
                    f = {
                        "+": alg.add,
                        "-": alg.sub,
                        "*": alg.mul,
                        "/": alg.div,
                    }[node.op]
                    memo[key] = f(memo[id(node.a)], memo[id(node.b)])
            except (iv.DomainError, ValueError, ZeroDivisionError, OverflowError) as exc:
                raise EvalError(str(exc), node) from exc
    return memo[id(e)]


def eval_real(e: Expr, x: Sequence[float]):
    return evaluate(e, x, FLOAT_ALGEBRA)


def eval_interval(e: Expr, x) -> iv.Interval:
    env = x.comps if isinstance(x, iv.Box) else [
        v if isinstance(v, iv.Interval) else iv.Interval.point(v) for v in x
    ]
    return evaluate(e, env, INTERVAL_ALGEBRA)


# -- printing ---------------------------------------------------------------


def to_text(e: Expr, limit: Optional[int] = None) -> str:
    """Fully parenthesised rendering that reparses to an identical tree."""
    s = _render(e)
    if limit is not None and len(s) > limit:
        s = s[: limit - 3] + "..."
    return s


def _render(e: Expr) -> str:
    if isinstance(e, Const):
        return repr(e.value) if e.value >= 0 else f"({e.value!r})"
    if isinstance(e, Var):
        return f"x{e.index + 1}"
    if isinstance(e, Un):
        if e.op == "neg":
            return f"(-{_render(e.a)})"
        return f"{e.op}({_render(e.a)})"
    if isinstance(e, Pow):
        return f"({_render(e.a)}^{e.k})" if e.k >= 0 else f"({_render(e.a)}^({e.k}))"
    return f"({_render(e.a)} {e.op} {_render(e.b)})"
