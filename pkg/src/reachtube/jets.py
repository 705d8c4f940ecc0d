"""Truncated Taylor series with interval coefficients, in one variable.

Evaluating an arithmetic expression over ``Jet`` scalars whose order-0
coefficient is an interval produces, in coefficient ``k``, an enclosure of
the k-th Taylor coefficient of that expression taken at every point of the
order-0 intervals.  The integrator uses the top coefficient of a
Runge-Kutta increment, seeded with step-size ``h = [0, h] + s``, as a
rigorous bound on the increment's (p+1)-th step-size derivative anywhere
in the step; that is the defect half of the local truncation error.
"""

from __future__ import annotations

from typing import Sequence

from . import interval as iv
from .interval import Interval

__all__ = ["Jet", "JetAlgebra"]

_IZERO = Interval.point(0.0)


class Jet:
    """Interval Taylor polynomial truncated after ``len(coeffs) - 1``."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence[Interval]):
        self.coeffs = tuple(coeffs)

    @staticmethod
    def constant(v: Interval, order: int) -> "Jet":
        return Jet((v,) + (_IZERO,) * order)

    @staticmethod
    def variable(v: Interval, order: int) -> "Jet":
        if order == 0:
            return Jet((v,))
        return Jet((v, Interval.point(1.0)) + (_IZERO,) * (order - 1))

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def __repr__(self) -> str:
        return f"Jet({list(self.coeffs)!r})"

    def is_zero(self) -> bool:
        return all(c.lo == 0.0 == c.hi for c in self.coeffs)


def _add(a: Jet, b: Jet) -> Jet:
    return Jet(iv.add(x, y) for x, y in zip(a.coeffs, b.coeffs))


def _sub(a: Jet, b: Jet) -> Jet:
    return Jet(iv.sub(x, y) for x, y in zip(a.coeffs, b.coeffs))


def _neg(a: Jet) -> Jet:
    return Jet(iv.neg(x) for x in a.coeffs)


def _mul(a: Jet, b: Jet) -> Jet:
    if a.is_zero() or b.is_zero():
        return Jet((_IZERO,) * len(a.coeffs))
    n = len(a.coeffs)
    out = []
    for k in range(n):
        acc = _IZERO
        for j in range(k + 1):
            acc = iv.add(acc, iv.mul(a.coeffs[j], b.coeffs[k - j]))
        out.append(acc)
    return Jet(out)


def _div(a: Jet, b: Jet) -> Jet:
    b0 = b.coeffs[0]
    if b0.lo <= 0.0 <= b0.hi:
        raise iv.DomainError(f"jet division by interval containing zero: {b0}")
    n = len(a.coeffs)
    out: list[Interval] = []
    for k in range(n):
        acc = a.coeffs[k]
        for j in range(k):
            acc = iv.sub(acc, iv.mul(out[j], b.coeffs[k - j]))
        out.append(iv.div(acc, b0))
    return Jet(out)


def _pow_int(a: Jet, k: int) -> Jet:
    if k == 0:
        return Jet.constant(Interval.point(1.0), a.order)
    if k < 0:
        return _div(Jet.constant(Interval.point(1.0), a.order), _pow_int(a, -k))
    r = a
    for _ in range(k - 1):
        r = _mul(r, a)
    return r


def _dscale(j: int) -> Interval:
    return Interval.point(float(j))


def _exp(u: Jet) -> Jet:
    n = len(u.coeffs)
    out = [iv.exp(u.coeffs[0])]
    for k in range(1, n):
        acc = _IZERO
        for j in range(1, k + 1):
            acc = iv.add(acc, iv.mul(_dscale(j), iv.mul(u.coeffs[j], out[k - j])))
        out.append(iv.div(acc, _dscale(k)))
    return Jet(out)


def _ln(u: Jet) -> Jet:
    n = len(u.coeffs)
    out = [iv.ln(u.coeffs[0])]
    for k in range(1, n):
        acc = iv.mul(_dscale(k), u.coeffs[k])
        for j in range(1, k):
            acc = iv.sub(acc, iv.mul(_dscale(j), iv.mul(out[j], u.coeffs[k - j])))
        out.append(iv.div(iv.div(acc, _dscale(k)), u.coeffs[0]))
    return Jet(out)


def _sqrt(u: Jet) -> Jet:
    n = len(u.coeffs)
    v0 = iv.sqrt(u.coeffs[0])
    if v0.lo <= 0.0 <= v0.hi:
        raise iv.DomainError("jet sqrt at an interval touching zero")
    out = [v0]
    two_v0 = iv.mul(Interval.point(2.0), v0)
    for k in range(1, n):
        acc = u.coeffs[k]
        for j in range(1, k):
            acc = iv.sub(acc, iv.mul(out[j], out[k - j]))
        out.append(iv.div(acc, two_v0))
    return Jet(out)


def _sin_cos(u: Jet) -> tuple[Jet, Jet]:
    n = len(u.coeffs)
    s = [iv.sin(u.coeffs[0])]
    c = [iv.cos(u.coeffs[0])]
    for k in range(1, n):
        sa = _IZERO
        ca = _IZERO
        for j in range(1, k + 1):
            du = iv.mul(_dscale(j), u.coeffs[j])
            sa = iv.add(sa, iv.mul(du, c[k - j]))
            ca = iv.sub(ca, iv.mul(du, s[k - j]))
        s.append(iv.div(sa, _dscale(k)))
        c.append(iv.div(ca, _dscale(k)))
    return Jet(s), Jet(c)


def _tanh(u: Jet) -> Jet:
    # th' = (1 - th^2) u'; fill th and th^2 jointly
    n = len(u.coeffs)
    th = [iv.tanh(u.coeffs[0])]
    sq = [iv.mul(th[0], th[0])]
    one = Interval.point(1.0)
    for k in range(1, n):
        acc = _IZERO
        for j in range(1, k + 1):
            g = iv.sub(one if k - j == 0 else _IZERO, sq[k - j])
            acc = iv.add(acc, iv.mul(iv.mul(_dscale(j), u.coeffs[j]), g))
        th.append(iv.div(acc, _dscale(k)))
        acc2 = _IZERO
        for j in range(k + 1):
            acc2 = iv.add(acc2, iv.mul(th[j], th[k - j]))
        sq.append(acc2)
    return Jet(th)


def _unary(op: str, a: Jet) -> Jet:
    if op == "neg":
        return _neg(a)
    if op == "sin":
        return _sin_cos(a)[0]
    if op == "cos":
        return _sin_cos(a)[1]
    if op == "tan":
        s, c = _sin_cos(a)
        return _div(s, c)
    if op == "tanh":
        return _tanh(a)
    if op == "exp":
        return _exp(a)
    if op == "ln":
        return _ln(a)
    if op == "sqrt":
        return _sqrt(a)
    raise ValueError(f"unknown unary op {op!r}")


class JetAlgebra:
    """Expression-evaluation algebra over :class:`Jet` scalars."""

    def __init__(self, order: int):
        self.order = order

    def const(self, v: float) -> Jet:
        return Jet.constant(Interval.point(v), self.order)

    def neg(self, a: Jet) -> Jet:
        return _neg(a)

    def add(self, a: Jet, b: Jet) -> Jet:
        return _add(a, b)

    def sub(self, a: Jet, b: Jet) -> Jet:
        return _sub(a, b)

    def mul(self, a: Jet, b: Jet) -> Jet:
        return _mul(a, b)

    def div(self, a: Jet, b: Jet) -> Jet:
        return _div(a, b)

    def pow_int(self, a: Jet, k: int) -> Jet:
        return _pow_int(a, k)

    def unary(self, op: str, a: Jet) -> Jet:
        return _unary(op, a)
