"""Outward-rounded interval arithmetic over scalars, vectors and matrices.

Directed rounding is obtained by nudging round-to-nearest results one
representable float outward (``math.nextafter``), never by switching the
global FPU rounding mode, so values are safe to share between concurrent
runs.  Library functions (sin, exp, ...) are trusted to a fixed slack of
``_LIBM_SLACK`` ulps, applied outward on top of the nudge.

Exact operations (adding a degenerate zero, multiplying by an exact 0 or
+-1 endpoint pair) skip the nudge, so identities like ``x + 0 == x`` hold
bit-for-bit; several fixed-point guarantees downstream rely on this.
"""

from __future__ import annotations

import math
from typing import Iterable, Optional, Sequence

__all__ = [
    "DomainError",
    "Interval",
    "Box",
    "IntervalMatrix",
    "next_down",
    "next_up",
]

_INF = math.inf
# outward slack (in ulps) granted to libm transcendentals on top of the
# one-step nudge; containment needs only that libm errors stay below this
_LIBM_SLACK = 4


class DomainError(ArithmeticError):
    """Operand (partially) outside the domain of an interval operation."""


def next_down(x: float) -> float:
    if math.isnan(x):
        raise DomainError("NaN endpoint")
    return math.nextafter(x, -_INF)


def next_up(x: float) -> float:
    if math.isnan(x):
        raise DomainError("NaN endpoint")
    return math.nextafter(x, _INF)


def _down_ulps(x: float, k: int) -> float:
    for _ in range(k):
        x = math.nextafter(x, -_INF)
    return x


def _up_ulps(x: float, k: int) -> float:
    for _ in range(k):
        x = math.nextafter(x, _INF)
    return x


class Interval:
    """Closed interval [lo, hi]; every operation returns an enclosure of the
    exact real result set."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo: float, hi: float):
        lo = float(lo)
        hi = float(hi)
        if math.isnan(lo) or math.isnan(hi) or lo > hi:
            raise DomainError(f"invalid interval endpoints [{lo}, {hi}]")
        self.lo = lo
        self.hi = hi

    @staticmethod
    def point(v: float) -> "Interval":
        return Interval(v, v)

    # -- queries ---------------------------------------------------------

    def is_point(self) -> bool:
        return self.lo == self.hi

    def contains(self, v: float) -> bool:
        return self.lo <= v <= self.hi

    def contains_interval(self, other: "Interval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    @property
    def width(self) -> float:
        return next_up(self.hi - self.lo) if self.hi != self.lo else 0.0

    def mag(self) -> float:
        """max |x| over the interval (exact)."""
        return max(abs(self.lo), abs(self.hi))

    def mig(self) -> float:
        """min |x| over the interval (exact)."""
        if self.lo <= 0.0 <= self.hi:
            return 0.0
        return min(abs(self.lo), abs(self.hi))

    def __repr__(self) -> str:
        return f"[{self.lo!r}, {self.hi!r}]"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Interval)
            and self.lo == other.lo
            and self.hi == other.hi
        )

    def __hash__(self) -> int:
        return hash((self.lo, self.hi))

    # -- operator sugar (delegates to module functions) ------------------

    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __neg__(self):
        return neg(self)


def _coerce(v) -> Interval:
    if isinstance(v, Interval):
        return v
    return Interval(float(v), float(v))


_ZERO = Interval(0.0, 0.0)
_ONE = Interval(1.0, 1.0)

# [pi_lo, pi_hi] encloses the real pi (math.pi rounds down)
PI = Interval(math.pi, next_up(math.pi))
TWO_PI = Interval(next_down(2.0 * math.pi), next_up(2.0 * next_up(math.pi)))


# -- arithmetic -----------------------------------------------------------


def _sum_exact(x: float, y: float, s: float) -> bool:
    """Was fl(x + y) == s computed without rounding?  (Knuth's TwoSum.)"""
    if not math.isfinite(s):
        return False
    av = s - y
    bv = s - av
    return ((x - av) + (y - bv)) == 0.0


def add(a: Interval, b: Interval) -> Interval:
    if b.lo == 0.0 and b.hi == 0.0:
        return a
    if a.lo == 0.0 and a.hi == 0.0:
        return b
    lo = a.lo + b.lo
    if not _sum_exact(a.lo, b.lo, lo):
        lo = next_down(lo)
    hi = a.hi + b.hi
    if not _sum_exact(a.hi, b.hi, hi):
        hi = next_up(hi)
    return Interval(lo, hi)


def sub(a: Interval, b: Interval) -> Interval:
    if b.lo == 0.0 and b.hi == 0.0:
        return a
    lo = a.lo - b.hi
    if not _sum_exact(a.lo, -b.hi, lo):
        lo = next_down(lo)
    hi = a.hi - b.lo
    if not _sum_exact(a.hi, -b.lo, hi):
        hi = next_up(hi)
    return Interval(lo, hi)


def neg(a: Interval) -> Interval:
    return Interval(-a.hi, -a.lo)


_MIN_NORMAL = 2.2250738585072014e-308


def _is_pow2(v: float) -> bool:
    if v == 0.0 or not math.isfinite(v):
        return False
    return math.frexp(abs(v))[0] == 0.5


def _pow2_scale_ok(v: float) -> bool:
    # scaling by a power of two is exact unless the result left normal range
    return v == 0.0 or _MIN_NORMAL <= abs(v) <= 1.7976931348623155e308


def mul(a: Interval, b: Interval) -> Interval:
    # exactness-preserving fast paths (0, +-1 and powers of two are exact)
    if a.lo == a.hi:
        if a.lo == 0.0:
            return _ZERO
        if a.lo == 1.0:
            return b
        if a.lo == -1.0:
            return neg(b)
        if _is_pow2(a.lo):
            p = b.lo * a.lo
            q = b.hi * a.lo
            if _pow2_scale_ok(p) and _pow2_scale_ok(q):
                return Interval(min(p, q), max(p, q))
    if b.lo == b.hi:
        if b.lo == 0.0:
            return _ZERO
        if b.lo == 1.0:
            return a
        if b.lo == -1.0:
            return neg(a)
        if _is_pow2(b.lo):
            p = a.lo * b.lo
            q = a.hi * b.lo
            if _pow2_scale_ok(p) and _pow2_scale_ok(q):
                return Interval(min(p, q), max(p, q))
    p1 = a.lo * b.lo
    p2 = a.lo * b.hi
    p3 = a.hi * b.lo
    p4 = a.hi * b.hi
    lo = min(p1, p2, p3, p4)
    hi = max(p1, p2, p3, p4)
    if math.isnan(lo) or math.isnan(hi):  # 0 * inf corner: widen fully
        return Interval(-_INF, _INF)
    return Interval(next_down(lo), next_up(hi))


def div(a: Interval, b: Interval) -> Interval:
    if b.lo <= 0.0 <= b.hi:
        raise DomainError(f"division by interval containing zero: {b}")
    if a.lo == 0.0 and a.hi == 0.0:
        return a
    if b.lo == b.hi:
        if b.lo == 1.0:
            return a
        if _is_pow2(b.lo):
            p = a.lo / b.lo
            q = a.hi / b.lo
            if _pow2_scale_ok(p) and _pow2_scale_ok(q):
                return Interval(min(p, q), max(p, q))
    q1 = a.lo / b.lo
    q2 = a.lo / b.hi
    q3 = a.hi / b.lo
    q4 = a.hi / b.hi
    return Interval(next_down(min(q1, q2, q3, q4)), next_up(max(q1, q2, q3, q4)))


def _pow_mag_down(m: float, k: int) -> float:
    # lower bound of m**k for m >= 0
    r = m
    for _ in range(k - 1):
        r = next_down(r * m)
        if r <= 0.0:
            return 0.0
    return r


def _pow_mag_up(m: float, k: int) -> float:
    r = m
    for _ in range(k - 1):
        r = next_up(r * m)
    return r


def pow_int(a: Interval, k: int) -> Interval:
    if not isinstance(k, int):
        raise DomainError("pow_int exponent must be an integer")
    if k == 0:
        return _ONE
    if k < 0:
        return div(_ONE, pow_int(a, -k))
    if k == 1:
        return a
    if k % 2 == 1:
        # odd: monotone; x**k = sign(x) * |x|**k at each endpoint
        lo = -_pow_mag_up(-a.lo, k) if a.lo < 0.0 else _pow_mag_down(a.lo, k)
        hi = -_pow_mag_down(-a.hi, k) if a.hi < 0.0 else _pow_mag_up(a.hi, k)
        return Interval(lo, hi)
    lo_m = a.mig()
    hi_m = a.mag()
    return Interval(_pow_mag_down(lo_m, k) if lo_m > 0.0 else 0.0, _pow_mag_up(hi_m, k))


def _sqrt_exact(v: float) -> bool:
    # even power of two: sqrt is again a power of two, computed exactly
    if v <= 0.0 or not math.isfinite(v):
        return v == 0.0
    m, e = math.frexp(v)
    return m == 0.5 and (e % 2 == 1)


def sqrt(a: Interval) -> Interval:
    if a.lo < 0.0:
        raise DomainError(f"sqrt of partially negative interval {a}")
    lo = math.sqrt(a.lo)
    if not _sqrt_exact(a.lo):
        lo = next_down(lo)
    hi = math.sqrt(a.hi)
    if not _sqrt_exact(a.hi):
        hi = next_up(hi)
    return Interval(lo, hi)


def exp(a: Interval) -> Interval:
    try:
        lo = _down_ulps(math.exp(a.lo), _LIBM_SLACK)
    except OverflowError:
        lo = _INF
    try:
        hi = _up_ulps(math.exp(a.hi), _LIBM_SLACK)
    except OverflowError:
        hi = _INF
    return Interval(max(lo, 0.0), hi)


def ln(a: Interval) -> Interval:
    if a.lo <= 0.0:
        raise DomainError(f"ln of non-positive interval {a}")
    return Interval(
        _down_ulps(math.log(a.lo), _LIBM_SLACK),
        _up_ulps(math.log(a.hi), _LIBM_SLACK),
    )


def tanh(a: Interval) -> Interval:
    lo = max(_down_ulps(math.tanh(a.lo), _LIBM_SLACK), -1.0)
    hi = min(_up_ulps(math.tanh(a.hi), _LIBM_SLACK), 1.0)
    return Interval(lo, hi)


def _contains_multiple(a: Interval, offset: float) -> bool:
    """Conservatively: may [a.lo, a.hi] contain pi*(2k + offset) for integer k?"""
    if a.hi - a.lo >= TWO_PI.lo:
        return True
    # candidate k near the endpoints; scan a tiny conservative window
    k0 = math.floor(a.lo / (2.0 * math.pi)) - 1
    k1 = math.ceil(a.hi / (2.0 * math.pi)) + 1
    for k in range(k0, k1 + 1):
        t = mul(PI, Interval.point(2.0 * k + offset))
        if t.hi >= a.lo and t.lo <= a.hi:
            return True
    return False


def sin(a: Interval) -> Interval:
    if a.mag() > 1e15:  # argument reduction meaningless at this scale
        return Interval(-1.0, 1.0)
    slo, shi = math.sin(a.lo), math.sin(a.hi)
    hi = 1.0 if _contains_multiple(a, 0.5) else min(_up_ulps(max(slo, shi), _LIBM_SLACK), 1.0)
    lo = -1.0 if _contains_multiple(a, -0.5) else max(_down_ulps(min(slo, shi), _LIBM_SLACK), -1.0)
    return Interval(lo, hi)


def cos(a: Interval) -> Interval:
    if a.mag() > 1e15:
        return Interval(-1.0, 1.0)
    clo, chi = math.cos(a.lo), math.cos(a.hi)
    hi = 1.0 if _contains_multiple(a, 0.0) else min(_up_ulps(max(clo, chi), _LIBM_SLACK), 1.0)
    lo = -1.0 if _contains_multiple(a, 1.0) else max(_down_ulps(min(clo, chi), _LIBM_SLACK), -1.0)
    return Interval(lo, hi)


def tan(a: Interval) -> Interval:
    c = cos(a)
    if c.lo <= 0.0 <= c.hi:
        raise DomainError(f"tan over interval {a} may contain a pole")
    return div(sin(a), c)


def mid(a: Interval) -> float:
    m = a.lo + 0.5 * (a.hi - a.lo)
    if m < a.lo:
        return a.lo
    if m > a.hi:
        return a.hi
    return m


def rad(a: Interval) -> float:
    """Upper bound r such that [mid - r, mid + r] contains the interval."""
    m = mid(a)
    d1 = m - a.lo
    if not _sum_exact(m, -a.lo, d1):
        d1 = next_up(d1)
    d2 = a.hi - m
    if not _sum_exact(a.hi, -m, d2):
        d2 = next_up(d2)
    return max(d1, d2)


def intersect(a: Interval, b: Interval) -> Optional[Interval]:
    """Intersection, or None when the operands are disjoint."""
    lo = max(a.lo, b.lo)
    hi = min(a.hi, b.hi)
    if lo > hi:
        return None
    return Interval(lo, hi)


def hull(a: Interval, b: Interval) -> Interval:
    return Interval(min(a.lo, b.lo), max(a.hi, b.hi))


_UNARY = {
    "neg": neg,
    "sin": sin,
    "cos": cos,
    "tan": tan,
    "tanh": tanh,
    "exp": exp,
    "ln": ln,
    "sqrt": sqrt,
}


# -- vectors --------------------------------------------------------------


class Box:
    """Axis-aligned product of intervals (a non-empty interval vector)."""

    __slots__ = ("comps",)

    def __init__(self, comps: Iterable[Interval]):
        self.comps = tuple(comps)
        if not self.comps:
            raise DomainError("empty box")

    @staticmethod
    def from_point(v: Sequence[float]) -> "Box":
        return Box(Interval.point(float(x)) for x in v)

    @staticmethod
    def from_center_rad(c: Sequence[float], r: Sequence[float]) -> "Box":
        return Box(
            Interval(next_down(ci - ri), next_up(ci + ri)) if ri else Interval.point(ci)
            for ci, ri in zip(c, r)
        )

    def __len__(self) -> int:
        return len(self.comps)

    def __getitem__(self, j: int) -> Interval:
        return self.comps[j]

    def __iter__(self):
        return iter(self.comps)

    def __eq__(self, other) -> bool:
        return isinstance(other, Box) and self.comps == other.comps

    def __hash__(self):
        return hash(self.comps)

    def __repr__(self) -> str:
        return "Box(" + ", ".join(map(repr, self.comps)) + ")"

    def add(self, other: "Box") -> "Box":
        _check_len(self, other)
        return Box(add(a, b) for a, b in zip(self.comps, other.comps))

    def sub(self, other: "Box") -> "Box":
        _check_len(self, other)
        return Box(sub(a, b) for a, b in zip(self.comps, other.comps))

    def sub_point(self, p: Sequence[float]) -> "Box":
        return Box(sub(a, Interval.point(v)) for a, v in zip(self.comps, p))

    def scale(self, s: Interval) -> "Box":
        return Box(mul(s, a) for a in self.comps)

    def mid(self) -> list[float]:
        return [mid(a) for a in self.comps]

    def rad(self) -> list[float]:
        return [rad(a) for a in self.comps]

    def widths(self) -> list[float]:
        return [a.width for a in self.comps]

    def contains_point(self, p: Sequence[float]) -> bool:
        return all(a.contains(float(v)) for a, v in zip(self.comps, p))

    def contains_box(self, other: "Box") -> bool:
        return all(a.contains_interval(b) for a, b in zip(self.comps, other.comps))

    def hull(self, other: "Box") -> "Box":
        _check_len(self, other)
        return Box(hull(a, b) for a, b in zip(self.comps, other.comps))

    def intersect(self, other: "Box") -> Optional["Box"]:
        _check_len(self, other)
        out = []
        for a, b in zip(self.comps, other.comps):
            c = intersect(a, b)
            if c is None:
                return None
            out.append(c)
        return Box(out)

    def inflate(self, factor: float, absolute: float) -> "Box":
        out = []
        for a in self.comps:
            m = mid(a)
            r = next_up(factor * rad(a) + absolute)
            out.append(Interval(next_down(m - r), next_up(m + r)))
        return Box(out)

    def norm2_upper(self) -> float:
        """Rigorous upper bound of max ||x||_2 over the box."""
        s = 0.0
        for a in self.comps:
            m = a.mag()
            if m:
                s = next_up(s + next_up(m * m))
        return next_up(math.sqrt(s)) if s else 0.0


def _check_len(a, b) -> None:
    if len(a) != len(b):
        raise ValueError(f"dimension mismatch: {len(a)} vs {len(b)}")


# -- matrices -------------------------------------------------------------


class IntervalMatrix:
    """Rectangular grid of intervals with enclosure-preserving products."""

    __slots__ = ("rows",)

    def __init__(self, rows: Iterable[Iterable[Interval]]):
        self.rows = tuple(tuple(r) for r in rows)
        if not self.rows:
            raise DomainError("empty matrix")
        w = len(self.rows[0])
        if any(len(r) != w for r in self.rows):
            raise ValueError("ragged interval matrix")

    @staticmethod
    def identity(n: int) -> "IntervalMatrix":
        return IntervalMatrix(
            [Interval.point(1.0) if i == j else _ZERO for j in range(n)]
            for i in range(n)
        )

    @staticmethod
    def zeros(shape: tuple[int, int]) -> "IntervalMatrix":
        return IntervalMatrix([[_ZERO] * shape[1] for _ in range(shape[0])])

    @staticmethod
    def from_floats(m) -> "IntervalMatrix":
        return IntervalMatrix(
            [Interval.point(float(v)) for v in row] for row in m
        )

    @staticmethod
    def from_bounds(lo, hi) -> "IntervalMatrix":
        return IntervalMatrix(
            [Interval(float(a), float(b)) for a, b in zip(rl, rh)]
            for rl, rh in zip(lo, hi)
        )

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.rows), len(self.rows[0]))

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def __repr__(self) -> str:
        return f"IntervalMatrix({self.shape[0]}x{self.shape[1]})"

    def transpose(self) -> "IntervalMatrix":
        return IntervalMatrix(zip(*self.rows))

    def add(self, other: "IntervalMatrix") -> "IntervalMatrix":
        if self.shape != other.shape:
            raise ValueError("shape mismatch")
        return IntervalMatrix(
            [add(a, b) for a, b in zip(ra, rb)]
            for ra, rb in zip(self.rows, other.rows)
        )

    def scale(self, s: Interval) -> "IntervalMatrix":
        return IntervalMatrix([mul(s, a) for a in row] for row in self.rows)

    def mat_vec(self, v: Box) -> Box:
        n, m = self.shape
        if len(v) != m:
            raise ValueError(f"dimension mismatch: matrix {self.shape} times vector {len(v)}")
        out = []
        for row in self.rows:
            acc = _ZERO
            for a, x in zip(row, v.comps):
                acc = add(acc, mul(a, x))
            out.append(acc)
        return Box(out)

    def mat_mat(self, other: "IntervalMatrix") -> "IntervalMatrix":
        n, m = self.shape
        m2, p = other.shape
        if m != m2:
            raise ValueError(f"dimension mismatch: {self.shape} times {other.shape}")
        cols = other.transpose().rows
        out = []
        for row in self.rows:
            orow = []
            for col in cols:
                acc = _ZERO
                for a, b in zip(row, col):
                    acc = add(acc, mul(a, b))
                orow.append(acc)
            out.append(orow)
        return IntervalMatrix(out)

    def mid(self) -> list[list[float]]:
        return [[mid(a) for a in row] for row in self.rows]

    def rad(self) -> list[list[float]]:
        return [[rad(a) for a in row] for row in self.rows]

    def mag(self) -> list[list[float]]:
        return [[a.mag() for a in row] for row in self.rows]

    def contains_floats(self, m) -> bool:
        return all(
            a.contains(float(v))
            for row, frow in zip(self.rows, m)
            for a, v in zip(row, frow)
        )

    def hull(self, other: "IntervalMatrix") -> "IntervalMatrix":
        if self.shape != other.shape:
            raise ValueError("shape mismatch")
        return IntervalMatrix(
            [hull(a, b) for a, b in zip(ra, rb)]
            for ra, rb in zip(self.rows, other.rows)
        )

    def inf_norm_upper(self) -> float:
        """Rigorous upper bound of the max row sum of |entries|."""
        best = 0.0
        for row in self.rows:
            acc = _ZERO
            for a in row:
                acc = add(acc, Interval.point(a.mag()))
            best = max(best, acc.hi)
        return best
