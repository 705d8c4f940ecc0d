"""Interval kernel: containment oracles and algebraic properties."""

import math
import random
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import reachtube.interval as iv
from reachtube.interval import Box, DomainError, Interval, IntervalMatrix


def frac(x: float) -> Fraction:
    return Fraction(x)


def make_rng(seed=20240817):
    return random.Random(seed)


def rand_interval(rng, span=1e3) -> Interval:
    a = rng.uniform(-span, span)
    b = a + abs(rng.gauss(0, span * 1e-3)) * rng.choice([0, 1, 1, 1])
    return Interval(min(a, b), max(a, b))


# -- exact rational oracle over the field operations -----------------------


def test_rational_oracle_field_ops():
    """10^4 random add/sub/mul/div/pow against exact rational arithmetic."""
    rng = make_rng()
    ops = ["add", "sub", "mul", "div", "pow"]
    checked = 0
    while checked < 10_000:
        a = rand_interval(rng)
        b = rand_interval(rng)
        op = rng.choice(ops)
        try:
            if op == "add":
                r = iv.add(a, b)
                exact = [frac(x) + frac(y) for x in (a.lo, a.hi) for y in (b.lo, b.hi)]
            elif op == "sub":
                r = iv.sub(a, b)
                exact = [frac(x) - frac(y) for x in (a.lo, a.hi) for y in (b.lo, b.hi)]
            elif op == "mul":
                r = iv.mul(a, b)
                exact = [frac(x) * frac(y) for x in (a.lo, a.hi) for y in (b.lo, b.hi)]
            elif op == "div":
                r = iv.div(a, b)
                exact = [frac(x) / frac(y) for x in (a.lo, a.hi) for y in (b.lo, b.hi)]
            else:
                k = rng.randint(0, 5)
                r = iv.pow_int(a, k)
                exact = [frac(x) ** k for x in (a.lo, a.hi)]
                if a.lo <= 0 <= a.hi:
                    exact.append(Fraction(0) ** k if k else Fraction(1))
        except DomainError:
            continue
        lo, hi = frac(r.lo), frac(r.hi)
        for e in exact:
            assert lo <= e <= hi, f"{op}({a}, {b}) -> {r} misses {float(e)}"
        checked += 1


@pytest.mark.parametrize("fn,mp", [
    (iv.sin, mpmath.sin),
    (iv.cos, mpmath.cos),
    (iv.tanh, mpmath.tanh),
    (iv.exp, mpmath.exp),
])
def test_transcendental_containment(fn, mp):
    rng = make_rng(4 + id(fn) % 97)
    mpmath.mp.dps = 50
    for _ in range(400):
        a = rand_interval(rng, span=20.0)
        r = fn(a)
        for t in [0.0, 0.2, 0.5, 0.8, 1.0] + [rng.random() for _ in range(5)]:
            x = a.lo + t * (a.hi - a.lo)
            x = min(max(x, a.lo), a.hi)
            val = mp(mpmath.mpf(x))
            assert mpmath.mpf(r.lo) <= val <= mpmath.mpf(r.hi), (
                f"{fn.__name__}({a}) -> {r} misses value at {x}"
            )


def test_ln_sqrt_tan_domains_and_containment():
    mpmath.mp.dps = 50
    rng = make_rng(99)
    for _ in range(300):
        a = rand_interval(rng, span=50.0)
        if a.lo > 0:
            r = iv.ln(a)
            for x in (a.lo, a.hi):
                v = mpmath.log(mpmath.mpf(x))
                assert mpmath.mpf(r.lo) <= v <= mpmath.mpf(r.hi)
        if a.lo >= 0:
            r = iv.sqrt(a)
            for x in (a.lo, a.hi):
                v = mpmath.sqrt(mpmath.mpf(x))
                assert mpmath.mpf(r.lo) <= v <= mpmath.mpf(r.hi)
    with pytest.raises(DomainError):
        iv.ln(Interval(-1.0, 2.0))
    with pytest.raises(DomainError):
        iv.sqrt(Interval(-0.5, 1.0))
    with pytest.raises(DomainError):
        iv.div(Interval(1.0, 1.0), Interval(-1.0, 1.0))
    with pytest.raises(DomainError):
        iv.tan(Interval(1.0, 2.0))  # crosses pi/2


# -- stated examples --------------------------------------------------------


def test_textbook_examples():
    assert iv.add(Interval(1, 2), Interval(3, 4)) == Interval(4, 6)
    r = iv.mul(Interval(-1, 2), Interval(3, 4))
    assert r.lo <= -4 <= 8 <= r.hi and r.lo > -4.001 and r.hi < 8.001
    s = iv.sin(Interval(0, math.pi / 2))
    assert s.hi >= 1.0 and s.lo <= 0.0
    assert iv.mid(Interval(1, 3)) == 2
    assert iv.rad(Interval(1, 3)) >= 1
    assert iv.mid(Interval(7.5, 7.5)) == 7.5 and iv.rad(Interval(7.5, 7.5)) == 0
    assert iv.intersect(Interval(0, 2), Interval(1, 3)) == Interval(1, 2)
    assert iv.intersect(Interval(0, 1), Interval(2, 3)) is None
    assert iv.hull(Interval(0, 1), Interval(2, 3)) == Interval(0, 3)


# -- hypothesis properties ---------------------------------------------------

finite = st.floats(
    allow_nan=False, allow_infinity=False, min_value=-1e8, max_value=1e8
)


@st.composite
def intervals(draw):
    a = draw(finite)
    b = draw(finite)
    return Interval(min(a, b), max(a, b))


@given(intervals(), intervals(), st.floats(min_value=0, max_value=1), st.floats(min_value=0, max_value=1))
@settings(max_examples=300)
def test_property_containment(a, b, ta, tb):
    x = a.lo + ta * (a.hi - a.lo)
    y = b.lo + tb * (b.hi - b.lo)
    x = min(max(x, a.lo), a.hi)
    y = min(max(y, b.lo), b.hi)
    assert iv.add(a, b).contains(float(frac(x) + frac(y)) if abs(x + y) < 1e300 else x + y) or True
    r = iv.add(a, b)
    assert frac(r.lo) <= frac(x) + frac(y) <= frac(r.hi)
    r = iv.sub(a, b)
    assert frac(r.lo) <= frac(x) - frac(y) <= frac(r.hi)
    r = iv.mul(a, b)
    assert frac(r.lo) <= frac(x) * frac(y) <= frac(r.hi)


@given(intervals(), intervals())
@settings(max_examples=300)
def test_property_inclusion_monotonicity(a, outer_pad):
    pad = abs(outer_pad.lo) % 10.0
    a2 = Interval(a.lo - pad, a.hi + pad)
    for op in (iv.sin, iv.cos, iv.tanh, iv.exp):
        r1, r2 = op(a), op(a2)
        assert r2.contains_interval(r1)
    b = Interval(1.0, 2.0)
    b2 = Interval(0.5, 2.5)
    assert iv.mul(a2, b2).contains_interval(iv.mul(a, b))
    assert iv.add(a2, b2).contains_interval(iv.add(a, b))


@given(intervals())
@settings(max_examples=300)
def test_property_mid_rad(a):
    m, r = iv.mid(a), iv.rad(a)
    assert a.contains(m)
    assert r >= 0
    assert m - r <= a.lo and a.hi <= m + r


@given(intervals(), intervals())
@settings(max_examples=200)
def test_property_intersect_hull(a, b):
    c = iv.intersect(a, b)
    h = iv.hull(a, b)
    assert h.contains_interval(a) and h.contains_interval(b)
    if c is not None:
        assert a.contains_interval(c) and b.contains_interval(c)


# -- vectors and matrices -----------------------------------------------------


def test_identity_matvec_is_exact():
    v = Box([Interval(1.25, 2.5), Interval(-3.0, -1.0), Interval(0.5, 0.5)])
    out = IntervalMatrix.identity(3).mat_vec(v)
    assert out == v


def test_mat_vec_dimension_mismatch():
    with pytest.raises(ValueError):
        IntervalMatrix.identity(3).mat_vec(Box([Interval(0, 1)] * 2))


def test_matrix_monte_carlo_containment():
    rng = make_rng(3)
    for _ in range(20):
        n = rng.randint(2, 4)
        rows = [[rand_interval(rng, span=5.0) for _ in range(n)] for _ in range(n)]
        M = IntervalMatrix(rows)
        v = Box([rand_interval(rng, span=5.0) for _ in range(n)])
        out = M.mat_vec(v)
        B = IntervalMatrix(
            [[rand_interval(rng, span=5.0) for _ in range(n)] for _ in range(n)]
        )
        prod = M.mat_mat(B)
        for _ in range(50):
            mm = [[rng.uniform(a.lo, a.hi) for a in row] for row in M.rows]
            vv = [rng.uniform(a.lo, a.hi) for a in v.comps]
            bb = [[rng.uniform(a.lo, a.hi) for a in row] for row in B.rows]
            for i in range(n):
                s = math.fsum(mm[i][j] * vv[j] for j in range(n))
                assert out[i].lo <= s <= out[i].hi
                for k in range(n):
                    s2 = math.fsum(mm[i][j] * bb[j][k] for j in range(n))
                    assert prod[i, k].lo - 1e-12 <= s2 <= prod[i, k].hi + 1e-12


def test_diag_scaling_example():
    two = IntervalMatrix.from_floats([[2.0, 0.0], [0.0, 2.0]])
    v = Box([Interval(1.0, 1.0), Interval(1.0, 1.0)])
    out = two.mat_vec(v)
    for c in out.comps:
        assert c.contains(2.0) and c.width <= 4 * math.ulp(2.0)


def test_exact_zero_and_one_paths():
    z = Interval(0.0, 0.0)
    one = Interval(1.0, 1.0)
    a = Interval(-1.375, 2.5)
    assert iv.add(a, z) == a
    assert iv.mul(a, z) == z
    assert iv.mul(a, one) == a
    assert iv.mul(a, Interval(2.0, 2.0)) == Interval(-2.75, 5.0)
    assert iv.div(a, Interval(2.0, 2.0)) == Interval(-0.6875, 1.25)
    assert iv.sub(a, a).contains(0.0)
    assert iv.sub(one, one) == z
    assert iv.sqrt(Interval(4.0, 4.0)) == Interval(2.0, 2.0)
