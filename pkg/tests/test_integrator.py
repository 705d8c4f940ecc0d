"""Validated stepping: a-priori enclosures, flow and gradient containment."""

import math

import numpy as np
import pytest

from reachtube.integrator import (
    GradientEnclosure,
    StepSizeError,
    apriori_enclosure,
    one_step_gradient,
    reference_integrate,
    step_gradient,
    validated_step,
)
from reachtube.benchmarks import benchmark
from reachtube.interval import Box, Interval
from reachtube.jets import Jet, JetAlgebra
from reachtube.model import parse_model

ZERO2 = parse_model("x1' = 0\nx2' = 0\n", name="zero")
DECAY = parse_model("x1' = -1*x1", name="decay")
DIAG = parse_model("x1' = -1*x1\nx2' = 0.5*x2\n", name="diag")
RNG = np.random.default_rng(99)


def sample_box(box: Box, m: int, rng=RNG) -> np.ndarray:
    lo = np.array([c.lo for c in box.comps])
    hi = np.array([c.hi for c in box.comps])
    return rng.uniform(lo, hi, size=(m, len(box)))


# -- a-priori enclosures -------------------------------------------------------


def test_apriori_zero_field_is_tight():
    x = Box.from_point([1.0, -2.0])
    Y = apriori_enclosure(ZERO2, x, 0.5)
    assert Y == x


def test_apriori_linear_drift():
    sys = parse_model("x1' = 1")
    Y = apriori_enclosure(sys, Box.from_point([0.0]), 0.1)
    assert Y[0].lo <= 0.0 and Y[0].hi >= 0.1


def test_apriori_satisfies_picard_condition_and_contains_trajectories():
    spec = benchmark("B")
    sys = spec.system()
    box = spec.initial_set().box()
    h = 0.01
    Y = apriori_enclosure(sys, box, h)
    assert Y.contains_box(box)
    # returned box satisfies x + [0,h] f(Y) inside Y
    Z = box.add(sys.eval_rhs_interval(Y).scale(Interval(0.0, h)))
    assert Y.contains_box(Z)
    pts = sample_box(box, 100)
    for frac in (0.25, 0.5, 0.75, 1.0):
        moved = reference_integrate(sys, pts, frac * h, h / 200)
        assert np.all(moved >= [c.lo for c in Y.comps])
        assert np.all(moved <= [c.hi for c in Y.comps])


def test_apriori_failure_names_component():
    stiff = parse_model("x1' = x1^3")
    with pytest.raises(StepSizeError, match="x1"):
        apriori_enclosure(stiff, Box.from_point([10.0]), 10.0)


# -- validated flow steps --------------------------------------------------------


def test_zero_field_step_is_exact():
    x = Box.from_point([0.25, -1.5])
    for order in (1, 2, 4):
        enc = validated_step(ZERO2, x, 0.1, order)
        assert enc.y_next == x
        assert enc.apriori == x


def test_linear_decay_contains_exp():
    for order in (1, 2, 4):
        enc = validated_step(DECAY, Box.from_point([1.0]), 0.01, order)
        val = math.exp(-0.01)
        assert enc.y_next[0].contains(val), f"order {order}: {enc.y_next[0]}"
        assert enc.y_next[0].width < (1e-6 if order == 1 else 1e-9)


def test_step_enclosure_invariants():
    spec = benchmark("B")
    sys = spec.system()
    box = spec.initial_set().box()
    enc = validated_step(sys, box, 0.01, 2)
    assert enc.apriori.contains_box(enc.y_next)
    assert enc.accepted_h == 0.01


@pytest.mark.parametrize("order", [1, 2, 4])
def test_van_der_pol_monte_carlo_containment(order):
    spec = benchmark("V")
    sys = spec.system()
    box = spec.initial_set().box()
    pts = sample_box(box, 100)
    cur = box
    h = 0.01
    for step in range(100):
        enc = validated_step(sys, cur, h, order)
        cur = enc.y_next
        pts = reference_integrate(sys, pts, h, h / 100)
        lo = [c.lo for c in cur.comps]
        hi = [c.hi for c in cur.comps]
        assert np.all(pts >= lo) and np.all(pts <= hi), f"escape at step {step}"


def test_halving_step_tightens_brusselator():
    """A shorter step from the same start never widens the enclosure more."""
    spec = benchmark("B")
    sys = spec.system()
    for t_probe in (0.0, 0.25, 0.5, 1.0):
        c = (
            reference_integrate(sys, np.array(spec.center), t_probe, 1e-4)
            if t_probe
            else np.array(spec.center)
        )
        for start in (Box.from_center_rad(c, [0.01, 0.01]), Box.from_point(c)):
            prev = None
            for h in (0.02, 0.01, 0.005):
                w = max(x.width for x in validated_step(sys, start, h, 1).y_next.comps)
                if prev is not None:
                    assert w <= prev * (1 + 1e-12)
                prev = w


# -- gradient steps ---------------------------------------------------------------


def test_zero_field_gradient_is_identity():
    g = GradientEnclosure.identity(2)
    g2 = step_gradient(ZERO2, Box.from_point([0.0, 0.0]), g, 0.1, 1)
    assert np.allclose(g2.mid_total, np.eye(2))
    for i in range(2):
        for j in range(2):
            tgt = 1.0 if i == j else 0.0
            assert g2.one_step[i, j].contains(tgt)
            assert g2.one_step[i, j].width == 0.0
            assert g2.total[i, j].width == 0.0


@pytest.mark.parametrize("order", [1, 2, 4])
def test_diagonal_linear_gradient_contains_exponential(order):
    g = GradientEnclosure.identity(2)
    box = Box.from_center_rad([1.0, 1.0], [0.01, 0.01])
    h = 0.01
    k = 50
    for _ in range(k):
        g = step_gradient(DIAG, box, g, h, order)
        box = validated_step(DIAG, box, h, order).y_next
    expected = np.diag([math.exp(-k * h), math.exp(0.5 * k * h)])
    assert g.total.contains_floats(expected)
    assert g.one_step.contains_floats(np.diag([math.exp(-h), math.exp(0.5 * h)]))


def test_brusselator_gradient_contains_fd_sensitivities():
    spec = benchmark("B")
    sys = spec.system()
    box = spec.initial_set().box()
    h, k = 0.01, 50
    g = GradientEnclosure.identity(2)
    cur = box
    for _ in range(k):
        g = step_gradient(sys, cur, g, h, 1)
        cur = validated_step(sys, cur, h, 1).y_next
    pts = sample_box(box, 20)
    eps = 1e-7
    for p in pts:
        for j in range(2):
            dp = np.zeros(2)
            dp[j] = eps
            fwd = reference_integrate(sys, p + dp, k * h, h / 100)
            bwd = reference_integrate(sys, p - dp, k * h, h / 100)
            col = (fwd - bwd) / (2 * eps)
            for i in range(2):
                a = g.total[i, j]
                assert a.lo - 1e-6 <= col[i] <= a.hi + 1e-6


def test_qr_invariants_and_member_products():
    spec = benchmark("B")
    sys = spec.system()
    box = spec.initial_set().box()
    h = 0.01
    g = GradientEnclosure.identity(2)
    cur = box
    one_steps = []
    for _ in range(10):
        g = step_gradient(sys, cur, g, h, 1)
        one_steps.append(g.one_step)
        cur = validated_step(sys, cur, h, 1).y_next
    # orthogonality defect
    defect = np.abs(g.Q.T @ g.Q - np.eye(2)).sum(axis=1).max()
    assert defect <= 1e-12
    # sampled member products of the one-step gradients stay inside total
    rng = np.random.default_rng(5)
    for _ in range(200):
        prod = np.eye(2)
        for os_ in one_steps:
            lo = np.array([[a.lo for a in row] for row in os_.rows])
            hi = np.array([[a.hi for a in row] for row in os_.rows])
            member = rng.uniform(lo, hi)
            prod = member @ prod
        for i in range(2):
            for j in range(2):
                a = g.total[i, j]
                assert a.lo - 1e-9 <= prod[i, j] <= a.hi + 1e-9


def test_one_step_gradient_over_tiny_box_is_tight():
    spec = benchmark("B")
    sys = spec.system()
    os_ = one_step_gradient(sys, Box.from_point([1.0, 1.0]), 0.01, 1)
    width = max(a.width for row in os_.rows for a in row)
    assert width < 1e-7


# -- reference oracle --------------------------------------------------------------


def test_reference_zero_field():
    out = reference_integrate(ZERO2, [1.0, 2.0], 5.0, 0.01)
    assert np.allclose(out, [1.0, 2.0])


def test_reference_exponential_decay():
    out = reference_integrate(DECAY, [1.0], 1.0, 1e-4)
    assert abs(out[0] - math.exp(-1.0)) < 1e-9


def test_reference_batched_matches_single():
    spec = benchmark("B")
    sys = spec.system()
    pts = np.array([[1.0, 1.0], [1.01, 0.99]])
    batch = reference_integrate(sys, pts, 0.5, 1e-3)
    for row_in, row_out in zip(pts, batch):
        single = reference_integrate(sys, row_in, 0.5, 1e-3)
        assert np.allclose(single, row_out, atol=1e-14)


# -- jets ---------------------------------------------------------------------------


def test_jet_series_of_sin_matches_taylor():
    alg = JetAlgebra(4)
    x = Jet.variable(Interval.point(0.5), 4)
    s = alg.unary("sin", x)
    expected = [math.sin(0.5), math.cos(0.5), -math.sin(0.5) / 2,
                -math.cos(0.5) / 6, math.sin(0.5) / 24]
    for c, e in zip(s.coeffs, expected):
        assert c.lo - 1e-12 <= e <= c.hi + 1e-12


def test_jet_division_and_pow():
    alg = JetAlgebra(3)
    x = Jet.variable(Interval.point(2.0), 3)
    inv = alg.div(alg.const(1.0), x)  # 1/x around 2
    expected = [0.5, -0.25, 0.125, -0.0625]
    for c, e in zip(inv.coeffs, expected):
        assert c.lo - 1e-12 <= e <= c.hi + 1e-12
    sq = alg.pow_int(x, 2)
    for c, e in zip(sq.coeffs, [4.0, 4.0, 1.0, 0.0]):
        assert c.contains(e)
