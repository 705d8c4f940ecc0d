"""Model parsing, symbolic differentiation and the benchmark library."""

import math
import random

import numpy as np
import pytest

import reachtube.expr as ex
from reachtube.benchmarks import benchmark, builtin_benchmarks
from reachtube.interval import Box, Interval
from reachtube.model import InitialSet, OdeSystem, ParseError, parse_init, parse_model

BRUSSELATOR = "x1' = 1 + x1^2*x2 - 2.5*x1\nx2' = 1.5*x1 - x1^2*x2\n"


def fd_jacobian(sys: OdeSystem, x, h=1e-6):
    n = sys.dim
    J = np.zeros((n, n))
    for j in range(n):
        xp = list(x)
        xm = list(x)
        xp[j] += h
        xm[j] -= h
        fp = sys.eval_rhs_real(xp)
        fm = sys.eval_rhs_real(xm)
        J[:, j] = [(a - b) / (2 * h) for a, b in zip(fp, fm)]
    return J


def test_parse_brusselator():
    sys = parse_model(BRUSSELATOR, name="brusselator")
    assert sys.dim == 2
    assert sys.eval_rhs_real([1.0, 1.0])[0] == pytest.approx(-0.5, abs=1e-15)


def test_parse_constant_system():
    sys = parse_model("x1' = 0")
    assert sys.dim == 1
    assert sys.eval_rhs_real([3.0]) == [0.0]


def test_undeclared_variable_is_an_error():
    with pytest.raises(ParseError, match="x2"):
        parse_model("x1' = x2")


def test_duplicate_equation_is_an_error():
    with pytest.raises(ParseError, match="duplicate"):
        parse_model("x1' = 1\nx1' = 2")


def test_syntax_error_carries_location():
    with pytest.raises(ParseError, match="line 2"):
        parse_model("x1' = 1\nx2' = + * 3")


def test_non_integer_exponent_rejected():
    with pytest.raises(ParseError, match="integer"):
        parse_model("x1' = x1^2.5")


def test_comments_whitespace_and_scientific_literals():
    sys = parse_model("# heading\n  x1'   =  1.5e-2 * x1  # trailing\n")
    assert sys.eval_rhs_real([2.0])[0] == pytest.approx(0.03)


def test_time_directive():
    sys = parse_model("x1' = sin(x2)\nx2' = 1\ntime x2\n")
    assert sys.time_index == 1
    with pytest.raises(ValueError, match="x' = 1"):
        parse_model("x1' = sin(x2)\nx2' = 2\ntime x2\n")


def test_pretty_print_round_trip():
    for spec in builtin_benchmarks():
        sys = spec.system()
        again = parse_model(sys.pretty(), name=sys.name)
        assert again.dim == sys.dim
        assert again.time_index == sys.time_index
        rng = random.Random(1)
        for _ in range(10):
            x = [rng.uniform(0.1, 0.9) for _ in range(sys.dim)]
            a = sys.eval_rhs_real(x)
            b = again.eval_rhs_real(x)
            assert a == b, f"{sys.name}: reparsed rhs differs at {x}"


def test_differentiate_polynomial_rule():
    sys = parse_model(BRUSSELATOR)
    d = ex.differentiate(sys.rhs[0], 0)
    for x1, x2 in [(0.3, 0.7), (1.2, -0.5), (2.0, 3.0)]:
        assert ex.eval_real(d, [x1, x2]) == pytest.approx(2 * x1 * x2 - 2.5, rel=1e-12)


def test_differentiate_sin():
    e = ex.un("sin", ex.Var(0))
    d = ex.differentiate(e, 0)
    for x in (0.0, 0.5, 2.0):
        assert ex.eval_real(d, [x]) == pytest.approx(math.cos(x), rel=1e-12)


def test_robotarm_jacobian_matches_finite_differences():
    sys = benchmark("R").system()
    x = [1.505, 1.505, 0.005, 0.005]
    J_fd = fd_jacobian(sys, x)
    for i in range(4):
        for j in range(4):
            val = ex.eval_real(sys.jac[i][j], x)
            assert abs(val - J_fd[i, j]) <= 1e-6 * (1 + abs(val))


@pytest.mark.parametrize("spec", builtin_benchmarks(), ids=lambda s: s.name)
def test_symbolic_vs_numeric_jacobian_random_points(spec):
    sys = spec.system()
    rng = random.Random(7)
    c = list(spec.center)
    for _ in range(100 // max(1, sys.dim // 4)):
        x = [ci + rng.uniform(-0.05, 0.05) for ci in c]
        J_fd = fd_jacobian(sys, x)
        for i in range(sys.dim):
            for j in range(sys.dim):
                val = ex.eval_real(sys.jac[i][j], x)
                assert abs(val - J_fd[i, j]) <= 1e-6 * (1 + abs(val)), (
                    f"{spec.name} J[{i}][{j}] at {x}"
                )


@pytest.mark.parametrize("spec", builtin_benchmarks(), ids=lambda s: s.name)
def test_interval_eval_contains_sampled_real_eval(spec):
    sys = spec.system()
    init = spec.initial_set()
    box = init.box()
    enclosures = [ex.eval_interval(f, box) for f in sys.rhs]
    rng = random.Random(11)
    for _ in range(100):
        x = [
            rng.uniform(a.lo, a.hi) for a in box.comps
        ]
        vals = sys.eval_rhs_real(x)
        for v, enc in zip(vals, enclosures):
            assert enc.lo <= v <= enc.hi, f"{spec.name}: {v} outside {enc}"


def test_degenerate_box_eval():
    sys = parse_model(BRUSSELATOR)
    p = [0.81, 1.13]
    box = Box.from_point(p)
    for f in sys.rhs:
        enc = ex.eval_interval(f, box)
        assert enc.contains(ex.eval_real(f, p))
        assert enc.width < 1e-12


def test_library_contents_and_configs():
    specs = {s.label: s for s in builtin_benchmarks()}
    assert len(specs) == 9
    v = specs["V"]
    assert v.center == (-1.0, -1.0) and v.dt == 0.01 and v.horizon == 40.0
    assert v.radii == (0.01, 0.01)
    d = specs["D"]
    assert d.center == (0.0, 0.0, 0.7854, 0.0) and d.system().time_index == 3
    assert isinstance(d.system().rhs[3], ex.Const) and d.system().rhs[3].value == 1.0
    m = specs["M"]
    assert m.center == (0.8, 0.5) and m.radii == (1e-4, 1e-4) and m.horizon == 10.0
    q = specs["Q"]
    assert q.system().dim == 17 and len(q.system().rhs) == 17
    for label in ("C-N", "C-L"):
        sys = specs[label].system()
        assert sys.dim == 12


def test_quadcopter_point_dims_are_floored():
    q = benchmark("Q")
    init = q.initial_set()
    assert len(init.floored) == 8  # 4 quaternion + 4 integral states
    assert all(init.radii[j] == 1e-9 for j in init.floored)


def test_init_file_parsing():
    cfg = parse_init(
        "# comment\ncenter = 1.0, 2.0\nradius = 0.25\ndt = 0.05\nT = 3\norder = 2\n"
    )
    assert cfg.initial.center == (1.0, 2.0)
    assert cfg.initial.radii == (0.25, 0.25)
    assert (cfg.dt, cfg.horizon, cfg.order) == (0.05, 3.0, 2)
    cfg2 = parse_init("center = 0\nradius = 0.1, \n".replace(", \n", "\n"))
    assert cfg2.initial.radii == (0.1,)
    with pytest.raises(ParseError):
        parse_init("radius = 1\n")
    with pytest.raises(ParseError):
        parse_init("center = 1\nradius = 1\norder = 3\n")


def test_initial_set_validation():
    with pytest.raises(ValueError):
        InitialSet.of([0.0], [-1.0])
    s = InitialSet.of([0.0, 1.0], [0.0, 0.5])
    assert s.floored == (0,) and s.radii[0] == 1e-9


def test_lie_derivative_of_linear_system():
    sys = parse_model("x1' = -1*x1")
    # flow derivatives of x' = -x alternate sign: L^k f = (-1)^{k+1} x
    for k in range(4):
        val = ex.eval_real(sys.lie_rhs(k)[0], [2.0])
        assert val == pytest.approx((-1.0) ** (k + 1) * 2.0)
