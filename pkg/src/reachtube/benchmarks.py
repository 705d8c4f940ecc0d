"""Built-in benchmark systems with their published run configurations.

The two neural-controller cartpoles are shipped as structures: the network
weights are not public, so the generators accept a weight set and default
to zeros.  ``bench`` only runs them when the user supplies weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .model import InitialSet, OdeSystem, parse_model

__all__ = ["BenchmarkSpec", "builtin_benchmarks", "benchmark", "neural_cartpole_text", "ltc_cartpole_text"]


@dataclass(frozen=True)
class BenchmarkSpec:
    label: str  # Table-style short label, e.g. "V"
    name: str
    dim: int
    model_text: str
    center: tuple[float, ...]
    radii: tuple[float, ...]
    dt: float
    horizon: float
    time_index: Optional[int] = None
    neural: bool = False
    # box-volume blow-up cap as a multiple of the initial box volume; models
    # with point dimensions floored to 1e-9 legitimately widen by many orders
    blowup_factor: float = 1e6

    def system(self) -> OdeSystem:
        return parse_model(self.model_text, name=self.name)

    def initial_set(self) -> InitialSet:
        return InitialSet.of(self.center, self.radii)


BRUSSELATOR = """\
# Brusselator: auto-catalytic reaction concentrations
x1' = 1 + x1^2*x2 - 2.5*x1
x2' = 1.5*x1 - x1^2*x2
"""

VAN_DER_POL = """\
# Van der Pol oscillator: position x1, velocity x2
x1' = x2
x2' = (x1^2 - 1)*x2 - x1
"""

ROBOTARM = """\
# Robot arm: angle x1, position x2, angular velocity x3, velocity x4
x1' = x3
x2' = x4
x3' = (-2*x2*x3*x4 - 2*x1 - 2*x3)/(x2^2 + 1) + 4/(x2^2 + 1)
x4' = x2*x3^2 - x2 - x4 + 1
"""

DUBINS = """\
# Dubins car: position (x1, x2), heading x3, clock x4
x1' = cos(x3)
x2' = sin(x3)
x3' = x1*sin(x4)
x4' = 1
time x4
"""

MITCHELL_SCHAEFFER = """\
# Mitchell-Schaeffer cardiac cell: membrane potential x1, gate x2
x1' = x2*x1^2*(1 - x1)/0.3 - x1/6
x2' = (0.5*(1 + tanh(50*x1 - 5)))*(-x2/150) + (1 - 0.5*(1 + tanh(50*x1 - 5)))*(1 - x2)/20
"""

# cartpole with linear stabilizing feedback; constants M=1, m=0.001, g=9.81,
# l=1 and forcing f = -1.1*M*g*theta - sigma substituted in place.
# variables: pole velocity x1, cart velocity x2, cart position x3, angle x4
_CART_F = "(-1.1*1*9.81*x4 - x1)"
CARTPOLE_LINEAR = f"""\
# Cartpole with linear stabilizing controller
x1' = ({_CART_F}*cos(x4) - 0.001*1*x1^2*cos(x4)*sin(x4) + (0.001 + 1)*9.81*sin(x4)) / (1*(1 + 0.001*sin(x4)^2))
x2' = ({_CART_F} + 0.001*sin(x4)*(-1*x1^2 + 9.81*cos(x4))) / (1 + 0.001*sin(x4)^2)
x3' = x2
x4' = x1
"""

# variables: x1..x3 position (pn, pe, h); x4..x6 velocity (u, v, w);
# x7..x10 quaternion (q0..q3); x11..x13 angular rate (p, q, r);
# x14..x17 integrals (pI, qI, rI, hI)
QUADCOPTER = """\
# Quadcopter attitude/position model, 17 states
x1' = 2*x4*(x7^2 + x8^2 - 0.5) - 2*x5*(x7*x10 - x8*x9) + 2*x6*(x7*x9 + x8*x10)
x2' = 2*x5*(x7^2 + x9^2 - 0.5) + 2*x4*(x7*x10 + x8*x9) - 2*x6*(x7*x8 - x9*x10)
x3' = 2*x6*(x7^2 + x10^2 - 0.5) - 2*x4*(x7*x9 - x8*x10) + 2*x5*(x7*x8 + x9*x10)
x4' = x13*x5 - x12*x6 - 11.62*(x7*x9 - x8*x10)
x5' = x11*x6 - x13*x4 + 11.62*(x7*x8 + x9*x10)
x6' = x12*x4 - x11*x5 + 11.62*(x7^2 + x10^2 - 0.5)
x7' = -0.5*x8*x11 - 0.5*x9*x12 - 0.5*x10*x13
x8' = 0.5*x7*x11 - 0.5*x10*x12 + 0.5*x9*x13
x9' = 0.5*x10*x11 + 0.5*x7*x12 - 0.5*x8*x13
x10' = 0.5*x8*x12 - 0.5*x9*x11 + 0.5*x7*x13
x11' = (-40.0006326*x14 - 2.82839798295*x11) - 1.1334074237*x12*x13
x12' = (-39.9998045*x15 - 2.82837525410*x12) + 1.1320781796*x11*x13
x13' = (-39.9997891*x16 - 2.82841342233*x13) - 0.00469522*x11*x12
x14' = x11
x15' = x12
x16' = x13
x17' = x3
"""


@dataclass(frozen=True)
class NeuralWeights:
    """Dense tanh controller: F = 10*tanh(U h + c), h' = -h + tanh(W y + V h + b)."""

    W: tuple[tuple[float, ...], ...]  # 8 x 4, input y = (x, w, theta, sigma)
    V: tuple[tuple[float, ...], ...]  # 8 x 8
    b: tuple[float, ...]  # 8
    U: tuple[float, ...]  # 8
    c: float

    @staticmethod
    def zeros() -> "NeuralWeights":
        return NeuralWeights(
            W=tuple((0.0,) * 4 for _ in range(8)),
            V=tuple((0.0,) * 8 for _ in range(8)),
            b=(0.0,) * 8,
            U=(0.0,) * 8,
            c=0.0,
        )


@dataclass(frozen=True)
class LtcWeights:
    """Liquid time-constant network: 8 neurons with sigmoidal synapses."""

    c: tuple[float, ...]  # 8, membrane capacitances
    gleak: tuple[float, ...]
    vleak: tuple[float, ...]
    w: tuple[tuple[float, ...], ...]  # 8 x 8
    E: tuple[tuple[float, ...], ...]
    sigma: tuple[tuple[float, ...], ...]
    mu: tuple[tuple[float, ...], ...]
    a: tuple[float, ...]  # 8, output head
    bout: float

    @staticmethod
    def zeros() -> "LtcWeights":
        eye = tuple((0.0,) * 8 for _ in range(8))
        return LtcWeights(
            c=(1.0,) * 8,
            gleak=(0.0,) * 8,
            vleak=(0.0,) * 8,
            w=eye,
            E=eye,
            sigma=eye,
            mu=eye,
            a=(0.0,) * 8,
            bout=0.0,
        )


def _lin(coeffs: Sequence[float], vars_: Sequence[str], bias: float) -> str:
    terms = [f"({c!r})*{v}" for c, v in zip(coeffs, vars_) if c != 0.0]
    terms.append(f"({bias!r})")
    return " + ".join(terms)


def neural_cartpole_text(weights: Optional[NeuralWeights] = None) -> str:
    """Cartpole driven by an 8-neuron tanh network, unrolled to closed form."""
    wts = weights or NeuralWeights.zeros()
    h_vars = [f"x{5 + i}" for i in range(8)]
    y_vars = ["x3", "x2", "x4", "x1"]  # y = (x, w, theta, sigma)
    force = f"(10*tanh({_lin(wts.U, h_vars, wts.c)}))"
    g, mc, m, length = 9.81, 1.0, 0.1, 0.5
    mtot = mc + m
    dsigma = (
        f"(({g!r}*sin(x4) + cos(x4)*((-{force} - {m * length!r}*x1^2*sin(x4))/{mtot!r}))"
        f" / ({length!r}*(4/3 - {m!r}*cos(x4)^2/{mtot!r})))"
    )
    lines = [
        "# Cartpole with a neural controller (8 tanh neurons unrolled)",
        f"x1' = {dsigma}",
        f"x2' = ({force} + {m * length!r}*(x1^2*sin(x4) - {dsigma}*cos(x4)))/{mtot!r}",
        "x3' = x2",
        "x4' = x1",
    ]
    for i in range(8):
        drive = _lin(
            list(wts.W[i]) + list(wts.V[i]),
            y_vars + h_vars,
            wts.b[i],
        )
        lines.append(f"x{5 + i}' = -x{5 + i} + tanh({drive})")
    return "\n".join(lines) + "\n"


def ltc_cartpole_text(weights: Optional[LtcWeights] = None) -> str:
    """Cartpole driven by an 8-neuron liquid time-constant network."""
    wts = weights or LtcWeights.zeros()
    v_vars = [f"x{5 + i}" for i in range(8)]
    force = f"(10*tanh({_lin(wts.a, v_vars, wts.bout)}))"
    g, mc, m, length = 9.81, 1.0, 0.1, 0.5
    mtot = mc + m
    dsigma = (
        f"(({g!r}*sin(x4) + cos(x4)*((-{force} - {m * length!r}*x1^2*sin(x4))/{mtot!r}))"
        f" / ({length!r}*(4/3 - {m!r}*cos(x4)^2/{mtot!r})))"
    )
    lines = [
        "# Cartpole with an LTC recurrent network controller",
        f"x1' = {dsigma}",
        f"x2' = ({force} + {m * length!r}*(x1^2*sin(x4) - {dsigma}*cos(x4)))/{mtot!r}",
        "x3' = x2",
        "x4' = x1",
    ]
    for i in range(8):
        terms = [f"{wts.gleak[i]!r}*(({wts.vleak[i]!r}) - x{5 + i})"]
        for j in range(8):
            if wts.w[i][j] == 0.0:
                continue
            terms.append(
                f"{wts.w[i][j]!r}*(({wts.E[i][j]!r}) - x{5 + i})"
                f"/(1 + exp(-({wts.sigma[i][j]!r})*(x{5 + j} + ({wts.mu[i][j]!r}))))"
            )
        lines.append(f"x{5 + i}' = ({' + '.join(terms)})/{wts.c[i]!r}")
    return "\n".join(lines) + "\n"


def _specs() -> list[BenchmarkSpec]:
    quad_center = (
        -0.995, -0.995, 9.005,  # position
        -0.995, -0.995, -0.995,  # velocity
        0.0, 0.0, 0.0, 1.0,  # quaternion (points)
        -0.995, -0.995, -0.995,  # angular rate
        0.0, 0.0, 0.0, 0.0,  # integrals (points)
    )
    quad_radii = tuple(
        0.005 if j in set(range(6)) | {10, 11, 12} else 0.0 for j in range(17)
    )
    return [
        BenchmarkSpec("B", "brusselator", 2, BRUSSELATOR, (1.0, 1.0), (0.01, 0.01), 0.01, 9.0),
        BenchmarkSpec("V", "vanderpol", 2, VAN_DER_POL, (-1.0, -1.0), (0.01, 0.01), 0.01, 40.0),
        BenchmarkSpec("R", "robotarm", 4, ROBOTARM, (1.505, 1.505, 0.005, 0.005), (0.005,) * 4, 0.01, 40.0),
        BenchmarkSpec("D", "dubins", 4, DUBINS, (0.0, 0.0, 0.7854, 0.0), (0.01, 0.01, 0.01, 0.0), 0.00125, 15.0, time_index=3),
        BenchmarkSpec("M", "cardiac", 2, MITCHELL_SCHAEFFER, (0.8, 0.5), (1e-4, 1e-4), 0.01, 10.0),
        BenchmarkSpec("C", "cartpole", 4, CARTPOLE_LINEAR, (0.0, 0.0, 0.0, 0.001), (1e-4,) * 4, 0.001, 10.0),
        BenchmarkSpec("Q", "quadcopter", 17, QUADCOPTER, quad_center, quad_radii, 1e-4, 2.0, blowup_factor=1e60),
        BenchmarkSpec("C-N", "cartpole-neural", 12, neural_cartpole_text(), (0.0, 0.0, 0.0, 0.001) + (0.0,) * 8, (1e-4,) * 12, 1e-5, 1.0, neural=True, blowup_factor=1e30),
        BenchmarkSpec("C-L", "cartpole-ltc", 12, ltc_cartpole_text(), (0.0, 0.0, 0.0, 0.001) + (0.0,) * 8, (1e-4,) * 12, 1e-6, 0.35, neural=True, blowup_factor=1e30),
    ]


def builtin_benchmarks() -> list[BenchmarkSpec]:
    """All benchmark systems with their published configurations."""
    return _specs()


def benchmark(key: str) -> BenchmarkSpec:
    """Look up one benchmark by label (``V``) or name (``vanderpol``)."""
    for spec in _specs():
        if key.lower() in (spec.label.lower(), spec.name.lower()):
            return spec
    raise KeyError(f"unknown benchmark {key!r}")
