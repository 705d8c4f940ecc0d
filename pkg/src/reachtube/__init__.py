"""Conservative reachtubes for nonlinear ODE systems.

Pipeline: outward-rounded interval arithmetic, validated Runge-Kutta
propagation of the flow and its deformation gradient (Lohner QR wrapping
control), analytically optimal ellipsoid metrics, and reachsets taken as
the intersection of an optimal-metric ellipsoid with the initial-metric
ball, with centre errors absorbed into the radii.
"""

from .benchmarks import BenchmarkSpec, benchmark, builtin_benchmarks
from .integrator import (
    GradientEnclosure,
    IntegrationError,
    OracleError,
    StepEnclosure,
    StepSizeError,
    apriori_enclosure,
    reference_integrate,
    step_gradient,
    validated_step,
)
from .interval import Box, DomainError, Interval, IntervalMatrix
from .metric import (
    CoordFrame,
    FrameDegeneracyError,
    MetricError,
    ellipsoid_volume,
    lambda_max_bound,
    optimal_frame,
    stretching_factor,
)
from .model import (
    InitialSet,
    OdeSystem,
    ParseError,
    parse_init,
    parse_model,
)
from .reachtube import (
    BlowupError,
    Pipeline,
    ReachsetStep,
    RunConfig,
    RunSummary,
    SoundnessError,
    box_hull_ellipsoid,
    initialize,
    run,
)

__version__ = "0.1.0"

__all__ = [
    "BenchmarkSpec",
    "benchmark",
    "builtin_benchmarks",
    "GradientEnclosure",
    "IntegrationError",
    "OracleError",
    "StepEnclosure",
    "StepSizeError",
    "apriori_enclosure",
    "reference_integrate",
    "step_gradient",
    "validated_step",
    "Box",
    "DomainError",
    "Interval",
    "IntervalMatrix",
    "CoordFrame",
    "FrameDegeneracyError",
    "MetricError",
    "ellipsoid_volume",
    "lambda_max_bound",
    "optimal_frame",
    "stretching_factor",
    "InitialSet",
    "OdeSystem",
    "ParseError",
    "parse_init",
    "parse_model",
    "BlowupError",
    "Pipeline",
    "ReachsetStep",
    "RunConfig",
    "RunSummary",
    "SoundnessError",
    "box_hull_ellipsoid",
    "initialize",
    "run",
]
