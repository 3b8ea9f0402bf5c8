"""Truncated logarithms of flows: tensor algebra, free Lie bases, Magnus
solvers, flow maps, and norm/order estimation utilities."""

from .tensor_algebra import (
    AlgebraParams,
    AlgebraElement,
    GroupElement,
    GradedOperator,
)
from .free_lie import HallBasis, LieCoordinates, build_hall_basis, bch
from .magnus import (
    PiecewiseConstantPath,
    PolynomialPath,
    PathNorms,
    chen_product,
    group_ode_solve,
    c_ode_solve,
    magnus_log,
    path_norms,
)
from .flows import (
    DynamicalSystem,
    FlowConfig,
    built_in_system,
    flow,
    exp_flow,
    pushforward_flow,
    w_field_eval,
)
from .bounds import (
    QSpec,
    q_eval,
    NormEstimate,
    estimate_dyn_norms,
    ConvergenceReport,
    build_report,
    fit_slope,
)

__version__ = "0.1.0"

__all__ = [
    "AlgebraParams",
    "AlgebraElement",
    "GroupElement",
    "GradedOperator",
    "HallBasis",
    "LieCoordinates",
    "build_hall_basis",
    "bch",
    "PiecewiseConstantPath",
    "PolynomialPath",
    "PathNorms",
    "chen_product",
    "group_ode_solve",
    "c_ode_solve",
    "magnus_log",
    "path_norms",
    "DynamicalSystem",
    "FlowConfig",
    "built_in_system",
    "flow",
    "exp_flow",
    "pushforward_flow",
    "w_field_eval",
    "QSpec",
    "q_eval",
    "NormEstimate",
    "estimate_dyn_norms",
    "ConvergenceReport",
    "build_report",
    "fit_slope",
]
