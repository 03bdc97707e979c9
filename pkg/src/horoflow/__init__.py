"""Volume-preserving curvature flow of h-convex radial graphs in hyperbolic space.

The package integrates the normalized flow driven by powers of the m-th
mean curvature and checks, at runtime, the monotonicity and pinching
structure that makes the flow converge to a geodesic sphere: the shifted
curvature ratio stays above its initial floor, speed bounds hold, and the
diagnostics decay exponentially.
"""

from __future__ import annotations

from .curvalg import (
    CurvatureSpectrum,
    FlowParams,
    PinchingConstants,
    elementary_symmetric,
    gap_bound,
    mean_curvature_m,
    pinching_predicate,
    slice_constant,
    solve_pinching_constants,
    speed,
    speed_gradient,
    speed_hessian_quadform,
    tilde_quantities,
)
from .errors import (
    ConfigurationError,
    DomainError,
    FeasibilityError,
    HConvexityLostError,
    HoroflowError,
    NumericalBlowupError,
    ParabolicityLostError,
    RootFindingError,
    SingularityError,
    StiffnessError,
)
from .flow import FlowResult, StepControl, flow_rhs, run, stable_dt, step, volume_renormalize
from .graphgeom import (
    GeometryFields,
    GraphState,
    GridSpec,
    area_and_volume,
    geometry_from_graph,
    load_snapshot,
    make_grid,
    mean_curvature_direct,
    perturbed_sphere_state,
    save_snapshot,
    sphere_state,
)
from .hypergeom import (
    AmbientCurvature,
    generalized_cosine,
    generalized_cotangent,
    generalized_sine,
    generalized_tangent,
    kappa_trig,
)
from .monitors import (
    CSV_COLUMNS,
    DiagnosticsRecord,
    DiagnosticsRecorder,
    ExponentialFit,
    MonotoneReport,
    analyze_diagnostics,
    check_monotone,
    fit_exponential,
    load_diagnostics,
    record,
)
from .oracle import (
    SphereTrajectory,
    ball_volume,
    contraction_residual,
    diameter_bound,
    geodesic_distance_axis,
    inner_radius_estimate,
    psi_inverse,
    sphere_contraction,
    support_offset,
    surface_diameter,
    tau_bound,
    unit_closed_form_radius,
    xi_comparison,
)

__version__ = "0.1.0"

__all__ = [
    "AmbientCurvature",
    "CSV_COLUMNS",
    "ConfigurationError",
    "CurvatureSpectrum",
    "DiagnosticsRecord",
    "DiagnosticsRecorder",
    "DomainError",
    "ExponentialFit",
    "FeasibilityError",
    "FlowParams",
    "FlowResult",
    "GeometryFields",
    "GraphState",
    "GridSpec",
    "HConvexityLostError",
    "HoroflowError",
    "MonotoneReport",
    "NumericalBlowupError",
    "ParabolicityLostError",
    "PinchingConstants",
    "RootFindingError",
    "SingularityError",
    "SphereTrajectory",
    "StepControl",
    "StiffnessError",
    "analyze_diagnostics",
    "area_and_volume",
    "ball_volume",
    "check_monotone",
    "contraction_residual",
    "diameter_bound",
    "elementary_symmetric",
    "fit_exponential",
    "flow_rhs",
    "gap_bound",
    "generalized_cosine",
    "generalized_cotangent",
    "generalized_sine",
    "generalized_tangent",
    "geodesic_distance_axis",
    "geometry_from_graph",
    "inner_radius_estimate",
    "kappa_trig",
    "load_diagnostics",
    "load_snapshot",
    "make_grid",
    "mean_curvature_direct",
    "mean_curvature_m",
    "perturbed_sphere_state",
    "pinching_predicate",
    "psi_inverse",
    "record",
    "run",
    "save_snapshot",
    "slice_constant",
    "solve_pinching_constants",
    "speed",
    "speed_gradient",
    "speed_hessian_quadform",
    "sphere_contraction",
    "sphere_state",
    "stable_dt",
    "step",
    "support_offset",
    "surface_diameter",
    "tau_bound",
    "tilde_quantities",
    "unit_closed_form_radius",
    "volume_renormalize",
    "xi_comparison",
]
