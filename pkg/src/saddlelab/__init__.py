"""Descent-flow experiments around saddle points.

The library integrates the gradient flow and its unit-speed
normalization with dense-output event detection, measures how long
trajectories linger inside balls around critical points, and checks the
measured times against closed-form bounds. A CLI wraps the experiment
suite with seeded, manifest-tracked runs.
"""

from .analysis import (
    ConvergenceRecord,
    DissipationReport,
    EscapeTimeReport,
    GlobalBoundReport,
    ICOutcome,
    OrbitComparison,
    RadiusEstimate,
    StableManifoldReport,
    TaylorCheckReport,
    TaylorViolation,
    compare_orbits,
    convergence_radius,
    dissipation_trace,
    escape_sweep,
    escape_time_bound,
    gd_stall_time,
    global_convergence_experiment,
    max_permissible_radius,
    saddle_frame_ic,
    sample_in_annulus,
    sample_in_ball,
    sample_on_sphere,
    stable_manifold_detail,
    stable_manifold_sample,
    taylor_estimate_check,
)
from .errors import (
    AssumptionViolation,
    BoundViolation,
    ConfigError,
    CriticalPointReached,
    IntegrationError,
    InvalidCError,
    NeverEntered,
    NotCriticalError,
    OutOfRangeError,
    SaddleLabError,
    TangencyWarning,
)
from .flows import (
    DISCRETE_GD,
    DISCRETE_NGD,
    GD,
    NGD,
    BallOccupancy,
    FlowKind,
    FlowVariant,
    IntegratorConfig,
    Termination,
    TerminationKind,
    Trajectory,
    arc_length_at,
    ball_occupancy,
    gd_field,
    integrate,
    iterate_discrete,
    ngd_field,
    reparametrize_by_arc_length,
    step_discrete,
    trajectory_csv_header,
    write_trajectory_csv,
)
from .objectives import (
    FUNCTION_GRAMMAR,
    CatalogEntry,
    ObjectiveFunction,
    catalog_entry,
    cubic_perturbed,
    diagonal_quadratic,
    parse_catalog_entry,
    parse_function_spec,
    quadratic_form,
    trig_lattice_critical_points,
    trig_multiwell,
)
from .spectral import (
    CriticalPointInfo,
    InclusionReport,
    classify_critical_point,
    inclusion_check,
    matrix_abs,
    modified_distance,
)

try:
    from importlib.metadata import PackageNotFoundError, version

    __version__ = version("saddlelab")
except PackageNotFoundError:
    __version__ = "0+unknown"

__all__ = [
    "AssumptionViolation",
    "BallOccupancy",
    "BoundViolation",
    "CatalogEntry",
    "ConfigError",
    "ConvergenceRecord",
    "CriticalPointInfo",
    "CriticalPointReached",
    "DISCRETE_GD",
    "DISCRETE_NGD",
    "DissipationReport",
    "EscapeTimeReport",
    "FUNCTION_GRAMMAR",
    "FlowKind",
    "FlowVariant",
    "GD",
    "GlobalBoundReport",
    "ICOutcome",
    "InclusionReport",
    "IntegrationError",
    "IntegratorConfig",
    "InvalidCError",
    "NGD",
    "NeverEntered",
    "NotCriticalError",
    "ObjectiveFunction",
    "OrbitComparison",
    "OutOfRangeError",
    "RadiusEstimate",
    "SaddleLabError",
    "StableManifoldReport",
    "TangencyWarning",
    "TaylorCheckReport",
    "TaylorViolation",
    "Termination",
    "TerminationKind",
    "Trajectory",
    "arc_length_at",
    "ball_occupancy",
    "catalog_entry",
    "classify_critical_point",
    "compare_orbits",
    "convergence_radius",
    "cubic_perturbed",
    "diagonal_quadratic",
    "dissipation_trace",
    "escape_sweep",
    "escape_time_bound",
    "gd_field",
    "gd_stall_time",
    "global_convergence_experiment",
    "inclusion_check",
    "integrate",
    "iterate_discrete",
    "matrix_abs",
    "max_permissible_radius",
    "modified_distance",
    "ngd_field",
    "parse_catalog_entry",
    "parse_function_spec",
    "quadratic_form",
    "reparametrize_by_arc_length",
    "saddle_frame_ic",
    "sample_in_annulus",
    "sample_in_ball",
    "sample_on_sphere",
    "stable_manifold_detail",
    "stable_manifold_sample",
    "step_discrete",
    "taylor_estimate_check",
    "trajectory_csv_header",
    "trig_lattice_critical_points",
    "trig_multiwell",
    "write_trajectory_csv",
]
