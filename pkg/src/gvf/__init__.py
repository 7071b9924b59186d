"""Guiding vector fields for path following on implicit manifolds."""

from .field import (
    FieldBreakdown,
    SurfaceStack,
    field_components,
    field_value,
    lyapunov,
    lyapunov_decay,
    orthogonal_term,
    riemannian_gradients,
)
from .integrate import (
    BatchResult,
    IntegratorConfig,
    Trajectory,
    audit_distance,
    batch,
    integrate,
    step,
    write_meta_json,
    write_trajectory_csv,
)
from .manifold import ConstraintSystem, RankDeficient, RetractionDiverged
from .poly import Polynomial
from .scenarios import (
    SCENARIOS,
    Scenario,
    from_json,
    get_scenario,
    rotation_to_state,
    scenario_names,
    so3_membership,
    state_to_rotation,
)
from .singular import (
    GridSpec,
    NewtonDiverged,
    SingularPoint,
    check_assumptions,
    classify,
    find_singular_points,
    refine,
    scan,
)

__version__ = "0.1.0"

__all__ = [
    "BatchResult",
    "ConstraintSystem",
    "FieldBreakdown",
    "GridSpec",
    "IntegratorConfig",
    "NewtonDiverged",
    "Polynomial",
    "RankDeficient",
    "RetractionDiverged",
    "SCENARIOS",
    "Scenario",
    "SingularPoint",
    "SurfaceStack",
    "Trajectory",
    "audit_distance",
    "batch",
    "check_assumptions",
    "classify",
    "field_components",
    "field_value",
    "find_singular_points",
    "from_json",
    "get_scenario",
    "integrate",
    "lyapunov",
    "lyapunov_decay",
    "orthogonal_term",
    "refine",
    "riemannian_gradients",
    "rotation_to_state",
    "scan",
    "scenario_names",
    "so3_membership",
    "state_to_rotation",
    "step",
    "write_meta_json",
    "write_trajectory_csv",
]
