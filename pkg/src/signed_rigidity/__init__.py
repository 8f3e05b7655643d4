"""Rigidity with distance, angle and signed constraints, plus gradient formation control."""
from .framework import Framework, FrameworkError, Graph, build_framework, make_graph, sensing_topology
from .henneberg import (
    HennebergCertificate,
    HennebergError,
    HennebergStep,
    henneberg_extend,
    random_signed_henneberg,
    validate_signed_henneberg,
)
from .oracle import JacobianCheckResult, brute_force_nullspace, check_jacobian, finite_difference_jacobian
from .rigidity import (
    RigidityKind,
    RigidityMatrix,
    RigidityReport,
    assemble_rigidity_matrix,
    classify,
    numerical_rank,
    trivial_motion_basis,
)
from .scenario import ScenarioError, ScenarioFile, dump_scenario, load_scenario, parse_scenario
from .simulation import (
    ConstraintTargets,
    Controller,
    Integrator,
    SimulationConfig,
    Status,
    Trajectory,
    ambiguity_metrics,
    control_velocity,
    formation_error,
    measure_targets,
    simulate,
)

__all__ = [name for name in dir() if not name.startswith("_")]
