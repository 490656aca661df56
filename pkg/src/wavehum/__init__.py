"""Two-component wave equation with an imperfect interface: discretization,
energy and multiplier diagnostics, observability experiments and HUM control."""

__version__ = "0.1.0"

from .discretization import DiscreteOperators, PairField, assemble, bilinear_form, interface_quantities
from .energy import EnergyReport, conservation_report, energy_at
from .geometry import (
    BoundaryPartition,
    ControlRegions,
    NodeLabel,
    TwoComponentDomain,
    build_control_regions,
    build_domain,
    check_star_shaped,
    partition_boundary,
    radii,
)
from .hum import HumResult, apply_lambda, solve_hum, verify_null
from .material import MaterialData, geometric_condition, validate_material
from .multiplier import VectorField, build_field, compute_S, multiplier_identity
from .observability import ObservabilityReport, TimeBudget, norm_equivalence, observability_ratio, time_budget
from .oracle import OracleReport, refine_study, standing_wave_reference
from .wave_solver import (
    ControlVector,
    Trajectory,
    solve_backward,
    solve_controlled,
    solve_homogeneous,
    transposition_residual,
)
