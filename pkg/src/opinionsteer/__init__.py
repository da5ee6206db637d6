"""Deterministic simulation and convergence certification of targeted
opinion steering on signed, time-varying directed networks."""

from .certify import (CertificationReport, InequalityReport, TheoremConstants,
                      certify, check_contraction, check_dini_c, check_dini_h,
                      check_window_bounds, compute_constants, dini_tolerance)
from .dynamics import (GainSchedule, Scenario, Trajectory,
                       abs_dynamics_residual, control_input, integrate,
                       monitors, resolve_root_set, state_derivative)
from .graphs import (BalanceVerdict, Bipartition, Condensation,
                     ConnectivityVerdict, GraphSnapshot, SwitchingSchedule,
                     UnionGraph, adjacency_at, check_persistent_balance,
                     check_uniform_qs_connectivity, condensation,
                     delta_arc_integral, laplacian_at,
                     longest_path_from_roots, root_set, union_graph)
from .scenario_io import (bundled_scenario_path, parse_scenario,
                          scenario_from_dict, scenario_to_dict,
                          serialize_scenario, write_trajectory_csv)

__all__ = [
    "BalanceVerdict", "Bipartition", "CertificationReport", "Condensation",
    "ConnectivityVerdict", "GainSchedule", "GraphSnapshot",
    "InequalityReport", "Scenario", "SwitchingSchedule", "TheoremConstants",
    "Trajectory", "UnionGraph", "abs_dynamics_residual", "adjacency_at",
    "bundled_scenario_path", "certify", "check_contraction",
    "check_dini_c", "check_dini_h", "check_persistent_balance",
    "check_uniform_qs_connectivity", "check_window_bounds",
    "compute_constants", "condensation", "control_input",
    "delta_arc_integral", "dini_tolerance", "integrate", "laplacian_at",
    "longest_path_from_roots", "monitors", "parse_scenario",
    "resolve_root_set", "root_set", "scenario_from_dict", "scenario_to_dict",
    "serialize_scenario", "state_derivative", "union_graph",
    "write_trajectory_csv",
]

__version__ = "0.1.0"
