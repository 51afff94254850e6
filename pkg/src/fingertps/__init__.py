"""Kinetostatic simulation of finger flexor tendon-pulley systems."""

__version__ = "0.1.0"

from .model import (ConfigError, EquilibriumState, FingerModel, PulleySpec,
                    TendonRoute, TPSConfiguration, ground_pulley, read_params)
from .geometry import (PulleyFrame, TendonPolyline, joint_positions,
                       moment_arm, pulley_frame, tendon_length,
                       tendon_polyline)
from .equilibrium import (LockEvent, SweepStep, SweepTrace, compute_state,
                          residual, solve_equilibrium, tension_sweep)
from .metrics import (StressBreakdown, bowstring_map, bowstringing,
                      critical_values, pulley_stress, range_of_flexion,
                      stress_report)
from .study import (TABLE2_ROWS, ConfigName, build_configuration,
                    enumerate_grid, figure_preset, parse_config_name,
                    run_study, write_study_csv)
from .fem import (FrameMesh, build_finger_mesh, compare_with_prbm,
                  equivalent_joint_stiffness, newton_solve, sweep_fem)

__all__ = [
    "__version__",
    "ConfigError", "EquilibriumState", "FingerModel", "PulleySpec",
    "TendonRoute", "TPSConfiguration", "ground_pulley", "read_params",
    "PulleyFrame", "TendonPolyline", "joint_positions", "moment_arm",
    "pulley_frame", "tendon_length", "tendon_polyline",
    "LockEvent", "SweepStep", "SweepTrace", "compute_state", "residual",
    "solve_equilibrium", "tension_sweep",
    "StressBreakdown", "bowstring_map", "bowstringing", "critical_values",
    "pulley_stress", "range_of_flexion", "stress_report",
    "TABLE2_ROWS", "ConfigName", "build_configuration", "enumerate_grid",
    "figure_preset", "parse_config_name", "run_study", "write_study_csv",
    "FrameMesh", "build_finger_mesh", "compare_with_prbm",
    "equivalent_joint_stiffness", "newton_solve", "sweep_fem",
]
