"""Deadline-constrained task offloading and resource allocation for MEC.

Library + CLI: an approximation pipeline with a provable
(1 - alpha) / (2 + epsilon) guarantee, greedy and interval-ILP baselines,
an exact oracle, and a reproducible benchmark harness.
"""

from .model import (AccessPoint, Assignment, FeasibilityReport, InstanceError,
                    MecInstance, PowerLimitError, Server, Task, ZeroRateError,
                    load_instance, local_energy, min_power_units,
                    offload_energy, offload_rate, save_instance, saved_energy,
                    validate_assignment)
from .discretize import (BadPhiError, Combination, LevelSet, build_levels,
                         enumerate_combinations)
from .lp import (FractionalSolution, LinearProgram, LpInfeasibleError,
                 LpUnboundedError, build_3dm, build_rdp, build_upper_bound_lp,
                 solve)
from .graphs import (BipartiteGraph, Hyperedge, TripartiteGraph, bg_construct,
                     project, wtg_construct)
from .matching import Matching, NotBasicError, kdma, local_ratio
from .pipeline import GmaConfig, GmaReport, acceptance_ratio, gma

__all__ = [
    "AccessPoint", "Assignment", "BadPhiError", "BipartiteGraph",
    "Combination", "FeasibilityReport", "FractionalSolution", "GmaConfig",
    "GmaReport", "Hyperedge", "InstanceError", "LevelSet", "LinearProgram",
    "LpInfeasibleError", "LpUnboundedError", "Matching", "MecInstance",
    "NotBasicError", "PowerLimitError", "Server", "Task", "TripartiteGraph",
    "ZeroRateError", "acceptance_ratio", "bg_construct", "build_3dm",
    "build_levels", "build_rdp", "build_upper_bound_lp",
    "enumerate_combinations", "gma", "kdma", "load_instance", "local_energy",
    "local_ratio", "min_power_units", "offload_energy", "offload_rate",
    "project", "save_instance", "saved_energy", "solve",
    "validate_assignment", "wtg_construct",
]

__version__ = "0.1.0"
