# src/kam/__init__.py
"""
KAM engine: truncation, homological equation, generator flows, frequency
reparametrization and the iterative scheme.
"""

from .base import (
    Generator,
    Hamiltonian,
    KamState,
    KamStepReport,
    NormalForm,
    NormalIncrement,
)

from .truncation import TruncationResult, truncate, truncation_order
from .homological import bracket_with_normal, mode_divisors, solve_homological
from .flow import FlowGrid, TransformationMap, compose, flow_time1, gauss_legendre_times
from .frequency_map import FrequencyInverse, invert_frequency_map
from .step import displacement_bound, kam_step, step_bound
from .schedule import IdentityReport, KamSchedule, RunResult, log_norm_ratio, run, standalone_state
from .parameters import introduce_parameters, invert_gradient, quadratic_remainder

__all__ = [
    # Types
    "Generator",
    "Hamiltonian",
    "KamState",
    "KamStepReport",
    "NormalForm",
    "NormalIncrement",
    # Step pieces
    "TruncationResult",
    "truncate",
    "truncation_order",
    "bracket_with_normal",
    "mode_divisors",
    "solve_homological",
    "FlowGrid",
    "TransformationMap",
    "compose",
    "flow_time1",
    "gauss_legendre_times",
    "FrequencyInverse",
    "invert_frequency_map",
    "displacement_bound",
    "kam_step",
    "step_bound",
    # Iteration
    "IdentityReport",
    "KamSchedule",
    "RunResult",
    "run",
    "standalone_state",
    "log_norm_ratio",
    # Parameters
    "introduce_parameters",
    "invert_gradient",
    "quadratic_remainder",
]
