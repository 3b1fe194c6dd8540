"""Globally optimal joint BS beamforming and discrete IRS phase selection.

Transmit-power minimization under per-user SINR constraints, solved to global
optimality by a Benders-style decomposition, with an exhaustive-enumeration
oracle and suboptimal baselines for comparison.
"""

from .channel import ChannelSet, ScenarioConfig, generate_channels, load_channels, save_channels
from .conic import ConeProgram, NumericalFailure, SolveStatus
from .gbd import (
    Cut,
    CutValidityError,
    GbdNumericalError,
    GbdState,
    run,
    solve_feasibility,
    solve_instance,
    solve_master,
    solve_primal,
)
from .oracle import OracleResult, enumerate_selections
from .reformulation import PhaseSelection, ReformulatedData, build_reformulated

__version__ = "0.1.0"

__all__ = [
    "ChannelSet",
    "ConeProgram",
    "Cut",
    "CutValidityError",
    "GbdNumericalError",
    "GbdState",
    "NumericalFailure",
    "OracleResult",
    "PhaseSelection",
    "ReformulatedData",
    "ScenarioConfig",
    "SolveStatus",
    "build_reformulated",
    "enumerate_selections",
    "generate_channels",
    "load_channels",
    "run",
    "save_channels",
    "solve_feasibility",
    "solve_instance",
    "solve_master",
    "solve_primal",
    "__version__",
]
