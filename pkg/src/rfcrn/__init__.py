"""Channel-selection optimization for an RF-energy-harvesting transmitter.

A secondary transmitter in a multi-channel network picks one licensed
channel per slot: an idle channel allows a packet transmission, a busy one
allows RF energy harvesting.  This package builds the exact slot-level
decision model, solves it for the throughput-maximizing policy, validates
solutions by seeded Monte Carlo simulation and exhaustive small-instance
enumeration, and exports experiment sweeps as CSV.
"""

from .model import (
    ChannelParams,
    ModelConfig,
    State,
    TransitionModel,
    build_model,
    default_model,
    enumerate_states,
    immediate_reward,
    successor_distribution,
)
from .simulate import SimConfig, SimReport, simulate, visit_frequencies
from .solver import (
    MultichainError,
    Policy,
    PolicyFormatError,
    SolveResult,
    best_static_policy,
    evaluate_policy,
    load_policy,
    oracle_enumerate,
    save_policy,
    solve_rvi,
    stationary_distribution,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelParams",
    "ModelConfig",
    "State",
    "TransitionModel",
    "build_model",
    "default_model",
    "enumerate_states",
    "immediate_reward",
    "successor_distribution",
    "Policy",
    "SolveResult",
    "MultichainError",
    "PolicyFormatError",
    "solve_rvi",
    "stationary_distribution",
    "evaluate_policy",
    "oracle_enumerate",
    "best_static_policy",
    "save_policy",
    "load_policy",
    "SimConfig",
    "SimReport",
    "simulate",
    "visit_frequencies",
    "__version__",
]
