"""Cost-of-collusion deterrence analysis for threshold TEE deployments."""

from .equilibrium import (
    EquilibriumReport,
    analyze,
    corner_test,
    joiner_payoff,
    success_prob,
    v_safe,
)
from .global_games import GlobalGameSpec, NormalPrior, UniformPrior, solve_cutoff
from .model import ExplicitSanctions, ModelParams, ZipfSanctions, baseline_params
from .simulation import SimConfig, SimResult, Strategy, simulate

__version__ = "0.1.0"

__all__ = [
    "EquilibriumReport",
    "ExplicitSanctions",
    "GlobalGameSpec",
    "ModelParams",
    "NormalPrior",
    "SimConfig",
    "SimResult",
    "Strategy",
    "UniformPrior",
    "ZipfSanctions",
    "analyze",
    "baseline_params",
    "corner_test",
    "joiner_payoff",
    "simulate",
    "solve_cutoff",
    "success_prob",
    "v_safe",
]
