"""Optimal regulation of a harvested stochastic resource.

A regulator offers a terminal tax to a risk-averse resource manager; the
optimal contract comes from an HJB equation in log-abundance, solved here by
finite differences, and is checked by Monte Carlo.
"""
from __future__ import annotations

from ._backend import default_backend_name, get_backend
from .agent import EffortBounds, a_star, agent_utility_mc, agent_value_from_y0, g_running
from .contract import ContractOutcome, principal_value_mc, reconstruct_tax, stopped_policy
from .dynamics import SimPath, TimeGrid, exact_logistic, simulate_controlled
from .hamiltonian import HamiltonianContext, HamiltonianInput, hamiltonian_eps, hamiltonian_exact
from .hjb import FeedbackPolicy, PdeGrid, ValueSurface, solve, z_feedback
from .model import CostSpec, ModelParams, MuSpec, PriceSpec, reference_params, reservation_tilde, validate

__version__ = "0.1.0"

__all__ = [
    "ContractOutcome", "CostSpec", "EffortBounds", "FeedbackPolicy", "HamiltonianContext",
    "HamiltonianInput", "ModelParams", "MuSpec", "PdeGrid", "PriceSpec", "SimPath", "TimeGrid",
    "ValueSurface", "a_star", "agent_utility_mc", "agent_value_from_y0", "default_backend_name",
    "exact_logistic", "g_running", "get_backend", "hamiltonian_eps", "hamiltonian_exact",
    "reference_params", "principal_value_mc", "reconstruct_tax", "reservation_tilde", "simulate_controlled",
    "solve", "stopped_policy", "validate", "z_feedback",
]
