"""Infinite-horizon consumption/investment with CRRA utility (gamma > 1).

Closed-form solution, Hamiltonian and HJB residual, seeded path simulation,
a Monte-Carlo verification battery and a finite-difference policy-iteration
solver, all driven from :class:`ModelSpec`.
"""

from .closed_form import (ClosedFormSolution, ProportionalStrategy, merton_constant,
                          optimal_strategy, proportional_objective, solve, value)
from .hamiltonian import Derivs, UnboundedHamiltonian, h_max, hjb_residual, maximizers
from .hjb_numeric import Grid, GuardViolation, NumericSolution, policy_iteration, solve_scalar_constant
from .model import (IllPosedModelError, InvalidModelError, MarketParams, ModelSpec, Preferences,
                    margin)
from .sde import PathBundle, SimConfig, simulate
from .verify import EvalResult, Verdict, mc_objective

__version__ = "0.1.0"

__all__ = [
    "ClosedFormSolution", "Derivs", "EvalResult", "Grid", "GuardViolation", "IllPosedModelError",
    "InvalidModelError", "MarketParams", "ModelSpec", "NumericSolution", "PathBundle", "Preferences",
    "ProportionalStrategy", "SimConfig", "UnboundedHamiltonian", "Verdict", "h_max", "hjb_residual",
    "margin", "maximizers", "mc_objective", "merton_constant", "optimal_strategy", "policy_iteration",
    "proportional_objective", "simulate", "solve", "solve_scalar_constant", "value",
]
