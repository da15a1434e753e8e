"""Explicit solution of the CRRA consumption-investment problem (gamma > 1).

The value function is ``V(x) = a x^(1-gamma) / (1-gamma)`` and the optimal
feedback consumes and invests constant fractions of wealth. The objective of
an arbitrary proportional strategy is also available in closed form, since
wealth is then a geometric Brownian motion.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .model import InvalidModelError, ModelSpec, margin, require_well_posed


@dataclass(frozen=True)
class ProportionalStrategy:
    """Feedback ``c = kappa * x``, ``pi = theta * x``."""

    kappa: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.kappa) and math.isfinite(self.theta)):
            raise InvalidModelError("strategy fractions must be finite")
        if self.kappa < 0:
            raise InvalidModelError(f"kappa must be >= 0, got {self.kappa}")


@dataclass(frozen=True)
class ClosedFormSolution:
    a: float
    kappa_hat: float
    theta_hat: float
    drift_opt: float
    vol_opt: float

    @property
    def strategy(self) -> ProportionalStrategy:
        return ProportionalStrategy(self.kappa_hat, self.theta_hat)

    def to_dict(self) -> dict:
        return asdict(self)


def _pow(x, e):
    # x^e through exp/log so non-integer exponents behave identically
    return np.exp(e * np.log(x))


def _check_wealth(x):
    if np.any(np.asarray(x) <= 0):
        raise InvalidModelError("wealth must be > 0")


def merton_constant(spec: ModelSpec) -> float:
    """The coefficient ``a`` of the value function."""
    require_well_posed(spec)
    return float(_pow(margin(spec) / spec.gamma, -spec.gamma))


def value(spec: ModelSpec, x, a: float | None = None):
    _check_wealth(x)
    a = merton_constant(spec) if a is None else a
    g = spec.gamma
    return a * _pow(x, 1.0 - g) / (1.0 - g)


def value_d1(spec: ModelSpec, x, a: float | None = None):
    _check_wealth(x)
    a = merton_constant(spec) if a is None else a
    return a * _pow(x, -spec.gamma)


def value_d2(spec: ModelSpec, x, a: float | None = None):
    _check_wealth(x)
    a = merton_constant(spec) if a is None else a
    g = spec.gamma
    return -g * a * _pow(x, -g - 1.0)


def optimal_strategy(spec: ModelSpec) -> ProportionalStrategy:
    require_well_posed(spec)
    return ProportionalStrategy(margin(spec) / spec.gamma,
                                spec.lam / (spec.sigma * spec.gamma))


def optimal_wealth_law(spec: ModelSpec) -> tuple[float, float]:
    """Drift and volatility of ``log X`` along the optimal closed loop."""
    require_well_posed(spec)
    g, lam = spec.gamma, spec.lam
    return (spec.r - spec.rho) / g + lam ** 2 / (2.0 * g), lam / g


def solve(spec: ModelSpec) -> ClosedFormSolution:
    strat = optimal_strategy(spec)
    drift, vol = optimal_wealth_law(spec)
    return ClosedFormSolution(merton_constant(spec), strat.kappa, strat.theta, drift, vol)


def growth_exponent(spec: ModelSpec, strat: ProportionalStrategy) -> float:
    """Exponential rate of ``E[X_t^(1-gamma)]`` under a proportional strategy.

    Lognormal moment: ``(1-g)(r + sigma lam theta - kappa) - g(1-g) sigma^2 theta^2 / 2``.
    """
    g, s, th = spec.gamma, spec.sigma, strat.theta
    return ((1.0 - g) * (spec.r + s * spec.lam * th - strat.kappa)
            - 0.5 * g * (1.0 - g) * s * s * th * th)


def utility_scale(spec: ModelSpec, strat: ProportionalStrategy, x: float) -> float:
    """``(kappa x)^(1-gamma) / (1-gamma)``: utility of consumption at time zero."""
    g = spec.gamma
    return float(_pow(strat.kappa * x, 1.0 - g) / (1.0 - g))


def proportional_objective(spec: ModelSpec, strat: ProportionalStrategy, x: float) -> float:
    """Exact discounted CRRA utility of a proportional strategy; ``-inf`` when divergent."""
    _check_wealth(x)
    if strat.kappa == 0:
        return -math.inf
    gap = spec.rho - growth_exponent(spec, strat)
    if not gap > 0:
        return -math.inf
    return utility_scale(spec, strat, x) / gap


def is_divergent(spec: ModelSpec, strat: ProportionalStrategy) -> bool:
    return strat.kappa == 0 or not spec.rho > growth_exponent(spec, strat)


def transversality_exponent(spec: ModelSpec, alpha: float) -> float:
    """Rate of ``e^(-rho t) V(X_t)`` along ``X_t = x e^((r - alpha) t)`` (no risky holding)."""
    if not alpha > 0:
        raise InvalidModelError(f"alpha must be > 0, got {alpha}")
    return -spec.rho + (1.0 - spec.gamma) * (spec.r - alpha)


def transversality_threshold(spec: ModelSpec) -> float:
    return spec.rho / (spec.gamma - 1.0) + spec.r
