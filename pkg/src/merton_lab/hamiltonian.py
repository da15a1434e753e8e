"""Current-value Hamiltonian, its maximizers and the stationary HJB residual.

All functions accept scalars or numpy arrays for ``x`` and the derivative
candidates; guards are applied element-wise and fail for the whole call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelSpec


class UnboundedHamiltonian(ArithmeticError):
    """The supremum over controls is ``+inf`` (``p < 0``, or ``p > 0`` with ``P >= 0``)."""


@dataclass(frozen=True)
class Derivs:
    p: float | np.ndarray
    P: float | np.ndarray


def crra_utility(c, gamma):
    """``c^(1-gamma)/(1-gamma)`` with ``-inf`` at ``c == 0``."""
    c = np.asarray(c, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(c > 0, np.exp((1.0 - gamma) * np.log(np.where(c > 0, c, 1.0))) / (1.0 - gamma),
                       -np.inf)
    return out[()] if out.ndim == 0 else out


def hcv(spec: ModelSpec, x, d: Derivs, c, pi):
    p, P = d.p, d.P
    s = spec.sigma
    return (spec.r * x * p + pi * s * spec.lam * p + 0.5 * pi * pi * s * s * P
            - c * p + crra_utility(c, spec.gamma))


def maximizers(spec: ModelSpec, x, d: Derivs):
    """Unique maximizing ``(c, pi)`` for ``p > 0, P < 0``."""
    p, P = np.asarray(d.p, dtype=float), np.asarray(d.P, dtype=float)
    if np.any(p <= 0) or np.any(P >= 0):
        raise ValueError("maximizer formula needs p > 0 and P < 0")
    c = np.exp(-np.log(p) / spec.gamma)
    pi = -spec.lam * p / (spec.sigma * P)
    if c.ndim == 0:
        return float(c), float(pi)
    return c, pi


def h_max(spec: ModelSpec, x, d: Derivs):
    """Supremum of :func:`hcv` over ``c >= 0`` and real ``pi``.

    For ``p == 0, P <= 0`` the consumption part tends to 0 as ``c -> inf`` and the
    portfolio part vanishes, so the supremum is 0; this is what lets ``v == 0``
    solve the HJB equation.
    """
    p = np.asarray(d.p, dtype=float)
    P = np.asarray(d.P, dtype=float)
    if np.any(p < 0):
        raise UnboundedHamiltonian("p < 0: consumption term is unbounded above")
    interior = p > 0
    if np.any(interior & (P >= 0)):
        raise UnboundedHamiltonian("p > 0 with P >= 0: portfolio term is unbounded above")
    if np.any(~interior & (P > 0)):
        raise UnboundedHamiltonian("p = 0 with P > 0: portfolio term is unbounded above")
    g = spec.gamma
    ps = np.where(interior, p, 1.0)
    Ps = np.where(interior, P, -1.0)
    branch_a = (spec.r * x * ps - 0.5 * spec.lam ** 2 * ps * ps / Ps
                + g / (1.0 - g) * np.exp((g - 1.0) / g * np.log(ps)))
    out = np.where(interior, branch_a, 0.0)
    return float(out) if out.ndim == 0 else out


def hjb_residual(spec: ModelSpec, x, v, p, P):
    """``rho v - H_max(x, p, P)``; zero for a solution of the stationary HJB."""
    return spec.rho * v - h_max(spec, x, Derivs(p, P))
