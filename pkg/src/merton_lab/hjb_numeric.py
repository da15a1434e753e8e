"""Numerical recovery of the Merton solution without using the closed form.

Two independent routes:

* :func:`solve_scalar_constant` root-solves the algebraic identity that the
  coefficient ``a`` satisfies once the power form of ``V`` is plugged into HJB.
* :func:`policy_iteration` solves the stationary HJB on a truncated, uniform
  log-wealth grid by Howard iteration.

Policy evaluation writes the linear ODE in ``y = log x``::

    rho v = b v_y + D v_yy + u,   b = r + sigma lam theta - kappa - sigma^2 theta^2 / 2,
                                   D = sigma^2 theta^2 / 2,  u = (kappa x)^(1-gamma) / (1-gamma)

and discretises it with a monotone tridiagonal operator: central differences
where the cell Peclet number allows it, first-order upwind elsewhere. Upwind
nodes get a lagged defect correction to the second-order one-sided stencil, so
each linear solve stays an M-matrix while the converged iterate is second-order
accurate.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import closed_form
from .hamiltonian import Derivs, h_max
from .kernels import solve_tridiagonal
from .model import ModelSpec, kappa_max, require_well_posed

BOUNDARY_MODES = ("homogeneous", "dirichlet")
_GHOST = 3


class GuardViolation(RuntimeError):
    """Policy improvement met ``p <= 0`` or ``P >= 0`` at some nodes."""

    def __init__(self, iteration, nodes, x, p, P):
        self.iteration = iteration
        self.nodes = np.asarray(nodes)
        self.x = np.asarray(x)
        self.p = np.asarray(p)
        self.P = np.asarray(P)
        head = ", ".join(f"#{j} (x={xx:.4g}, p={pp:.3g}, P={PP:.3g})"
                         for j, xx, pp, PP in zip(self.nodes[:5], self.x, self.p, self.P))
        more = f" and {self.nodes.size - 5} more" if self.nodes.size > 5 else ""
        super().__init__(f"guard violated at iteration {iteration} on {self.nodes.size} nodes: "
                         f"{head}{more}")


@dataclass(frozen=True)
class Grid:
    y_min: float = -3.0
    y_max: float = 3.0
    n_nodes: int = 400

    def __post_init__(self):
        if not self.y_min < self.y_max:
            raise ValueError("grid needs y_min < y_max")
        if self.n_nodes < 16:
            raise ValueError(f"grid needs at least 16 interior nodes, got {self.n_nodes}")

    @property
    def spacing(self) -> float:
        return (self.y_max - self.y_min) / (self.n_nodes + 1)

    @property
    def y(self) -> np.ndarray:
        """Interior log-wealth nodes."""
        return self.y_min + self.spacing * np.arange(1, self.n_nodes + 1)

    @property
    def x(self) -> np.ndarray:
        return np.exp(self.y)

    def refined(self) -> "Grid":
        """Same domain with half the spacing (old nodes are kept)."""
        return Grid(self.y_min, self.y_max, 2 * (self.n_nodes + 1) - 1)


@dataclass(frozen=True)
class NumericSolution:
    grid: Grid
    values: np.ndarray
    consumption: np.ndarray
    risky: np.ndarray
    iterations: int
    final_residual: float
    converged: bool
    boundary_mode: str
    residual_history: tuple = field(default=())

    @property
    def kappa(self) -> np.ndarray:
        return self.consumption / self.grid.x

    @property
    def theta(self) -> np.ndarray:
        return self.risky / self.grid.x

    def relative_error(self, spec: ModelSpec) -> np.ndarray:
        exact = closed_form.value(spec, self.grid.x)
        return np.abs(self.values / exact - 1.0)

    def node_table(self, spec: ModelSpec) -> dict:
        x = self.grid.x
        exact = closed_form.value(spec, x)
        return {"x": x, "v_num": self.values, "v_closed": exact,
                "rel_err": np.abs(self.values / exact - 1.0),
                "c_over_x": self.kappa, "pi_over_x": self.theta}

    def to_csv(self, path, spec: ModelSpec) -> None:
        table = self.node_table(spec)
        cols = list(table)
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in zip(*(table[c] for c in cols)):
                w.writerow([f"{v:.17g}" for v in row])


def solve_scalar_constant(spec: ModelSpec, tol: float = 1e-15, max_iter: int = 200) -> float:
    """Root of ``rho/(1-g) - r - lam^2/(2g) - g/(1-g) b^(-1/g)`` by bracketed Newton in ``log b``."""
    require_well_posed(spec)
    g, lam = spec.gamma, spec.lam
    c0 = spec.rho / (1.0 - g) - spec.r - lam * lam / (2.0 * g)
    k = -g / (1.0 - g)  # > 0, so f is strictly decreasing in log b

    def f(u):
        return c0 + k * math.exp(-u / g)

    def df(u):
        return -(k / g) * math.exp(-u / g)

    lo, hi = -1.0, 1.0
    while f(lo) <= 0:
        lo *= 2.0
    while f(hi) >= 0:
        hi *= 2.0
    u = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fu = f(u)
        if fu > 0:
            lo = u
        else:
            hi = u
        step = fu / df(u)
        nxt = u - step
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - u) <= tol * max(1.0, abs(u)):
            return math.exp(nxt)
        u = nxt
    raise RuntimeError(f"scalar solve did not converge in {max_iter} iterations")


# ---------------------------------------------------------------------------
# finite-difference machinery on the padded grid
# ---------------------------------------------------------------------------

class _Stencils:
    """Index bookkeeping for ``n`` interior nodes padded with a boundary node and ghosts."""

    def __init__(self, grid: Grid, boundary: str):
        n, G = grid.n_nodes, _GHOST
        self.n = n
        self.h = grid.spacing
        self.y = grid.y_min + self.h * np.arange(-G, n + 2 + G)
        self.x = np.exp(self.y)
        self.I = np.arange(G + 1, G + n + 1)
        self.left = np.arange(G + 1)
        self.right = np.arange(G + n + 1, n + 2 + 2 * G)
        j = np.arange(1, n + 1)
        if boundary == "dirichlet":
            # never reach past the boundary node itself
            self.reach2 = (j >= 2, j <= n - 1)
            self.reach3 = (j >= 3, j <= n - 2)
        else:
            every = np.ones(n, dtype=bool)
            self.reach2 = self.reach3 = (every, every)

    def derivatives(self, v, upwind=None, backward=None):
        """``(v_y, v_yy)`` at interior nodes; one-sided where ``upwind`` is set."""
        I, h = self.I, self.h
        vy = (v[I + 1] - v[I - 1]) / (2 * h)
        vyy = (v[I + 1] - 2 * v[I] + v[I - 1]) / (h * h)
        if upwind is None or not upwind.any():
            return vy, vyy
        (b2, f2), (b3, f3) = self.reach2, self.reach3
        vy_b = np.where(b2, (3 * v[I] - 4 * v[I - 1] + v[I - 2]) / (2 * h), (v[I] - v[I - 1]) / h)
        vy_f = np.where(f2, (-v[I + 2] + 4 * v[I + 1] - 3 * v[I]) / (2 * h), (v[I + 1] - v[I]) / h)
        vyy_b = np.where(b3, (2 * v[I] - 5 * v[I - 1] + 4 * v[I - 2] - v[I - 3]) / (h * h),
                         np.where(b2, (v[I] - 2 * v[I - 1] + v[I - 2]) / (h * h), vyy))
        vyy_f = np.where(f3, (2 * v[I] - 5 * v[I + 1] + 4 * v[I + 2] - v[I + 3]) / (h * h),
                         np.where(f2, (v[I] - 2 * v[I + 1] + v[I + 2]) / (h * h), vyy))
        vy = np.where(upwind, np.where(backward, vy_b, vy_f), vy)
        vyy = np.where(upwind, np.where(backward, vyy_b, vyy_f), vyy)
        return vy, vyy

    def correction(self, v, upwind, backward):
        """Second-order minus first-order one-sided ``v_y`` at upwind nodes."""
        I, h = self.I, self.h
        (b2, f2) = self.reach2
        cb = np.where(b2, (v[I] - 2 * v[I - 1] + v[I - 2]) / (2 * h), 0.0)
        cf = np.where(f2, (-v[I + 2] + 2 * v[I + 1] - v[I]) / (2 * h), 0.0)
        return np.where(upwind, np.where(backward, cb, cf), 0.0)


def _x_derivs(vy, vyy, x):
    return vy / x, (vyy - vy) / (x * x)


def discrete_residual(spec: ModelSpec, grid: Grid, values, boundary_values=(None, None)) -> np.ndarray:
    """``rho v - H_max`` at interior nodes using central differences.

    ``values`` holds the interior nodes; boundary values default to linear
    extrapolation from the two nearest nodes.
    """
    values = np.asarray(values, dtype=float)
    lo, hi = boundary_values
    lo = 2 * values[0] - values[1] if lo is None else lo
    hi = 2 * values[-1] - values[-2] if hi is None else hi
    v = np.concatenate(([lo], values, [hi]))
    h, x = grid.spacing, grid.x
    vy = (v[2:] - v[:-2]) / (2 * h)
    vyy = (v[2:] - 2 * v[1:-1] + v[:-2]) / (h * h)
    p, P = _x_derivs(vy, vyy, x)
    return spec.rho * values - h_max(spec, x, Derivs(p, P))


def _run(spec, st: _Stencils, v, boundary, a_bnd, tol, max_iter, it0, history):
    g, lam, s, r, rho = spec.gamma, spec.lam, spec.sigma, spec.r, spec.rho
    e = 1.0 - g
    I, h, n = st.I, st.h, st.n
    xi = st.x[I]

    def fill(w):
        w = w.copy()
        if boundary == "dirichlet":
            w[st.left] = a_bnd * np.exp(e * st.y[st.left]) / e
            w[st.right] = a_bnd * np.exp(e * st.y[st.right]) / e
        else:
            # extend along x^(1-gamma) from the outermost interior node
            w[st.left] = w[I[0]] * np.exp(e * (st.y[st.left] - st.y[I[0]]))
            w[st.right] = w[I[-1]] * np.exp(e * (st.y[st.right] - st.y[I[-1]]))
        return w

    upwind = backward = None
    kap_prev = th_prev = None
    converged = False
    it = it0
    for it in range(it0, it0 + max_iter):
        vy, vyy = st.derivatives(v, upwind, backward)
        p, P = _x_derivs(vy, vyy, xi)
        bad = (p <= 0) | (P >= 0)
        if bad.any():
            nodes = np.flatnonzero(bad)
            raise GuardViolation(it, nodes + 1, xi[nodes], p[nodes], P[nodes])
        history.append(float(np.max(np.abs(rho * v[I] - h_max(spec, xi, Derivs(p, P))))))

        kap = np.exp(-np.log(p) / g) / xi
        th = -lam * p / (s * P) / xi
        if kap_prev is not None:
            change = max(np.max(np.abs(kap - kap_prev)), np.max(np.abs(th - th_prev)))
            if change < tol:
                converged = True
                break
        kap_prev, th_prev = kap, th

        # policy evaluation
        b = r + s * lam * th - kap - 0.5 * s * s * th * th
        D = 0.5 * s * s * th * th
        u = np.exp(e * np.log(kap * xi)) / e
        central = D >= 0.5 * np.abs(b) * h
        upwind, backward = ~central, b < 0
        d2 = D / (h * h)
        lower = np.where(central, -(d2 - b / (2 * h)), np.where(backward, -(d2 - b / h), -d2))
        upper = np.where(central, -(d2 + b / (2 * h)), np.where(backward, -d2, -(d2 + b / h)))
        diag = rho + 2 * d2 + np.where(central, 0.0, np.abs(b) / h)
        v = fill(v)
        rhs = u + b * st.correction(v, upwind, backward)
        if boundary == "dirichlet":
            rhs[0] -= lower[0] * v[I[0] - 1]
            rhs[-1] -= upper[-1] * v[I[-1] + 1]
        else:
            diag[0] += lower[0] * math.exp(-e * h)
            diag[-1] += upper[-1] * math.exp(e * h)
        lower[0] = 0.0
        upper[-1] = 0.0
        v[I] = solve_tridiagonal(lower, diag, upper, rhs)
        v = fill(v)
    return v, kap, th, it, converged


def policy_iteration(spec: ModelSpec, grid: Grid | None = None, tol: float = 1e-10,
                     max_iter: int = 500, boundary: str = "homogeneous",
                     initial=None) -> NumericSolution:
    """Howard iteration for the stationary HJB on a truncated log-wealth grid.

    Parameters
    ----------
    boundary : ``"homogeneous"`` extends the iterate past both ends along
        ``x^(1-gamma)`` (no knowledge of ``a``); ``"dirichlet"`` pins the
        boundary to ``a x^(1-gamma)/(1-gamma)`` with ``a`` from
        :func:`solve_scalar_constant`, warm-started from a homogeneous solve.
    initial : optional seed values on the interior nodes. The default seed is
        ``a0 x^(1-gamma)/(1-gamma)`` with ``a0`` chosen so the implied
        consumption fraction is a quarter of :func:`kappa_max`.

    Raises
    ------
    GuardViolation
        If policy improvement sees ``p <= 0`` or ``P >= 0`` at any node, e.g.
        when seeded with the trivial solution ``v == 0``.
    """
    require_well_posed(spec)
    if boundary not in BOUNDARY_MODES:
        raise ValueError(f"boundary must be one of {BOUNDARY_MODES}, got {boundary!r}")
    grid = grid or Grid()
    g = spec.gamma
    e = 1.0 - g

    st = _Stencils(grid, "homogeneous")
    if initial is None:
        a0 = (0.25 * kappa_max(spec)) ** (-g)
        v = a0 * np.exp(e * st.y) / e
    else:
        initial = np.asarray(initial, dtype=float)
        if initial.shape != (grid.n_nodes,):
            raise ValueError(f"initial must have shape ({grid.n_nodes},)")
        v = np.empty(st.y.size)
        v[st.I] = initial
        # seed is extended linearly so a constant seed stays constant
        v[st.left] = initial[0]
        v[st.right] = initial[-1]

    history: list[float] = []
    v, kap, th, it, converged = _run(spec, st, v, "homogeneous", None, tol, max_iter, 0, history)
    if boundary == "dirichlet":
        st = _Stencils(grid, "dirichlet")
        a_bnd = solve_scalar_constant(spec)
        v, kap, th, it, converged = _run(spec, st, v, "dirichlet", a_bnd, tol,
                                         max_iter, it + 1, history)

    x = grid.x
    return NumericSolution(grid=grid, values=v[st.I].copy(), consumption=kap * x,
                           risky=th * x, iterations=it, final_residual=history[-1],
                           converged=converged, boundary_mode=boundary,
                           residual_history=tuple(history))
