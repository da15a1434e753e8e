"""Executable checks of the model's claims.

Every statistical decision uses ``3 * stderr`` plus analytic allowances, never
p-values, so a check is a deterministic function of its inputs and seed.
Two analytic allowances widen the band:

``tail_bound``
    size of the objective's remainder beyond the truncation horizon.
``quad_bias``
    exact bias of the trapezoid rule applied to an exponential mean profile.
    Deflated consumption and discounted utility have means ``C e^{-k s}``
    under proportional strategies, so this bias is known in closed form.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .closed_form import (ProportionalStrategy, growth_exponent, is_divergent, merton_constant,
                          optimal_strategy, proportional_objective, transversality_exponent,
                          transversality_threshold, utility_scale, value, value_d1, value_d2)
from .hamiltonian import hjb_residual
from .model import ModelSpec, kappa_max, require_well_posed
from .report import digest
from .sde import SimConfig, iter_blocks, normal_blocks, wealth_coeffs

DEFAULT_SEED = 20240601
DEFAULT_PATHS = 10_000
BLOCK = 1024


# ---------------------------------------------------------------------------
# result records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvalResult:
    """Monte-Carlo estimate with its error allowances.

    The interval :meth:`interval` is ``estimate +- (3 stderr + tail_bound + quad_bias)``.
    A divergent objective is reported with ``estimate = -inf`` and ``divergent = True``.
    """

    estimate: float
    stderr: float
    tail_bound: float
    n_paths: int
    horizon: float
    quad_bias: float = 0.0
    divergent: bool = False
    clip_events: int = 0

    def __post_init__(self):
        if self.stderr < 0 or self.tail_bound < 0 or self.quad_bias < 0:
            raise ValueError("stderr, tail_bound and quad_bias must be >= 0")

    @property
    def half_width(self) -> float:
        return 3.0 * self.stderr + self.tail_bound + self.quad_bias

    def interval(self) -> tuple[float, float]:
        return self.estimate - self.half_width, self.estimate + self.half_width

    def contains(self, target: float) -> bool:
        if self.divergent:
            return target == -math.inf
        return abs(self.estimate - target) <= self.half_width

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Verdict:
    """One pass/fail record; :meth:`record` is the JSON shape consumed by reports."""

    name: str
    passed: bool
    inputs: dict
    estimate: float | None = None
    stderr: float | None = None
    tail_bound: float | None = None
    details: dict = field(default_factory=dict)

    def record(self) -> dict:
        return {
            "name": self.name,
            "inputs_digest": digest(self.inputs),
            "inputs": self.inputs,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "tail_bound": self.tail_bound,
            "pass": bool(self.passed),
            "details": self.details,
        }


def _inputs(spec: ModelSpec, **extra) -> dict:
    out = {"model": spec.to_dict()}
    for k, v in extra.items():
        if isinstance(v, ProportionalStrategy):
            v = {"kappa": v.kappa, "theta": v.theta}
        elif isinstance(v, SimConfig):
            v = asdict(v)
        out[k] = v
    return out


# ---------------------------------------------------------------------------
# horizon, step and bias rules
# ---------------------------------------------------------------------------

def default_horizon(spec: ModelSpec, strat: ProportionalStrategy) -> float:
    """``max(10, 12 / (rho - g))``: the tail is at most ``e^-12`` of the leading scale."""
    return max(10.0, 12.0 / (spec.rho - growth_exponent(spec, strat)))


def default_steps(spec: ModelSpec, strat: ProportionalStrategy, horizon: float,
                  min_steps: int = 2400, max_steps: int = 20_000) -> int:
    # keeps (rho - g) dt <= 0.005, so trapezoid bias stays near 2e-6 of the scale
    k = spec.rho - growth_exponent(spec, strat)
    return int(min(max_steps, max(min_steps, math.ceil(horizon * k / 0.005 - 1e-9))))


def trapezoid_bias(scale: float, rate: float, horizon: float, steps: int) -> float:
    """``|trap - exact|`` for ``scale * e^{-rate s}`` on ``[0, horizon]`` with ``steps`` panels."""
    if rate == 0.0 or scale == 0.0:
        return 0.0
    dt = horizon / steps
    h = 0.5 * rate * dt
    # (dt/2) coth(h) - 1/rate, written to avoid cancellation for small h
    factor = (h / math.tanh(h) - 1.0) / rate if abs(h) > 1e-4 else (h * h / 3.0) / rate
    mass = -math.expm1(-rate * horizon)
    return abs(scale * mass * factor)


def _default_cfg(spec, strat, paths, seed, horizon=None, steps=None, scheme="exact-log"):
    T = default_horizon(spec, strat) if horizon is None else horizon
    n = default_steps(spec, strat, T) if steps is None else steps
    return SimConfig(horizon=T, steps=n, paths=paths, seed=seed, scheme=scheme)


# ---------------------------------------------------------------------------
# objective, budget, martingale
# ---------------------------------------------------------------------------

def mc_objective(spec: ModelSpec, strat: ProportionalStrategy, x: float,
                 cfg: SimConfig | None = None, paths: int = DEFAULT_PATHS,
                 seed: int = DEFAULT_SEED) -> EvalResult:
    """Monte-Carlo estimate of the discounted CRRA objective over ``[0, T]``.

    With ``cfg=None`` the horizon and step rules of this module are applied.
    Paths are streamed in blocks, so memory does not grow with ``paths``.
    """
    if strat.kappa <= 0:
        raise ValueError("mc_objective needs kappa > 0 (zero consumption has objective -inf)")
    if not x > 0:
        raise ValueError(f"initial wealth must be > 0, got {x}")
    g = growth_exponent(spec, strat)
    if is_divergent(spec, strat):
        T = cfg.horizon if cfg is not None else math.inf
        m = cfg.paths if cfg is not None else paths
        return EvalResult(-math.inf, 0.0, math.inf, m, T, divergent=True)
    if cfg is None:
        cfg = _default_cfg(spec, strat, paths, seed)
    a, s = wealth_coeffs(spec, strat, cfg.scheme)
    vals, clips = [], 0
    for z in normal_blocks(cfg, BLOCK):
        v, c = kernels.utility_integral(x, strat.kappa, a, s, spec.rho, spec.gamma, cfg.dt, z,
                                        euler=cfg.scheme == "euler")
        vals.append(v)
        clips += int(c.sum())
    vals = np.concatenate(vals)
    m = vals.size
    stderr = float(vals.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    u0 = utility_scale(spec, strat, x)
    k = spec.rho - g
    tail = abs(u0) * math.exp(-k * cfg.horizon) / k
    quad = trapezoid_bias(u0, k, cfg.horizon, cfg.steps) if cfg.scheme == "exact-log" else 0.0
    return EvalResult(float(vals.mean()), stderr, tail, m, cfg.horizon, quad, False, clips)


def _moments(chunks: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray, int]:
    """Mean and standard error along axis 0 from a list of row blocks."""
    m = sum(c.shape[0] for c in chunks)
    mean = sum(c.sum(axis=0) for c in chunks) / m
    ss = sum(((c - mean) ** 2).sum(axis=0) for c in chunks)
    se = np.sqrt(ss / (m - 1) / m) if m > 1 else np.zeros_like(mean)
    return mean, se, m


def budget_check(spec: ModelSpec, strat: ProportionalStrategy, x: float, cfg: SimConfig) -> Verdict:
    """Estimate ``E int_0^T Y c ds`` and test it against the budget ``x``.

    ``passed`` is the budget inequality ``estimate - 3 stderr <= x``.
    ``details['matches_analytic']`` records whether the band also contains
    ``x (1 - e^{-kappa T})``. The band is widened by the trapezoid bias.
    """
    chunks, clips = [], 0
    for b in iter_blocks(spec, strat, x, cfg, BLOCK):
        chunks.append(np.asarray(b.deflated_consumption_integral))
        clips += b.total_clips
    mean, se, m = _moments(chunks)
    est, se = float(mean), float(se)
    analytic = -x * math.expm1(-strat.kappa * cfg.horizon)
    quad = trapezoid_bias(strat.kappa * x, strat.kappa, cfg.horizon, cfg.steps)
    # the trapezoid rule overestimates a convex mean profile, so its bias is allowed for
    passed = est - 3.0 * se - quad <= x
    matches = abs(est - analytic) <= 3.0 * se + quad + 1e-12 * x
    return Verdict("budget", passed, _inputs(spec, strategy=strat, x=x, config=cfg), est, se, 0.0,
                   {"analytic": analytic, "quad_bias": quad, "matches_analytic": bool(matches),
                    "relative_to_x": est / x, "clip_events": clips, "n_paths": m})


def martingale_check(spec: ModelSpec, strat: ProportionalStrategy, x: float, cfg: SimConfig,
                     min_fraction: float = 0.95) -> Verdict:
    """Test ``E M_t = x`` at every grid time, ``M_t = Y_t X_t + int_0^t Y c ds``.

    Each time passes when ``|mean - x| <= 3 stderr + quad_bias(t)``, where
    ``quad_bias(t)`` is the trapezoid bias of the running integral (exact in
    the deterministic case). The check passes when at least ``min_fraction``
    of the grid times pass.
    """
    chunks, clips = [], 0
    for b in iter_blocks(spec, strat, x, cfg, BLOCK):
        chunks.append(b.martingale())
        clips += b.total_clips
    mean, se, m = _moments(chunks)
    t = cfg.times
    k = strat.kappa
    quad = np.array([trapezoid_bias(k * x, k, ti, max(i, 1)) for i, ti in enumerate(t)])
    quad[0] = 0.0
    drift = mean - x
    ok = np.abs(drift) <= 3.0 * se + quad + 1e-12 * x
    frac = float(ok.mean())
    worst = int(np.argmax(np.abs(drift) / np.maximum(3.0 * se + quad, 1e-300)))
    return Verdict("martingale", frac >= min_fraction,
                   _inputs(spec, strategy=strat, x=x, config=cfg), float(mean[-1]), float(se[-1]), 0.0,
                   {"fraction_passing": frac, "min_fraction": min_fraction, "n_times": int(t.size),
                    "max_abs_drift": float(np.max(np.abs(drift))),
                    "worst_time": float(t[worst]), "worst_drift": float(drift[worst]),
                    "worst_band": float(3.0 * se[worst] + quad[worst]),
                    "clip_events": clips, "n_paths": m})


def martingale_profile(spec: ModelSpec, strat: ProportionalStrategy, x: float,
                       cfg: SimConfig) -> dict:
    """Per-time mean, stderr and drift of ``M_t`` (for CSV export)."""
    chunks = [b.martingale() for b in iter_blocks(spec, strat, x, cfg, BLOCK)]
    mean, se, _ = _moments(chunks)
    return {"t": cfg.times, "mean": mean, "stderr": se, "drift": mean - x}


# ---------------------------------------------------------------------------
# analytic checks
# ---------------------------------------------------------------------------

def homogeneity_check(spec: ModelSpec, alphas, xs, rtol: float = 1e-12) -> Verdict:
    """``value(alpha x) = alpha^(1-gamma) value(x)`` for all pairs."""
    e = 1.0 - spec.gamma
    worst = 0.0
    for al in alphas:
        for x in xs:
            lhs = float(value(spec, al * x))
            rhs = al ** e * float(value(spec, x))
            worst = max(worst, abs(lhs - rhs) / abs(lhs))
    return Verdict("homogeneity", worst <= rtol,
                   _inputs(spec, alphas=list(map(float, alphas)), xs=list(map(float, xs))),
                   worst, None, None, {"max_relative_deviation": worst, "rtol": rtol})


def log_grid(lo: float = 1e-3, hi: float = 1e3, n: int = 50) -> np.ndarray:
    return np.logspace(math.log10(lo), math.log10(hi), n)


def residual_profile(spec: ModelSpec, x_grid, a: float | None = None,
                     eps_floor: float = 1e-300) -> tuple[np.ndarray, np.ndarray]:
    """Residual and relative residual of the closed-form triple with constant ``a``.

    ``a = 0`` gives the trivial triple ``v = p = P = 0``.
    """
    x = np.asarray(x_grid, dtype=float)
    if a is None:
        a = merton_constant(spec)
    if a == 0.0:
        v = p = P = np.zeros_like(x)
    else:
        v, p, P = value(spec, x, a), value_d1(spec, x, a), value_d2(spec, x, a)
    res = np.asarray(hjb_residual(spec, x, v, p, P), dtype=float)
    rel = np.abs(res) / np.maximum(np.abs(spec.rho * v), eps_floor)
    return res, rel


def residual_sweep(spec: ModelSpec, x_grid=None, a: float | None = None,
                   eps_floor: float = 1e-300, tol: float = 1e-9) -> Verdict:
    """Max relative HJB residual of the closed-form triple over ``x_grid``."""
    x = log_grid() if x_grid is None else np.asarray(x_grid, dtype=float)
    _, rel = residual_profile(spec, x, a, eps_floor)
    worst = float(rel.max())
    used = merton_constant(spec) if a is None else float(a)
    return Verdict("residual_sweep", worst <= tol,
                   _inputs(spec, x_grid=x.tolist(), a=used), worst, None, None,
                   {"max_relative_residual": worst, "tol": tol, "n_points": int(x.size)})


@dataclass(frozen=True)
class SweepResult:
    kappas: np.ndarray
    thetas: np.ndarray
    table: np.ndarray  # J[i, j] at (kappas[i], thetas[j])
    argmax: tuple[float, float]
    nearest: tuple[float, float]

    @property
    def hit(self) -> bool:
        return self.argmax == self.nearest


def strategy_grid_sweep(spec: ModelSpec, x: float, kappa_grid, theta_grid) -> SweepResult:
    """Closed-form objective over a (kappa, theta) grid; argmax vs the grid point nearest the optimum."""
    require_well_posed(spec)
    ks = np.asarray(kappa_grid, dtype=float)
    ts = np.asarray(theta_grid, dtype=float)
    table = np.array([[proportional_objective(spec, ProportionalStrategy(k, t), x) for t in ts]
                      for k in ks])
    i, j = np.unravel_index(int(np.argmax(table)), table.shape)
    opt = optimal_strategy(spec)
    ni = int(np.argmin(np.abs(ks - opt.kappa)))
    nj = int(np.argmin(np.abs(ts - opt.theta)))
    return SweepResult(ks, ts, table, (float(ks[i]), float(ts[j])), (float(ks[ni]), float(ts[nj])))


def default_sweep_grid(spec: ModelSpec, refine: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Grid centred on the optimum: 9 kappas over ``(0, 2 kappa_hat)``, 3 thetas spaced ``0.2``.

    ``kappa_hat < kappa_0`` always, so the grid stays inside ``(0, kappa_0)``
    when ``2 kappa_hat < kappa_0``; otherwise the top is pulled below ``kappa_0``.
    """
    opt = optimal_strategy(spec)
    k0 = kappa_max(spec)
    step = min(opt.kappa, 0.9 * (k0 - opt.kappa)) / 4.0 / refine
    ks = opt.kappa + step * np.arange(-4 * refine, 4 * refine + 1)
    ts = opt.theta + (0.2 / refine) * np.arange(-refine, refine + 1)
    return ks, ts


def dominance_check(spec: ModelSpec, x: float, strategies, paths: int = 2000,
                    seed: int = DEFAULT_SEED) -> Verdict:
    """No proportional strategy's MC objective exceeds ``value(x)`` beyond its allowances."""
    v = float(value(spec, x))
    rows, ok = [], True
    for st in strategies:
        if is_divergent(spec, st):
            rows.append({"kappa": st.kappa, "theta": st.theta, "divergent": True, "pass": True})
            continue
        r = mc_objective(spec, st, x, paths=paths, seed=seed)
        good = r.estimate <= v + r.half_width
        ok &= good
        rows.append({"kappa": st.kappa, "theta": st.theta, "estimate": r.estimate,
                     "stderr": r.stderr, "tail_bound": r.tail_bound, "quad_bias": r.quad_bias,
                     "pass": bool(good)})
    return Verdict("dominance", bool(ok),
                   _inputs(spec, x=x, paths=paths, seed=seed,
                           strategies=[[s.kappa, s.theta] for s in strategies]),
                   v, None, None, {"value": v, "rows": rows})


def three_way_check(spec: ModelSpec, x: float = 1.0, paths: int = DEFAULT_PATHS,
                    seed: int = DEFAULT_SEED, rtol: float = 1e-10) -> Verdict:
    """``value``, the proportional objective at the optimum and its MC estimate agree."""
    opt = optimal_strategy(spec)
    v = value(spec, x)
    j = proportional_objective(spec, opt, x)
    r = mc_objective(spec, opt, x, paths=paths, seed=seed)
    rel = abs(v - j) / abs(v)
    v, j = float(v), float(j)
    passed = rel <= rtol and r.contains(v) and r.contains(j)
    return Verdict("three_way", passed, _inputs(spec, x=x, paths=paths, seed=seed),
                   r.estimate, r.stderr, r.tail_bound,
                   {"value": v, "proportional_objective": j, "closed_forms_rel_diff": rel,
                    "quad_bias": r.quad_bias, "horizon": r.horizon, "n_paths": r.n_paths,
                    "mc_contains_value": bool(r.contains(v))})


@dataclass(frozen=True)
class TransversalityProbe:
    alpha: float
    exponent: float
    threshold: float
    times: np.ndarray
    values: np.ndarray
    verdict: str


def transversality_probe(spec: ModelSpec, alpha: float, t_grid=None, x: float = 1.0) -> TransversalityProbe:
    """``e^{-rho t} V(X_t)`` along ``c = alpha X, pi = 0``; equals ``V(x) e^{xi t}``."""
    xi = transversality_exponent(spec, alpha)
    t = np.linspace(0.0, 200.0, 21) if t_grid is None else np.asarray(t_grid, dtype=float)
    star = transversality_threshold(spec)
    # sign(xi) = sign(alpha - star) since gamma > 1; comparing alphas avoids the
    # cancellation that leaves xi at ~1e-18 instead of 0 on the threshold
    if math.isclose(alpha, star, rel_tol=1e-12, abs_tol=0.0):
        xi, verdict = 0.0, "constant"
    elif alpha > star:
        verdict = "diverges"
    else:
        verdict = "vanishes"
    vals = value(spec, x) * np.exp(xi * t)
    return TransversalityProbe(float(alpha), xi, star, t, vals, verdict)


def transversality_check(spec: ModelSpec, rel_offset: float = 0.2) -> Verdict:
    """Verdict flips at the threshold: below vanishes, at it constant, above diverges."""
    star = transversality_threshold(spec)
    lo, hi = star * (1 - rel_offset), star * (1 + rel_offset)
    got = {}
    for name, al in (("below", lo), ("at", star), ("above", hi)):
        p = transversality_probe(spec, al)
        got[name] = {"alpha": al, "exponent": p.exponent, "verdict": p.verdict}
    passed = (got["below"]["verdict"] == "vanishes" and got["above"]["verdict"] == "diverges"
              and got["at"]["verdict"] == "constant")
    return Verdict("transversality", passed, _inputs(spec, rel_offset=rel_offset), star, None, None,
                   {"threshold": star, **got})
