"""Seeded wealth/deflator simulation under proportional strategies.

Normal draws come from per-path counter-based streams (Philox keyed by
``(seed, path_id)``), so path ``i`` sees the same draws whatever the number of
paths, the block size, or the order in which blocks are evaluated.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from . import kernels
from .closed_form import ProportionalStrategy, optimal_strategy, optimal_wealth_law
from .model import InvalidModelError, ModelSpec, require_well_posed

SCHEMES = ("exact-log", "euler")
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SimConfig:
    horizon: float
    steps: int
    paths: int
    seed: int = 20240601
    scheme: str = "exact-log"

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise InvalidModelError(f"horizon must be > 0, got {self.horizon}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise InvalidModelError(f"steps must be a positive integer, got {self.steps}")
        if int(self.paths) != self.paths or self.paths < 1:
            raise InvalidModelError(f"paths must be a positive integer, got {self.paths}")
        if self.scheme not in SCHEMES:
            raise InvalidModelError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)


def path_stream(seed: int, path_id: int) -> np.random.Generator:
    key = np.array([seed & _MASK64, path_id], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def path_normals(seed: int, path_ids, steps: int) -> np.ndarray:
    path_ids = np.asarray(path_ids, dtype=np.int64)
    out = np.empty((path_ids.size, steps))
    for j, pid in enumerate(path_ids):
        out[j] = path_stream(seed, int(pid)).standard_normal(steps)
    return out


def normal_blocks(cfg: SimConfig, block: int = 1024) -> Iterator[np.ndarray]:
    for start in range(0, cfg.paths, block):
        ids = np.arange(start, min(start + block, cfg.paths))
        yield path_normals(cfg.seed, ids, cfg.steps)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PathBundle:
    times: np.ndarray
    wealth: np.ndarray
    consumption: np.ndarray
    deflator: np.ndarray
    deflated_consumption_integral: np.ndarray
    seed: int
    scheme: str
    clip_counts: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.clip_counts is None:
            object.__setattr__(self, "clip_counts", np.zeros(self.wealth.shape[0], dtype=np.int64))
        for name in ("times", "wealth", "consumption", "deflator",
                     "deflated_consumption_integral", "clip_counts"):
            _freeze(getattr(self, name))

    @property
    def n_paths(self) -> int:
        return self.wealth.shape[0]

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def total_clips(self) -> int:
        return int(self.clip_counts.sum())

    def cumulative_deflated_consumption(self) -> np.ndarray:
        """Running trapezoid of ``Y c`` at every grid time (paths x (steps+1))."""
        f = self.deflator * self.consumption
        dt = np.diff(self.times)
        out = np.zeros_like(f)
        np.cumsum(0.5 * dt * (f[:, :-1] + f[:, 1:]), axis=1, out=out[:, 1:])
        return out

    def martingale(self) -> np.ndarray:
        """``M_t = Y_t X_t + int_0^t Y c ds`` on the grid."""
        return self.deflator * self.wealth + self.cumulative_deflated_consumption()

    def summary(self) -> dict:
        xt, yt = self.wealth[:, -1], self.deflator[:, -1]
        m = self.n_paths
        return {
            "seed": self.seed,
            "scheme": self.scheme,
            "paths": m,
            "steps": self.n_steps,
            "horizon": float(self.times[-1]),
            "wealth_T_mean": float(xt.mean()),
            "wealth_T_std": float(xt.std(ddof=1)) if m > 1 else 0.0,
            "log_wealth_T_mean": float(np.log(xt).mean()),
            "deflator_T_mean": float(yt.mean()),
            "deflated_consumption_mean": float(self.deflated_consumption_integral.mean()),
            "martingale_T_mean": float((yt * xt + self.deflated_consumption_integral).mean()),
            "clip_events": self.total_clips,
        }

    def to_csv(self, target) -> None:
        """Long format ``path_id,t,X,c,Y``; ``target`` is a path or a text stream."""
        if hasattr(target, "write"):
            self._write_csv(target)
            return
        with Path(target).open("w", newline="") as fh:
            self._write_csv(fh)

    def _write_csv(self, fh) -> None:
        m, n1 = self.wealth.shape
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path_id", "t", "X", "c", "Y"])
        for i in range(m):
            for k in range(n1):
                w.writerow([i, f"{self.times[k]:.17g}", f"{self.wealth[i, k]:.17g}",
                            f"{self.consumption[i, k]:.17g}", f"{self.deflator[i, k]:.17g}"])


def _deflator_coeffs(spec: ModelSpec) -> tuple[float, float]:
    lam = spec.lam
    return -spec.r - 0.5 * lam * lam, -lam


def wealth_coeffs(spec: ModelSpec, strat: ProportionalStrategy, scheme: str) -> tuple[float, float]:
    """Drift and volatility of wealth for a scheme: log-drift for exact-log, linear for Euler."""
    s = spec.sigma * strat.theta
    lin = spec.r + spec.sigma * spec.lam * strat.theta - strat.kappa
    if scheme == "euler":
        return lin, s
    return lin - 0.5 * s * s, s


def simulate(spec: ModelSpec, strat: ProportionalStrategy, x: float, cfg: SimConfig) -> PathBundle:
    """Wealth ``X``, consumption ``kappa X`` and deflator ``Y`` driven by shared draws."""
    if not x > 0:
        raise InvalidModelError(f"initial wealth must be > 0, got {x}")
    z = path_normals(cfg.seed, np.arange(cfg.paths), cfg.steps)
    a, s = wealth_coeffs(spec, strat, cfg.scheme)
    ya, ys = _deflator_coeffs(spec)
    X, Y, integral, clips = kernels.simulate_paths(x, strat.kappa, a, s, ya, ys, cfg.dt, z,
                                                   euler=cfg.scheme == "euler")
    return PathBundle(cfg.times, X, strat.kappa * X, Y, integral, cfg.seed, cfg.scheme, clips)


def iter_blocks(spec: ModelSpec, strat: ProportionalStrategy, x: float, cfg: SimConfig,
                block: int = 1024) -> Iterator[PathBundle]:
    """Same paths as :func:`simulate`, delivered in blocks to bound memory."""
    if not x > 0:
        raise InvalidModelError(f"initial wealth must be > 0, got {x}")
    a, s = wealth_coeffs(spec, strat, cfg.scheme)
    ya, ys = _deflator_coeffs(spec)
    for z in normal_blocks(cfg, block):
        X, Y, integral, clips = kernels.simulate_paths(x, strat.kappa, a, s, ya, ys, cfg.dt, z,
                                                       euler=cfg.scheme == "euler")
        yield PathBundle(cfg.times, X, strat.kappa * X, Y, integral, cfg.seed, cfg.scheme, clips)


def optimal_path_exact(spec: ModelSpec, x: float, cfg: SimConfig) -> PathBundle:
    """Sample the optimal wealth from its explicit lognormal law at the grid times."""
    require_well_posed(spec)
    if not x > 0:
        raise InvalidModelError(f"initial wealth must be > 0, got {x}")
    drift, vol = optimal_wealth_law(spec)
    kappa = optimal_strategy(spec).kappa
    t = cfg.times
    z = path_normals(cfg.seed, np.arange(cfg.paths), cfg.steps)
    w = np.zeros((cfg.paths, cfg.steps + 1))
    np.cumsum(math.sqrt(cfg.dt) * z, axis=1, out=w[:, 1:])
    X = x * np.exp(drift * t + vol * w)
    X[:, 0] = x
    ya, ys = _deflator_coeffs(spec)
    Y = np.exp(ya * t + ys * w)
    c = kappa * X
    f = Y * c
    integral = np.cumsum(0.5 * cfg.dt * (f[:, :-1] + f[:, 1:]), axis=1)[:, -1]
    return PathBundle(t, X, c, Y, integral, cfg.seed, "exact-log")


def martingale_samples(spec: ModelSpec, strat: ProportionalStrategy, x: float,
                       cfg: SimConfig) -> np.ndarray:
    """Per-path ``M_T = Y_T X_T + int_0^T Y c ds``."""
    b = simulate(spec, strat, x, cfg)
    return b.deflator[:, -1] * b.wealth[:, -1] + b.deflated_consumption_integral
