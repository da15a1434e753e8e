"""Market and preference parameters for the infinite-horizon Merton problem.

Everything downstream reads its parameters from a :class:`ModelSpec`; the risk
premium is always recomputed from ``(r, mu, sigma)`` and never stored from input.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path


class InvalidModelError(ValueError):
    """Raised for parameter sets outside the supported regime."""


class IllPosedModelError(InvalidModelError):
    """The finiteness condition fails, so the value function is not finite."""

    def __init__(self, margin: float):
        self.margin = margin
        super().__init__(f"model is ill-posed: finiteness margin {margin:.17g} <= 0")


@dataclass(frozen=True)
class MarketParams:
    r: float
    mu: float
    sigma: float

    def __post_init__(self):
        for name in ("r", "mu", "sigma"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidModelError(f"{name} must be finite")
        if self.sigma <= 0:
            raise InvalidModelError(f"sigma must be > 0, got {self.sigma}")


@dataclass(frozen=True)
class Preferences:
    rho: float
    gamma: float

    def __post_init__(self):
        if not (math.isfinite(self.rho) and math.isfinite(self.gamma)):
            raise InvalidModelError("rho and gamma must be finite")
        # gamma == 1 is log utility and needs a different functional form
        if self.gamma <= 1:
            raise InvalidModelError(f"gamma must be > 1, got {self.gamma}")


def risk_premium(market: MarketParams) -> float:
    """Excess drift per unit of volatility, ``(mu - r) / sigma``."""
    if not market.sigma > 0:
        raise InvalidModelError(f"sigma must be > 0, got {market.sigma}")
    return (market.mu - market.r) / market.sigma


@dataclass(frozen=True)
class ModelSpec:
    market: MarketParams
    prefs: Preferences

    @classmethod
    def from_values(cls, r, mu, sigma, rho, gamma) -> "ModelSpec":
        return cls(MarketParams(float(r), float(mu), float(sigma)),
                   Preferences(float(rho), float(gamma)))

    # flat accessors, used everywhere in the formulas
    @property
    def r(self) -> float:
        return self.market.r

    @property
    def mu(self) -> float:
        return self.market.mu

    @property
    def sigma(self) -> float:
        return self.market.sigma

    @property
    def rho(self) -> float:
        return self.prefs.rho

    @property
    def gamma(self) -> float:
        return self.prefs.gamma

    @property
    def lam(self) -> float:
        return risk_premium(self.market)

    @property
    def well_posed(self) -> bool:
        return is_well_posed(self)

    def with_rho(self, rho: float) -> "ModelSpec":
        return ModelSpec(self.market, Preferences(rho, self.gamma))

    def to_dict(self) -> dict:
        return {"r": self.r, "mu": self.mu, "sigma": self.sigma,
                "rho": self.rho, "gamma": self.gamma}

    @classmethod
    def from_dict(cls, data: dict) -> "ModelSpec":
        missing = [k for k in ("r", "mu", "sigma", "rho", "gamma") if k not in data]
        if missing:
            raise InvalidModelError(f"model is missing keys: {', '.join(missing)}")
        # any "lambda" key in the input is ignored on purpose
        return cls.from_values(data["r"], data["mu"], data["sigma"],
                               data["rho"], data["gamma"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidModelError(f"model file is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise InvalidModelError("model file must hold a JSON object")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ModelSpec":
        return cls.from_json(Path(path).read_text())

    def digest(self) -> str:
        """Short sha256 of the canonical parameter JSON."""
        canon = json.dumps({k: repr(v) for k, v in self.to_dict().items()}, sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def margin(spec: ModelSpec) -> float:
    """Slack in the finiteness condition: ``rho - (1-gamma)(r + lam^2/(2 gamma))``."""
    g = spec.gamma
    return spec.rho - (1.0 - g) * (spec.r + spec.lam ** 2 / (2.0 * g))


def is_well_posed(spec: ModelSpec) -> bool:
    return margin(spec) > 0


def require_well_posed(spec: ModelSpec) -> None:
    m = margin(spec)
    if not m > 0:
        raise IllPosedModelError(m)


def kappa_max(spec: ModelSpec) -> float:
    """Supremum of consumption fractions with finite objective at the Merton risky fraction.

    Equal to ``rho/(gamma-1) + r + lam^2/(2 gamma)``, i.e. ``margin / (gamma - 1)``.
    """
    require_well_posed(spec)
    g = spec.gamma
    return spec.rho / (g - 1.0) + spec.r + spec.lam ** 2 / (2.0 * g)
