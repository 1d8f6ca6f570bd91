"""Market parameters, abatement plans and the closed-form Gaussian cost functional.

Units at this surface are tons and euros. Per-firm quantities are indexed by the
order of ``MarketConfig.firms``.
"""

import enum
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from .gaussian import expected_positive_part


class ConfigError(ValueError):
    """Invalid market parameters."""


class DimensionError(ValueError):
    """Plan shape does not match the market."""


@dataclass(frozen=True)
class FirmParams:
    linear_cost: float  # k, EUR/ton
    quadratic_cost: float  # gamma, EUR/ton^2
    mean_emission: float  # mu, tons/period
    std_emission: float  # sigma, tons/period
    common_factor_loading: float  # rho, in (0, 1)
    name: str = ""

    def __post_init__(self):
        for attr in ("linear_cost", "quadratic_cost", "mean_emission", "std_emission"):
            v = getattr(self, attr)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{self.name or 'firm'}.{attr} must be > 0, got {v}")
        rho = self.common_factor_loading
        if not (0.0 < rho < 1.0):
            raise ConfigError(
                f"{self.name or 'firm'}.common_factor_loading must lie in (0, 1), got {rho}"
            )


@dataclass(frozen=True)
class RegulatoryParams:
    penalty: float  # lambda, EUR/ton
    cap_fraction: float  # a
    horizon: int  # T, number of periods
    # std of the terminal cap noise epsilon, in emission units (1 ton canonically)
    cap_noise_unit: float = 1.0

    def __post_init__(self):
        # penalty == 0 is admitted: it is the zero-abatement corner case
        if not (math.isfinite(self.penalty) and self.penalty >= 0):
            raise ConfigError(f"penalty must be >= 0, got {self.penalty}")
        if not (0.0 < self.cap_fraction < 1.0):
            raise ConfigError(f"cap_fraction must lie in (0, 1), got {self.cap_fraction}")
        if int(self.horizon) != self.horizon or self.horizon < 2:
            raise ConfigError(f"horizon must be an integer >= 2, got {self.horizon}")
        if not self.cap_noise_unit > 0:
            raise ConfigError("cap_noise_unit must be > 0")


THETA_GROUPS = ("lambda", "k", "gamma", "mu", "sigma", "rho", "a")


@dataclass(frozen=True)
class MarketConfig:
    regulatory: RegulatoryParams
    firms: tuple

    def __post_init__(self):
        object.__setattr__(self, "firms", tuple(self.firms))
        if len(self.firms) < 1:
            raise ConfigError("at least one firm is required")

    @property
    def n(self) -> int:
        return len(self.firms)

    @property
    def T(self) -> int:
        return int(self.regulatory.horizon)

    @property
    def penalty(self) -> float:
        return self.regulatory.penalty

    @property
    def cap_fraction(self) -> float:
        return self.regulatory.cap_fraction

    @cached_property
    def k(self) -> np.ndarray:
        return np.array([f.linear_cost for f in self.firms], dtype=float)

    @cached_property
    def gamma(self) -> np.ndarray:
        return np.array([f.quadratic_cost for f in self.firms], dtype=float)

    @cached_property
    def mu(self) -> np.ndarray:
        return np.array([f.mean_emission for f in self.firms], dtype=float)

    @cached_property
    def sigma(self) -> np.ndarray:
        return np.array([f.std_emission for f in self.firms], dtype=float)

    @cached_property
    def rho(self) -> np.ndarray:
        return np.array([f.common_factor_loading for f in self.firms], dtype=float)

    @cached_property
    def firm_names(self) -> list:
        return [f.name or f"f{i + 1}" for i, f in enumerate(self.firms)]

    @property
    def cap_noise_sq(self) -> float:
        """Variance (u (1-a))^2 of the cap noise term (1-a) epsilon."""
        u = self.regulatory.cap_noise_unit
        return (u * (1.0 - self.cap_fraction)) ** 2

    # -- parameter vector theta = (lambda, k.., gamma.., mu.., sigma.., rho.., a)

    def theta(self) -> np.ndarray:
        return np.concatenate(
            [[self.penalty], self.k, self.gamma, self.mu, self.sigma, self.rho,
             [self.cap_fraction]]
        )

    def theta_labels(self) -> list:
        names = self.firm_names
        labels = ["lambda"]
        for group in ("k", "gamma", "mu", "sigma", "rho"):
            labels += [f"{group}[{nm}]" for nm in names]
        labels.append("a")
        return labels

    def theta_slice(self, group: str) -> slice:
        n = self.n
        if group == "lambda":
            return slice(0, 1)
        if group == "a":
            return slice(5 * n + 1, 5 * n + 2)
        j = ("k", "gamma", "mu", "sigma", "rho").index(group)
        return slice(1 + j * n, 1 + (j + 1) * n)

    def with_theta(self, theta: Sequence[float]) -> "MarketConfig":
        theta = np.asarray(theta, dtype=float)
        n = self.n
        if theta.shape != (5 * n + 2,):
            raise DimensionError(f"theta must have length {5 * n + 2}")
        k, g, mu, sg, rh = (theta[1 + j * n: 1 + (j + 1) * n] for j in range(5))
        firms = tuple(
            replace(f, linear_cost=float(k[i]), quadratic_cost=float(g[i]),
                    mean_emission=float(mu[i]), std_emission=float(sg[i]),
                    common_factor_loading=float(rh[i]))
            for i, f in enumerate(self.firms)
        )
        reg = replace(self.regulatory, penalty=float(theta[0]),
                      cap_fraction=float(theta[-1]))
        return MarketConfig(reg, firms)

    def with_regulatory(self, **changes) -> "MarketConfig":
        return MarketConfig(replace(self.regulatory, **changes), self.firms)

    def with_firms(self, **changes) -> "MarketConfig":
        """Set the same field(s) on every firm (shared-parameter sweeps)."""
        return MarketConfig(self.regulatory, tuple(replace(f, **changes) for f in self.firms))

    def with_firm(self, index: int, **changes) -> "MarketConfig":
        firms = list(self.firms)
        firms[index] = replace(firms[index], **changes)
        return MarketConfig(self.regulatory, tuple(firms))

    def in_units(self, tons_per_unit: float) -> "MarketConfig":
        """Same market with emissions expressed in units of ``tons_per_unit`` tons."""
        f = float(tons_per_unit)
        firms = tuple(
            replace(fp, linear_cost=fp.linear_cost * f, quadratic_cost=fp.quadratic_cost * f * f,
                    mean_emission=fp.mean_emission / f, std_emission=fp.std_emission / f)
            for fp in self.firms
        )
        reg = replace(self.regulatory, penalty=self.penalty * f,
                      cap_noise_unit=self.regulatory.cap_noise_unit / f)
        return MarketConfig(reg, firms)


class PlanForm(enum.Enum):
    REDUCED = "reduced"
    FULL = "full"


@dataclass(frozen=True, eq=False)
class AbatementPlan:
    """Per-firm abatement fractions.

    ``values`` has shape (n, 2) holding (alpha(0), alpha(1)) in reduced form, or
    (n, T) in full form. Reduced plans repeat alpha(1) over t = 1..T-1.
    """

    values: np.ndarray
    form: PlanForm = PlanForm.REDUCED

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise DimensionError(f"plan values must be 2-d, got shape {v.shape}")
        if self.form is PlanForm.REDUCED and v.shape[1] != 2:
            raise DimensionError(f"reduced plan needs shape (n, 2), got {v.shape}")
        if not np.all(np.isfinite(v)) or v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("plan entries must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def reduced(cls, values) -> "AbatementPlan":
        """From an (n, 2) array or the flat ordering (a1(0), a1(1), ..., an(0), an(1))."""
        v = np.asarray(values, dtype=float)
        if v.ndim == 1:
            if v.size % 2:
                raise DimensionError("flat reduced plan must have even length")
            v = v.reshape(-1, 2)
        return cls(v, PlanForm.REDUCED)

    @classmethod
    def full(cls, values) -> "AbatementPlan":
        return cls(np.asarray(values, dtype=float), PlanForm.FULL)

    @classmethod
    def constant(cls, n: int, value: float) -> "AbatementPlan":
        return cls(np.full((n, 2), float(value)), PlanForm.REDUCED)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def flat(self) -> np.ndarray:
        if self.form is not PlanForm.REDUCED:
            raise DimensionError("flat() is defined for reduced plans only")
        return self.values.reshape(-1).copy()

    def expand(self, T: int) -> "AbatementPlan":
        if self.form is PlanForm.FULL:
            if self.values.shape[1] != T:
                raise DimensionError(f"full plan has {self.values.shape[1]} periods, expected {T}")
            return self
        out = np.empty((self.n, T))
        out[:, 0] = self.values[:, 0]
        out[:, 1:] = self.values[:, 1][:, None]
        return AbatementPlan(out, PlanForm.FULL)

    def collapse(self) -> "AbatementPlan":
        """Reduced coordinates (alpha(0), alpha(1)) of a full plan."""
        if self.form is PlanForm.REDUCED:
            return self
        return AbatementPlan(self.values[:, :2].copy(), PlanForm.REDUCED)


@dataclass(frozen=True)
class NetEmissionMoments:
    mean: float  # m(alpha), tons
    per_period_loading_norm_sq: float  # ||b(1, alpha)||^2
    total_norm_sq: float  # ||B(T, alpha)||^2


def full_values(config: MarketConfig, plan: AbatementPlan) -> np.ndarray:
    if plan.n != config.n:
        raise DimensionError(f"plan has {plan.n} firms, market has {config.n}")
    return plan.expand(config.T).values


def _gaps(config, plan):
    # c_it = 1 - alpha_i(t) - a
    return 1.0 - full_values(config, plan) - config.cap_fraction


def _loadings_sq(config, c):
    common = (config.sigma * np.sqrt(config.rho)) @ c
    idio = (config.sigma ** 2 * (1.0 - config.rho)) @ (c * c)
    return common * common + idio


def mean_net_emissions(config: MarketConfig, plan: AbatementPlan) -> float:
    c = _gaps(config, plan)
    return float(config.mu @ c.sum(axis=1))


def loading_norm_sq(config: MarketConfig, plan: AbatementPlan, t: int) -> float:
    """||b(t, alpha)||^2 for t in 1..T-1."""
    if not 1 <= t <= config.T - 1:
        raise ValueError(f"t must lie in 1..{config.T - 1}, got {t}")
    c = _gaps(config, plan)
    return float(_loadings_sq(config, c[:, t:t + 1])[0])


def loading_norms_sq(config: MarketConfig, plan: AbatementPlan) -> np.ndarray:
    """||b(t, alpha)||^2 for t = 1..T-1 as an array of length T-1."""
    return _loadings_sq(config, _gaps(config, plan)[:, 1:])


def total_norm_sq(config: MarketConfig, plan: AbatementPlan) -> float:
    return float(loading_norms_sq(config, plan).sum() + config.cap_noise_sq)


def net_emission_moments(config: MarketConfig, plan: AbatementPlan) -> NetEmissionMoments:
    c = _gaps(config, plan)
    b2 = _loadings_sq(config, c[:, 1:])
    return NetEmissionMoments(
        mean=float(config.mu @ c.sum(axis=1)),
        per_period_loading_norm_sq=float(b2[0]),
        total_norm_sq=float(b2.sum() + config.cap_noise_sq),
    )


def abatement_cost(config: MarketConfig, plan: AbatementPlan) -> float:
    A = full_values(config, plan)
    k, g, mu, sg = config.k, config.gamma, config.mu, config.sigma
    # period 0 emissions are deterministic (no shock at t = 0)
    first = k * A[:, 0] * mu + 0.5 * g * (A[:, 0] * mu) ** 2
    rest = (k * mu)[:, None] * A[:, 1:] + 0.5 * (g * (mu ** 2 + sg ** 2))[:, None] * A[:, 1:] ** 2
    return float(first.sum() + rest.sum())


def expected_excess_emissions(config: MarketConfig, plan: AbatementPlan) -> float:
    mom = net_emission_moments(config, plan)
    return expected_positive_part(mom.mean, math.sqrt(mom.total_norm_sq))


def social_cost(config: MarketConfig, plan: AbatementPlan) -> float:
    """R(alpha) = AC(alpha) + lambda * EE(alpha)."""
    return abatement_cost(config, plan) + config.penalty * expected_excess_emissions(config, plan)
