"""Quadratic-cost calibration to a target initial price, and emission-level lint."""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .model import ConfigError, MarketConfig
from .solver import BoundaryEquilibriumError, solve_reduced


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class CalibrationSpec:
    target_price: float  # EUR/ton
    gamma_offsets: tuple  # EUR/ton^2, added to the common level
    bracket: tuple = (1e-8, 1e-4)  # common level, EUR/ton^2
    tolerance: float = 0.01  # EUR/ton on the initial price

    def __post_init__(self):
        object.__setattr__(self, "gamma_offsets", tuple(float(g) for g in self.gamma_offsets))
        lo, hi = self.bracket
        if not 0 < lo < hi:
            raise ConfigError(f"bracket must satisfy 0 < low < high, got {self.bracket}")
        if not self.target_price > 0:
            raise ConfigError("target_price must be > 0")


@dataclass(frozen=True)
class CalibrationResult:
    gamma: np.ndarray
    level: float
    initial_price: float
    evaluations: int
    config: MarketConfig = field(repr=False)


def _with_gamma(config, gamma):
    out = config
    for i, g in enumerate(gamma):
        out = out.with_firm(i, quadratic_cost=float(g))
    return out


def calibrate_gamma(config: MarketConfig, spec: CalibrationSpec) -> CalibrationResult:
    """Common gamma level such that the equilibrium P0 hits ``spec.target_price``.

    ``config`` supplies every parameter except gamma (its gamma values are ignored).
    P0 is increasing in the level, so a sign change on the bracket is required.
    """
    n = config.n
    offsets = np.asarray(spec.gamma_offsets, dtype=float)
    if offsets.shape != (n,):
        raise ConfigError(f"gamma_offsets must have length {n}")
    lam = config.penalty
    if not 0.0 < spec.target_price < lam:
        raise CalibrationError(
            f"target price {spec.target_price} is unreachable: P0 lies strictly in (0, {lam})")
    lo, hi = spec.bracket
    if lo + offsets.min() <= 0:
        raise CalibrationError("bracket low end gives a non-positive gamma")

    count = 0
    warm = {}

    def gap(level):
        nonlocal count
        count += 1
        cfg = _with_gamma(config, level + offsets)
        sol = solve_reduced(cfg, x0=warm.get("x"))
        if sol.diagnostics.boundary_flag:
            raise BoundaryEquilibriumError(
                f"boundary equilibrium at gamma level {level:.6g} during calibration")
        warm["x"] = sol.plan.flat()
        return sol.initial_price - spec.target_price

    f_lo, f_hi = gap(lo), gap(hi)
    if f_lo * f_hi > 0:
        raise CalibrationError(
            f"bracket {spec.bracket} does not straddle the target: "
            f"P0 - target = {f_lo:.4g} and {f_hi:.4g}")
    level = optimize.brentq(gap, lo, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps)
    gamma = level + offsets
    cfg = _with_gamma(config, gamma)
    price = solve_reduced(cfg).initial_price
    if abs(price - spec.target_price) > spec.tolerance:
        raise CalibrationError(f"calibrated P0 {price:.6f} misses target by more than "
                               f"{spec.tolerance}")
    return CalibrationResult(gamma, float(level), float(price), count, cfg)


@dataclass(frozen=True)
class EmissionTargets:
    """Declared aggregate emission statistics the per-firm parameters should match."""

    aggregate_mean: float = 13e9  # tons over the compliance period
    aggregate_std: float = 4.5e8  # tons
    common_factor_corr: float = 0.92  # sqrt(rho)
    rel_tol: float = 0.01


def aggregate_emission_moments(config: MarketConfig):
    """Mean and std of total BAU emissions sum_i sum_t e^i_t (eps_0 = 0)."""
    T = config.T
    mean = T * float(config.mu.sum())
    v = config.sigma * np.sqrt(config.rho)
    w = config.sigma ** 2 * (1.0 - config.rho)
    var = (T - 1) * (float(v.sum()) ** 2 + float(w.sum()))
    return mean, math.sqrt(var)


def lint_emission_calibration(config: MarketConfig,
                              targets: EmissionTargets = EmissionTargets()) -> list:
    """Compare per-firm emission parameters with declared aggregates; warnings only."""
    out = []
    mean, std = aggregate_emission_moments(config)
    tol = targets.rel_tol
    if abs(mean / targets.aggregate_mean - 1.0) > tol:
        out.append(f"aggregate mean {mean:.4g} t differs from declared "
                   f"{targets.aggregate_mean:.4g} t by more than {tol:.0%}")
    if abs(std / targets.aggregate_std - 1.0) > tol:
        out.append(f"aggregate std {std:.4g} t differs from declared "
                   f"{targets.aggregate_std:.4g} t by more than {tol:.0%}")
    corr = np.sqrt(config.rho)
    bad = np.abs(corr / targets.common_factor_corr - 1.0) > tol
    for name, c in zip(np.asarray(config.firm_names)[bad], corr[bad]):
        out.append(f"firm {name}: sqrt(rho) = {c:.4f} differs from declared "
                   f"{targets.common_factor_corr}")
    for msg in out:
        warnings.warn(msg, stacklevel=2)
    return out
