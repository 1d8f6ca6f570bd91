"""Allowance price path, its mean and its variance for constant-over-time plans.

Shock layout: row s of a shock array is eps_s = (eps^0_s, eps^1_s, ..., eps^n_s)
with the common factor first; row 0 must be zero.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .gaussian import normal_cdf, owens_t_difference
from .model import AbatementPlan, DimensionError, MarketConfig, PlanForm


@dataclass(frozen=True)
class PriceMoments:
    mean: float
    variance_by_time: np.ndarray  # t = 0..T
    ell_by_time: np.ndarray  # t = 0..T

    @property
    def std_by_time(self) -> np.ndarray:
        return np.sqrt(self.variance_by_time)


@dataclass(frozen=True)
class _Summary:
    m: float
    b: np.ndarray  # per-period loading vector b(1, alpha), length n + 1
    b2: float
    n0: float  # cap-noise variance (u (1 - a))^2
    Q: float


def _as_reduced(config: MarketConfig, plan: AbatementPlan) -> AbatementPlan:
    if plan.n != config.n:
        raise DimensionError(f"plan has {plan.n} firms, market has {config.n}")
    if plan.form is PlanForm.REDUCED:
        return plan
    A = plan.expand(config.T).values
    if np.any(A[:, 1:] != A[:, 1:2]):
        raise ValueError("price closed forms need a plan constant over t = 1..T-1")
    return plan.collapse()


def _summary(config: MarketConfig, plan: AbatementPlan) -> _Summary:
    plan = _as_reduced(config, plan)
    a0, a1 = plan.values[:, 0], plan.values[:, 1]
    a, T = config.cap_fraction, config.T
    c0, c1 = 1.0 - a0 - a, 1.0 - a1 - a
    sg, rho = config.sigma, config.rho
    b = np.concatenate([[float(sg * np.sqrt(rho) @ c1)], sg * np.sqrt(1.0 - rho) * c1])
    b2 = float(b @ b)
    n0 = config.cap_noise_sq
    m = float(config.mu @ (c0 + (T - 1) * c1))
    return _Summary(m, b, b2, n0, (T - 1) * b2 + n0)


def _check_t(t, hi):
    if int(t) != t or not 0 <= t <= hi:
        raise ValueError(f"t must be an integer in 0..{hi}, got {t}")
    return int(t)


def ell_from_summary(T: int, Q: float, n0: float, t: int) -> float:
    if t == T:
        return 0.0
    b2 = (Q - n0) / (T - 1)
    num = (T - 1 - t) * b2 + n0
    den = (T - 1 + t) * b2 + n0
    return math.sqrt(num / den)


def information_ratio(config: MarketConfig, plan: AbatementPlan, t: int) -> float:
    t = _check_t(t, config.T)
    s = _summary(config, plan)
    return ell_from_summary(config.T, s.Q, s.n0, t)


def price_at(config: MarketConfig, plan: AbatementPlan, shocks, t: int) -> float:
    """Price at time t given the shock rows eps_0..eps_t."""
    T = config.T
    t = _check_t(t, T - 1)
    eps = np.asarray(shocks, dtype=float)
    if eps.ndim != 2 or eps.shape[1] != config.n + 1 or eps.shape[0] < t + 1:
        raise DimensionError(f"shocks must have shape (>= {t + 1}, {config.n + 1})")
    if np.any(eps[0] != 0.0):
        raise ValueError("eps_0 must be zero")
    s = _summary(config, plan)
    num = s.m + float(s.b @ eps[1:t + 1].sum(axis=0))
    return config.penalty * normal_cdf(num / math.sqrt((T - 1 - t) * s.b2 + s.n0))


def price_paths(config: MarketConfig, plan: AbatementPlan, projections) -> np.ndarray:
    """Vectorized prices for t = 0..T-1.

    ``projections`` has shape (N, T-1): entry [j, s-1] is b(1, alpha) . eps_s on
    path j. Returns an (N, T) array.
    """
    T = config.T
    z = np.asarray(projections, dtype=float)
    if z.ndim != 2 or z.shape[1] != T - 1:
        raise DimensionError(f"projections must have shape (N, {T - 1})")
    s = _summary(config, plan)
    cum = np.concatenate([np.zeros((z.shape[0], 1)), np.cumsum(z, axis=1)], axis=1)
    den = np.sqrt((T - 1 - np.arange(T)) * s.b2 + s.n0)
    return config.penalty * special.ndtr((s.m + cum) / den)


def loading_vector(config: MarketConfig, plan: AbatementPlan) -> np.ndarray:
    """b(1, alpha) in the (common, idiosyncratic...) shock layout."""
    return _summary(config, plan).b.copy()


def price_mean(config: MarketConfig, plan: AbatementPlan) -> float:
    s = _summary(config, plan)
    return config.penalty * normal_cdf(s.m / math.sqrt(s.Q))


def variance_from_summary(lam: float, x: float, ell: float, t: int, T: int) -> float:
    if t == 0:
        return 0.0
    if t == T:
        p = normal_cdf(x)
        return lam * lam * p * normal_cdf(-x)
    return 2.0 * lam * lam * owens_t_difference(x, ell, 1.0)


def price_variance(config: MarketConfig, plan: AbatementPlan, t: int) -> float:
    """Variance of P_t as 2 lambda^2 [T(x, 1) - T(x, ell_t)] (Owen's T)."""
    T = config.T
    t = _check_t(t, T)
    s = _summary(config, plan)
    x = s.m / math.sqrt(s.Q)
    return variance_from_summary(config.penalty, x, ell_from_summary(T, s.Q, s.n0, t), t, T)


def price_moments(config: MarketConfig, plan: AbatementPlan) -> PriceMoments:
    T = config.T
    s = _summary(config, plan)
    x = s.m / math.sqrt(s.Q)
    ell = np.array([ell_from_summary(T, s.Q, s.n0, t) for t in range(T + 1)])
    var = np.array([variance_from_summary(config.penalty, x, ell[t], t, T) for t in range(T + 1)])
    return PriceMoments(config.penalty * normal_cdf(x), var, ell)
