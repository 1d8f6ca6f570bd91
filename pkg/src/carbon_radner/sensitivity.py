"""Implicit-function-theorem sensitivities of the equilibrium and its elasticities.

Every price and excess-emission output is a function of (m, Q, lambda, a) with
m the mean and Q the variance of net terminal emissions. Total derivatives are
formed as explicit theta-partials plus the plan response
``dalpha/dtheta = -H^{-1} J``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import foc
from .gaussian import gauss_band_integral, normal_cdf, normal_pdf
from .model import MarketConfig
from .prices import ell_from_summary, variance_from_summary
from .solver import BoundaryEquilibriumError, EquilibriumSolution, solve_reduced

def elasticity_transform(value, derivative, theta_component):
    """(df/dtheta) * theta / f; NaN where f or theta is zero (undefined)."""
    value = np.asarray(value, dtype=float)
    derivative = np.asarray(derivative, dtype=float)
    theta_component = np.asarray(theta_component, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = derivative * theta_component / value
    undefined = (value == 0.0) | (theta_component == 0.0)
    out = np.where(undefined, np.nan, out)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class _Totals:
    """Total theta-derivatives of the reduced summary (m, Q, lambda, n0)."""

    m: float
    Q: float
    n0: float
    dm: np.ndarray
    dQ: np.ndarray
    dlam: np.ndarray
    dn0: np.ndarray


@dataclass(frozen=True)
class SensitivityReport:
    theta: np.ndarray
    theta_labels: list
    plan: np.ndarray  # flat reduced plan, length 2n
    price_mean: float
    std_by_time: np.ndarray  # sigma_{P_t}, t = 0..T
    expected_excess: float
    dalpha_dtheta: np.ndarray  # (2n, P)
    dmean_dtheta: np.ndarray  # (P,)
    dstd_dtheta_by_time: np.ndarray  # (T + 1, P); row 0 undefined (NaN)
    dEE_dtheta: np.ndarray  # (P,)

    @property
    def alpha_elasticities(self) -> np.ndarray:
        return elasticity_transform(self.plan[:, None], self.dalpha_dtheta, self.theta[None, :])

    @property
    def mean_elasticities(self) -> np.ndarray:
        return elasticity_transform(self.price_mean, self.dmean_dtheta, self.theta)

    @property
    def std_elasticities(self) -> np.ndarray:
        return elasticity_transform(self.std_by_time[:, None], self.dstd_dtheta_by_time,
                                    self.theta[None, :])

    @property
    def EE_elasticities(self) -> np.ndarray:
        return elasticity_transform(self.expected_excess, self.dEE_dtheta, self.theta)

    def column(self, label: str) -> int:
        return self.theta_labels.index(label)


def _interior_solution(config, solution):
    if solution is None:
        solution = solve_reduced(config)
    if solution.diagnostics.boundary_flag:
        raise BoundaryEquilibriumError(
            "equilibrium lies on the box boundary; IFT sensitivities are undefined")
    return solution


def _plan_sensitivity(config, solution):
    sysm = foc.sensitivity_system(config, solution.plan)
    try:
        cf = linalg.cho_factor(sysm.hessian)
    except linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("Hessian at the equilibrium is not positive definite") from exc
    return -linalg.cho_solve(cf, sysm.param_jacobian)


def plan_sensitivity(config: MarketConfig, solution: EquilibriumSolution = None) -> np.ndarray:
    """dalpha/dtheta, shape (2n, 5n + 2)."""
    return _plan_sensitivity(config, _interior_solution(config, solution))


def _totals(config, solution, dalpha):
    st = foc._state(config, solution.plan)
    pd = foc._param_derivatives(config, st)
    P = dalpha.shape[1]
    dlam = np.zeros(P)
    dlam[0] = 1.0
    u = config.regulatory.cap_noise_unit
    dn0 = np.zeros(P)
    dn0[-1] = -2.0 * u * u * (1.0 - config.cap_fraction)
    return _Totals(
        m=st.m, Q=st.Q, n0=config.cap_noise_sq,
        dm=pd.dm_dtheta + st.dm @ dalpha,
        dQ=pd.dQ_dtheta + st.dQ @ dalpha,
        dlam=dlam, dn0=dn0,
    )


def _x_derivative(tot):
    s = math.sqrt(tot.Q)
    return tot.dm / s - tot.m * tot.dQ / (2.0 * s ** 3)


def _mean_derivative(config, tot):
    x = tot.m / math.sqrt(tot.Q)
    return normal_cdf(x) * tot.dlam + config.penalty * normal_pdf(x) * _x_derivative(tot)


def _EE_derivative(tot):
    s = math.sqrt(tot.Q)
    x = tot.m / s
    return normal_cdf(x) * tot.dm + normal_pdf(x) * tot.dQ / (2.0 * s)


def _ell_derivative(T, tot, t):
    if t == 0 or t == T:
        return np.zeros_like(tot.dm)
    b2 = (tot.Q - tot.n0) / (T - 1)
    p, q = T - 1 - t, T - 1 + t
    N, D = p * b2 + tot.n0, q * b2 + tot.n0
    ell = math.sqrt(N / D)
    dN = (p * tot.dQ + t * tot.dn0) / (T - 1)
    dD = (q * tot.dQ - t * tot.dn0) / (T - 1)
    return 0.5 * ell * (dN / N - dD / D)


def _variance_derivative(config, tot, t):
    """d sigma^2_{P_t} / d theta by differentiating the integral representation."""
    T, lam = config.T, config.penalty
    if t == 0:
        return np.zeros_like(tot.dm)
    x = tot.m / math.sqrt(tot.Q)
    ell = ell_from_summary(T, tot.Q, tot.n0, t)
    var = variance_from_summary(lam, x, ell, t, T)
    c = lam * lam / math.pi
    dvar_dx = -c * x * gauss_band_integral(x, ell, 1.0)
    h_ell = math.exp(-0.5 * x * x * (1.0 + ell * ell)) / (1.0 + ell * ell)
    dvar_dell = -c * h_ell
    out = dvar_dx * _x_derivative(tot) + dvar_dell * _ell_derivative(T, tot, t)
    if lam > 0:
        out = out + (2.0 * var / lam) * tot.dlam
    return out


def price_mean_sensitivity(config: MarketConfig, solution: EquilibriumSolution = None) -> np.ndarray:
    solution = _interior_solution(config, solution)
    return _mean_derivative(config, _totals(config, solution, _plan_sensitivity(config, solution)))


def excess_emissions_sensitivity(config: MarketConfig,
                                 solution: EquilibriumSolution = None) -> np.ndarray:
    solution = _interior_solution(config, solution)
    return _EE_derivative(_totals(config, solution, _plan_sensitivity(config, solution)))


def price_variance_sensitivity(config: MarketConfig, t: int,
                               solution: EquilibriumSolution = None) -> np.ndarray:
    if int(t) != t or not 0 <= t <= config.T:
        raise ValueError(f"t must lie in 0..{config.T}")
    solution = _interior_solution(config, solution)
    tot = _totals(config, solution, _plan_sensitivity(config, solution))
    return _variance_derivative(config, tot, int(t))


def price_std_sensitivity(config: MarketConfig, t: int,
                          solution: EquilibriumSolution = None) -> np.ndarray:
    """d sigma_{P_t} / d theta for t in 1..T."""
    if int(t) != t or not 1 <= t <= config.T:
        raise ValueError(f"t must lie in 1..{config.T} (sigma_P0 = 0)")
    solution = _interior_solution(config, solution)
    tot = _totals(config, solution, _plan_sensitivity(config, solution))
    x = tot.m / math.sqrt(tot.Q)
    ell = ell_from_summary(config.T, tot.Q, tot.n0, int(t))
    sd = math.sqrt(variance_from_summary(config.penalty, x, ell, int(t), config.T))
    if sd == 0.0:
        raise ZeroDivisionError(f"sigma_P at t={t} is zero; its derivative is undefined")
    return _variance_derivative(config, tot, int(t)) / (2.0 * sd)


def price_at_sensitivity(config: MarketConfig, shocks, t: int,
                         solution: EquilibriumSolution = None) -> np.ndarray:
    """dP_t/dtheta on a fixed shock path (rows eps_0..eps_t), plan response included."""
    T, n = config.T, config.n
    if int(t) != t or not 0 <= t <= T - 1:
        raise ValueError(f"t must lie in 0..{T - 1}")
    t = int(t)
    solution = _interior_solution(config, solution)
    eps = np.asarray(shocks, dtype=float)
    if eps.ndim != 2 or eps.shape[1] != n + 1 or eps.shape[0] < t + 1:
        raise ValueError(f"shocks must have shape (>= {t + 1}, {n + 1})")
    dalpha = _plan_sensitivity(config, solution)
    tot = _totals(config, solution, dalpha)
    P = dalpha.shape[1]

    sg, rho = config.sigma, config.rho
    c1 = 1.0 - solution.plan.values[:, 1] - config.cap_fraction
    dc1 = -dalpha[1::2]  # (n, P)
    dc1[:, -1] -= 1.0
    v, w = sg * np.sqrt(rho), sg * np.sqrt(1.0 - rho)
    dv, dw = np.zeros((n, P)), np.zeros((n, P))
    idx = np.arange(n)
    sig, rh = config.theta_slice("sigma").start, config.theta_slice("rho").start
    dv[idx, sig + idx], dw[idx, sig + idx] = np.sqrt(rho), np.sqrt(1.0 - rho)
    dv[idx, rh + idx] = sg / (2.0 * np.sqrt(rho))
    dw[idx, rh + idx] = -sg / (2.0 * np.sqrt(1.0 - rho))
    b = np.concatenate([[v @ c1], w * c1])
    db = np.vstack([(dv * c1[:, None] + v[:, None] * dc1).sum(axis=0),
                    dw * c1[:, None] + w[:, None] * dc1])  # (n + 1, P)

    S = eps[1:t + 1].sum(axis=0)
    d = math.sqrt((T - 1 - t) * float(b @ b) + tot.n0)
    dd = ((T - 1 - t) * 2.0 * (b @ db) + tot.dn0) / (2.0 * d)
    z = (tot.m + float(b @ S)) / d
    dz = (tot.dm + S @ db) / d - z * dd / d
    return normal_cdf(z) * tot.dlam + config.penalty * normal_pdf(z) * dz


def sensitivity_report(config: MarketConfig, solution: EquilibriumSolution = None,
                       times=None) -> SensitivityReport:
    """All sensitivities at the equilibrium; ``times`` limits the std rows computed."""
    solution = _interior_solution(config, solution)
    T = config.T
    dalpha = _plan_sensitivity(config, solution)
    tot = _totals(config, solution, dalpha)
    x = tot.m / math.sqrt(tot.Q)
    P = dalpha.shape[1]
    times = range(1, T + 1) if times is None else times

    std = np.full(T + 1, np.nan)
    dstd = np.full((T + 1, P), np.nan)
    std[0] = 0.0
    for t in times:
        if t == 0:
            continue
        ell = ell_from_summary(T, tot.Q, tot.n0, t)
        sd = math.sqrt(variance_from_summary(config.penalty, x, ell, t, T))
        std[t] = sd
        if sd > 0:
            dstd[t] = _variance_derivative(config, tot, t) / (2.0 * sd)

    return SensitivityReport(
        theta=config.theta(),
        theta_labels=config.theta_labels(),
        plan=solution.plan.flat(),
        price_mean=solution.initial_price,
        std_by_time=std,
        expected_excess=solution.expected_excess,
        dalpha_dtheta=dalpha,
        dmean_dtheta=_mean_derivative(config, tot),
        dstd_dtheta_by_time=dstd,
        dEE_dtheta=_EE_derivative(tot),
    )


def group_derivative(config: MarketConfig, deriv: np.ndarray, group: str) -> np.ndarray:
    """Derivative along a bump shared by every firm: sum of the group's columns."""
    return np.asarray(deriv)[..., config.theta_slice(group)].sum(axis=-1)


def shared_elasticity(config: MarketConfig, value, deriv, group: str):
    """Elasticity w.r.t. a parameter shared by all firms (theta taken as the
    common value; requires every firm to carry the same value)."""
    vals = config.theta()[config.theta_slice(group)]
    if not np.all(vals == vals[0]):
        raise ValueError(f"{group} is not shared across firms")
    return elasticity_transform(value, group_derivative(config, deriv, group), vals[0])
