"""Reduced first-order system of the social cost and its analytic derivatives.

Decision vector ordering is (a1(0), a1(1), ..., an(0), an(1)): entry 2i is firm
i's period-0 abatement, entry 2i+1 its abatement over t = 1..T-1.

``foc_residual`` is the per-period optimality system; its alpha(1) rows equal the
corresponding gradient entries of R divided by (T - 1). ``gradient``,
``hessian`` and ``param_jacobian`` are exact derivatives of R itself, so the
Hessian is symmetric.
"""

import math
from dataclasses import dataclass

import numpy as np

from .gaussian import normal_cdf, normal_pdf
from .model import AbatementPlan, DimensionError, MarketConfig, PlanForm


@dataclass(frozen=True)
class _State:
    """Intermediate quantities of the reduced closed form at one (alpha, theta)."""

    a0: np.ndarray
    a1: np.ndarray
    c0: np.ndarray
    c1: np.ndarray
    v: np.ndarray  # sigma sqrt(rho)
    w: np.ndarray  # sigma^2 (1 - rho)
    S: float  # common-factor loading sum
    r: np.ndarray
    m: float
    Q: float  # ||B(T, alpha)||^2
    s: float
    x: float  # signal-to-noise ratio m / s
    Phi: float
    phi: float
    dm: np.ndarray  # grad_alpha m
    dQ: np.ndarray  # grad_alpha Q
    gAC: np.ndarray  # grad_alpha AC


def _state(config: MarketConfig, plan: AbatementPlan) -> _State:
    if plan.form is not PlanForm.REDUCED:
        plan = plan.collapse()
    if plan.n != config.n:
        raise DimensionError(f"plan has {plan.n} firms, market has {config.n}")
    T, a = config.T, config.cap_fraction
    k, g, mu, sg, rho = config.k, config.gamma, config.mu, config.sigma, config.rho
    a0, a1 = plan.values[:, 0], plan.values[:, 1]
    c0, c1 = 1.0 - a0 - a, 1.0 - a1 - a
    v = sg * np.sqrt(rho)
    w = sg ** 2 * (1.0 - rho)
    S = float(v @ c1)
    r = w * c1 + v * S
    b2 = S * S + float(w @ (c1 * c1))
    Q = (T - 1) * b2 + config.cap_noise_sq
    s = math.sqrt(Q)
    m = float(mu @ (c0 + (T - 1) * c1))
    x = m / s

    n = config.n
    dm = np.empty(2 * n)
    dm[0::2] = -mu
    dm[1::2] = -(T - 1) * mu
    dQ = np.zeros(2 * n)
    dQ[1::2] = -2.0 * (T - 1) * r
    gAC = np.empty(2 * n)
    gAC[0::2] = k * mu + g * mu ** 2 * a0
    gAC[1::2] = (T - 1) * (k * mu + g * (mu ** 2 + sg ** 2) * a1)
    return _State(a0, a1, c0, c1, v, w, S, r, m, Q, s, x, normal_cdf(x), normal_pdf(x),
                  dm, dQ, gAC)


def foc_residual(config: MarketConfig, plan: AbatementPlan) -> np.ndarray:
    """Per-period optimality residual (zero exactly at an interior optimum)."""
    st = _state(config, plan)
    lam, mu = config.penalty, config.mu
    out = np.empty(2 * config.n)
    out[0::2] = config.k * mu + config.gamma * mu ** 2 * st.a0 - lam * st.Phi * mu
    out[1::2] = (
        config.k * mu
        + config.gamma * (mu ** 2 + config.sigma ** 2) * st.a1
        - lam * st.Phi * mu
        - lam / st.s * st.phi * st.r
    )
    return out


def residual_weights(config: MarketConfig) -> np.ndarray:
    """Factors turning ``foc_residual`` into ``gradient`` (1 and T - 1 per firm)."""
    wts = np.ones(2 * config.n)
    wts[1::2] = config.T - 1
    return wts


def gradient(config: MarketConfig, plan: AbatementPlan) -> np.ndarray:
    st = _state(config, plan)
    ds = st.dQ / (2.0 * st.s)
    return st.gAC + config.penalty * (st.Phi * st.dm + st.phi * ds)


def _hessian(config: MarketConfig, st: _State) -> np.ndarray:
    T, n = config.T, config.n
    g, mu, sg = config.gamma, config.mu, config.sigma
    H = np.zeros((2 * n, 2 * n))
    idx0, idx1 = np.arange(0, 2 * n, 2), np.arange(1, 2 * n, 2)
    H[idx0, idx0] = g * mu ** 2
    H[idx1, idx1] = (T - 1) * g * (mu ** 2 + sg ** 2)

    lam = config.penalty
    if lam == 0.0:
        return H
    d2Q = np.zeros((2 * n, 2 * n))
    d2Q[np.ix_(idx1, idx1)] = 2.0 * (T - 1) * (np.outer(st.v, st.v) + np.diag(st.w))
    s, x, phi = st.s, st.x, st.phi
    ds = st.dQ / (2.0 * s)
    d2s = d2Q / (2.0 * s) - np.outer(st.dQ, st.dQ) / (4.0 * s ** 3)
    dm = st.dm
    mixed = np.outer(dm, ds)
    HEE = (
        (phi / s) * np.outer(dm, dm)
        - (phi * x / s) * (mixed + mixed.T)
        + (phi * x * x / s) * np.outer(ds, ds)
        + phi * d2s
    )
    H += lam * HEE
    return 0.5 * (H + H.T)


def hessian(config: MarketConfig, plan: AbatementPlan) -> np.ndarray:
    """Hessian of R in the reduced coordinates (symmetric)."""
    return _hessian(config, _state(config, plan))


@dataclass(frozen=True)
class ParamDerivatives:
    """Explicit theta-derivatives of the reduced primitives, alpha held fixed.

    Column order follows ``MarketConfig.theta_labels``.
    """

    dm_dtheta: np.ndarray  # (P,)
    dQ_dtheta: np.ndarray  # (P,)
    dgradm_dtheta: np.ndarray  # (2n, P)
    dgradQ_dtheta: np.ndarray  # (2n, P)
    dgradAC_dtheta: np.ndarray  # (2n, P)


def _param_derivatives(config: MarketConfig, st: _State) -> ParamDerivatives:
    T, n = config.T, config.n
    k, g, mu, sg, rho = config.k, config.gamma, config.mu, config.sigma, config.rho
    P = 5 * n + 2
    dm = np.zeros(P)
    dQ = np.zeros(P)
    dgm = np.zeros((2 * n, P))
    dgQ = np.zeros((2 * n, P))
    dgAC = np.zeros((2 * n, P))
    rows0, rows1 = np.arange(0, 2 * n, 2), np.arange(1, 2 * n, 2)
    sl = config.theta_slice

    # linear cost k_i
    ck = np.arange(P)[sl("k")]
    dgAC[rows0, ck] = mu
    dgAC[rows1, ck] = (T - 1) * mu
    # quadratic cost gamma_i
    cg = np.arange(P)[sl("gamma")]
    dgAC[rows0, cg] = mu ** 2 * st.a0
    dgAC[rows1, cg] = (T - 1) * (mu ** 2 + sg ** 2) * st.a1
    # mean emission mu_i
    cm = np.arange(P)[sl("mu")]
    dgAC[rows0, cm] = k + 2.0 * g * mu * st.a0
    dgAC[rows1, cm] = (T - 1) * (k + 2.0 * g * mu * st.a1)
    dm[cm] = st.c0 + (T - 1) * st.c1
    dgm[rows0, cm] = -1.0
    dgm[rows1, cm] = -(T - 1.0)

    # sigma_i and rho_i act on Q through v_i = sigma sqrt(rho), w_i = sigma^2 (1 - rho)
    c1, v, w, S, r = st.c1, st.v, st.w, st.S, st.r
    dQ_dv = 2.0 * (T - 1) * S * c1
    dQ_dw = (T - 1) * c1 * c1
    # d r_j / d v_i = delta_ij S + v_j c_i ; d r_j / d w_i = delta_ij c_j
    dr_dv = np.outer(v, c1) + S * np.eye(n)  # [j, i]
    dr_dw = np.diag(c1)
    dv_ds, dw_ds = np.sqrt(rho), 2.0 * sg * (1.0 - rho)
    dv_dr, dw_dr = sg / (2.0 * np.sqrt(rho)), -sg ** 2
    cs = np.arange(P)[sl("sigma")]
    cr = np.arange(P)[sl("rho")]
    dQ[cs] = dQ_dv * dv_ds + dQ_dw * dw_ds
    dQ[cr] = dQ_dv * dv_dr + dQ_dw * dw_dr
    dgQ[np.ix_(rows1, cs)] = -2.0 * (T - 1) * (dr_dv * dv_ds + dr_dw * dw_ds)
    dgQ[np.ix_(rows1, cr)] = -2.0 * (T - 1) * (dr_dv * dv_dr + dr_dw * dw_dr)
    dgAC[rows1, cs] = (T - 1) * 2.0 * g * sg * st.a1

    # cap fraction a
    ca = P - 1
    u = config.regulatory.cap_noise_unit
    dm[ca] = -T * mu.sum()
    dQ[ca] = -2.0 * (T - 1) * r.sum() - 2.0 * u * u * (1.0 - config.cap_fraction)
    dgQ[rows1, ca] = -2.0 * (T - 1) * (-w - v * v.sum())
    return ParamDerivatives(dm, dQ, dgm, dgQ, dgAC)


def _param_jacobian(config: MarketConfig, st: _State, pd: ParamDerivatives) -> np.ndarray:
    lam = config.penalty
    s, x, Phi, phi = st.s, st.x, st.Phi, st.phi
    ds = st.dQ / (2.0 * s)
    d_s = pd.dQ_dtheta / (2.0 * s)  # (P,)
    d_x = pd.dm_dtheta / s - st.m * d_s / s ** 2
    d_ds = pd.dgradQ_dtheta / (2.0 * s) - np.outer(st.dQ, d_s) / (2.0 * s ** 2)
    J = pd.dgradAC_dtheta.copy()
    J[:, 0] += Phi * st.dm + phi * ds  # lambda column
    J += lam * (
        phi * np.outer(st.dm, d_x)
        + Phi * pd.dgradm_dtheta
        - x * phi * np.outer(ds, d_x)
        + phi * d_ds
    )
    return J


def param_jacobian(config: MarketConfig, plan: AbatementPlan) -> np.ndarray:
    """d(grad_alpha R)/d(theta) at fixed alpha, shape (2n, 5n + 2)."""
    st = _state(config, plan)
    return _param_jacobian(config, st, _param_derivatives(config, st))


@dataclass(frozen=True)
class SensitivitySystem:
    hessian: np.ndarray
    param_jacobian: np.ndarray
    theta_layout: list


def sensitivity_system(config: MarketConfig, plan: AbatementPlan) -> SensitivitySystem:
    st = _state(config, plan)
    pd = _param_derivatives(config, st)
    return SensitivitySystem(_hessian(config, st), _param_jacobian(config, st, pd),
                             config.theta_labels())
