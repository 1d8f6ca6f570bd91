"""Social-planner minimization of R over the abatement box.

``solve_reduced`` is the production path (2n variables, projected Newton).
``solve_full_horizon`` optimizes all nT entries with a spectral projected
gradient method and exists to check that the optimum is flat over t >= 1.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import foc
from .gaussian import expected_positive_part, normal_cdf, normal_pdf
from .model import AbatementPlan, MarketConfig, PlanForm

# entries closer than this to 0 or 1 count as on the boundary
TOL_BOX = 1e-9
# sup-norm tolerance on the scaled first-order residual
RESIDUAL_TOL = 1e-10
MAX_FULL_VARIABLES = 10_000


class SolverError(RuntimeError):
    """Raised when an iteration budget runs out; carries the last iterate."""

    def __init__(self, message, plan=None, residual_norm=float("nan")):
        super().__init__(message)
        self.plan = plan
        self.residual_norm = residual_norm


class BoundaryEquilibriumError(RuntimeError):
    """The optimum sits on the box boundary, so IFT sensitivities do not exist."""


@dataclass(frozen=True)
class SolverDiagnostics:
    iterations: int
    residual_norm: float
    boundary_flag: bool
    hessian_min_eigenvalue: float


@dataclass(frozen=True)
class EquilibriumSolution:
    config: MarketConfig = field(repr=False)
    plan: AbatementPlan
    initial_price: float
    expected_excess: float
    social_cost: float
    diagnostics: SolverDiagnostics

    @property
    def signal_to_noise(self) -> float:
        st = foc._state(self.config, self.plan)
        return st.x


def residual_scale(config: MarketConfig) -> np.ndarray:
    """Per-entry scale of the per-period residual, mu_i * max(lambda, k_i)."""
    sc = config.mu * np.maximum(config.penalty, config.k)
    return np.repeat(sc, 2)


def scaled_residual(config: MarketConfig, plan: AbatementPlan) -> np.ndarray:
    """Per-period residual divided by ``residual_scale``, projected on the box.

    Entries pinned at a bound whose gradient pushes outward are zeroed, so the
    sup norm vanishes exactly at a constrained minimizer.
    """
    x = plan.flat() if plan.form is PlanForm.REDUCED else plan.collapse().flat()
    res = foc.foc_residual(config, plan)
    res = np.where((x <= 0.0) & (res > 0.0), 0.0, res)
    res = np.where((x >= 1.0) & (res < 0.0), 0.0, res)
    return res / residual_scale(config)


def _reduced_cost(config, x):
    st = foc._state(config, AbatementPlan.reduced(x))
    k, g, mu, sg, T = config.k, config.gamma, config.mu, config.sigma, config.T
    ac = np.sum(k * mu * st.a0 + 0.5 * g * (st.a0 * mu) ** 2)
    ac += (T - 1) * np.sum(k * mu * st.a1 + 0.5 * g * (mu ** 2 + sg ** 2) * st.a1 ** 2)
    return float(ac + config.penalty * expected_positive_part(st.m, st.s))


def initial_guess(config: MarketConfig) -> np.ndarray:
    """Myopic guess from the first-order condition with Phi replaced by 1/2."""
    a0 = (0.5 * config.penalty - config.k) / (config.gamma * config.mu)
    a0 = np.clip(a0, 0.0, 1.0 - config.cap_fraction)
    return np.repeat(a0, 2)


def _free_mask(x, g):
    at_lo = (x <= TOL_BOX) & (g > 0)
    at_hi = (x >= 1.0 - TOL_BOX) & (g < 0)
    return ~(at_lo | at_hi)


def rounding_floor(config: MarketConfig, x: np.ndarray, H: np.ndarray) -> float:
    """Smallest scaled residual resolvable at ``x``: one ulp per entry pushed through H.

    Matters only near-deterministic optima (m ~ 0 with s of order the cap noise),
    where H reaches 1e17 and a 1e-10 target is below float64 resolution.
    """
    spread = np.abs(H) @ np.maximum(np.abs(x), np.finfo(float).tiny)
    return float(np.max(8.0 * np.finfo(float).eps * spread / residual_scale(config)))


def _newton_direction(H, g):
    try:
        cf = linalg.cho_factor(H)
        return -linalg.cho_solve(cf, g)
    except linalg.LinAlgError:
        # not expected for convex R; shift onto the positive-definite cone
        w = np.linalg.eigvalsh(H)
        shift = abs(w[0]) + 1e-8 * max(abs(w[-1]), 1.0)
        return -np.linalg.solve(H + shift * np.eye(len(g)), g)


def solve_reduced(config: MarketConfig, x0=None, max_iter: int = 200,
                  tol: float = RESIDUAL_TOL) -> EquilibriumSolution:
    """Minimize R over [0, 1]^{2n} by projected Newton with Armijo backtracking."""
    x = initial_guess(config) if x0 is None else np.clip(np.asarray(x0, float).ravel(), 0, 1)
    if x.shape != (2 * config.n,):
        raise ValueError(f"x0 must have length {2 * config.n}")
    f = _reduced_cost(config, x)
    res_norm = math.inf
    for it in range(max_iter + 1):
        plan = AbatementPlan.reduced(x)
        res_norm = float(np.max(np.abs(scaled_residual(config, plan))))
        H = foc.hessian(config, plan)
        if res_norm <= max(tol, rounding_floor(config, x, H)):
            break
        if it == max_iter:
            raise SolverError(f"no convergence after {max_iter} iterations "
                              f"(scaled residual {res_norm:.3e})", plan, res_norm)
        g = foc.gradient(config, plan)
        free = _free_mask(x, g)
        d = np.zeros_like(x)
        if free.any():
            d[free] = _newton_direction(H[np.ix_(free, free)], g[free])
        else:
            d = -g / np.diag(H)
        step = 1.0
        floor = 1e-14 * max(abs(f), 1.0)  # rounding noise in R near the optimum
        while True:
            xn = np.clip(x + step * d, 0.0, 1.0)
            fn = _reduced_cost(config, xn)
            if fn <= f + 1e-4 * float(g @ (xn - x)) + floor:
                break
            step *= 0.5
            if step < 1e-12:
                raise SolverError("line search failed", plan, res_norm)
        x, f = xn, fn

    plan = AbatementPlan.reduced(x)
    return _package(config, plan, it, res_norm)


def _package(config, plan, iterations, res_norm):
    st = foc._state(config, plan)
    x = plan.flat()
    boundary = bool(np.any(x <= TOL_BOX) or np.any(x >= 1.0 - TOL_BOX))
    eig = float(np.linalg.eigvalsh(foc.hessian(config, plan))[0])
    return EquilibriumSolution(
        config=config,
        plan=plan,
        initial_price=config.penalty * st.Phi,
        expected_excess=expected_positive_part(st.m, st.s),
        social_cost=_reduced_cost(config, x),
        diagnostics=SolverDiagnostics(iterations, res_norm, boundary, eig),
    )


# -- full horizon ---------------------------------------------------------------

def full_gradient(config: MarketConfig, A: np.ndarray):
    """(R, dR/dA) for a full (n, T) plan array."""
    k, g, mu, sg, rho = config.k, config.gamma, config.mu, config.sigma, config.rho
    v = sg * np.sqrt(rho)
    w = sg ** 2 * (1.0 - rho)
    c = 1.0 - A - config.cap_fraction
    St = v @ c[:, 1:]  # common loading per period t >= 1
    Q = float(np.sum(St ** 2) + np.sum(w[:, None] * c[:, 1:] ** 2) + config.cap_noise_sq)
    s = math.sqrt(Q)
    m = float(mu @ c.sum(axis=1))
    z = m / s
    Phi, phi = normal_cdf(z), normal_pdf(z)

    gr = np.empty_like(A)
    gr[:, 0] = k * mu + g * mu ** 2 * A[:, 0]
    gr[:, 1:] = (k * mu)[:, None] + (g * (mu ** 2 + sg ** 2))[:, None] * A[:, 1:]
    dQ = np.zeros_like(A)
    dQ[:, 1:] = -2.0 * (v[:, None] * St[None, :] + w[:, None] * c[:, 1:])
    gr += config.penalty * (-Phi * mu[:, None] + phi * dQ / (2.0 * s))

    ac = np.sum(k * mu * A[:, 0] + 0.5 * g * (mu * A[:, 0]) ** 2)
    ac += np.sum((k * mu)[:, None] * A[:, 1:]
                 + 0.5 * (g * (mu ** 2 + sg ** 2))[:, None] * A[:, 1:] ** 2)
    R = float(ac + config.penalty * (m * Phi + s * phi))
    return R, gr


def solve_full_horizon(config: MarketConfig, x0=None, max_iter: int = 200_000,
                       tol: float = 1e-8, memory: int = 10) -> AbatementPlan:
    """Minimize R over [0, 1]^{nT} by nonmonotone spectral projected gradient.

    Convergence is declared when the sup norm of the projected gradient step,
    with the gradient scaled per firm by ``residual_scale``, falls below ``tol``.
    """
    n, T = config.n, config.T
    if n * T > MAX_FULL_VARIABLES:
        raise ValueError(f"n*T = {n * T} exceeds the full-horizon limit {MAX_FULL_VARIABLES}")
    if x0 is None:
        # start off the reduced manifold so flatness is a result, not an input
        base = initial_guess(config)[0::2]
        ramp = np.linspace(-0.05, 0.05, T)
        A = np.clip(base[:, None] + ramp[None, :], 0.0, 1.0)
    else:
        A = np.clip(np.asarray(x0, float).reshape(n, T), 0.0, 1.0)

    # diagonal preconditioner: per-entry curvature of AC
    D = np.empty((n, T))
    D[:, 0] = config.gamma * config.mu ** 2
    D[:, 1:] = (config.gamma * (config.mu ** 2 + config.sigma ** 2))[:, None]
    scale = config.mu[:, None] * np.maximum(config.penalty, config.k)[:, None]

    f, g = full_gradient(config, A)
    history = [f]
    lam_bb = 1.0
    for it in range(max_iter):
        pg = np.clip(A - g / D, 0.0, 1.0) - A
        crit = float(np.max(np.abs(pg * D / scale)))
        if crit <= tol:
            return AbatementPlan.full(A)
        d = np.clip(A - lam_bb * g / D, 0.0, 1.0) - A
        fref = max(history[-memory:])
        gd = float(np.sum(g * d))
        step = 1.0
        while True:
            An = A + step * d
            fn, gn = full_gradient(config, An)
            if fn <= fref + 1e-4 * step * gd + 1e-14 * abs(fref):
                break
            step *= 0.5
            if step < 1e-14:
                raise SolverError("full-horizon line search failed", AbatementPlan.full(A), crit)
        sv, yv = An - A, gn - g
        sy = float(np.sum(sv * yv))
        lam_bb = float(np.sum(sv * sv * D)) / sy if sy > 0 else 1.0
        lam_bb = min(max(lam_bb, 1e-6), 1e6)
        A, f, g = An, fn, gn
        history.append(f)
    raise SolverError(f"full-horizon solver did not converge in {max_iter} iterations",
                      AbatementPlan.full(A), crit)
