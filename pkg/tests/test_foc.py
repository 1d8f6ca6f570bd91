import numpy as np
import pytest

from carbon_radner import foc
from carbon_radner.gaussian import normal_cdf, normal_pdf
from carbon_radner.model import AbatementPlan, social_cost
from carbon_radner.solver import RESIDUAL_TOL, residual_scale

from conftest import random_config, relative_error, richardson


def _fd_gradient(cfg, x, h=1e-3):
    f = lambda y: social_cost(cfg, AbatementPlan.reduced(y))
    return np.array([_along(f, x, h * e) for e in np.eye(x.size)])


def _along(f, x, step):
    """Directional derivative of f along ``step`` divided by its length."""
    h = float(np.max(np.abs(step)))
    return richardson(lambda s: f(x + s * step / h), 0.0, h)


def _random_point(rng, cfg):
    return rng.uniform(0.05, 0.95, 2 * cfg.n)


@pytest.mark.parametrize("seed", range(20))
def test_residual_matches_fd_of_social_cost(seed):
    rng = np.random.default_rng(seed)
    cfg = random_config(rng)
    x = _random_point(rng, cfg)
    plan = AbatementPlan.reduced(x)
    res = foc.foc_residual(cfg, plan)
    assert relative_error(res * foc.residual_weights(cfg), _fd_gradient(cfg, x)) <= 1e-5
    assert relative_error(foc.gradient(cfg, plan), res * foc.residual_weights(cfg)) <= 1e-13


@pytest.mark.parametrize("seed", range(20))
def test_hessian_and_param_jacobian_match_fd(seed):
    rng = np.random.default_rng(100 + seed)
    cfg = random_config(rng)
    x = _random_point(rng, cfg)
    plan = AbatementPlan.reduced(x)
    H = foc.hessian(cfg, plan)
    assert np.allclose(H, H.T, rtol=1e-12, atol=0)
    g = lambda y: foc.gradient(cfg, AbatementPlan.reduced(y))
    fdH = np.array([_along(g, x, 1e-3 * e) for e in np.eye(x.size)]).T
    assert relative_error(H, fdH) <= 1e-5

    J = foc.param_jacobian(cfg, plan)
    th = cfg.theta()
    for j in range(th.size):
        e = np.zeros_like(th)
        e[j] = 1e-4 * abs(th[j])
        fd = _along(lambda t: foc.gradient(cfg.with_theta(t), plan), th, e)
        scale = max(np.max(np.abs(fd)), np.max(np.abs(J)) * 1e-10)
        assert np.max(np.abs(J[:, j] - fd)) <= 1e-5 * scale, cfg.theta_labels()[j]


def test_residual_vanishes_at_equilibrium(baseline, baseline_solution):
    res = foc.foc_residual(baseline, baseline_solution.plan) / residual_scale(baseline)
    assert np.max(np.abs(res)) <= RESIDUAL_TOL


def test_zero_penalty_limits(baseline):
    cfg = baseline.with_regulatory(penalty=0.0)
    zero = AbatementPlan.constant(8, 0.0)
    res = foc.foc_residual(cfg, zero)
    assert np.allclose(res, np.repeat(cfg.k * cfg.mu, 2), rtol=1e-14)
    x = AbatementPlan.reduced(np.random.default_rng(1).uniform(0, 1, 16))
    H = foc.hessian(cfg, x)
    diag = np.empty(16)
    diag[0::2] = cfg.gamma * cfg.mu ** 2
    diag[1::2] = (cfg.T - 1) * cfg.gamma * (cfg.mu ** 2 + cfg.sigma ** 2)
    assert np.array_equal(H, np.diag(np.diag(H)))
    assert np.allclose(np.diag(H), diag, rtol=1e-14)


def test_param_jacobian_closed_columns(baseline, baseline_solution):
    plan = baseline_solution.plan
    st = foc._state(baseline, plan)
    J = foc.param_jacobian(baseline, plan) / foc.residual_weights(baseline)[:, None]
    lam_col = J[:, 0]
    assert np.allclose(lam_col[0::2], -st.Phi * baseline.mu, rtol=1e-12)
    assert np.allclose(lam_col[1::2], -st.Phi * baseline.mu - st.phi * st.r / st.s, rtol=1e-12)
    assert st.Phi == pytest.approx(normal_cdf(st.x)) and st.phi == pytest.approx(normal_pdf(st.x))
    kcol = J[:, baseline.theta_labels().index("k[c3]")]
    expect = np.zeros(16)
    expect[4:6] = baseline.mu[2]
    assert np.allclose(kcol, expect, rtol=1e-14, atol=0)


def test_hessian_positive_definite_at_equilibrium(baseline, baseline_solution):
    assert np.linalg.eigvalsh(foc.hessian(baseline, baseline_solution.plan))[0] > 0
