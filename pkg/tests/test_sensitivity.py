import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from carbon_radner.prices import price_moments
from carbon_radner.sensitivity import (elasticity_transform, excess_emissions_sensitivity,
                                       plan_sensitivity, price_mean_sensitivity,
                                       price_std_sensitivity, sensitivity_report,
                                       shared_elasticity)
from carbon_radner.solver import BoundaryEquilibriumError, solve_reduced

from conftest import random_config, relative_error, richardson

STD_TIMES = (1, 30, 60)


def _outputs(cfg):
    sol = solve_reduced(cfg)
    std = price_moments(cfg, sol.plan).std_by_time
    return np.concatenate([sol.plan.flat(), [sol.initial_price, sol.expected_excess],
                           std[list(STD_TIMES)]])


@pytest.fixture(scope="module")
def fd_columns(baseline):
    theta = baseline.theta()
    cols = []
    for j in range(theta.size):
        h = 1e-4 * abs(theta[j])
        e = np.zeros_like(theta)
        e[j] = 1.0
        cols.append(richardson(lambda s: _outputs(baseline.with_theta(theta + s * e)), 0.0, h))
    return np.array(cols).T  # (outputs, P)


def test_ift_matches_resolve_differences(baseline, baseline_solution, fd_columns):
    rep = sensitivity_report(baseline, baseline_solution)
    n2 = 2 * baseline.n
    ift = np.vstack([rep.dalpha_dtheta, rep.dmean_dtheta, rep.dEE_dtheta,
                     rep.dstd_dtheta_by_time[list(STD_TIMES)]])
    labels = rep.theta_labels
    for j, lab in enumerate(labels):
        assert relative_error(ift[:n2, j], fd_columns[:n2, j]) <= 1e-2, lab
        for i in range(n2, ift.shape[0]):
            assert ift[i, j] == pytest.approx(fd_columns[i, j], rel=1e-2, abs=1e-12), (lab, i)


def test_standalone_functions_agree_with_report(baseline, baseline_solution):
    rep = sensitivity_report(baseline, baseline_solution)
    assert np.array_equal(plan_sensitivity(baseline, baseline_solution), rep.dalpha_dtheta)
    assert np.allclose(price_mean_sensitivity(baseline, baseline_solution), rep.dmean_dtheta,
                       rtol=1e-14, atol=0)
    assert np.allclose(excess_emissions_sensitivity(baseline, baseline_solution), rep.dEE_dtheta,
                       rtol=1e-14, atol=0)
    assert np.allclose(price_std_sensitivity(baseline, 30, baseline_solution),
                       rep.dstd_dtheta_by_time[30], rtol=1e-14, atol=0)


def test_cost_elasticity_anchors(baseline, baseline_solution):
    rep = sensitivity_report(baseline, baseline_solution, times=())
    j = rep.column("k[c1]")
    assert rep.mean_elasticities[j] == pytest.approx(0.04, abs=0.02)
    assert rep.alpha_elasticities[0, j] == pytest.approx(-0.31, abs=0.02)
    assert rep.alpha_elasticities[1, j] == pytest.approx(-0.31, abs=0.02)


def test_regulatory_elasticities(baseline, baseline_solution):
    rep = sensitivity_report(baseline, baseline_solution, times=())
    assert rep.mean_elasticities[rep.column("a")] == pytest.approx(-0.49, abs=0.01)
    assert abs(rep.mean_elasticities[rep.column("lambda")]) <= 0.005
    low = baseline.with_regulatory(penalty=75.0)
    rep75 = sensitivity_report(low, times=())
    assert rep75.mean_elasticities[0] == pytest.approx(0.18, abs=0.02)


def test_shared_elasticity_is_sum_of_firm_columns(baseline, baseline_solution):
    rep = sensitivity_report(baseline, baseline_solution, times=())
    sl = baseline.theta_slice("rho")
    direct = rep.dmean_dtheta[sl].sum() * baseline.rho[0] / rep.price_mean
    assert shared_elasticity(baseline, rep.price_mean, rep.dmean_dtheta, "rho") == pytest.approx(
        direct, rel=1e-14)
    with pytest.raises(ValueError):
        shared_elasticity(baseline, rep.price_mean, rep.dmean_dtheta, "k")


@settings(max_examples=50, deadline=None)
@given(f=st.floats(0.1, 1e3), d=st.floats(-1e3, 1e3), th=st.floats(0.1, 1e3),
       c=st.floats(0.1, 10.0))
def test_elasticity_transform_properties(f, d, th, c):
    e = elasticity_transform(f, d, th)
    # invariant under rescaling the output, and linear in the derivative
    assert elasticity_transform(c * f, c * d, th) == pytest.approx(e, rel=1e-12, abs=1e-300)
    assert elasticity_transform(f, c * d, th) == pytest.approx(c * e, rel=1e-12, abs=1e-300)
    # rescaling theta leaves it unchanged when the derivative transforms covariantly
    assert elasticity_transform(f, d / c, c * th) == pytest.approx(e, rel=1e-12, abs=1e-300)


def test_elasticity_transform_undefined_cases():
    assert np.isnan(elasticity_transform(0.0, 1.0, 1.0))
    assert np.isnan(elasticity_transform(1.0, 1.0, 0.0))
    out = elasticity_transform(np.array([1.0, 0.0]), np.array([2.0, 2.0]), 3.0)
    assert out[0] == 6.0 and np.isnan(out[1])


def test_boundary_raises(baseline):
    cfg = baseline.with_regulatory(penalty=0.0)
    with pytest.raises(BoundaryEquilibriumError):
        sensitivity_report(cfg)


@pytest.mark.parametrize("seed", range(5))
def test_random_configs_ift_vs_fd_plan(seed):
    cfg = random_config(np.random.default_rng(100 + seed))
    sol = solve_reduced(cfg)
    if sol.diagnostics.boundary_flag:
        pytest.skip("boundary equilibrium")
    D = plan_sensitivity(cfg, sol)
    theta = cfg.theta()
    for j in range(theta.size):
        e = np.zeros_like(theta)
        e[j] = 1.0
        fd = richardson(lambda s: solve_reduced(cfg.with_theta(theta + s * e)).plan.flat(),
                        0.0, 1e-4 * abs(theta[j]))
        assert relative_error(D[:, j], fd) <= 1e-2 or np.max(np.abs(fd)) * abs(theta[j]) < 1e-9


@pytest.mark.parametrize("t", [0, 7, 59])
def test_price_on_shock_path_matches_resolve(baseline, baseline_solution, t):
    from carbon_radner.prices import price_at
    from carbon_radner.sensitivity import price_at_sensitivity
    eps = np.random.default_rng(t).standard_normal((baseline.T, baseline.n + 1))
    eps[0] = 0.0
    d = price_at_sensitivity(baseline, eps, t, baseline_solution)
    theta = baseline.theta()
    for j in range(theta.size):
        e = np.zeros_like(theta)
        e[j] = 1.0

        def p(s):
            cfg = baseline.with_theta(theta + s * e)
            return price_at(cfg, solve_reduced(cfg).plan, eps, t)

        fd = richardson(p, 0.0, 1e-4 * abs(theta[j]))
        assert d[j] * theta[j] == pytest.approx(fd * theta[j], rel=1e-2, abs=1e-7), j
    if t == 0:
        assert np.allclose(d, price_mean_sensitivity(baseline, baseline_solution), rtol=1e-12)
