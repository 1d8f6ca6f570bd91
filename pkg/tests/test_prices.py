import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from carbon_radner.model import AbatementPlan
from carbon_radner.prices import (information_ratio, loading_vector, price_at, price_mean,
                                  price_moments, price_paths, price_variance)

from conftest import random_config


def _direct_moments(cfg, plan, t):
    # E and Var of lambda * Phi((m + Z) / d_t) with Z ~ N(0, t |b|^2), by 1-d quadrature
    mp.mp.dps = 30
    vals = plan.values
    c0, c1 = 1 - vals[:, 0] - cfg.cap_fraction, 1 - vals[:, 1] - cfg.cap_fraction
    m = float(cfg.mu @ (c0 + (cfg.T - 1) * c1))
    common = float(cfg.sigma * np.sqrt(cfg.rho) @ c1)
    b2 = common ** 2 + float(np.sum(cfg.sigma ** 2 * (1 - cfg.rho) * c1 ** 2))
    n0 = cfg.cap_noise_sq
    d = math.sqrt((cfg.T - 1 - t) * b2 + n0)
    sz = math.sqrt(t * b2)
    lam = cfg.penalty

    def moment(p):
        f = lambda z: (lam * mp.ncdf((m + sz * z) / d)) ** p * mp.npdf(z)
        # breakpoints at the bulk of Z and at the kink of Phi, which can be far apart
        pts = sorted({-8.0, -3.0, 0.0, 3.0, 8.0} | {-m / sz + c for c in (-3.0, 0.0, 3.0)})
        return mp.quad(f, [-mp.inf] + pts + [mp.inf])

    e1, e2 = moment(1), moment(2)
    return float(e1), float(e2 - e1 * e1)


def test_price_at_time_zero_is_mean(baseline, baseline_solution):
    plan = baseline_solution.plan
    shocks = np.zeros((1, baseline.n + 1))
    assert price_at(baseline, plan, shocks, 0) == pytest.approx(price_mean(baseline, plan), rel=1e-14)
    assert price_mean(baseline, plan) == pytest.approx(75.02, abs=0.05)


def test_price_increases_with_common_shock(baseline, baseline_solution):
    plan = baseline_solution.plan
    shocks = np.zeros((baseline.T, baseline.n + 1))
    p = [price_at(baseline, plan, shocks, 5)]
    for bump in (0.5, 1.0, 2.0):
        shocks[1:6, 0] = bump
        p.append(price_at(baseline, plan, shocks, 5))
    assert np.all(np.diff(p) > 0)


def test_price_paths_match_scalar_formula(baseline, baseline_solution):
    rng = np.random.default_rng(3)
    plan = baseline_solution.plan
    eps = rng.standard_normal((baseline.T, baseline.n + 1))
    eps[0] = 0.0
    b = loading_vector(baseline, plan)
    paths = price_paths(baseline, plan, (eps[1:] @ b)[None, :])
    for t in (0, 1, 17, baseline.T - 1):
        assert paths[0, t] == pytest.approx(price_at(baseline, plan, eps, t), rel=1e-12)


def test_price_mean_examples(baseline):
    from carbon_radner.solver import solve_reduced
    looser = baseline.with_regulatory(cap_fraction=0.39)
    assert price_mean(looser, solve_reduced(looser).plan) == pytest.approx(82.48, abs=0.1)
    # plan with zero expected net position: price is half the penalty
    at_cap = AbatementPlan.reduced(np.full((baseline.n, 2), 1 - baseline.cap_fraction))
    assert price_mean(baseline, at_cap) == pytest.approx(baseline.penalty / 2, rel=1e-15)


def test_variance_endpoints(baseline, baseline_solution):
    plan = baseline_solution.plan
    assert price_variance(baseline, plan, 0) == 0.0
    p = price_mean(baseline, plan) / baseline.penalty
    assert price_variance(baseline, plan, baseline.T) == pytest.approx(
        baseline.penalty ** 2 * p * (1 - p), rel=1e-13)
    mom = price_moments(baseline, plan)
    assert np.all(np.diff(mom.variance_by_time) > 0)


@pytest.mark.parametrize("t", [1, 10, 30, 59])
def test_variance_matches_direct_quadrature(baseline, baseline_solution, t):
    plan = baseline_solution.plan
    mean, var = _direct_moments(baseline, plan, t)
    assert mean == pytest.approx(price_mean(baseline, plan), rel=1e-12)
    assert abs(price_variance(baseline, plan, t) - var) <= 1e-9 * baseline.penalty ** 2


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), frac=st.floats(0.05, 0.95))
def test_variance_matches_direct_quadrature_random(seed, frac):
    rng = np.random.default_rng(seed)
    cfg = random_config(rng)
    plan = AbatementPlan.reduced(rng.uniform(0, 1 - cfg.cap_fraction, (cfg.n, 2)))
    t = max(1, min(cfg.T - 1, int(round(frac * cfg.T))))
    _, var = _direct_moments(cfg, plan, t)
    assert abs(price_variance(cfg, plan, t) - var) <= 1e-9 * cfg.penalty ** 2


def test_information_ratio(baseline, baseline_solution):
    plan = baseline_solution.plan
    assert information_ratio(baseline, plan, 0) == pytest.approx(1.0, rel=1e-15)
    assert information_ratio(baseline, plan, baseline.T) == 0.0
    ell = [information_ratio(baseline, plan, t) for t in range(baseline.T + 1)]
    assert np.all(np.diff(ell) < 0)
    # with emissions pinned at the cap only the cap noise is left, so ell = 1 for t < T
    at_cap = AbatementPlan.reduced(np.full((baseline.n, 2), 1 - baseline.cap_fraction))
    assert information_ratio(baseline, at_cap, 30) == 1.0
    assert price_variance(baseline, at_cap, 30) == 0.0


def test_rejects_bad_time(baseline, baseline_solution):
    with pytest.raises(ValueError):
        price_variance(baseline, baseline_solution.plan, baseline.T + 1)
    with pytest.raises(ValueError):
        price_at(baseline, baseline_solution.plan, np.zeros((61, 9)), baseline.T)
