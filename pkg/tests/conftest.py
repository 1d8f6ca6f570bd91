import numpy as np
import pytest

from carbon_radner import (FirmParams, MarketConfig, RegulatoryParams, baseline_config,
                           solve_reduced)


@pytest.fixture(scope="session")
def baseline():
    return baseline_config()


@pytest.fixture(scope="session")
def baseline_solution(baseline):
    return solve_reduced(baseline)


def random_config(rng, n=None, T=None):
    """Market whose equilibrium is interior with high probability."""
    n = int(rng.integers(1, 5)) if n is None else n
    T = int(rng.integers(2, 13)) if T is None else T
    lam = rng.uniform(60.0, 150.0)
    firms = []
    for i in range(n):
        mu = rng.uniform(1e7, 4e7)
        k = rng.uniform(5.0, lam / 3)
        gamma = (lam / 2 - k) / (rng.uniform(0.3, 0.6) * mu)
        firms.append(FirmParams(k, gamma, mu, rng.uniform(0.15, 0.4) * mu,
                                rng.uniform(0.3, 0.95), f"f{i}"))
    return MarketConfig(RegulatoryParams(lam, rng.uniform(0.3, 0.7), T), firms)


def toy_config(n=1, T=2, penalty=100.0, a=0.49):
    firms = [FirmParams(20.0 + 5 * i, (2.4 + 0.05 * i) * 1e-6, 2.71e7, 7.86e6, 0.85, f"f{i}")
             for i in range(n)]
    return MarketConfig(RegulatoryParams(penalty, a, T), firms)


def relative_error(a, b):
    """Normwise relative error of ``a`` against the reference ``b``."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def richardson(f, x, h):
    """Central difference of ``f`` at ``x`` along step ``h`` with one Richardson
    extrapolation (truncation error O(h^4))."""
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    d2 = (f(x + h / 2) - f(x - h / 2)) / h
    return (4 * d2 - d1) / 3
