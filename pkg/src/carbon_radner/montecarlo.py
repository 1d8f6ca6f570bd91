"""Monte Carlo oracle for the closed forms and the equilibrium conditions.

Shocks are drawn in fixed-size blocks of paths; block j uses the stream
``SeedSequence(seed, spawn_key=(j,))``. A path's shocks therefore depend only on
(seed, path index), never on thread count or on the total number of paths, and
any block can be regenerated on demand instead of being stored.
"""

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import AbatementPlan, MarketConfig
from .prices import _as_reduced, loading_vector, price_mean, price_moments, price_paths

BLOCK_SIZE = 2048
THREADS_ENV = "CARBON_RADNER_THREADS"
SE_GATE = 3.0


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    n = int(raw)
    if n < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


@dataclass(frozen=True)
class ShockBlock:
    start: int  # first path index
    common: np.ndarray  # (B, T-1): eps^0_t, t = 1..T-1
    idio: np.ndarray  # (B, T-1, n): eps^i_t
    cap: np.ndarray  # (B,): terminal cap shock eps


def _block_shocks(seed, j, n, T, antithetic, n_paths):
    start = j * BLOCK_SIZE
    size = min(BLOCK_SIZE, n_paths - start)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(j,))))
    if antithetic:
        half = rng.standard_normal((BLOCK_SIZE // 2, T - 1, n + 1))
        cap_half = rng.standard_normal(BLOCK_SIZE // 2)
        # consecutive paths (2k, 2k + 1) are mirror images
        eps = np.stack([half, -half], axis=1).reshape(BLOCK_SIZE, T - 1, n + 1)
        cap = np.stack([cap_half, -cap_half], axis=1).reshape(BLOCK_SIZE)
    else:
        eps = rng.standard_normal((BLOCK_SIZE, T - 1, n + 1))
        cap = rng.standard_normal(BLOCK_SIZE)
    eps, cap = eps[:size], cap[:size]
    return ShockBlock(start, eps[:, :, 0], eps[:, :, 1:], cap)


def emissions_from_shocks(config: MarketConfig, block: ShockBlock) -> np.ndarray:
    """BAU emissions e^i_t for t = 1..T-1, shape (B, T-1, n)."""
    sg, rho = config.sigma, config.rho
    return (config.mu + sg * np.sqrt(1.0 - rho) * block.idio
            + (sg * np.sqrt(rho)) * block.common[:, :, None])


@dataclass
class PathEnsemble:
    config: MarketConfig = field(repr=False)
    plan: AbatementPlan = field(repr=False)
    n_paths: int
    seed: int
    antithetic: bool
    bau_total: np.ndarray  # (N,) sum_i sum_t e^i_t
    firm_emissions: np.ndarray  # (N, n) E^{i,alpha}_T after abatement
    firm_allocation: np.ndarray  # (N, n) A^i_T
    firm_abatement_cost: np.ndarray  # (N, n) realized abatement cost
    net_position: np.ndarray  # (N,) Y = E_T - A_T
    settlement: np.ndarray  # (N,) xi in {0, lambda}
    prices: np.ndarray  # (N, T) P_t for t = 0..T-1

    def shock_blocks(self):
        """Regenerate the shock blocks in path order."""
        n, T = self.config.n, self.config.T
        nb = -(-self.n_paths // BLOCK_SIZE)
        for j in range(nb):
            yield _block_shocks(self.seed, j, n, T, self.antithetic, self.n_paths)

    @property
    def terminal_positions(self) -> np.ndarray:
        """Constructed terminal holdings Q^i_T = E^i - A^i - Y / n, shape (N, n)."""
        n = self.config.n
        return self.firm_emissions - self.firm_allocation - self.net_position[:, None] / n

    def price_at_time(self, t: int) -> np.ndarray:
        """P_t on every path for t = 0..T (P_T is the settlement)."""
        if t == self.config.T:
            return self.settlement
        return self.prices[:, t]


def _simulate_block(config, A, b, seed, j, antithetic, n_paths):
    n, T, a = config.n, config.T, config.cap_fraction
    blk = _block_shocks(seed, j, n, T, antithetic, n_paths)
    e = emissions_from_shocks(config, blk)  # (B, T-1, n)
    mu, k, g = config.mu, config.k, config.gamma
    a0 = A[:, 0]
    a_rest = A[:, 1:].T  # (T-1, n)

    firm_bau = mu + e.sum(axis=1)
    firm_E = (1.0 - a0) * mu + np.einsum("btn,tn->bn", e, 1.0 - a_rest)
    u = config.regulatory.cap_noise_unit
    cap_term = (1.0 - a) * u * blk.cap
    firm_A = a * firm_bau + cap_term[:, None] / n
    abated = a_rest[None] * e
    firm_ac = (k * a0 * mu + 0.5 * g * (a0 * mu) ** 2
               + k * abated.sum(axis=1) + 0.5 * g * (abated ** 2).sum(axis=1))
    Y = firm_E.sum(axis=1) - (a * firm_bau.sum(axis=1) + cap_term)
    xi = np.where(Y > 0.0, config.penalty, 0.0)
    z = blk.common * b[0] + blk.idio @ b[1:]
    P = price_paths(config, AbatementPlan.reduced(A[:, :2]), z)
    return firm_bau.sum(axis=1), firm_E, firm_A, firm_ac, Y, xi, P


def simulate(config: MarketConfig, plan: AbatementPlan, n_paths: int, seed: int,
             antithetic: bool = False, threads: int = None) -> PathEnsemble:
    """Simulate emissions, settlement and the price martingale under ``plan``."""
    if int(n_paths) != n_paths or n_paths < 1:
        raise ValueError(f"n_paths must be a positive integer, got {n_paths}")
    if antithetic and n_paths % 2:
        raise ValueError("antithetic sampling needs an even number of paths")
    reduced = _as_reduced(config, plan)
    A = reduced.expand(config.T).values
    b = loading_vector(config, reduced)
    nb = -(-n_paths // BLOCK_SIZE)
    threads = thread_count() if threads is None else threads

    def work(j):
        return _simulate_block(config, A, b, seed, j, antithetic, n_paths)

    if threads > 1 and nb > 1:
        with ThreadPoolExecutor(max_workers=min(threads, nb)) as ex:
            parts = list(ex.map(work, range(nb)))
    else:
        parts = [work(j) for j in range(nb)]
    cols = [np.concatenate(c, axis=0) for c in zip(*parts)]
    return PathEnsemble(config, reduced, int(n_paths), int(seed), antithetic, *cols)


# -- estimators ------------------------------------------------------------------

def mean_and_se(samples: np.ndarray, antithetic: bool = False):
    """Sample mean and its standard error; antithetic pairs are averaged first."""
    x = np.asarray(samples, dtype=float)
    if antithetic:
        x = x.reshape(-1, 2, *x.shape[1:]).mean(axis=1)
    N = x.shape[0]
    if N < 2:
        return x.mean(axis=0), np.full(x.shape[1:], np.nan) if x.ndim > 1 else math.nan
    return x.mean(axis=0), x.std(axis=0, ddof=1) / math.sqrt(N)


def estimate_excess_emissions(ens: PathEnsemble):
    """(E[Y^+], standard error)."""
    m, se = mean_and_se(np.maximum(ens.net_position, 0.0), ens.antithetic)
    return float(m), float(se)


def estimate_price_variance(ens: PathEnsemble, t: int):
    """Sample variance of P_t with a delta-method standard error."""
    p = ens.price_at_time(t)
    mean = p.mean()
    dev2 = (p - mean) ** 2
    if ens.antithetic:
        # variance of a pair-mean of squared deviations
        v, se = mean_and_se(dev2, True)
        return float(v * len(p) / (len(p) - 1)), float(se)
    N = len(p)
    var = float(dev2.sum() / (N - 1))
    m4 = float(np.mean(dev2 ** 2))
    return var, math.sqrt(max(m4 - var * var, 0.0) / N)


@dataclass(frozen=True)
class MartingaleReport:
    initial_price: float
    z_by_time: np.ndarray  # (T + 1,), NaN at t = 0
    settlement_mean: float
    settlement_se: float

    @property
    def statistic(self) -> float:
        return float(np.nanmax(np.abs(self.z_by_time))) if self.z_by_time.size > 1 else 0.0

    @property
    def passed(self) -> bool:
        return self.statistic <= SE_GATE


def check_martingale(ens: PathEnsemble) -> MartingaleReport:
    """Max over t of |mean(P_t) - P0| in standard-error units, t = 1..T."""
    cfg = ens.config
    P0 = price_mean(cfg, ens.plan)
    T = cfg.T
    z = np.full(T + 1, np.nan)
    for t in range(1, T + 1):
        m, se = mean_and_se(ens.price_at_time(t), ens.antithetic)
        if se > 0:
            z[t] = (m - P0) / se
        else:
            # saturated price: every path equals the mean; compare exactly
            z[t] = 0.0 if abs(m - P0) <= 1e-12 * max(cfg.penalty, 1.0) else np.inf
    xm, xse = mean_and_se(ens.settlement, ens.antithetic)
    return MartingaleReport(P0, z, float(xm), float(xse))


def clearing_residual(ens: PathEnsemble) -> float:
    """max over paths of |sum_i Q^i_T| relative to sum_i |Q^i_T|."""
    Q = ens.terminal_positions
    scale = np.maximum(np.abs(Q).sum(axis=1), 1.0)
    return float(np.max(np.abs(Q.sum(axis=1)) / scale))


def firm_expected_cost(config: MarketConfig, plan: AbatementPlan) -> np.ndarray:
    """Closed form of E[AC_i + xi (E^i - A^i)] per firm at the price closed by xi^plan."""
    from .foc import _state

    st = _state(config, _as_reduced(config, plan))
    T, n = config.T, config.n
    k, g, mu, sg = config.k, config.gamma, config.mu, config.sigma
    per_firm_ac = (k * mu * st.a0 + 0.5 * g * (st.a0 * mu) ** 2
                   + (T - 1) * (k * mu * st.a1 + 0.5 * g * (mu ** 2 + sg ** 2) * st.a1 ** 2))
    mean_i = mu * (st.c0 + (T - 1) * st.c1)
    cov_iY = (T - 1) * st.c1 * st.r + config.cap_noise_sq / n
    return per_firm_ac + config.penalty * (mean_i * st.Phi + cov_iY * st.phi / st.s)


@dataclass(frozen=True)
class Alternative:
    firm: int
    kind: str  # "abatement" or "trading"
    plan_delta: np.ndarray = None  # (T,) per-period abatement change
    start: int = 0  # trading: first period of the extra position
    size: float = 0.0  # trading: extra position in tons


@dataclass(frozen=True)
class OptimalityReport:
    alternatives: list
    mean_gap: np.ndarray  # E[C_alt - C_eq], EUR
    se_gap: np.ndarray
    equilibrium_cost: np.ndarray  # per firm, sample mean
    equilibrium_cost_se: np.ndarray
    clearing: float

    @property
    def gap_z(self) -> np.ndarray:
        """Gap in standard errors; an identically zero gap (e.g. trading at T-1,
        where P_{T-1} already equals xi) scores 0."""
        z = np.zeros_like(self.mean_gap)
        ok = self.se_gap > 0
        z[ok] = self.mean_gap[ok] / self.se_gap[ok]
        # deterministic gaps: only a loss beyond rounding of the cost level counts
        noise = 1e-12 * float(np.max(np.abs(self.equilibrium_cost)))
        z[~ok & (self.mean_gap < -noise)] = -np.inf
        return z

    @property
    def violations(self) -> np.ndarray:
        """Alternatives that beat the equilibrium by more than 3 standard errors."""
        return np.flatnonzero(self.gap_z < -SE_GATE)

    @property
    def passed(self) -> bool:
        return self.violations.size == 0


def draw_alternatives(config: MarketConfig, plan: AbatementPlan, n_alternatives: int,
                      seed: int, box: float = 0.05) -> list:
    """Random abatement and trading deviations, alternating kind."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(2**31,))))
    A = _as_reduced(config, plan).expand(config.T).values
    out = []
    for j in range(n_alternatives):
        i = int(rng.integers(config.n))
        if j % 2 == 0:
            delta = rng.uniform(-box, box, config.T)
            delta = np.clip(A[i] + delta, 0.0, 1.0) - A[i]
            out.append(Alternative(i, "abatement", plan_delta=delta))
        else:
            s = int(rng.integers(1, config.T))
            size = float(rng.uniform(-1.0, 1.0) * config.mu[i])
            out.append(Alternative(i, "trading", start=s, size=size))
    return out


def check_firm_optimality(config: MarketConfig, plan: AbatementPlan, ens: PathEnsemble,
                          n_alternatives: int = 100, seed: int = None) -> OptimalityReport:
    """Paired comparison of each firm's realized cost against random deviations.

    The equilibrium strategy holds Q^i_t = 0 before T and the constructed Q^i_T.
    Abatement deviations keep the same terminal shortfall Y / n, which is the
    cheapest terminal response given xi. Trading deviations add a position of
    fixed size from period s to T on the event {eps^0_s > 0} (probability 1/2,
    known at s) and leave Q_T unchanged.
    """
    reduced = _as_reduced(config, plan)
    if ens.plan.values.shape != reduced.values.shape or np.any(ens.plan.values != reduced.values):
        raise ValueError("ensemble was simulated under a different plan")
    seed = ens.seed if seed is None else seed
    alts = draw_alternatives(config, reduced, n_alternatives, seed)
    A = reduced.expand(config.T).values
    lam, n = config.penalty, config.n
    k, g, mu = config.k, config.gamma, config.mu
    xi = ens.settlement
    Y = ens.net_position

    QT = ens.terminal_positions
    c_eq = ens.firm_abatement_cost + QT * xi[:, None] + lam * np.maximum(Y / n, 0.0)[:, None]

    gaps = np.empty((ens.n_paths, len(alts)))
    for blk in ens.shock_blocks():
        sl = slice(blk.start, blk.start + len(blk.cap))
        e = emissions_from_shocks(config, blk)  # (B, T-1, n)
        for j, alt in enumerate(alts):
            i = alt.firm
            if alt.kind == "abatement":
                d = alt.plan_delta
                ei = e[:, :, i]
                new = A[i] + d
                # abatement cost change, t = 0 uses the deterministic mu
                dac = (k[i] * d[0] * mu[i] + 0.5 * g[i] * mu[i] ** 2 * (new[0] ** 2 - A[i, 0] ** 2)
                       + k[i] * ei @ d[1:]
                       + 0.5 * g[i] * (ei ** 2) @ (new[1:] ** 2 - A[i, 1:] ** 2))
                # emissions fall by the extra abatement; xi prices the shortfall
                dE = -(d[0] * mu[i] + ei @ d[1:])
                gaps[sl, j] = dac + xi[sl] * dE
            else:
                s = alt.start
                on = blk.common[:, s - 1] > 0.0
                Ps = ens.prices[sl, s]
                gaps[sl, j] = -alt.size * on * (xi[sl] - Ps)
    mg, sg = mean_and_se(gaps, ens.antithetic)
    mc, sc = mean_and_se(c_eq, ens.antithetic)
    return OptimalityReport(alts, np.asarray(mg), np.asarray(sg), np.asarray(mc),
                            np.asarray(sc), clearing_residual(ens))


@dataclass(frozen=True)
class OracleReport:
    rows: list  # (check, estimate, standard_error, reference, z, passed)

    @property
    def passed(self) -> bool:
        return all(r[-1] for r in self.rows)


def run_oracle(config: MarketConfig, plan: AbatementPlan, n_paths: int, seed: int,
               times=None, n_alternatives: int = 100, antithetic: bool = False) -> OracleReport:
    """All 3-SE gates: EE, price mean, price variance at a few times, martingale,
    clearing and firm optimality."""
    from .model import expected_excess_emissions

    ens = simulate(config, plan, n_paths, seed, antithetic=antithetic)
    T = config.T
    times = times if times is not None else sorted({max(1, T // 4), max(1, T // 2), max(1, 3 * T // 4)})
    rows = []

    def gate(name, est, se, ref, scale):
        if se > 0:
            z = (est - ref) / se
        else:
            # every path agrees (e.g. a saturated price); compare to rounding of ``scale``
            z = 0.0 if abs(est - ref) <= 1e-12 * scale else math.copysign(math.inf, est - ref)
        rows.append((name, est, se, ref, z, abs(z) <= SE_GATE))

    lam = config.penalty
    ee, ee_se = estimate_excess_emissions(ens)
    gate("expected_excess", ee, ee_se, expected_excess_emissions(config, plan),
         T * float(config.mu.sum()))
    mom = price_moments(config, plan)
    xm, xse = mean_and_se(ens.settlement, antithetic)
    gate("price_mean", float(xm), float(xse), mom.mean, lam)
    for t in times:
        v, vse = estimate_price_variance(ens, t)
        gate(f"price_variance[t={t}]", v, vse, float(mom.variance_by_time[t]), lam * lam)
    mart = check_martingale(ens)
    rows.append(("martingale_max_z", mart.statistic, 1.0, 0.0, mart.statistic, mart.passed))
    clr = clearing_residual(ens)
    rows.append(("clearing_rel_residual", clr, 0.0, 0.0, 0.0, clr <= 1e-12))
    opt = check_firm_optimality(config, plan, ens, n_alternatives)
    zg = opt.gap_z
    worst = int(np.argmin(zg))
    rows.append(("optimality_worst_gap", float(opt.mean_gap[worst]), float(opt.se_gap[worst]),
                 0.0, float(zg[worst]), opt.passed))
    return OracleReport(rows)


def dump_paths_csv(ens: PathEnsemble, path, max_paths: int = 100):
    """Long-format dump (path_id, t, firm, e, P, Y, xi) of the first paths."""
    cfg = ens.config
    n, T = cfg.n, cfg.T
    limit = min(max_paths, ens.n_paths)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["path_id", "t", "firm", "e", "P", "Y", "xi"])
        for blk in ens.shock_blocks():
            if blk.start >= limit:
                break
            e = emissions_from_shocks(cfg, blk)
            for b in range(min(len(blk.cap), limit - blk.start)):
                p = blk.start + b
                for t in range(T):
                    for i in range(n):
                        et = cfg.mu[i] if t == 0 else e[b, t - 1, i]
                        w.writerow([p, t, cfg.firm_names[i], repr(float(et)),
                                    repr(float(ens.prices[p, t])),
                                    repr(float(ens.net_position[p])),
                                    repr(float(ens.settlement[p]))])
