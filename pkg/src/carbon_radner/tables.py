"""Comparative-statics tables and elasticity-over-time curves as CSV artifacts.

Every table is a sweep over one parameter (or the baseline alone for the
cost-elasticity matrix). Cells are formatted to two decimals with EE in 1e6 tons.
A manifest compares each cell that has a reference value with the
value computed here, using the acceptance tolerance for its kind.
"""

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from typing import Callable

import numpy as np

from .model import MarketConfig
from .montecarlo import thread_count
from .sensitivity import (elasticity_transform, group_derivative, sensitivity_report,
                          shared_elasticity)
from .solver import solve_reduced

EE_UNIT = 1e6  # tons per displayed EE unit
SHARED_GROUPS = ("mu", "sigma", "rho")

# acceptance tolerances by row kind: (kind, value)
TOL_EE = ("rel", 0.02)
TOL_PRICE = ("abs", 0.05)
TOL_PRICE_EMISSION = ("abs", 0.1)  # emission-parameter tables
TOL_ELASTICITY = ("abs", 0.02)
TOL_CAP_PRICE_ELASTICITY = ("abs", 0.01)


@dataclass(frozen=True)
class Sweep:
    name: str
    parameter: str  # theta group, or "k[c1]"-style label for a single firm
    labels: tuple  # column labels as displayed
    values: tuple  # parameter values in model units
    apply: Callable  # (config, value) -> config
    elasticity_rows: bool = True


def _firm_index(config, label):
    name = label[label.index("[") + 1:-1]
    return config.firm_names.index(name)


def _set_single(field):
    def apply(config, value, label):
        return config.with_firm(_firm_index(config, label), **{field: value})
    return apply


def standard_sweeps():
    def reg(field):
        return lambda cfg, v, _lab: cfg.with_regulatory(**{field: v})

    def shared(field):
        return lambda cfg, v, _lab: cfg.with_firms(**{field: v})

    return {
        "table2_left": Sweep("table2_left", "lambda", ("70", "75", "90", "100"),
                             (70.0, 75.0, 90.0, 100.0), reg("penalty")),
        "table2_right": Sweep("table2_right", "a", ("0.54", "0.49", "0.39"),
                              (0.54, 0.49, 0.39), reg("cap_fraction")),
        "table4_left": Sweep("table4_left", "k[c1]", ("15.0", "17.5", "20.0", "22.5", "25.0"),
                             (15.0, 17.5, 20.0, 22.5, 25.0), _set_single("linear_cost"), False),
        "table4_right": Sweep("table4_right", "k[d4]", ("45.0", "47.5", "50.0", "52.5", "55.0"),
                              (45.0, 47.5, 50.0, 52.5, 55.0), _set_single("linear_cost"), False),
        "table5_left": Sweep("table5_left", "mu", ("2.55", "2.71", "2.86"),
                             (2.55e7, 2.71e7, 2.86e7), shared("mean_emission")),
        "table5_right": Sweep("table5_right", "sigma", ("0.61", "0.79", "0.96"),
                              (0.61e7, 0.79e7, 0.96e7), shared("std_emission")),
        "table6": Sweep("table6", "rho", ("0.71", "0.78", "0.85", "0.92", "0.99"),
                        (0.71, 0.78, 0.85, 0.92, 0.99), shared("common_factor_loading")),
    }


TABLE_NAMES = ("table2_left", "table2_right", "table3", "table4_left", "table4_right",
               "table5_left", "table5_right", "table6")
FIGURE_NAMES = ("fig1_std_lambda", "fig1_std_cap", "fig2_std_k", "fig2_std_gamma",
                "fig3_std_emission")


@dataclass(frozen=True)
class TableArtifact:
    name: str
    columns: tuple  # column labels after the leading "row" column
    rows: tuple  # (label, values) pairs; EE already in display units

    def cell(self, row: str, column: str) -> float:
        for label, vals in self.rows:
            if label == row:
                return vals[self.columns.index(column)]
        raise KeyError(row)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("row",) + tuple(self.columns))
        for label, vals in self.rows:
            w.writerow([label] + [format_cell(v) for v in vals])
        return buf.getvalue()


def format_cell(v: float) -> str:
    if not np.isfinite(v):
        return "nan"
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" and v == 0.0 else s


def _map(fn, items):
    items = list(items)
    threads = thread_count()
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(items))) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _parameter_elasticities(config, report, parameter):
    """(price elasticity, plan elasticities (2n,)) w.r.t. ``parameter``."""
    if parameter in SHARED_GROUPS:
        price = shared_elasticity(config, report.price_mean, report.dmean_dtheta, parameter)
        plan = shared_elasticity(config, report.plan, report.dalpha_dtheta, parameter)
        return price, np.asarray(plan)
    j = report.column(parameter)
    return report.mean_elasticities[j], report.alpha_elasticities[:, j]


def _plan_row_labels(config):
    return [f"alpha[{nm}]({t})" for nm in config.firm_names for t in (0, 1)]


def sweep_table(config: MarketConfig, sweep: Sweep) -> TableArtifact:
    def point(item):
        label, value = item
        cfg = sweep.apply(config, value, sweep.parameter)
        sol = solve_reduced(cfg)
        if not sweep.elasticity_rows:
            return sol.expected_excess, sol.initial_price, None, None
        rep = sensitivity_report(cfg, sol, times=())
        price_el, plan_el = _parameter_elasticities(cfg, rep, sweep.parameter)
        return sol.expected_excess, sol.initial_price, price_el, plan_el

    try:
        results = _map(point, zip(sweep.labels, sweep.values))
    except Exception as exc:
        raise type(exc)(f"{sweep.name}: {exc}") from exc
    rows = [("EE", [r[0] / EE_UNIT for r in results]),
            ("mu_P", [r[1] for r in results])]
    if sweep.elasticity_rows:
        rows.append(("eta(mu_P)", [float(r[2]) for r in results]))
        for j, lab in enumerate(_plan_row_labels(config)):
            rows.append((f"eta({lab})", [float(r[3][j]) for r in results]))
    return TableArtifact(sweep.name, tuple(sweep.labels), tuple((l, tuple(v)) for l, v in rows))


def cost_elasticity_table(config: MarketConfig) -> TableArtifact:
    """Price and plan elasticities with respect to every k^i and gamma^i."""
    rep = sensitivity_report(config, times=())
    columns = ("mu_P",) + tuple(_plan_row_labels(config))
    rows = []
    for group in ("k", "gamma"):
        for nm in config.firm_names:
            j = rep.column(f"{group}[{nm}]")
            vals = [float(rep.mean_elasticities[j])] + [float(v) for v in rep.alpha_elasticities[:, j]]
            rows.append((f"{group}[{nm}]", tuple(vals)))
    return TableArtifact("table3", columns, tuple(rows))


def build_table(config: MarketConfig, name: str) -> TableArtifact:
    if name == "table3":
        return cost_elasticity_table(config)
    sweeps = standard_sweeps()
    if name not in sweeps:
        raise KeyError(f"unknown table {name!r}; choose from {', '.join(TABLE_NAMES)}")
    return sweep_table(config, sweeps[name])


# -- figures -------------------------------------------------------------------

@dataclass(frozen=True)
class FigureArtifact:
    name: str
    curves: tuple  # (label, values over t = 1..T)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("t", "label", "elasticity"))
        for label, vals in self.curves:
            for t, v in enumerate(vals, start=1):
                w.writerow((t, label, f"{v:.8g}"))
        return buf.getvalue()


def std_elasticity_curve(config: MarketConfig, parameter: str, report=None) -> np.ndarray:
    """eta_theta(sigma_{P_t}) for t = 1..T; shared groups use the summed bump."""
    rep = sensitivity_report(config) if report is None else report
    std = rep.std_by_time[1:]
    if parameter in SHARED_GROUPS:
        d = group_derivative(config, rep.dstd_dtheta_by_time[1:], parameter)
        theta = config.theta()[config.theta_slice(parameter)][0]
        return np.asarray(elasticity_transform(std, d, theta))
    j = rep.column(parameter)
    return np.asarray(elasticity_transform(std, rep.dstd_dtheta_by_time[1:, j], rep.theta[j]))


def build_figure(config: MarketConfig, name: str) -> FigureArtifact:
    sweeps = standard_sweeps()
    if name in ("fig1_std_lambda", "fig1_std_cap"):
        sw = sweeps["table2_left" if name == "fig1_std_lambda" else "table2_right"]
        prefix = "lambda" if sw.parameter == "lambda" else "a"

        def curve(item):
            label, value = item
            cfg = sw.apply(config, value, sw.parameter)
            return (f"{prefix}={label}", tuple(std_elasticity_curve(cfg, sw.parameter)))

        return FigureArtifact(name, tuple(_map(curve, zip(sw.labels, sw.values))))
    rep = sensitivity_report(config)
    if name in ("fig2_std_k", "fig2_std_gamma"):
        group = "k" if name == "fig2_std_k" else "gamma"
        labels = [f"{group}[{nm}]" for nm in config.firm_names]
    elif name == "fig3_std_emission":
        labels = list(SHARED_GROUPS)
    else:
        raise KeyError(f"unknown figure {name!r}; choose from {', '.join(FIGURE_NAMES)}")
    return FigureArtifact(name, tuple((lab, tuple(std_elasticity_curve(config, lab, rep)))
                                      for lab in labels))


# -- reference values and manifest -----------------------------------------------

def reference_cells() -> list:
    """Reference (artifact, row, column, value) cells bundled with the package."""
    text = resources.files("carbon_radner").joinpath("data/reference_cells.csv").read_text("utf-8")
    rows = list(csv.DictReader(io.StringIO(text)))
    return [(r["artifact"], r["row"], r["column"], float(r["value"])) for r in rows]


def tolerance_for(artifact: str, row: str):
    if row == "EE":
        return TOL_EE
    if row == "mu_P" and artifact in ("table5_left", "table5_right", "table6"):
        return TOL_PRICE_EMISSION
    if row == "mu_P":
        return TOL_PRICE
    if artifact == "table2_right" and row == "eta(mu_P)":
        return TOL_CAP_PRICE_ELASTICITY
    return TOL_ELASTICITY


def within(computed: float, reference: float, tol) -> bool:
    kind, val = tol
    if not np.isfinite(computed):
        return False
    if kind == "rel":
        return abs(computed - reference) <= val * abs(reference)
    return abs(computed - reference) <= val + 1e-12


MANIFEST_HEADER = ("artifact", "cell", "reference", "computed", "tolerance", "tolerance_kind",
                   "passed")


def manifest_rows(artifacts) -> list:
    by_name = {a.name: a for a in artifacts}
    out = []
    for art, row, col, ref in reference_cells():
        if art not in by_name:
            continue
        got = by_name[art].cell(row, col)
        tol = tolerance_for(art, row)
        out.append((art, f"{row}|{col}", f"{ref:.2f}", format_cell(got), f"{tol[1]:g}", tol[0],
                    "pass" if within(got, ref, tol) else "fail"))
    return out


def manifest_csv(artifacts) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MANIFEST_HEADER)
    w.writerows(manifest_rows(artifacts))
    return buf.getvalue()
