"""Sectioned key-value config files and solution CSVs.

Keys carry their units, e.g. ``mu_tons_per_period``. Example::

    [regulatory]
    penalty_eur_per_ton = 100
    cap_fraction = 0.49
    horizon_periods = 60

    [firm c1]
    linear_cost_eur_per_ton = 20
    quadratic_cost_eur_per_ton2 = 2.378357e-6
    mu_tons_per_period = 2.71e7
    sigma_tons_per_period = 7.86e6
    rho = 0.85

    [run]
    seed = 12345
    n_paths = 100000
"""

import configparser
import csv
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .model import AbatementPlan, ConfigError, FirmParams, MarketConfig, RegulatoryParams

REGULATORY_KEYS = {
    "penalty_eur_per_ton": "penalty",
    "cap_fraction": "cap_fraction",
    "horizon_periods": "horizon",
    "cap_noise_tons": "cap_noise_unit",
}
FIRM_KEYS = {
    "linear_cost_eur_per_ton": "linear_cost",
    "quadratic_cost_eur_per_ton2": "quadratic_cost",
    "mu_tons_per_period": "mean_emission",
    "sigma_tons_per_period": "std_emission",
    "rho": "common_factor_loading",
}
RUN_KEYS = ("seed", "n_paths", "n_alternatives", "antithetic")
FIRM_PREFIX = "firm "


class ConfigFileError(ConfigError):
    """Parse or validation failure; ``field`` is the dotted path of the culprit."""

    def __init__(self, message, field=None, source=None):
        where = f"{source}: " if source else ""
        at = f"[{field}] " if field else ""
        super().__init__(f"{where}{at}{message}")
        self.field = field


@dataclass(frozen=True)
class RunOptions:
    seed: int = 12345
    n_paths: int = 100_000
    n_alternatives: int = 100
    antithetic: bool = False


@dataclass(frozen=True)
class RunConfig:
    market: MarketConfig
    run: RunOptions


def _number(parser, section, key, source, kind=float):
    raw = parser.get(section, key)
    field = f"{section}.{key}"
    try:
        if kind is int:
            v = float(raw)
            if v != int(v):
                raise ValueError
            return int(v)
        if kind is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        return float(raw)
    except ValueError:
        raise ConfigFileError(f"expected {kind.__name__}, got {raw!r}", field, source) from None


def _unknown(parser, section, allowed, source):
    for key in parser.options(section):
        if key not in allowed:
            raise ConfigFileError(f"unknown key (allowed: {', '.join(allowed)})",
                                  f"{section}.{key}", source)


def parse_config(text: str, source: str = None) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source or "<string>")
    except configparser.Error as exc:
        raise ConfigFileError(str(exc).replace("\n", " "), None, source) from None

    if not parser.has_section("regulatory"):
        raise ConfigFileError("missing section", "regulatory", source)
    _unknown(parser, "regulatory", tuple(REGULATORY_KEYS), source)
    reg = {}
    for key, attr in REGULATORY_KEYS.items():
        if parser.has_option("regulatory", key):
            kind = int if attr == "horizon" else float
            reg[attr] = _number(parser, "regulatory", key, source, kind)
        elif attr != "cap_noise_unit":
            raise ConfigFileError("missing key", f"regulatory.{key}", source)
    try:
        regulatory = RegulatoryParams(**reg)
    except ConfigError as exc:
        raise ConfigFileError(str(exc), "regulatory", source) from None

    firms = []
    for section in parser.sections():
        if section in ("regulatory", "run"):
            continue
        if not section.startswith(FIRM_PREFIX):
            raise ConfigFileError("unknown section", section, source)
        name = section[len(FIRM_PREFIX):].strip()
        _unknown(parser, section, tuple(FIRM_KEYS), source)
        vals = {}
        for key, attr in FIRM_KEYS.items():
            if not parser.has_option(section, key):
                raise ConfigFileError("missing key", f"{section}.{key}", source)
            vals[attr] = _number(parser, section, key, source)
        try:
            firms.append(FirmParams(name=name, **vals))
        except ConfigError as exc:
            raise ConfigFileError(str(exc), section, source) from None
    if not firms:
        raise ConfigFileError("no [firm <name>] sections", None, source)

    run = {}
    if parser.has_section("run"):
        _unknown(parser, "run", RUN_KEYS, source)
        kinds = {"seed": int, "n_paths": int, "n_alternatives": int, "antithetic": bool}
        for key in RUN_KEYS:
            if parser.has_option("run", key):
                run[key] = _number(parser, "run", key, source, kinds[key])
    opts = RunOptions(**run)
    if opts.n_paths < 1:
        raise ConfigFileError("must be >= 1", "run.n_paths", source)
    return RunConfig(MarketConfig(regulatory, tuple(firms)), opts)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigFileError(f"cannot read file: {exc.strerror}", None, str(path)) from None
    return parse_config(text, str(path))


def format_config(config: MarketConfig, run: RunOptions = None) -> str:
    r = config.regulatory
    lines = ["[regulatory]",
             f"penalty_eur_per_ton = {r.penalty!r}",
             f"cap_fraction = {r.cap_fraction!r}",
             f"horizon_periods = {r.horizon}",
             f"cap_noise_tons = {r.cap_noise_unit!r}"]
    for f, name in zip(config.firms, config.firm_names):
        lines += ["", f"[{FIRM_PREFIX}{name}]"]
        for key, attr in FIRM_KEYS.items():
            lines.append(f"{key} = {getattr(f, attr)!r}")
    if run is not None:
        lines += ["", "[run]", f"seed = {run.seed}", f"n_paths = {run.n_paths}",
                  f"n_alternatives = {run.n_alternatives}",
                  f"antithetic = {'true' if run.antithetic else 'false'}"]
    return "\n".join(lines) + "\n"


def baseline_run_config() -> RunConfig:
    text = resources.files("carbon_radner").joinpath("data/baseline.cfg").read_text("utf-8")
    return parse_config(text, "baseline.cfg")


def baseline_config() -> MarketConfig:
    """Eight-firm reference market with the gamma level calibrated to P0 = 75.02."""
    return baseline_run_config().market


def printed_gamma_config() -> MarketConfig:
    """Same market with gamma rounded to two decimals in 1e-6 EUR/ton^2 units."""
    text = resources.files("carbon_radner").joinpath("data/printed_gamma.cfg").read_text("utf-8")
    return parse_config(text, "printed_gamma.cfg").market


# -- solution CSV ------------------------------------------------------------

SOLUTION_HEADER = ["key", "firm", "value"]


def format_solution(solution) -> str:
    cfg = solution.config
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SOLUTION_HEADER)
    w.writerow(["initial_price", "", repr(float(solution.initial_price))])
    w.writerow(["expected_excess", "", repr(float(solution.expected_excess))])
    w.writerow(["social_cost", "", repr(float(solution.social_cost))])
    d = solution.diagnostics
    w.writerow(["iterations", "", d.iterations])
    w.writerow(["residual_norm", "", repr(float(d.residual_norm))])
    w.writerow(["boundary_flag", "", int(d.boundary_flag)])
    w.writerow(["hessian_min_eigenvalue", "", repr(float(d.hessian_min_eigenvalue))])
    for name, (a0, a1) in zip(cfg.firm_names, solution.plan.values):
        w.writerow(["alpha0", name, repr(float(a0))])
        w.writerow(["alpha1", name, repr(float(a1))])
    return buf.getvalue()


def write_solution(path, solution) -> None:
    Path(path).write_text(format_solution(solution), encoding="utf-8")


def read_solution(path, config: MarketConfig):
    """Rebuild an EquilibriumSolution from a CSV written by ``write_solution``."""
    from .solver import EquilibriumSolution, SolverDiagnostics

    scalars = {}
    plan = {}
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != SOLUTION_HEADER:
        raise ConfigFileError("not a solution file (bad header)", None, str(path))
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise ConfigFileError(f"line {lineno}: expected 3 fields", None, str(path))
        key, firm, value = row
        if key in ("alpha0", "alpha1"):
            plan[(firm, key)] = float(value)
        else:
            scalars[key] = value
    try:
        vals = np.array([[plan[(nm, "alpha0")], plan[(nm, "alpha1")]]
                         for nm in config.firm_names])
    except KeyError as exc:
        raise ConfigFileError(f"missing plan entry {exc.args[0]}", None, str(path)) from None
    diag = SolverDiagnostics(int(scalars["iterations"]), float(scalars["residual_norm"]),
                             bool(int(scalars["boundary_flag"])),
                             float(scalars["hessian_min_eigenvalue"]))
    return EquilibriumSolution(config, AbatementPlan.reduced(vals),
                               float(scalars["initial_price"]),
                               float(scalars["expected_excess"]),
                               float(scalars["social_cost"]), diag)
