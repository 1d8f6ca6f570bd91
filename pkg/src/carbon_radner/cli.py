"""Command-line entry point: solve | tables | figures | simulate | calibrate."""

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from . import tables as tb
from .calibration import CalibrationError, CalibrationSpec, calibrate_gamma
from .config_io import (ConfigFileError, RunConfig, baseline_run_config, format_config,
                        format_solution, load_config)
from .model import AbatementPlan, ConfigError
from .montecarlo import run_oracle
from .solver import BoundaryEquilibriumError, SolverError, solve_reduced

EXIT_OK = 0
EXIT_GATE = 1
EXIT_USAGE = 2
EXIT_SOLVER = 3
EXIT_BOUNDARY = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _positive_int(raw):
    try:
        v = int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {raw!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def build_parser():
    p = _Parser(prog="carbon-radner", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="config file (default: bundled baseline)")
        sp.add_argument("--out", help="output directory for CSV files")
        return sp

    common(sub.add_parser("solve", help="solve the equilibrium and print a summary"))
    t = common(sub.add_parser("tables", help="regenerate comparative-statics tables"))
    t.add_argument("--which", default="all", help="table name, prefix (e.g. table2) or 'all'")
    f = common(sub.add_parser("figures", help="elasticity-over-time curves"))
    f.add_argument("--which", default="all", help="figure name, prefix (e.g. fig1) or 'all'")
    s = common(sub.add_parser("simulate", help="Monte Carlo oracle gates"))
    s.add_argument("--seed", type=int)
    s.add_argument("--paths", type=_positive_int)
    s.add_argument("--alternatives", type=_positive_int)
    s.add_argument("--perturb", type=float, default=0.0,
                   help="add this to every plan entry (clipped) before simulating")
    c = common(sub.add_parser("calibrate", help="calibrate the common gamma level"))
    c.add_argument("--target", type=float, default=75.0, help="target P0 in EUR/ton")
    c.add_argument("--bracket", type=float, nargs=2, default=(2e-6, 3e-6),
                   metavar=("LOW", "HIGH"))
    return p


def _load(args) -> RunConfig:
    return load_config(args.config) if args.config else baseline_run_config()


def _select(which, names):
    if which == "all":
        return list(names)
    chosen = [n for n in names if n == which or n.startswith(which)]
    if not chosen:
        raise ConfigError(f"unknown selector {which!r}; choose from all, {', '.join(names)}")
    return chosen


def _write(out, name, text):
    if out is None:
        return
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    (d / name).write_text(text, encoding="utf-8")


def cmd_solve(args, rc):
    cfg = rc.market
    sol = solve_reduced(cfg)
    d = sol.diagnostics
    print(f"P0 = {sol.initial_price:.2f} EUR/ton")
    print(f"EE = {sol.expected_excess / tb.EE_UNIT:.2f} x 1e6 tons")
    print(f"R  = {sol.social_cost:.6e} EUR")
    print(f"{'firm':>6} {'alpha(0)':>10} {'alpha(1)':>10}")
    for nm, (a0, a1) in zip(cfg.firm_names, sol.plan.values):
        print(f"{nm:>6} {a0:10.4f} {a1:10.4f}")
    print(f"iterations = {d.iterations}, scaled residual = {d.residual_norm:.2e}, "
          f"min Hessian eigenvalue = {d.hessian_min_eigenvalue:.4e}, boundary = {d.boundary_flag}")
    _write(args.out, "solution.csv", format_solution(sol))
    if d.boundary_flag:
        print("equilibrium lies on the box boundary", file=sys.stderr)
        return EXIT_BOUNDARY
    return EXIT_OK


def cmd_tables(args, rc):
    arts = []
    for name in _select(args.which, tb.TABLE_NAMES):
        art = tb.build_table(rc.market, name)
        arts.append(art)
        _write(args.out, f"{name}.csv", art.to_csv())
        if args.out is None:
            print(f"# {name}")
            print(art.to_csv(), end="")
    manifest = tb.manifest_csv(arts)
    _write(args.out, "manifest.csv", manifest)
    rows = tb.manifest_rows(arts)
    failed = sum(r[-1] == "fail" for r in rows)
    print(f"manifest: {len(rows) - failed}/{len(rows)} reference cells within tolerance",
          file=sys.stderr)
    return EXIT_OK


def cmd_figures(args, rc):
    for name in _select(args.which, tb.FIGURE_NAMES):
        art = tb.build_figure(rc.market, name)
        _write(args.out, f"{name}.csv", art.to_csv())
        if args.out is None:
            print(f"# {name}")
            print(art.to_csv(), end="")
    return EXIT_OK


def cmd_simulate(args, rc):
    cfg, run = rc.market, rc.run
    sol = solve_reduced(cfg)
    plan = sol.plan
    if args.perturb:
        plan = AbatementPlan.reduced(np.clip(plan.values + args.perturb, 0.0, 1.0))
    rep = run_oracle(cfg, plan, args.paths or run.n_paths,
                     run.seed if args.seed is None else args.seed,
                     n_alternatives=args.alternatives or run.n_alternatives,
                     antithetic=run.antithetic)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("check", "estimate", "standard_error", "reference", "z", "passed"))
    for name, est, se, ref, z, ok in rep.rows:
        w.writerow((name, repr(float(est)), repr(float(se)), repr(float(ref)),
                    f"{z:.4f}", "pass" if ok else "fail"))
    print(buf.getvalue(), end="")
    _write(args.out, "oracle.csv", buf.getvalue())
    return EXIT_OK if rep.passed else EXIT_GATE


def cmd_calibrate(args, rc):
    cfg = rc.market
    offsets = cfg.gamma - cfg.gamma[0]
    res = calibrate_gamma(cfg, CalibrationSpec(args.target, offsets, tuple(args.bracket)))
    print(f"level = {res.level:.6e} EUR/ton^2, P0 = {res.initial_price:.4f}, "
          f"evaluations = {res.evaluations}")
    for nm, g in zip(cfg.firm_names, res.gamma):
        print(f"{nm:>6} gamma = {g:.6e}")
    _write(args.out, "calibrated.cfg", format_config(res.config, rc.run))
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "tables": cmd_tables, "figures": cmd_figures,
            "simulate": cmd_simulate, "calibrate": cmd_calibrate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        rc = _load(args)
        return COMMANDS[args.command](args, rc)
    except (ConfigFileError, ConfigError, CalibrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BoundaryEquilibriumError as exc:
        print(f"boundary equilibrium: {exc}", file=sys.stderr)
        return EXIT_BOUNDARY
    except (SolverError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
