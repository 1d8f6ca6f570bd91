"""Monte Carlo gates at the equilibrium, optionally for a perturbed plan or many seeds."""

import argparse
import sys
import time

import numpy as np

from carbon_radner.config_io import baseline_run_config, load_config
from carbon_radner.model import AbatementPlan
from carbon_radner.montecarlo import dump_paths_csv, run_oracle, simulate
from carbon_radner.solver import solve_reduced


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--paths", type=int)
    ap.add_argument("--seeds", type=int, nargs="+")
    ap.add_argument("--perturb", type=float, default=0.0)
    ap.add_argument("--dump", help="write the first 100 paths to this CSV")
    args = ap.parse_args()
    rc = load_config(args.config) if args.config else baseline_run_config()
    cfg, run = rc.market, rc.run
    plan = solve_reduced(cfg).plan
    if args.perturb:
        plan = AbatementPlan.reduced(np.clip(plan.values + args.perturb, 0, 1))
    n_paths = args.paths or run.n_paths
    failed = 0
    for seed in args.seeds or [run.seed]:
        t0 = time.perf_counter()
        rep = run_oracle(cfg, plan, n_paths, seed, n_alternatives=run.n_alternatives,
                         antithetic=run.antithetic)
        dt = time.perf_counter() - t0
        print(f"seed {seed}: {'pass' if rep.passed else 'FAIL'} ({n_paths} paths, {dt:.1f}s)")
        for name, est, se, ref, z, ok in rep.rows:
            print(f"  {name:26s} est {est:14.6g} se {se:10.3g} ref {ref:14.6g} z {z:8.2f}"
                  f"{'' if ok else '  <-'}")
        failed += not rep.passed
    if args.dump:
        dump_paths_csv(simulate(cfg, plan, 100, run.seed), args.dump)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
