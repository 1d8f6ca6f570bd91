"""Calibrate the common quadratic-cost level to a target P0 and lint emission aggregates."""

import argparse
import sys

import numpy as np

from carbon_radner.calibration import (CalibrationSpec, aggregate_emission_moments,
                                       calibrate_gamma, lint_emission_calibration)
from carbon_radner.config_io import baseline_config, printed_gamma_config
from carbon_radner.solver import solve_reduced


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--targets", type=float, nargs="+", default=[75.0, 75.02])
    args = ap.parse_args()
    cfg = baseline_config()
    offsets = cfg.gamma - cfg.gamma[0]
    for target in args.targets:
        res = calibrate_gamma(cfg, CalibrationSpec(target, offsets, (2e-6, 3e-6)))
        print(f"target {target:7.3f}: level {res.level:.7e}  P0 {res.initial_price:.5f}  "
              f"({res.evaluations} solves)")
    printed = solve_reduced(printed_gamma_config())
    print(f"printed gamma (2.38 + 0.05 i) e-6: P0 {printed.initial_price:.4f}, "
          f"EE {printed.expected_excess / 1e6:.3f}e6")
    mean, std = aggregate_emission_moments(cfg)
    print(f"aggregate BAU emissions: mean {mean:.4g} t, std {std:.4g} t, "
          f"sqrt(rho) {np.sqrt(cfg.rho[0]):.4f}")
    msgs = lint_emission_calibration(cfg)
    print("lint: clean" if not msgs else "\n".join(f"lint: {m}" for m in msgs))
    return 0


if __name__ == "__main__":
    sys.exit(main())
