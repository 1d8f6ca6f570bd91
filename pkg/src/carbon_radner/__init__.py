"""Gaussian cap-and-trade equilibrium: solver, price moments, sensitivities and
Monte Carlo checks."""

from .calibration import (CalibrationError, CalibrationResult, CalibrationSpec, EmissionTargets,
                          calibrate_gamma, lint_emission_calibration)
from .config_io import (ConfigFileError, RunConfig, RunOptions, baseline_config, load_config,
                        parse_config, printed_gamma_config, read_solution, write_solution)
from .model import (AbatementPlan, ConfigError, DimensionError, FirmParams, MarketConfig,
                    PlanForm, RegulatoryParams, abatement_cost, expected_excess_emissions,
                    net_emission_moments, social_cost)
from .montecarlo import (PathEnsemble, check_firm_optimality, check_martingale,
                         estimate_excess_emissions, run_oracle, simulate)
from .prices import (PriceMoments, information_ratio, price_at, price_mean, price_moments,
                     price_variance)
from .sensitivity import (SensitivityReport, elasticity_transform, plan_sensitivity,
                          price_at_sensitivity, price_mean_sensitivity, sensitivity_report,
                          shared_elasticity)
from .solver import (BoundaryEquilibriumError, EquilibriumSolution, SolverError,
                     solve_full_horizon, solve_reduced)

__all__ = [name for name in dir() if not name.startswith("_")]
