"""Optimal joint local/remote control of linear plants over a lossy link.

The package solves the coupled backward value recursions of the two-controller
problem (finite horizon and stationary), runs the shared dropout-aware
estimator, simulates the closed loop with seeded Monte Carlo, and provides
stability/boundedness diagnostics.
"""

from .analysis import (CostateResiduals, CovarianceTrajectory, StabilityReport,
                       average_stage_cost, cost_sweep, costate_residuals,
                       covariance_recursion, error_loop_matrix,
                       mean_square_decay_check, regulator_spectral_radius,
                       stability_margin)
from .controller import GainSchedule, LocalControl, as_gain_schedule, local_control, remote_control
from .errors import (AssumptionViolated, DimensionMismatch, InfeasibleProblem,
                     NcsError, NotPsd, NotStabilizable, NotSymmetric,
                     ProbabilityOutOfRange, SingularLambda)
from .estimator import EstimatorState, error, init, measurement_update, time_update
from .model import (NcsModel, check_observability, load_model, model_from_dict,
                    model_from_json, model_to_dict, model_to_json, save_model,
                    symmetric_sqrt, validate)
from .riccati import (FiniteHorizonSolution, StationaryGains, backward_recursion,
                      finite_optimal_cost, load_solution, save_solution,
                      stationary_average_cost, value_iteration)
from .simulate import (Aggregates, SimBatch, SimConfig, Trace, monte_carlo,
                       psd_factor, rollout, simulate_batch, splitmix64,
                       stream_seed, write_aggregates_json, write_curve_csv,
                       write_trace_csv)
from .uav import uav_config_dict, uav_model

__version__ = "0.1.0"
