"""Solvers for two-stage configuration games over finite-horizon
affine-quadratic differential games.

The second stage (the differential game at fixed parameters) is solved
through coupled backward Riccati passes; exact parameter gradients of the
equilibrium values come from linear sensitivity systems; the first stage
(the parameter game) is searched by projected-gradient iterated best
response with first-order certification.
"""

from .errors import (BestResponseStalled, BlowUpDetected, ConfGamesError,
                     ConfigError, GenerationFailed, InfeasibleTheta,
                     NumericalFailure, PositiveDefinitenessViolation,
                     PreconditionViolation)
from .model import (ConfigGame, IndefiniteStateCostWarning, MatrixFn,
                    Regularizer, closed_loop_matrix, compute_S, compute_S_deriv)
from .odekit import (MatrixPath, TimeGrid, integrate_backward,
                     integrate_forward, quadrature, simpson_nodes)
from .riccati import (StageTwoSolution, TrajectoryRollout, default_grid,
                      rollout, solve_coupled_riccati, solve_eta,
                      solve_stage_two, solve_zerosum_riccati, solve_zeta,
                      stage_one_costs, stage_two_value)
from .scenarios import (GeneralSumSpec, PursuitEvasionSpec, build_general_sum,
                        build_pursuit_evasion, random_aq_game,
                        recommended_settings)
from .sensitivity import (SensitivityBundle, directional_derivative,
                          envelope_gradient, own_gradients,
                          sensitivity_bundle, solve_P_sensitivity,
                          solve_eta_sensitivity, solve_zeta_sensitivity,
                          value_gradient)
from .solver import (BaselineResult, CertVerdict, IbrTrace, SolverSettings,
                     best_response, certify_first_order, ibr_solve,
                     naive_baseline, project)

__version__ = "0.1.0"

__all__ = [
    "BaselineResult", "BestResponseStalled", "BlowUpDetected", "CertVerdict",
    "ConfGamesError", "ConfigError", "ConfigGame", "GeneralSumSpec",
    "GenerationFailed", "IbrTrace", "IndefiniteStateCostWarning",
    "InfeasibleTheta", "MatrixFn", "MatrixPath", "NumericalFailure",
    "PositiveDefinitenessViolation", "PreconditionViolation",
    "PursuitEvasionSpec", "Regularizer", "SensitivityBundle",
    "SolverSettings", "StageTwoSolution", "TimeGrid", "TrajectoryRollout",
    "best_response", "build_general_sum", "build_pursuit_evasion",
    "certify_first_order", "closed_loop_matrix", "compute_S",
    "compute_S_deriv", "default_grid", "directional_derivative",
    "envelope_gradient", "ibr_solve", "integrate_backward",
    "integrate_forward", "naive_baseline", "own_gradients", "project",
    "quadrature", "random_aq_game", "recommended_settings", "rollout",
    "sensitivity_bundle", "simpson_nodes", "solve_P_sensitivity",
    "solve_coupled_riccati", "solve_eta", "solve_eta_sensitivity",
    "solve_stage_two", "solve_zerosum_riccati", "solve_zeta",
    "solve_zeta_sensitivity", "stage_one_costs", "stage_two_value",
    "value_gradient", "__version__",
]
