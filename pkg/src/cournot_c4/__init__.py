"""Creator competition under softmax matching, and welfare-driven tuning of exploration strengths."""

from .env import (
    Environment,
    PowerCost,
    SyntheticParams,
    generate_synthetic_env,
    ingest_embeddings,
    load_env,
    random_env,
    save_env,
)
from .equilibrium import SolveResult, SolverConfig, dsc_hessian, residual, solve_pne
from .errors import NumericalError, ValidationError
from .game import BetaPolicy, WelfareReport, creator_utilities, match_probabilities, utility_gradient, welfare
from .implicit_grad import SketchSpec, jacobian_exact, pne_partials, smw_apply, welfare_gradient
from .optimizer import OptimizerConfig, OptTrace, optimize_beta, sweep_beta

__version__ = "0.1.0"

__all__ = [
    "BetaPolicy", "Environment", "NumericalError", "OptTrace", "OptimizerConfig", "PowerCost",
    "SketchSpec", "SolveResult", "SolverConfig", "SyntheticParams", "ValidationError", "WelfareReport",
    "creator_utilities", "dsc_hessian", "generate_synthetic_env", "ingest_embeddings", "jacobian_exact",
    "load_env", "match_probabilities", "optimize_beta", "pne_partials", "random_env", "residual",
    "save_env", "smw_apply", "solve_pne", "sweep_beta", "utility_gradient", "welfare", "welfare_gradient",
]
