"""Inverse optimization: learn contextual cost models from observed decisions.

Given samples (z_i, x*_i) where x*_i solved a linear or quadratic program
whose cost vector was hidden, fit a linear model theta so that the decisions
induced by the predicted costs z_i theta reproduce the observed ones. The
KKT conditions turn "x* is optimal for c" into a convex set of costs per
sample; training alternates projections onto those sets with refits of the
model, or runs first-order methods on the resulting squared-distance loss.
"""

from .data import (
    Dataset,
    DecisionSample,
    gen_knapsack,
    gen_perfect_matching,
    gen_portfolio,
    gen_shortest_path,
    load_dataset,
    load_model,
    save_dataset,
    save_model,
    solve_decision,
)
from .errors import NumericalFailure
from .estimator import InverseCostEstimator
from .feasibility import (
    KktProjector,
    Projection,
    build_projectors,
    fit_cost_model,
    make_portfolio_projector,
    make_projector,
)
from .lp import (
    LpInstance,
    SimplexResult,
    build_grid_shortest_path,
    build_knapsack,
    build_perfect_matching,
    knapsack_cost,
    solve_lp,
)
from .metrics import (
    MetricsRecord,
    cost_norm_lower_bound,
    decision_loss,
    estimate_loss,
    evaluate,
    pl_constant,
    suboptimality,
)
from .qp import PortfolioSpec, QpConfig, QpProblem, QpResult, solve_portfolio, solve_qp
from .training import (
    EpochRecord,
    TrainConfig,
    TrainResult,
    TrainingData,
    loss,
    grad,
    prepare,
    run_pocs,
    run_trainer,
    step_gd,
    step_precond_gd,
    step_sgd,
)

__all__ = [
    "Dataset",
    "DecisionSample",
    "EpochRecord",
    "InverseCostEstimator",
    "KktProjector",
    "LpInstance",
    "MetricsRecord",
    "NumericalFailure",
    "PortfolioSpec",
    "Projection",
    "QpConfig",
    "QpProblem",
    "QpResult",
    "SimplexResult",
    "TrainConfig",
    "TrainResult",
    "TrainingData",
    "build_grid_shortest_path",
    "build_knapsack",
    "build_perfect_matching",
    "build_projectors",
    "cost_norm_lower_bound",
    "decision_loss",
    "estimate_loss",
    "evaluate",
    "fit_cost_model",
    "gen_knapsack",
    "gen_perfect_matching",
    "gen_portfolio",
    "gen_shortest_path",
    "grad",
    "knapsack_cost",
    "load_dataset",
    "load_model",
    "loss",
    "make_portfolio_projector",
    "make_projector",
    "pl_constant",
    "prepare",
    "run_pocs",
    "run_trainer",
    "save_dataset",
    "save_model",
    "solve_decision",
    "solve_lp",
    "solve_portfolio",
    "solve_qp",
    "step_gd",
    "step_precond_gd",
    "step_sgd",
    "suboptimality",
]

__version__ = "0.1.0"
