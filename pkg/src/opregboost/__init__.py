"""
Regularize online algorithmic maps into contractions and benchmark the
boosted methods on time-varying problems.

The public surface re-exports the main entry points; the per-topic modules
(``qcqp``, ``opreg``, ``cvxreg``, ``interp``, ``boost``, ``baselines``,
``bench``) hold the full APIs.
"""

from .core import (CompositeProblem, CurvatureBounds, DegenerateInputError,
                   EvaluationError, OperatorHandle, ProblemStream,
                   forward_backward_map, soft_threshold, sphere_project)
from .opreg import (ContractiveEvaluations, PrsDiagnostics, PrsState,
                    RegressionDataset, StopRule, constraint_violation,
                    extract_boosted_value, opreg_fit)
from .cvxreg import (CvxRegDataset, CvxRegSolution, cvxreg_fit,
                     extract_regularized_gradient, interpolation_violation)
from .interp import BallSystem, MapConvergenceError, interpolate, project_ball
from .boost import (BoostConfig, InterpolationCache, StepStats,
                    cvxreg_boost_step, opreg_boost_interpolated_step,
                    opreg_boost_step)
from .bench import (BudgetRule, GenerationError, LassoStreamSpec,
                    PhaseStreamSpec, RunTrace, generate_lasso_stream,
                    generate_phase_stream, lasso_budget, phase_budget,
                    run_experiment)

__version__ = "0.1.0"

__all__ = [
    "BallSystem", "BoostConfig", "BudgetRule", "CompositeProblem",
    "ContractiveEvaluations", "CurvatureBounds", "CvxRegDataset",
    "CvxRegSolution", "DegenerateInputError", "EvaluationError",
    "GenerationError", "InterpolationCache", "LassoStreamSpec",
    "MapConvergenceError", "OperatorHandle", "PhaseStreamSpec",
    "PrsDiagnostics", "PrsState", "ProblemStream", "RegressionDataset",
    "RunTrace", "StepStats", "StopRule", "constraint_violation",
    "cvxreg_boost_step", "cvxreg_fit", "extract_boosted_value",
    "extract_regularized_gradient", "forward_backward_map",
    "generate_lasso_stream", "generate_phase_stream", "interpolate",
    "interpolation_violation", "lasso_budget", "opreg_boost_interpolated_step",
    "opreg_boost_step", "opreg_fit", "phase_budget", "project_ball",
    "run_experiment", "soft_threshold", "sphere_project",
]
