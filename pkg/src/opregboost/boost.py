"""
The online boosted algorithms: learn the closest contractive surrogate of the
current algorithmic map each step (operator variant), or the closest smooth
strongly convex surrogate of the cost (convex-regression variant), or reuse
the last fitted operator between refreshes via contraction-preserving
interpolation.
"""

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ProblemStream, forward_backward_map, CurvatureBounds
from .cvxreg import CvxRegDataset, cvxreg_fit, extract_regularized_gradient
from .interp import interpolate
from .opreg import (ContractiveEvaluations, PrsState, RegressionDataset,
                    StopRule, extract_boosted_value, opreg_fit)


@dataclass(frozen=True)
class BoostConfig:
    """Knobs of the boosted online steps.

    ``ell`` anchors are used per fit (the first is always the previous
    iterate), drawn with Gaussian perturbations of scale ``sample_sigma``.
    ``tau`` is the refresh period of the interpolated variant: a fit every
    ``tau`` steps, interpolation in between.
    """

    alpha: float
    ell: int = 3
    zeta: float = 0.9
    rho: float = 1e-6
    sample_sigma: float = 0.1
    tau: int = 2
    stop: StopRule = field(default_factory=StopRule)
    rng_seed: int = 0
    map_theta: float = 1e-9
    map_max_sweeps: int = 500

    def __post_init__(self):
        if self.ell < 2:
            raise ValueError("ell must be >= 2")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not 0 < self.zeta < 1:
            raise ValueError("zeta must be in (0, 1)")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.sample_sigma <= 0:
            raise ValueError("sample_sigma must be positive")
        if self.tau < 1:
            raise ValueError("tau must be >= 1")


@dataclass(frozen=True)
class StepStats:
    """Per-step accounting: evaluations of the tracked operator, plain
    gradient/function evaluations, and inner-solver effort."""

    operator_calls: int = 0
    gradient_calls: int = 0
    solver_iterations: int = 0
    solver_time_s: float = 0.0


@dataclass
class InterpolationCache:
    """Last fitted system carried between refreshes of the interpolated
    variant, plus the warm dual state for the next fit."""

    anchors: RegressionDataset
    fitted: ContractiveEvaluations
    prs: Optional[PrsState] = None


def _sample_anchors(x_prev: np.ndarray, cfg: BoostConfig, k: int) -> np.ndarray:
    """Previous iterate plus ell - 1 Gaussian perturbations of it.

    The draw is keyed on (seed, k) so a step's anchors do not depend on how
    many other steps were taken before it.
    """
    rng = np.random.default_rng([cfg.rng_seed, k])
    X = np.empty((cfg.ell, x_prev.shape[0]))
    X[0] = x_prev
    X[1:] = x_prev + cfg.sample_sigma * rng.standard_normal((cfg.ell - 1, x_prev.shape[0]))
    return X


def _operator(stream: ProblemStream, k: int, alpha: float):
    if stream.operator_at is not None:
        return stream.operator_at(k, alpha)
    return forward_backward_map(stream.problem_at(k), alpha)


def opreg_boost_step(stream: ProblemStream, k: int, x_prev: np.ndarray,
                     cfg: BoostConfig, warm: Optional[PrsState] = None):
    """One boosted online step: sample anchors, evaluate the current map on
    them, fit the closest contractive evaluations, extract the fitted value
    at the previous iterate and apply the proximal part.

    Returns
    -------
    (x_k, PrsState, StepStats, fit) where ``fit`` is the
    (anchors, ContractiveEvaluations) pair for optional reuse.
    """
    if not np.all(np.isfinite(x_prev)):
        raise ValueError("x_prev must be finite")
    X = _sample_anchors(x_prev, cfg, k)
    op = _operator(stream, k, cfg.alpha)
    Y = np.stack([op.apply(X[i]) for i in range(cfg.ell)])
    data = RegressionDataset(points=X, evaluations=Y, distinguished_index=0)
    tic = time.perf_counter()
    sol, diag, state = opreg_fit(data, cfg.zeta, cfg.rho, cfg.stop, warm=warm)
    solver_time = time.perf_counter() - tic
    t_hat = extract_boosted_value(sol, data)
    x_k = stream.problem_at(k).prox(t_hat, cfg.alpha)
    stats = StepStats(operator_calls=cfg.ell, gradient_calls=0,
                      solver_iterations=diag.iterations, solver_time_s=solver_time)
    return x_k, state, stats, (data, sol)


def cvxreg_boost_step(stream: ProblemStream, k: int, x_prev: np.ndarray,
                      cfg: BoostConfig, bounds: CurvatureBounds,
                      warm: Optional[PrsState] = None):
    """One convex-regression boosted step: fit the sampled cost values and
    gradients to the (mu, L) class, then take a gradient-prox step with the
    regularized gradient at the previous iterate."""
    if not np.all(np.isfinite(x_prev)):
        raise ValueError("x_prev must be finite")
    X = _sample_anchors(x_prev, cfg, k)
    problem = stream.problem_at(k)
    phi = np.array([problem.value(X[i]) for i in range(cfg.ell)])
    Z = np.stack([problem.grad(X[i]) for i in range(cfg.ell)])
    data = CvxRegDataset(points=X, values=phi, gradients=Z)
    tic = time.perf_counter()
    sol, diag, state = cvxreg_fit(data, bounds, cfg.rho, cfg.stop, warm=warm)
    solver_time = time.perf_counter() - tic
    z_hat = extract_regularized_gradient(sol, 0)
    x_k = problem.prox(x_prev - cfg.alpha * z_hat, cfg.alpha)
    stats = StepStats(operator_calls=0, gradient_calls=cfg.ell,
                      solver_iterations=diag.iterations, solver_time_s=solver_time)
    return x_k, state, stats


def opreg_boost_interpolated_step(stream: ProblemStream, k: int, x_prev: np.ndarray,
                                  cfg: BoostConfig,
                                  cache: Optional[InterpolationCache] = None):
    """Boosted step with periodic refits: on refresh steps (k mod tau == 0)
    behave exactly like the plain boosted step and cache the fit; otherwise
    spend a single evaluation of the current map at the previous iterate and
    pull it into the cached contraction system by interpolation.

    Returns
    -------
    (x_k, InterpolationCache, StepStats)
    """
    if k % cfg.tau == 0 or cache is None:
        # refreshes resample the anchors, so the previous dual state does not
        # transfer; fit cold
        x_k, state, stats, (data, sol) = opreg_boost_step(stream, k, x_prev, cfg)
        return x_k, InterpolationCache(anchors=data, fitted=sol, prs=state), stats
    op = _operator(stream, k, cfg.alpha)
    t_k = op.apply(x_prev)
    t_hat = interpolate(cache.fitted, cache.anchors, t_k,
                        theta=cfg.map_theta, max_sweeps=cfg.map_max_sweeps)
    x_k = stream.problem_at(k).prox(t_hat, cfg.alpha)
    stats = StepStats(operator_calls=1, gradient_calls=0,
                      solver_iterations=0, solver_time_s=0.0)
    return x_k, cache, stats
