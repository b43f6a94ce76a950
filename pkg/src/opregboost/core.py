"""
Domain types for composite time-varying problems and the basic operator
building blocks shared by every other module.

All vectors are dense float64 arrays; problems live in modest dimensions
(n <= 1000 or so) where sparsity never pays off.
"""

import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class EvaluationError(ValueError):
    """A gradient or operator evaluation produced non-finite values.

    Carries the offending point in the ``point`` attribute.
    """

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class DegenerateInputError(ValueError):
    """Input is in a degenerate configuration the operation leaves undefined."""


@dataclass(frozen=True)
class CurvatureBounds:
    """Lower and upper curvature moduli of a smooth cost.

    ``mu`` is the strong-convexity (or weak-convexity, depending on context)
    modulus, ``L`` the gradient Lipschitz constant. Requires 0 <= mu < L.
    """

    mu: float
    L: float

    def __post_init__(self):
        if not (0 <= self.mu < self.L):
            raise ValueError(f"need 0 <= mu < L, got mu={self.mu}, L={self.L}")


@dataclass(frozen=True)
class CompositeProblem:
    """A composite cost: smooth part with gradient access plus a proximable part.

    Parameters
    ----------
    dim : int
        Dimension of the decision variable.
    value : callable
        ``value(x)`` evaluates the smooth part.
    grad : callable
        ``grad(x)`` evaluates its gradient.
    prox : callable
        ``prox(y, alpha)`` evaluates the proximal operator of the nonsmooth
        part with parameter ``alpha > 0``.
    curvature : CurvatureBounds
        Curvature information of the smooth part.
    """

    dim: int
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    prox: Callable[[np.ndarray, float], np.ndarray]
    curvature: CurvatureBounds


class OperatorHandle:
    """A map R^n -> R^n with an evaluation tally.

    The counter increments by exactly one per ``apply`` and is safe to bump
    from concurrent evaluators; the wrapped function must be pure.
    """

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray]):
        self._fn = fn
        self._count = 0
        self._lock = threading.Lock()

    def apply(self, x: np.ndarray) -> np.ndarray:
        with self._lock:
            self._count += 1
        return self._fn(x)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.apply(x)

    @property
    def call_counter(self) -> int:
        return self._count


@dataclass
class ProblemStream:
    """A clocked sequence of composite problems with a ground-truth signal.

    ``problem_at(k)`` is constant between problem changes; at the step-budget
    model used by the benchmarks one online step is taken per change, so each
    index k addresses one problem instance. Identical seeds must reproduce
    bit-identical streams.
    """

    dim: int
    horizon: int
    period_delta: float
    rng_seed: int
    ground_truth: Callable[[int], np.ndarray]
    problem_at: Callable[[int], CompositeProblem]
    #: optional factory (k, alpha) -> OperatorHandle overriding the default
    #: forward-backward map; used when the tracked operator is not gradient-based
    operator_at: Optional[Callable[[int, float], OperatorHandle]] = None
    #: use min(||x - y||, ||x + y||) as tracking error (global sign ambiguity)
    sign_invariant_error: bool = False

    def tracking_error(self, x: np.ndarray, k: int) -> float:
        y = self.ground_truth(k)
        err = float(np.linalg.norm(x - y))
        if self.sign_invariant_error:
            err = min(err, float(np.linalg.norm(x + y)))
        return err


def forward_backward_map(problem: CompositeProblem, alpha: float) -> OperatorHandle:
    """Gradient-step operator x -> x - alpha * grad f(x) of a composite problem.

    The proximal part is *not* folded in; callers apply it separately so the
    nonsmooth structure (sparsity, constraints) is never regressed away.

    Raises
    ------
    EvaluationError
        If the gradient evaluates to non-finite values.
    """
    if alpha <= 0:
        raise ValueError(f"step size must be positive, got {alpha}")

    def step(x):
        g = problem.grad(x)
        if not np.all(np.isfinite(g)):
            raise EvaluationError("non-finite gradient", point=np.array(x, copy=True))
        return x - alpha * g

    return OperatorHandle(step)


def sphere_project(x: np.ndarray) -> np.ndarray:
    """Project onto the unit sphere, x / ||x||.

    Raises
    ------
    DegenerateInputError
        If ||x|| < 1e-30; the projection of the origin is undefined and a
        silent default direction would corrupt downstream traces.
    """
    nrm = np.linalg.norm(x)
    if nrm < 1e-30:
        raise DegenerateInputError("cannot project a (near-)zero vector onto the sphere")
    return x / nrm


def soft_threshold(y: np.ndarray, kappa: float) -> np.ndarray:
    """Componentwise shrinkage sign(y) * max(|y| - kappa, 0).

    This is the proximal operator of ``kappa * ||.||_1``; ``kappa`` must be
    nonnegative.
    """
    if kappa < 0:
        raise ValueError(f"threshold must be nonnegative, got {kappa}")
    return np.sign(y) * np.maximum(np.abs(y) - kappa, 0.0)
