"""
Comparison solvers for the online benchmarks: forward-backward, FISTA with
and without backtracking, guarded Anderson acceleration of the
forward-backward map, and the prox-linear method with its inner splitting
solver.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import CompositeProblem, EvaluationError, soft_threshold


class StepSizeError(RuntimeError):
    """Backtracking line search could not find an admissible step."""


class InnerSolveError(RuntimeError):
    """The inner splitting solver did not reach its residual tolerance.

    Carries the final primal and dual residuals.
    """

    def __init__(self, message, primal_residual, dual_residual):
        super().__init__(message)
        self.primal_residual = primal_residual
        self.dual_residual = dual_residual


def fb_step(problem: CompositeProblem, alpha: float, x: np.ndarray) -> np.ndarray:
    """One forward-backward step prox_{alpha g}(x - alpha grad f(x))."""
    if alpha <= 0:
        raise ValueError(f"step size must be positive, got {alpha}")
    g = problem.grad(x)
    if not np.all(np.isfinite(g)):
        raise EvaluationError("non-finite gradient", point=np.array(x, copy=True))
    return problem.prox(x - alpha * g, alpha)


# ---------------------------------------------------------------------------
# FISTA

@dataclass(frozen=True)
class FistaState:
    """Momentum state; start from ``FistaState.fresh(x0)`` so the first step
    coincides with plain forward-backward."""

    x: np.ndarray
    x_prev: np.ndarray
    t: float = 1.0
    lipschitz: float = 1.0  # backtracking estimate, growth on success disabled

    @classmethod
    def fresh(cls, x0: np.ndarray, lipschitz: float = 1.0) -> "FistaState":
        return cls(x=np.array(x0, copy=True), x_prev=np.array(x0, copy=True),
                   t=1.0, lipschitz=lipschitz)


def fista_step(state: FistaState, problem: CompositeProblem,
               alpha: Optional[float] = None, backtracking: bool = False,
               max_halvings: int = 60) -> FistaState:
    """One accelerated proximal-gradient step.

    With a fixed ``alpha`` the classical momentum recursion
    ``t+ = (1 + sqrt(1 + 4 t^2)) / 2`` is applied around the extrapolated
    point. With ``backtracking`` the trial step ``1 / L`` is halved until the
    quadratic upper-bound condition
    ``f(x+) <= f(y) + <grad f(y), x+ - y> + L/2 ||x+ - y||^2`` holds.
    """
    if not backtracking and (alpha is None or alpha <= 0):
        raise ValueError("need a positive alpha unless backtracking is enabled")
    t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * state.t ** 2))
    beta = (state.t - 1.0) / t_next
    y = state.x + beta * (state.x - state.x_prev)
    gy = problem.grad(y)
    if not backtracking:
        x_next = problem.prox(y - alpha * gy, alpha)
        lip = state.lipschitz
    else:
        fy = problem.value(y)
        lip = state.lipschitz
        for _ in range(max_halvings + 1):
            step = 1.0 / lip
            x_next = problem.prox(y - step * gy, step)
            diff = x_next - y
            if problem.value(x_next) <= fy + float(gy @ diff) + 0.5 * lip * float(diff @ diff) + 1e-12:
                break
            lip *= 2.0
        else:
            raise StepSizeError(f"no admissible step after {max_halvings} halvings")
    return FistaState(x=x_next, x_prev=state.x, t=t_next, lipschitz=lip)


# ---------------------------------------------------------------------------
# guarded Anderson acceleration

@dataclass
class AndersonState:
    """History and guard statistics of the accelerated fixed-point iteration.

    Keeps at most ``m`` past (iterate, image, residual) triples of the
    forward-backward map.
    """

    m: int
    images: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    accepted: int = 0
    rejected: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("memory depth must be >= 1")


def _mixing_weights(residuals) -> Optional[np.ndarray]:
    """Weights minimizing the norm of the mixed residual, summing to one.

    Rank-deficient Gram systems are handled by truncating the oldest history
    entries until the solve succeeds.
    """
    q = len(residuals)
    while q >= 2:
        F = np.stack(residuals[-q:])
        G = F @ F.T
        scale = np.trace(G) / q
        try:
            sol = np.linalg.solve(G + 1e-12 * max(scale, 1e-30) * np.eye(q), np.ones(q))
        except np.linalg.LinAlgError:
            q -= 1
            continue
        total = float(np.sum(sol))
        if not np.isfinite(total) or abs(total) < 1e-300:
            q -= 1
            continue
        w = np.zeros(len(residuals))
        w[-q:] = sol / total
        return w
    return None


def anderson_step(state: AndersonState, problem: CompositeProblem, alpha: float,
                  x: np.ndarray):
    """One guarded Anderson step on the forward-backward map.

    Extrapolates over the recent fixed-point residuals (type-II mixing) and
    accepts the extrapolated point only if its own fixed-point residual is
    smaller than the plain forward-backward candidate's; otherwise the
    candidate is kept. The guard makes the iteration never worse than
    forward-backward in residual norm.

    Returns
    -------
    (x_next, state) with ``state`` updated in place.
    """
    fb = fb_step(problem, alpha, x)
    res = fb - x
    state.images.append(fb)
    state.residuals.append(res)
    if len(state.images) > state.m:
        state.images.pop(0)
        state.residuals.pop(0)

    weights = _mixing_weights(state.residuals) if state.m >= 2 else None
    if weights is None:
        return fb, state

    x_aa = np.sum(weights[:, None] * np.stack(state.images), axis=0)
    res_aa = fb_step(problem, alpha, x_aa) - x_aa
    res_fb = fb_step(problem, alpha, fb) - fb
    if float(np.linalg.norm(res_aa)) < float(np.linalg.norm(res_fb)):
        state.accepted += 1
        return x_aa, state
    state.rejected += 1
    return fb, state


# ---------------------------------------------------------------------------
# prox-linear method

@dataclass(frozen=True)
class AdmmConfig:
    #: splitting penalty; None auto-scales to 1 / (alpha * smax * smin) with
    #: smax, smin the extreme (well-separated-from-zero) singular values of
    #: the residual map -- the geometric-mean rule balances the linear rate
    #: across its spectrum (a fixed penalty stalls on badly scaled maps)
    sigma: Optional[float] = None
    max_iter: int = 20000
    tol: float = 1e-6
    #: over-relaxation factor in (0, 2); 1.8 roughly halves iteration counts
    relax: float = 1.8


@dataclass(frozen=True)
class ProxLinearModel:
    """Affine residual model of the quadratic-measurement cost around a
    linearization base point: residual_i(x) = <c_i, x> - d_i with
    c_i = 2 <a_i, base> a_i and d_i = <a_i, base>^2 + b_i."""

    base: np.ndarray
    C: np.ndarray  # (m, n), rows c_i
    d: np.ndarray  # (m,)
    alpha: float

    def cost(self, x: np.ndarray) -> float:
        """Mean absolute residual, the linearized cost at x."""
        return float(np.mean(np.abs(self.C @ x - self.d)))


def build_prox_linear_model(A: np.ndarray, b: np.ndarray, base: np.ndarray,
                            alpha: float) -> ProxLinearModel:
    inner = A @ base
    C = 2.0 * inner[:, None] * A
    d = inner ** 2 + b
    return ProxLinearModel(base=np.array(base, copy=True), C=C, d=d, alpha=alpha)


def solve_prox_linear_subproblem(model: ProxLinearModel,
                                 inner: AdmmConfig = AdmmConfig()) -> np.ndarray:
    """Minimize ||x - base||^2 / (2 alpha) + mean |<c_i, x> - d_i| by an
    alternating splitting on the auxiliary residual vector: a cached linear
    solve against I/alpha + sigma C'C alternated with componentwise
    shrinkage, until both primal and dual residuals fall below the tolerance.

    Raises
    ------
    InnerSolveError
        On hitting the iteration cap with residuals above tolerance.
    """
    m, n = model.C.shape
    C, d, y, alpha = model.C, model.d, model.base, model.alpha
    sigma = inner.sigma
    if sigma is None:
        sv = np.linalg.svd(C, compute_uv=False)
        smax = max(float(sv[0]), 1e-30)
        above = sv[sv > 1e-8 * smax]
        smin = float(above[-1]) if len(above) else 1e-8 * smax
        sigma = 1.0 / (alpha * smax * smin)
    H = np.eye(n) / alpha + sigma * (C.T @ C)
    chol = np.linalg.cholesky(H)

    u = np.zeros(m)
    w = np.zeros(m)
    x = y.copy()
    kappa = 1.0 / (m * sigma)
    for _ in range(inner.max_iter):
        rhs = y / alpha + sigma * (C.T @ (d + u - w))
        x = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
        q = C @ x - d
        q_rel = inner.relax * q + (1.0 - inner.relax) * u
        u_old = u
        u = soft_threshold(q_rel + w, kappa)
        w = w + q_rel - u
        primal = float(np.linalg.norm(q - u))
        dual = sigma * float(np.linalg.norm(C.T @ (u - u_old)))
        if primal <= inner.tol and dual <= inner.tol:
            return x
    raise InnerSolveError("inner splitting did not converge", primal, dual)


def prox_linear_step(A: np.ndarray, b: np.ndarray, alpha: float, y: np.ndarray,
                     inner: AdmmConfig = AdmmConfig()) -> np.ndarray:
    """One prox-linear step: linearize the measurement residuals at y and take
    the proximal step of the linearized cost."""
    if alpha <= 0:
        raise ValueError(f"step size must be positive, got {alpha}")
    model = build_prox_linear_model(A, b, y, alpha)
    return solve_prox_linear_subproblem(model, inner)


def prox_subgradient_residual(model: ProxLinearModel, x: np.ndarray) -> float:
    """Residual of the prox optimality inclusion
    0 in (x - base)/alpha + (1/m) sum C_i' s_i, s_i in the sign set of the
    i-th affine residual. Independent of the inner solver: signs are pinned
    where residuals are nonzero, the free signs are fit by least squares and
    clipped to [-1, 1]."""
    m = model.C.shape[0]
    r = model.C @ x - model.d
    g = (x - model.base) / model.alpha
    s = np.sign(r)
    free = np.abs(r) <= 1e-7 * max(1.0, float(np.max(np.abs(r))))
    if np.any(free):
        rhs = -(g + (model.C[~free].T @ s[~free]) / m)
        Cf = model.C[free].T / m
        sol, *_ = np.linalg.lstsq(Cf, rhs, rcond=None)
        s[free] = np.clip(sol, -1.0, 1.0)
    return float(np.linalg.norm(g + (model.C.T @ s) / m))
