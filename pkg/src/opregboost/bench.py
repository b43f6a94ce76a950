"""
Problem generators for the two online experiments (ill-conditioned sparse
linear regression and phase retrieval), the budgeted online runner, and the
trace/summary file formats consumed by the CLI.
"""

import csv
import json
import time
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import baselines
from .boost import (BoostConfig, InterpolationCache, cvxreg_boost_step,
                    opreg_boost_step, opreg_boost_interpolated_step)
from .core import (CompositeProblem, CurvatureBounds, OperatorHandle,
                   ProblemStream, soft_threshold, sphere_project)


class GenerationError(ValueError):
    """Generated data violates the stream specification."""


# ---------------------------------------------------------------------------
# stream generators

@dataclass(frozen=True)
class LassoStreamSpec:
    """Ill-conditioned online sparse regression: rank-n/2 design with nonzero
    singular values spanning [sqrt(mu), sqrt(L)], sinusoidal ground truth
    with a third of the coordinates identically zero, fresh Gaussian
    measurement noise at every problem change."""

    n: int = 1000
    l1_weight: float = 1000.0
    L: float = 1e8
    mu: float = 1.0
    noise_var: float = 1e-2
    period_delta: float = 0.1
    horizon: int = 500
    seed: int = 0

    @property
    def rank(self) -> int:
        return self.n // 2


def _orthogonal(rng, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def generate_lasso_stream(spec: LassoStreamSpec) -> ProblemStream:
    """Build the sparse-regression stream; audits the generated design matrix
    (rank and extreme nonzero singular values) before returning."""
    rng = np.random.default_rng([spec.seed, 0])
    n, r = spec.n, spec.rank
    lo, hi = np.sqrt(spec.mu), np.sqrt(spec.L)
    svals = np.empty(r)
    svals[0], svals[-1] = hi, lo
    if r > 2:
        # only the extremes are pinned; interior spread log-uniformly
        svals[1:-1] = np.exp(rng.uniform(np.log(lo), np.log(hi), r - 2))
    U = _orthogonal(rng, n)
    V = _orthogonal(rng, n)
    A = (U[:, :r] * svals) @ V[:, :r].T

    got = np.linalg.svd(A, compute_uv=False)
    nonzero = got[got > hi * n * 1e-12]
    if len(nonzero) != r or abs(nonzero[0] - hi) > 1e-6 * hi or \
            abs(nonzero[-1] - lo) > 1e-6 * lo:
        raise GenerationError("design matrix failed the rank/singular-value audit")

    zero_idx = rng.choice(n, size=n // 3, replace=False)
    omega = rng.uniform(0.1, 1.0, n)
    phase = rng.uniform(0.0, 2.0 * np.pi, n)
    AtA = A.T @ A
    curvature = CurvatureBounds(mu=0.0, L=spec.L)
    w = spec.l1_weight

    def ground_truth(k: int) -> np.ndarray:
        y = np.sin(omega * k * spec.period_delta + phase)
        y[zero_idx] = 0.0
        return y

    @lru_cache(maxsize=8)
    def problem_at(k: int) -> CompositeProblem:
        noise_rng = np.random.default_rng([spec.seed, 1, k])
        b = A @ ground_truth(k) + np.sqrt(spec.noise_var) * noise_rng.standard_normal(n)
        Atb = A.T @ b

        def value(x):
            res = A @ x - b
            return 0.5 * float(res @ res)

        def grad(x):
            return AtA @ x - Atb

        def prox(y, alpha):
            return soft_threshold(y, alpha * w)

        return CompositeProblem(dim=n, value=value, grad=grad, prox=prox,
                                curvature=curvature)

    return ProblemStream(dim=n, horizon=spec.horizon, period_delta=spec.period_delta,
                         rng_seed=spec.seed, ground_truth=ground_truth,
                         problem_at=problem_at)


@dataclass(frozen=True)
class PhaseStreamSpec:
    """Online phase retrieval: measurement matrix U D with orthonormal-column
    U and diagonal D spanning [1, 100] (condition number 100), zero-mean
    unit-scale Laplace noise, piecewise-constant unit-sphere ground truth."""

    n: int = 50
    m: int = 100
    pieces: int = 1
    horizon: int = 100
    period_delta: float = 1.0
    alpha: float = 1e-3
    noise_scale: float = 1.0
    seed: int = 0
    #: measure <a_i, y>^2 by default; the linear toggle reproduces the
    #: alternative measurement model verbatim
    linear_measurements: bool = False
    sval_max: float = 100.0
    sval_min: float = 1.0


def generate_phase_stream(spec: PhaseStreamSpec) -> ProblemStream:
    """Build the phase-retrieval stream; audits the condition number of the
    measurement matrix. The returned stream additionally exposes
    ``measurement_matrix`` and ``measurements_at(k)`` for solvers that work
    on the raw data, and its ``operator_at`` hook wraps the prox-linear map
    composed with the sphere projection."""
    rng = np.random.default_rng([spec.seed, 0])
    n, m = spec.n, spec.m
    U, _ = np.linalg.qr(rng.standard_normal((m, n)))
    d = np.empty(n)
    d[0], d[1] = spec.sval_max, spec.sval_min
    d[2:] = rng.uniform(spec.sval_min, spec.sval_max, n - 2)
    A = U * d

    got = np.linalg.svd(A, compute_uv=False)
    cond = got[0] / got[-1]
    target = spec.sval_max / spec.sval_min
    if abs(cond - target) > 1e-6 * target:
        raise GenerationError("measurement matrix failed the condition-number audit")

    piece_len = max(1, int(np.ceil(spec.horizon / max(1, spec.pieces))))
    pieces = []
    for p in range(max(1, spec.pieces)):
        v = rng.standard_normal(n)
        pieces.append(v / np.linalg.norm(v))

    def ground_truth(k: int) -> np.ndarray:
        return np.array(pieces[min(k // piece_len, len(pieces) - 1)], copy=True)

    @lru_cache(maxsize=8)
    def measurements_at(k: int) -> np.ndarray:
        inner = A @ ground_truth(k)
        clean = inner if spec.linear_measurements else inner ** 2
        noise_rng = np.random.default_rng([spec.seed, 1, k])
        return clean + noise_rng.laplace(0.0, spec.noise_scale, m)

    smoothness = float(2.0 * np.max(d) ** 2 / m)

    @lru_cache(maxsize=8)
    def problem_at(k: int) -> CompositeProblem:
        b = measurements_at(k)

        def value(x):
            return float(np.mean(np.abs((A @ x) ** 2 - b)))

        def grad(x):
            inner = A @ x
            return (2.0 / m) * (A.T @ (np.sign(inner ** 2 - b) * inner))

        def prox(y, alpha):
            return sphere_project(y)

        return CompositeProblem(dim=n, value=value, grad=grad, prox=prox,
                                curvature=CurvatureBounds(mu=0.0, L=smoothness))

    def operator_at(k: int, alpha: float) -> OperatorHandle:
        b = measurements_at(k)
        return OperatorHandle(
            lambda x: sphere_project(baselines.prox_linear_step(A, b, alpha, x)))

    stream = ProblemStream(dim=n, horizon=spec.horizon, period_delta=spec.period_delta,
                           rng_seed=spec.seed, ground_truth=ground_truth,
                           problem_at=problem_at, operator_at=operator_at,
                           sign_invariant_error=True)
    stream.measurement_matrix = A
    stream.measurements_at = measurements_at
    return stream


# ---------------------------------------------------------------------------
# budget rule and solver adapters

@dataclass(frozen=True)
class BudgetRule:
    """Frozen per-tick step counts standing in for the experiments'
    equal-wall-clock budgets (hardware independent)."""

    steps: dict

    def steps_for(self, name: str) -> int:
        if name not in self.steps:
            raise KeyError(f"no budget entry for solver {name!r}")
        return self.steps[name]


def lasso_budget(ell: int = 3) -> BudgetRule:
    return BudgetRule(steps={"fb": ell + 1, "fista": ell + 1, "fista_bt": 2,
                             "anderson": 2, "opreg_boost": 1,
                             "opreg_boost_interp": 1, "cvxreg_boost": 1})


def phase_budget() -> BudgetRule:
    return BudgetRule(steps={"prox_linear": 4, "opreg_boost": 1})


class _CountingProblem:
    """Wrap a CompositeProblem, tallying gradient evaluations."""

    def __init__(self, problem: CompositeProblem):
        self._p = problem
        self.grad_calls = 0

    def __getattr__(self, name):
        return getattr(self._p, name)

    def grad(self, x):
        self.grad_calls += 1
        return self._p.grad(x)


class FbSolver:
    name = "fb"

    def __init__(self, alpha):
        self.alpha = alpha
        self.x = None

    def reset(self, x0):
        self.x = np.array(x0, copy=True)

    def tick(self, stream, k, steps):
        problem = stream.problem_at(k)
        for _ in range(steps):
            self.x = baselines.fb_step(problem, self.alpha, self.x)
        return self.x, steps


class FistaSolver:
    def __init__(self, alpha=None, backtracking=False):
        self.alpha = alpha
        self.backtracking = backtracking
        self.name = "fista_bt" if backtracking else "fista"
        self.state = None

    def reset(self, x0):
        self.state = baselines.FistaState.fresh(x0)

    def tick(self, stream, k, steps):
        problem = _CountingProblem(stream.problem_at(k))
        for _ in range(steps):
            self.state = baselines.fista_step(self.state, problem, self.alpha,
                                              backtracking=self.backtracking)
        return self.state.x, problem.grad_calls


class AndersonSolver:
    name = "anderson"

    def __init__(self, alpha, memory=5):
        self.alpha = alpha
        self.memory = memory
        self.x = None
        self.state = None

    def reset(self, x0):
        self.x = np.array(x0, copy=True)
        self.state = baselines.AndersonState(m=self.memory)

    def tick(self, stream, k, steps):
        problem = _CountingProblem(stream.problem_at(k))
        for _ in range(steps):
            self.x, self.state = baselines.anderson_step(self.state, problem,
                                                         self.alpha, self.x)
        return self.x, problem.grad_calls


class OpRegBoostSolver:
    name = "opreg_boost"

    def __init__(self, cfg: BoostConfig):
        self.cfg = cfg
        self.x = None

    def reset(self, x0):
        self.x = np.array(x0, copy=True)

    def tick(self, stream, k, steps):
        calls = 0
        for _ in range(steps):
            # no warm start across ticks: anchors are resampled every step,
            # and stale duals dominate the blend at small rho
            self.x, _, stats, _ = opreg_boost_step(stream, k, self.x, self.cfg)
            calls += stats.operator_calls
        return self.x, calls


class OpRegBoostInterpSolver:
    name = "opreg_boost_interp"

    def __init__(self, cfg: BoostConfig):
        self.cfg = cfg
        self.x = None
        self.cache = None

    def reset(self, x0):
        self.x = np.array(x0, copy=True)
        self.cache = None

    def tick(self, stream, k, steps):
        calls = 0
        for _ in range(steps):
            self.x, self.cache, stats = opreg_boost_interpolated_step(
                stream, k, self.x, self.cfg, cache=self.cache)
            calls += stats.operator_calls
        return self.x, calls


class CvxRegBoostSolver:
    name = "cvxreg_boost"

    def __init__(self, cfg: BoostConfig, bounds: CurvatureBounds):
        self.cfg = cfg
        self.bounds = bounds
        self.x = None

    def reset(self, x0):
        self.x = np.array(x0, copy=True)

    def tick(self, stream, k, steps):
        calls = 0
        for _ in range(steps):
            self.x, _, stats = cvxreg_boost_step(
                stream, k, self.x, self.cfg, self.bounds)
            calls += stats.gradient_calls
        return self.x, calls


class ProxLinearSolver:
    name = "prox_linear"

    def __init__(self, alpha, inner=None):
        self.alpha = alpha
        self.inner = inner or baselines.AdmmConfig()
        self.x = None

    def reset(self, x0):
        self.x = np.array(x0, copy=True)

    def tick(self, stream, k, steps):
        A = stream.measurement_matrix
        b = stream.measurements_at(k)
        for _ in range(steps):
            self.x = baselines.prox_linear_step(A, b, self.alpha, self.x, self.inner)
        return self.x, steps


# ---------------------------------------------------------------------------
# runner and trace files

@dataclass
class RunTrace:
    """Per-step records of one solver over one stream."""

    label: str
    ks: list = field(default_factory=list)
    tracking_errors: list = field(default_factory=list)
    calls: list = field(default_factory=list)
    step_wall_ns: list = field(default_factory=list)
    failures: list = field(default_factory=list)  # (k, message)

    def asymptotic_error(self) -> float:
        if not self.tracking_errors:
            return float("nan")
        tail = max(1, len(self.tracking_errors) // 4)
        return float(np.mean(self.tracking_errors[-tail:]))

    def mean_step_time_s(self) -> float:
        return float(np.mean(self.step_wall_ns)) / 1e9 if self.step_wall_ns else 0.0

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "tracking_error", "calls", "step_wall_ns"])
            for row in zip(self.ks, self.tracking_errors, self.calls, self.step_wall_ns):
                writer.writerow([row[0], repr(float(row[1])), row[2], row[3]])


def summarize_trace_csv(path) -> dict:
    """Recompute the summary entry of one trace file; byte-stable with the
    runner's own summary."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    errors = [float(r[1]) for r in rows[1:]]
    wall = [int(r[3]) for r in rows[1:]]
    tail = max(1, len(errors) // 4)
    return {"asymptotic_error": float(np.mean(errors[-tail:])) if errors else float("nan"),
            "mean_step_time_s": float(np.mean(wall)) / 1e9 if wall else 0.0}


def run_experiment(stream: ProblemStream, solvers: dict, budget: BudgetRule,
                   out_dir=None, x0=None, timing: bool = True) -> dict:
    """Run every solver over the stream's horizon under the frozen budget.

    Each tick applies the solver's budgeted number of algorithm steps to the
    current problem and records the tracking error of the resulting iterate.
    A failing solver step is recorded and the iterate held (fault isolation);
    the run continues. With ``timing=False`` the wall-time column is zeroed
    so repeated runs are byte-identical.

    Returns the dict of traces; writes per-solver CSVs and ``summary.json``
    when ``out_dir`` is given.
    """
    if x0 is None:
        x0 = np.zeros(stream.dim)
    traces = {}
    for name, solver in solvers.items():
        steps = budget.steps_for(name)
        solver.reset(x0)
        trace = RunTrace(label=name)
        x = np.array(x0, copy=True)
        for k in range(stream.horizon):
            tic = time.perf_counter_ns()
            try:
                x, calls = solver.tick(stream, k, steps)
            except Exception as exc:  # noqa: BLE001 - fault isolation by contract
                trace.failures.append((k, f"{type(exc).__name__}: {exc}"))
                calls = 0
            wall = time.perf_counter_ns() - tic if timing else 0
            trace.ks.append(k)
            trace.tracking_errors.append(stream.tracking_error(x, k))
            trace.calls.append(calls)
            trace.step_wall_ns.append(wall)
        traces[name] = trace

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        summary = {}
        for name, trace in traces.items():
            trace.write_csv(out_dir / f"{name}.csv")
            summary[name] = {"asymptotic_error": trace.asymptotic_error(),
                             "mean_step_time_s": trace.mean_step_time_s()}
        with open(out_dir / "summary.json", "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
    return traces
