"""
Peaceman-Rachford consensus solver for operator regression: project a set of
operator evaluations onto the pairwise contraction constraints
||t_i - t_j||^2 <= zeta^2 ||x_i - x_j||^2, one copy pair and one dual per
unordered anchor pair.
"""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class StopRule:
    """Inner-loop stopping rule: iteration cap and/or dual-residual tolerance
    (infinity norm of the dual update), whichever triggers first."""

    max_iter: int = 100
    tol: float = 1e-8

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class RegressionDataset:
    """Anchor points and operator evaluations to be regularized.

    ``points`` has shape (ell, n) and ``evaluations`` the same; row
    ``distinguished_index`` (default 0) holds the anchor whose fitted value
    the online algorithm extracts.
    """

    points: np.ndarray
    evaluations: np.ndarray
    distinguished_index: int = 0

    def __post_init__(self):
        X, Y = self.points, self.evaluations
        if X.ndim != 2 or Y.shape != X.shape:
            raise ValueError("points and evaluations must be (ell, n) arrays of equal shape")
        if X.shape[0] < 2:
            raise ValueError("need at least two anchor points")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("dataset contains non-finite values")
        if not 0 <= self.distinguished_index < X.shape[0]:
            raise ValueError("distinguished_index out of range")

    @property
    def ell(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def edge_set(ell: int) -> tuple:
    """Ordered pairs (i, j), i < j, as two index arrays of length ell(ell-1)/2."""
    ei, ej = np.triu_indices(ell, k=1)
    return ei.astype(np.int64), ej.astype(np.int64)


@dataclass
class PrsState:
    """Carry-over state of the splitting solver (per-edge duals), used to warm
    start consecutive solves on slowly moving data."""

    z: np.ndarray  # (E, 2n)
    rho: float
    iterations: int = 0


@dataclass(frozen=True)
class ContractiveEvaluations:
    """Fitted values certified (up to ``max_violation``) to satisfy all
    pairwise contraction constraints at factor ``zeta``."""

    t_hat: np.ndarray  # (ell, n)
    zeta: float
    max_violation: float


@dataclass(frozen=True)
class PrsDiagnostics:
    iterations: int
    residual: float
    max_violation: float
    objective: float


#: absolute feasibility tolerance on the squared-norm constraints; reported,
#: never silently clipped
FEAS_TOL = 1e-6


def constraint_violation(t_hat: np.ndarray, points: np.ndarray, zeta: float) -> float:
    """Largest residual ||t_i - t_j||^2 - zeta^2 ||x_i - x_j||^2 over pairs."""
    ei, ej = edge_set(points.shape[0])
    lhs = np.sum((t_hat[ei] - t_hat[ej]) ** 2, axis=1)
    rhs = zeta ** 2 * np.sum((points[ei] - points[ej]) ** 2, axis=1)
    return float(np.max(lhs - rhs)) if len(lhs) else 0.0


def opreg_fit(data: RegressionDataset, zeta: float, rho: float,
              stop: StopRule = StopRule(), warm: Optional[PrsState] = None,
              parallel: bool = False):
    """Fit the closest zeta-contractive evaluations to the dataset.

    Runs the edge-decomposed Peaceman-Rachford iteration: each edge blends its
    dual with the data, solves its 1-constraint projection QCQP in closed
    form, and the per-anchor aggregate enforces consensus. The returned
    fitted values are the consensus aggregate at termination, which is
    well defined even before full convergence.

    Parameters
    ----------
    data : RegressionDataset
    zeta : float
        Contraction target in (0, 1).
    rho : float
        Splitting penalty, > 0.
    stop : StopRule
    warm : PrsState, optional
        Dual state from a previous solve on nearby data.
    parallel : bool
        Use the threaded edge loop with unordered residual reduction;
        excluded from bit-reproducibility guarantees.

    Returns
    -------
    (ContractiveEvaluations, PrsDiagnostics, PrsState)
    """
    if not 0 < zeta < 1:
        raise ValueError(f"zeta must be in (0, 1), got {zeta}")
    if rho <= 0:
        raise ValueError(f"rho must be positive, got {rho}")
    X = np.ascontiguousarray(data.points, dtype=np.float64)
    Y = np.ascontiguousarray(data.evaluations, dtype=np.float64)
    ell, n = X.shape
    ei, ej = edge_set(ell)
    E = len(ei)
    b = 0.5 * zeta ** 2 * np.sum((X[ei] - X[ej]) ** 2, axis=1)

    if warm is not None and warm.z.shape == (E, 2 * n):
        z = np.array(warm.z, dtype=np.float64, copy=True)
    else:
        # cold start at the data itself: feasible data is then a fixed point
        z = np.concatenate([Y[ei], Y[ej]], axis=1).astype(np.float64)
    v = np.zeros((ell, n))
    t = np.zeros((E, 2 * n))
    kernel = _kernels.prs_iterations_parallel if parallel else _kernels.prs_iterations
    iters, res = kernel(Y, z, ei, ej, b, float(rho), int(stop.max_iter),
                        float(stop.tol), v, t)

    viol = constraint_violation(v, X, zeta)
    obj = 0.5 * float(np.sum((v - Y) ** 2))
    sol = ContractiveEvaluations(t_hat=v, zeta=zeta, max_violation=viol)
    diag = PrsDiagnostics(iterations=int(iters), residual=float(res),
                          max_violation=viol, objective=obj)
    return sol, diag, PrsState(z=z, rho=rho, iterations=int(iters))


def extract_boosted_value(sol: ContractiveEvaluations, data: RegressionDataset) -> np.ndarray:
    """Fitted value at the dataset's distinguished anchor."""
    return np.array(sol.t_hat[data.distinguished_index], copy=True)


# ---------------------------------------------------------------------------
# file interfaces for the `fit` CLI verb

def read_regression_csv(path) -> RegressionDataset:
    """Read a dataset CSV with header ``i, x_1..x_n, y_1..y_n``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty dataset file")
    header = [c.strip() for c in rows[0]]
    n_x = sum(1 for c in header if c.startswith("x_"))
    n_y = sum(1 for c in header if c.startswith("y_"))
    if header[:1] != ["i"] or n_x == 0 or n_x != n_y or len(header) != 1 + n_x + n_y:
        raise ValueError(f"{path}: expected header 'i, x_1..x_n, y_1..y_n'")
    X, Y = [], []
    for row in rows[1:]:
        if not row:
            continue
        vals = [float(c) for c in row[1:]]
        X.append(vals[:n_x])
        Y.append(vals[n_x:])
    return RegressionDataset(points=np.array(X), evaluations=np.array(Y))


def write_solution_csv(path, sol: ContractiveEvaluations, diag: PrsDiagnostics):
    """Write fitted values as ``i, t_1..t_n`` plus a JSON diagnostics sidecar."""
    path = Path(path)
    n = sol.t_hat.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i"] + [f"t_{d + 1}" for d in range(n)])
        for i, row in enumerate(sol.t_hat):
            writer.writerow([i + 1] + [repr(float(val)) for val in row])
    sidecar = path.with_suffix(".json")
    with open(sidecar, "w") as fh:
        json.dump({"iterations": diag.iterations, "residual": diag.residual,
                   "max_violation": diag.max_violation, "objective": diag.objective},
                  fh, indent=2)
    return sidecar
