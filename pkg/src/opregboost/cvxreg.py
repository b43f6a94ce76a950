"""
Convex-regression solver: project sampled function values and gradients onto
the pairwise interpolation constraints of mu-strongly convex, L-smooth
functions, with the same edge-decomposed Peaceman-Rachford scheme as the
operator-regression solver but 2-constraint edge subproblems.
"""

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import CurvatureBounds
from .opreg import PrsDiagnostics, PrsState, StopRule, edge_set
from .qcqp import TwoConstraintInstance, solve_two_constraint


@dataclass(frozen=True)
class CvxRegDataset:
    """Sampled function values and gradients at distinct anchor points.

    ``points`` is (ell, n), ``values`` (ell,), ``gradients`` (ell, n).
    Gradient samples are mandatory; the closed-form edge solver assumes the
    full (value, gradient) block structure.
    """

    points: np.ndarray
    values: np.ndarray
    gradients: np.ndarray

    def __post_init__(self):
        X = self.points
        if X.ndim != 2 or X.shape[0] < 2:
            raise ValueError("points must be (ell >= 2, n)")
        if self.values.shape != (X.shape[0],):
            raise ValueError("values must be (ell,)")
        if self.gradients.shape != X.shape:
            raise ValueError("gradients must match points' shape")
        for arr in (X, self.values, self.gradients):
            if not np.all(np.isfinite(arr)):
                raise ValueError("dataset contains non-finite values")

    @property
    def ell(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class CvxRegSolution:
    """Fitted values and gradients consistent (up to ``max_violation``) with
    every ordered-pair interpolation constraint of the curvature class."""

    values: np.ndarray     # (ell,)
    gradients: np.ndarray  # (ell, n)
    max_violation: float


def interpolation_violation(values, gradients, points, bounds: CurvatureBounds) -> float:
    """Largest residual of the ordered-pair (mu, L) interpolation inequalities.

    Each inequality is evaluated in the scaled <= 0 form used by the edge
    subproblems (multiplied through by L - mu), so residuals are directly
    comparable with the solver's feasibility tolerance.
    """
    mu, L = bounds.mu, bounds.L
    worst = -np.inf
    ell = points.shape[0]
    for i in range(ell):
        for j in range(ell):
            if i == j:
                continue
            dx = points[i] - points[j]
            dd = gradients[i] - gradients[j]
            lhs = 0.5 * float(dd @ dd) + L * mu * float(dx @ dx) / 2.0
            lhs += -(L - mu) * values[i] + (L - mu) * values[j]
            lhs += -mu * float(dx @ gradients[i]) + L * float(dx @ gradients[j])
            worst = max(worst, lhs)
    return worst


def cvxreg_fit(data: CvxRegDataset, bounds: CurvatureBounds, rho: float,
               stop: StopRule = StopRule(), warm: Optional[PrsState] = None):
    """Fit the closest (mu, L)-interpolable value/gradient samples.

    Identical splitting structure to the operator-regression solver: per-edge
    blend, closed-form 2-constraint projection, consensus aggregation over
    the per-anchor (value, gradient) blocks, dual update. Returns the
    consensus aggregate.

    Returns
    -------
    (CvxRegSolution, PrsDiagnostics, PrsState)
    """
    if bounds.mu <= 0:
        raise ValueError("need L > mu > 0")
    if rho <= 0:
        raise ValueError(f"rho must be positive, got {rho}")
    X = np.asarray(data.points, dtype=np.float64)
    yv = np.asarray(data.values, dtype=np.float64)
    Z = np.asarray(data.gradients, dtype=np.float64)
    ell, n = X.shape
    ei, ej = edge_set(ell)
    E = len(ei)
    m = 2 + 2 * n  # per-edge variable: (phi_i, phi_j, delta_i, delta_j)
    deg = ell - 1.0

    # per-edge data vector in the same stacked layout
    data_e = np.empty((E, m))
    for e in range(E):
        data_e[e] = np.concatenate(([yv[ei[e]]], [yv[ej[e]]], Z[ei[e]], Z[ej[e]]))

    if warm is not None and warm.z.shape == (E, m):
        z = np.array(warm.z, dtype=np.float64, copy=True)
    else:
        z = data_e.copy()

    t = np.zeros_like(z)
    phi = np.zeros(ell)
    delta = np.zeros((ell, n))
    res = np.inf
    iters = 0
    blend_data = rho / (deg + rho)
    blend_dual = deg / (deg + rho)
    for _ in range(stop.max_iter):
        for e in range(E):
            w = blend_data * data_e[e] + blend_dual * z[e]
            inst = TwoConstraintInstance(w=w, x_i=X[ei[e]], x_j=X[ej[e]], bounds=bounds)
            t[e], _, _ = solve_two_constraint(inst)
        # consensus aggregation over (value, gradient) blocks per anchor
        phi[:] = 0.0
        delta[:] = 0.0
        refl = 2.0 * t - z
        np.add.at(phi, ei, refl[:, 0])
        np.add.at(phi, ej, refl[:, 1])
        np.add.at(delta, ei, refl[:, 2:2 + n])
        np.add.at(delta, ej, refl[:, 2 + n:])
        phi /= deg
        delta /= deg
        v_e = np.concatenate([phi[ei, None], phi[ej, None], delta[ei], delta[ej]], axis=1)
        dz = v_e - t
        z += dz
        iters += 1
        res = float(np.max(np.abs(dz))) if dz.size else 0.0
        if res <= stop.tol:
            break

    viol = interpolation_violation(phi, delta, X, bounds)
    obj = 0.5 * float(np.sum((yv - phi) ** 2) + np.sum((Z - delta) ** 2))
    sol = CvxRegSolution(values=phi.copy(), gradients=delta.copy(), max_violation=viol)
    diag = PrsDiagnostics(iterations=iters, residual=res, max_violation=viol,
                          objective=obj)
    return sol, diag, PrsState(z=z, rho=rho, iterations=iters)


def extract_regularized_gradient(sol: CvxRegSolution, index: int = 0) -> np.ndarray:
    """Fitted gradient at the given anchor index."""
    return np.array(sol.gradients[index], copy=True)


def read_cvxreg_csv(path) -> CvxRegDataset:
    """Read a dataset CSV with header ``i, x_1..x_n, f, z_1..z_n``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty dataset file")
    header = [c.strip() for c in rows[0]]
    n_x = sum(1 for c in header if c.startswith("x_"))
    n_z = sum(1 for c in header if c.startswith("z_"))
    expected = ["i"] + [f"x_{d + 1}" for d in range(n_x)] + ["f"] + \
        [f"z_{d + 1}" for d in range(n_z)]
    if n_x == 0 or n_x != n_z or header != expected:
        raise ValueError(f"{path}: expected header 'i, x_1..x_n, f, z_1..z_n'")
    X, f, Z = [], [], []
    for row in rows[1:]:
        if not row:
            continue
        vals = [float(c) for c in row[1:]]
        X.append(vals[:n_x])
        f.append(vals[n_x])
        Z.append(vals[n_x + 1:])
    return CvxRegDataset(points=np.array(X), values=np.array(f), gradients=np.array(Z))
