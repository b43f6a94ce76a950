"""
Extension of a fitted contractive operator to new query points: any point in
the intersection of the balls centered at the fitted values with radii
zeta * ||x - x_i|| extends the operator without increasing its modulus. The
intersection point is located by cyclic alternating projections.
"""

from dataclasses import dataclass

import numpy as np

from .opreg import ContractiveEvaluations, RegressionDataset


class MapConvergenceError(RuntimeError):
    """Alternating projections exhausted the sweep budget.

    Carries the last iterate (``iterate``) and the per-ball distance excesses
    (``violations``).
    """

    def __init__(self, message, iterate, violations):
        super().__init__(message)
        self.iterate = iterate
        self.violations = violations


@dataclass(frozen=True)
class BallSystem:
    """Centers, radii and anchors of the constraint balls for one query."""

    centers: np.ndarray  # (ell, n) fitted values
    radii: np.ndarray    # (ell,) zeta * ||x - x_i||
    anchors: np.ndarray  # (ell, n)

    def __post_init__(self):
        if np.any(self.radii < 0):
            raise ValueError("radii must be nonnegative")

    def violations(self, point: np.ndarray) -> np.ndarray:
        """Distance of ``point`` beyond each ball's surface (<= 0 inside)."""
        return np.linalg.norm(point - self.centers, axis=1) - self.radii


def project_ball(u: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    """Exact Euclidean projection onto the ball B(center, radius)."""
    d = u - center
    nrm = float(np.linalg.norm(d))
    if nrm <= radius:
        return u
    if nrm == 0.0:
        return center.copy()
    return center + (radius / nrm) * d


def interpolate(fitted: ContractiveEvaluations, anchors: RegressionDataset,
                x: np.ndarray, theta: float = 1e-9, max_sweeps: int = 500) -> np.ndarray:
    """Evaluate the extended contractive operator at a query point.

    If ``x`` coincides with an anchor (within 1e-12) its fitted value is
    returned directly. Otherwise the cyclic projection sweep, fixed ascending
    index order, runs from the fitted value of the nearest anchor until
    consecutive iterates move less than ``theta``. The result depends on this
    (frozen) initialization and cycle order; any intersection point is a
    valid extension.

    Raises
    ------
    MapConvergenceError
        If ``max_sweeps`` sweeps do not reach the threshold.
    """
    X = anchors.points if hasattr(anchors, "points") else np.asarray(anchors)
    T = fitted.t_hat
    dists = np.linalg.norm(X - x, axis=1)
    hit = np.nonzero(dists <= 1e-12)[0]
    if len(hit):
        return np.array(T[hit[0]], copy=True)

    system = BallSystem(centers=T, radii=fitted.zeta * dists, anchors=X)
    current = np.array(T[np.argmin(dists)], copy=True)
    return _map_cycle(system, current, theta, max_sweeps)


def _map_cycle(system: BallSystem, start: np.ndarray, theta: float,
               max_sweeps: int) -> np.ndarray:
    current = start
    for _ in range(max_sweeps):
        previous = current
        for c, r in zip(system.centers, system.radii):
            current = project_ball(current, c, r)
        if float(np.linalg.norm(current - previous)) <= theta:
            return current
    raise MapConvergenceError(
        f"alternating projections did not reach theta={theta} in {max_sweeps} sweeps",
        iterate=current, violations=system.violations(current))
