"""
Closed-form solvers for the two structured QCQPs used by the splitting
solvers: projection-like problems with one pairwise distance constraint
(operator regression) and with two curvature-interpolation constraints
(convex regression). Both run in O(n).
"""

from dataclasses import dataclass

import numpy as np

from .core import CurvatureBounds


class InvalidInstanceError(ValueError):
    """The instance violates the solver's preconditions."""


@dataclass(frozen=True)
class OneConstraintInstance:
    """min 1/2 ||(t_i, t_j) - (w_i, w_j)||^2  s.t.  1/2 ||t_i - t_j||^2 <= b."""

    w_i: np.ndarray
    w_j: np.ndarray
    b: float

    def __post_init__(self):
        if self.w_i.shape != self.w_j.shape:
            raise InvalidInstanceError("w_i and w_j must have equal dimensions")
        if not self.b > 0:
            raise InvalidInstanceError(f"constraint level b must be positive, got {self.b}")


def solve_one_constraint(inst: OneConstraintInstance):
    """Solve the 1-constraint projection QCQP in closed form.

    The multiplier is ``lambda* = max(0, (||w_i - w_j|| / sqrt(2 b) - 1) / 2)``
    and the optimizer blends the two blocks with weights
    ``(1 + lambda, lambda) / (1 + 2 lambda)``.

    Returns
    -------
    (t_i, t_j, lam) : tuple of two arrays and the multiplier.
    """
    wi, wj = inst.w_i, inst.w_j
    # norms before ratios; keeps the formula finite at extreme scales
    dist = float(np.linalg.norm(wi - wj))
    lam = max(0.0, 0.5 * (dist / np.sqrt(2.0 * inst.b) - 1.0))
    if lam == 0.0:
        return wi.copy(), wj.copy(), 0.0
    g = 1.0 + 2.0 * lam
    t_i = ((1.0 + lam) * wi + lam * wj) / g
    t_j = (lam * wi + (1.0 + lam) * wj) / g
    return t_i, t_j, lam


@dataclass(frozen=True)
class TwoConstraintInstance:
    """Projection of a stacked (phi_i, phi_j, delta_i, delta_j) vector onto the
    pairwise curvature-interpolation set of a (mu, L)-regular function.

    ``w`` stacks two scalars followed by two R^n blocks, so its length is
    2 (n + 1). The two quadratic constraints share the Hessian
    ``P = blkdiag(0, [[1, -1], [-1, 1]] (x) I_n)`` and the offset
    ``r = L mu ||x_i - x_j||^2 / 2``; their linear parts are derived from the
    anchor pair and the curvature bounds.
    """

    w: np.ndarray
    x_i: np.ndarray
    x_j: np.ndarray
    bounds: CurvatureBounds

    def __post_init__(self):
        n = self.x_i.shape[0]
        if self.x_j.shape != self.x_i.shape:
            raise InvalidInstanceError("anchor points must have equal dimensions")
        if self.w.shape != (2 + 2 * n,):
            raise InvalidInstanceError(
                f"w must have length 2(n+1) = {2 + 2 * n}, got {self.w.shape}")
        if not self.bounds.mu > 0:
            raise InvalidInstanceError("need L > mu > 0")
        if not np.any(self.x_i != self.x_j):
            raise InvalidInstanceError("anchor points must be distinct")

    @property
    def dim(self) -> int:
        return self.x_i.shape[0]

    def q1(self) -> np.ndarray:
        mu, L = self.bounds.mu, self.bounds.L
        dx = self.x_i - self.x_j
        return np.concatenate(([-(L - mu)], [L - mu], -mu * dx, L * dx))

    def q2(self) -> np.ndarray:
        mu, L = self.bounds.mu, self.bounds.L
        dx = self.x_i - self.x_j
        return np.concatenate(([L - mu], [-(L - mu)], -L * dx, mu * dx))

    def r(self) -> float:
        dx = self.x_i - self.x_j
        return float(self.bounds.L * self.bounds.mu * (dx @ dx) / 2.0)

    def constraint_values(self, t: np.ndarray) -> tuple:
        """Evaluate both constraint functions (<= 0 when satisfied)."""
        n = self.dim
        d = t[2:2 + n] - t[2 + n:]
        quad = 0.5 * float(d @ d)
        r = self.r()
        return (quad + float(self.q1() @ t) + r, quad + float(self.q2() @ t) + r)


def _mix(s: np.ndarray, lam_sum: float, n: int) -> np.ndarray:
    """Solve (I + lam_sum * P) t = s using the 2x2 block eigenstructure."""
    t = s.copy()
    di, dj = s[2:2 + n], s[2 + n:]
    g = 1.0 + 2.0 * lam_sum
    t[2:2 + n] = ((1.0 + lam_sum) * di + lam_sum * dj) / g
    t[2 + n:] = (lam_sum * di + (1.0 + lam_sum) * dj) / g
    return t


def _polish(w, q1, q2, n, convals, l1, l2, active, rounds=3):
    """Newton-refine the active multipliers so the activity equations hold to
    near machine precision in absolute terms (root extraction alone leaves
    residuals that are only small relative to the constraint scale)."""
    idx = [a for a, on in enumerate(active) if on]
    for _ in range(rounds):
        t = _mix(w - l1 * q1 - l2 * q2, l1 + l2, n)
        c = convals(t)
        res = np.array([c[a] for a in idx])
        if np.all(np.abs(res) < 1e-13):
            break
        lam = [l1, l2]
        J = np.empty((len(idx), len(idx)))
        for col, a in enumerate(idx):
            h = max(1e-9, 1e-7 * lam[a])
            bumped = list(lam)
            bumped[a] += h
            tb = _mix(w - bumped[0] * q1 - bumped[1] * q2, bumped[0] + bumped[1], n)
            cb = convals(tb)
            J[:, col] = [(cb[r] - c[r]) / h for r in idx]
        try:
            delta = np.linalg.solve(J, res)
        except np.linalg.LinAlgError:
            break
        for col, a in enumerate(idx):
            lam[a] = max(0.0, lam[a] - delta[col])
        l1, l2 = lam
    return l1, l2


def solve_two_constraint(inst: TwoConstraintInstance):
    """Solve the 2-constraint projection QCQP in closed form.

    The solver enumerates the four KKT activity patterns, each solved exactly:
    the inactive pattern is a feasibility check, the both-active pattern has
    explicit multiplier formulas (difference linear, sum from the positive
    root of a quadratic), and each single-active pattern reduces to a cubic
    in its multiplier after clearing the mixing denominator. The first
    pattern whose candidate satisfies all KKT conditions is the optimum
    (the problem is convex with a Slater point).

    Returns
    -------
    (t, lam1, lam2) : optimizer and the two nonnegative multipliers.
    """
    n = inst.dim
    mu, L = inst.bounds.mu, inst.bounds.L
    w = inst.w
    dx = inst.x_i - inst.x_j
    nd2 = float(dx @ dx)
    q1, q2, r = inst.q1(), inst.q2(), inst.r()
    scl = max(1.0, abs(r), float(np.max(np.abs(w))) ** 2)

    def convals(t):
        return inst.constraint_values(t)

    # pattern (0,0): w itself feasible
    c1w, c2w = convals(w)
    if c1w <= 0.0 and c2w <= 0.0:
        return w.copy(), 0.0, 0.0

    p_w = w[0] - w[1]
    S_w = w[2:2 + n] + w[2 + n:]
    D_w = w[2:2 + n] - w[2 + n:]

    # pattern (1,1): both constraints active.
    # Subtracting the two active equalities is linear in lam1 - lam2; summing
    # them collapses to ||v||^2 / (1 + 2 lam_sum)^2 = (L - mu)^2 ||dx||^2 / 4
    # with v = D_w - (L + mu) dx / 2, whose positive root gives lam_sum.
    lam_minus = (float(dx @ S_w) - 2.0 * p_w) / ((L - mu) * (nd2 + 4.0))
    v = D_w - 0.5 * (L + mu) * dx
    vv = float(v @ v)
    lam_plus = 0.5 * (2.0 * np.sqrt(vv) / ((L - mu) * np.sqrt(nd2)) - 1.0)
    l1 = 0.5 * (lam_plus + lam_minus)
    l2 = 0.5 * (lam_plus - lam_minus)
    if l1 > 0.0 and l2 > 0.0:
        t = _mix(w - l1 * q1 - l2 * q2, l1 + l2, n)
        c1, c2 = convals(t)
        if c1 <= 1e-8 * scl and c2 <= 1e-8 * scl:
            l1, l2 = _polish(w, q1, q2, n, convals, l1, l2, (True, True))
            t = _mix(w - l1 * q1 - l2 * q2, l1 + l2, n)
            return t, l1, l2

    # single-active patterns: with only constraint a active at multiplier lam,
    # the activity equation times (1 + 2 lam)^2 is a cubic in lam
    K = (L - mu) ** 2 * nd2 / 4.0
    a0 = (L - mu) * (float(dx @ S_w) - 2.0 * p_w)
    a1 = (L - mu) ** 2 * (4.0 + nd2)
    best = None
    for qa, sign_a, first in ((q1, 1.0, True), (q2, -1.0, False)):
        c = sign_a * a0 - K
        coeffs = (-4.0 * a1, 4.0 * c - 4.0 * a1, 4.0 * c - a1, c + vv)
        for root in np.roots(coeffs):
            if abs(root.imag) > 1e-9 * max(1.0, abs(root.real)) or root.real <= 0.0:
                continue
            lam = float(root.real)
            t = _mix(w - lam * qa, lam, n)
            c1, c2 = convals(t)
            ca, cb = (c1, c2) if first else (c2, c1)
            if abs(ca) <= 1e-7 * scl and cb <= 1e-7 * scl:
                active = (True, False) if first else (False, True)
                la, lb = _polish(w, q1, q2, n, convals,
                                 lam if first else 0.0,
                                 0.0 if first else lam, active)
                lam = la if first else lb
                t = _mix(w - lam * qa, lam, n)
                obj = 0.5 * float((t - w) @ (t - w))
                cand = (obj, t, lam if first else 0.0, 0.0 if first else lam)
                if best is None or cand[0] < best[0]:
                    best = cand
    if best is not None:
        return best[1], best[2], best[3]
    raise InvalidInstanceError("no KKT pattern admits a valid candidate; "
                               "instance is numerically degenerate")
