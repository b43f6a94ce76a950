"""
Independent reference solvers used by the tests.

These deliberately take different solution paths from the library code:
the pair projection works in mean/difference coordinates, and the
two-constraint reference enumerates KKT activity patterns with numeric
root-finding / dual ascent instead of closed-form multiplier expressions.
"""

import numpy as np
from scipy.optimize import brentq, minimize


def project_pair_oracle(w_i, w_j, b):
    """Projection of (w_i, w_j) onto {1/2 ||t_i - t_j||^2 <= b} via the
    mean/difference change of variables: the block mean is unconstrained and
    the difference is projected onto the ball of radius sqrt(2 b)."""
    mean = 0.5 * (w_i + w_j)
    diff = w_i - w_j
    nrm = float(np.linalg.norm(diff))
    cap = np.sqrt(2.0 * b)
    if nrm > cap:
        diff = diff * (cap / nrm)
    return mean + 0.5 * diff, mean - 0.5 * diff


def _two_constraint_pieces(inst):
    n = inst.dim
    m = 2 + 2 * n
    P = np.zeros((m, m))
    eye = np.eye(n)
    P[2:2 + n, 2:2 + n] = eye
    P[2 + n:, 2 + n:] = eye
    P[2:2 + n, 2 + n:] = -eye
    P[2 + n:, 2:2 + n] = -eye
    return m, P, inst.q1(), inst.q2(), inst.r()


def two_constraint_oracle(inst):
    """Reference optimum of the two-constraint projection QCQP.

    Enumerates the four multiplier activity patterns. Each active pattern is
    solved numerically: the Lagrangian minimizer t(l1, l2) comes from a dense
    linear solve, scalar activity equations are bracketed and bisected, and
    the both-active pattern is a 2-D concave dual maximization. Among the
    candidates passing the KKT conditions the lowest objective wins.

    Returns (t, objective) or None when no pattern yields a valid candidate.
    """
    m, P, q1, q2, r = _two_constraint_pieces(inst)
    w = inst.w
    scl = max(1.0, abs(r), float(np.max(np.abs(w))) ** 2)
    feas_tol = 1e-7 * scl

    def t_of(l1, l2):
        return np.linalg.solve(np.eye(m) + (l1 + l2) * P, w - l1 * q1 - l2 * q2)

    def cons(t):
        return inst.constraint_values(t)

    def objective(t):
        return 0.5 * float((t - w) @ (t - w))

    candidates = []

    c1w, c2w = cons(w)
    if c1w <= feas_tol and c2w <= feas_tol:
        candidates.append((w.copy(), 0.0, 0.0))

    # single-active patterns: bisect the active constraint in its multiplier
    for which in (0, 1):
        def activity(lam, which=which):
            pair = (lam, 0.0) if which == 0 else (0.0, lam)
            return cons(t_of(*pair))[which]

        lo, hi, f_lo = 0.0, 1.0, activity(0.0)
        if f_lo > 0.0:
            f_hi = activity(hi)
            grew = 0
            while f_lo * f_hi > 0.0 and grew < 200:
                hi *= 2.0
                f_hi = activity(hi)
                grew += 1
            if f_lo * f_hi <= 0.0:
                lam = brentq(activity, lo, hi, xtol=1e-15, rtol=1e-15)
                pair = (lam, 0.0) if which == 0 else (0.0, lam)
                candidates.append((t_of(*pair), *pair))

    # both-active pattern: maximize the concave dual over the quadrant
    def neg_dual(lams):
        t = t_of(lams[0], lams[1])
        c1, c2 = cons(t)
        val = objective(t) + lams[0] * c1 + lams[1] * c2
        return -val, np.array([-c1, -c2])

    for start in ((1.0, 1.0), (1e-3, 1e-3), (10.0, 10.0), (1e-3, 10.0), (10.0, 1e-3)):
        res = minimize(neg_dual, np.array(start), jac=True, method="L-BFGS-B",
                       bounds=[(0.0, None), (0.0, None)],
                       options={"maxiter": 500, "ftol": 1e-16, "gtol": 1e-14})
        l1, l2 = max(res.x[0], 0.0), max(res.x[1], 0.0)
        candidates.append((t_of(l1, l2), l1, l2))

    best = None
    for t, l1, l2 in candidates:
        c1, c2 = cons(t)
        if c1 > feas_tol or c2 > feas_tol:
            continue
        if abs(l1 * c1) > feas_tol or abs(l2 * c2) > feas_tol:
            continue
        obj = objective(t)
        if best is None or obj < best[1]:
            best = (t, obj)
    return best
