"""Gravity-balancing tension distribution over redundant muscles.

Solves min ||A f - tau||^2 + lam ||f||^2 subject to f >= f_min, where A is
the transposed moment-arm matrix in torque units.  The bound-constrained QP
is solved exactly by an active-set sweep (the objective is strictly convex,
so the minimizer is unique), then polished to exact torque balance with a
least-norm correction so commanded tensions are consistent with the plant's
equilibrium.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RESIDUAL_WARN = 0.5  # N*m, threshold for the infeasibility warning


@dataclass
class TensionSolution:
    f: np.ndarray
    torque_residual: float
    feasible: bool


def _solve_bound_qp(hess: np.ndarray, lin: np.ndarray, f_min: float) -> np.ndarray:
    """min 1/2 f^T H f - lin^T f with f >= f_min, H symmetric positive definite."""
    m = hess.shape[0]
    pinned = np.zeros(m, dtype=bool)
    f = np.full(m, f_min)
    for _ in range(3 * m + 2):
        free = ~pinned
        if free.any():
            rhs = lin[free] - hess[np.ix_(free, pinned)] @ f[pinned]
            f[free] = np.linalg.solve(hess[np.ix_(free, free)], rhs)
        viol = free & (f < f_min - 1e-12)
        if viol.any():
            pinned[viol] = True
            f[viol] = f_min
            continue
        grad = hess @ f - lin
        release = pinned & (grad < -1e-12)
        if not release.any():
            break
        pinned[np.argmin(np.where(release, grad, np.inf))] = False
    return np.maximum(f, f_min)


def distribute_tensions(
    g_mm: np.ndarray,
    tau: np.ndarray,
    f_min: float = 10.0,
    lam: float = 1e-4,
    f_warm: np.ndarray | None = None,
    polish: bool = True,
) -> TensionSolution:
    """Tension vector f >= f_min with A f ~= tau, A = (g_mm * 1e-3)^T.

    g_mm is the muscle Jacobian in mm/rad (positive tension produces joint
    torque -A f, so balancing gravity means A f = tau_gravity).  f_warm is
    accepted for interface stability; the exact solve does not need it.
    """
    del f_warm
    if f_min < 0.0:
        raise ValueError("f_min must be nonnegative")
    a = g_mm.T * 1e-3  # 5 x M, N*m per N
    m = a.shape[1]
    hess = a.T @ a + lam * np.eye(m)
    f = _solve_bound_qp(hess, a.T @ tau, f_min)

    if polish:
        exact = _exact_balance(a, tau, f, f_min)
        if exact is not None:
            f = exact

    residual = float(np.max(np.abs(tau - a @ f)))
    return TensionSolution(f=f, torque_residual=residual, feasible=residual <= RESIDUAL_WARN)


def _exact_balance(
    a: np.ndarray, tau: np.ndarray, f_ridge: np.ndarray, f_min: float
) -> np.ndarray | None:
    """Least-norm correction of the ridge solution to a f = tau exactly.

    The ridge bias is O(lam), so the ridge active set is (almost always) the
    right one; corrections are distributed over the free muscles, re-pinning
    any that a correction would push below the bound.  Returns None near
    moment-arm degeneracies, where exact balance would take an unreasonable
    rebalance (caller keeps the ridge solution and its residual warning).
    """
    cap = max(4.0 * float(np.max(f_ridge)), 300.0)
    f = f_ridge.copy()
    pinned = np.zeros(a.shape[1], dtype=bool)
    for _ in range(a.shape[1]):
        free = ~pinned
        if not free.any():
            return None
        r = tau - a @ f
        if float(np.max(np.abs(r))) < 1e-11:
            return f
        a_f = a[:, free]
        gram = a_f @ a_f.T
        # lstsq: rank-deficient systems correct what is achievable and leave
        # the unreachable torque components to the residual warning.
        mult = np.linalg.lstsq(gram, r, rcond=None)[0]
        delta = a_f.T @ mult
        cand = f[free] + delta
        if float(np.max(np.abs(cand))) > cap:
            return None
        viol = cand < f_min - 1e-12
        if viol.any():
            idx = np.flatnonzero(free)[viol]
            pinned[idx] = True
            f[idx] = f_min
            continue
        f[free] = cand
        return f
    return None
