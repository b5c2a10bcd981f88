"""Quasi-static plant: potential-energy equilibrium plus first-order relaxation.

Total energy (N*m) at configuration q under motor-side commands l_cmd (mm)
and an external force F at an attachment point:

    E(q) = 1e-3 * sum_i Phi_i(p_i(q) - l_cmd_i) + U_gravity(q) - F . x_attach(q)

with Phi the integral of the elastic law.  The equilibrium solver is a
projected damped-Newton descent on E within the joint limits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .arm import (
    ArmModel,
    Kinematics,
    N_JOINTS,
    elastic_tension,
    gravity_potential,
    gravity_terms,
    muscle_geometry,
    muscle_jacobian,
    path_lengths,
)
from .errors import DomainError, SolverError

CONTROL_DT = 0.008  # s, control period
PLANT_TIME_CONSTANT = 0.060  # s, first-order relaxation toward equilibrium
WRENCH_FORCE_CAP = 200.0  # N


@dataclass
class ExternalWrench:
    """Force (N, world frame) applied at a named attachment point."""

    force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    attachment: str = "end_effector"

    def __post_init__(self):
        self.force = np.asarray(self.force, dtype=float)
        if self.force.shape != (3,) or not np.all(np.isfinite(self.force)):
            raise DomainError("wrench force must be a finite 3-vector")
        if np.linalg.norm(self.force) > WRENCH_FORCE_CAP:
            raise DomainError(
                f"wrench force exceeds the {WRENCH_FORCE_CAP:.0f} N safety cap"
            )

    @property
    def is_zero(self) -> bool:
        return not np.any(self.force)


ZERO_WRENCH = ExternalWrench()


def _elastic_potential(model: ArmModel, stretch_mm: np.ndarray) -> float:
    """Integral of the elastic law over stretch, in N*mm."""
    s = np.maximum(stretch_mm, 0.0)
    k1 = np.array([m.k1 for m in model.muscles])
    k2 = np.array([m.k2 for m in model.muscles])
    return float(np.sum(k1 * s**2 / 2.0 + k2 * s**3 / 3.0))


def _evaluate(model: ArmModel, q, l_cmd, wrench: ExternalWrench):
    """Energy, analytic gradient, and an elastic Gauss-Newton Hessian, one FK pass."""
    q = np.asarray(q, dtype=float)
    kin = Kinematics(model, q)
    p, jac = muscle_geometry(model, kin)
    s = p - l_cmd
    sp = np.maximum(s, 0.0)
    k1, k2 = model.k1, model.k2
    f = k1 * sp + k2 * sp * sp
    stiff = np.where(s > 0.0, k1 + 2.0 * k2 * sp, 0.0)

    u_grav, tau_grav = gravity_terms(model, kin)
    energy = 1e-3 * float(np.sum(k1 * sp**2 / 2.0 + k2 * sp**3 / 3.0)) + u_grav
    grad = 1e-3 * (jac.T @ f) - tau_grav
    hess = 1e-3 * (jac.T * stiff) @ jac

    if not wrench.is_zero:
        frame, xyz = model.attachment_point(wrench.attachment)
        point = kin.point(frame, xyz)
        energy -= float(wrench.force @ point)
        grad -= kin.point_jacobian(frame, point).T @ wrench.force
    return energy, grad, hess


def total_energy(model: ArmModel, q, l_cmd, wrench: ExternalWrench = ZERO_WRENCH) -> float:
    return _evaluate(model, q, l_cmd, wrench)[0]


def energy_gradient(model: ArmModel, q, l_cmd, wrench: ExternalWrench = ZERO_WRENCH) -> np.ndarray:
    return _evaluate(model, q, l_cmd, wrench)[1]


def _projected_residual(model: ArmModel, q, grad) -> np.ndarray:
    """Gradient with components pointing into an active joint limit zeroed."""
    lo, hi = model.joint_limits[:, 0], model.joint_limits[:, 1]
    r = grad.copy()
    at_lo = q <= lo + 1e-12
    at_hi = q >= hi - 1e-12
    r[at_lo] = np.minimum(grad[at_lo], 0.0)
    r[at_hi] = np.maximum(grad[at_hi], 0.0)
    return r


def solve_equilibrium(
    model: ArmModel,
    l_cmd,
    wrench: ExternalWrench = ZERO_WRENCH,
    q_seed=None,
    tol: float = 1e-6,
    max_iter: int = 500,
) -> np.ndarray:
    """Minimize total potential energy over q within joint limits.

    Returns q with projected gradient sup-norm <= tol (N*m).  Damped Newton
    with a numerically differenced Hessian of the analytic gradient and a
    backtracking line search on the energy; deterministic.
    """
    l_cmd = np.asarray(l_cmd, dtype=float)
    if l_cmd.shape != (model.n_muscles,) or not np.all(np.isfinite(l_cmd)):
        raise DomainError("l_cmd must be a finite per-muscle vector")
    if q_seed is None:
        q_seed = np.zeros(N_JOINTS)
    model.check_limits(q_seed)
    q = model.clamp(np.asarray(q_seed, dtype=float))

    energy, grad, hess = _evaluate(model, q, l_cmd, wrench)
    resid = float(np.max(np.abs(_projected_residual(model, q, grad))))
    if resid <= tol:
        return q

    def fd_hessian(q0):
        h = 1e-6
        out = np.empty((N_JOINTS, N_JOINTS))
        for j in range(N_JOINTS):
            dq = np.zeros(N_JOINTS)
            dq[j] = h
            out[:, j] = (
                _evaluate(model, q0 + dq, l_cmd, wrench)[1]
                - _evaluate(model, q0 - dq, l_cmd, wrench)[1]
            ) / (2.0 * h)
        return 0.5 * (out + out.T)

    lo, hi = model.joint_limits[:, 0], model.joint_limits[:, 1]
    max_step = 0.5  # rad, trust-region cap on one Newton step

    def free_mask(q0, g0):
        blocked_lo = (q0 <= lo + 1e-12) & (g0 > 0.0)
        blocked_hi = (q0 >= hi - 1e-12) & (g0 < 0.0)
        return ~(blocked_lo | blocked_hi)

    def line_search(step):
        slope = float(grad @ step)
        if slope >= 0.0:
            return None
        alpha = 1.0
        while alpha >= 1e-7:
            q_new = model.clamp(q + alpha * step)
            e_new, g_new, h_new = _evaluate(model, q_new, l_cmd, wrench)
            if e_new <= energy + 1e-4 * alpha * slope and energy - e_new > 1e-16:
                return (q_new, e_new, g_new, h_new), alpha
            alpha *= 0.5
        return None

    damping = 1e-6
    use_fd = False
    stalls = 0
    for it in range(max_iter):
        if it >= 8:
            use_fd = True  # elastic Gauss-Newton had its chance; go exact
        hess_try = fd_hessian(q) if use_fd else hess
        free = free_mask(q, grad)
        step = np.zeros(N_JOINTS)
        g_f = grad[free]
        h_f = hess_try[np.ix_(free, free)]
        lam = damping
        solved = False
        for _ in range(16):
            try:
                cand = np.linalg.solve(h_f + lam * np.eye(len(g_f)), -g_f)
            except np.linalg.LinAlgError:
                lam = max(lam * 10.0, 1e-6)
                continue
            if cand @ g_f < 0.0:  # descent direction on the free set
                step[free] = cand
                solved = True
                break
            lam = max(lam * 10.0, 1e-6)
        if not solved:
            step[free] = -g_f
        big = float(np.max(np.abs(step)))
        if big > max_step:
            step *= max_step / big

        hit = line_search(step)
        if hit is None:
            fallback = np.zeros(N_JOINTS)
            fallback[free] = -g_f
            nrm = float(np.max(np.abs(fallback)))
            if nrm > 0.0:
                hit = line_search(fallback * min(1.0, max_step / nrm))

        if hit is not None:
            (q, energy, grad, hess), alpha = hit
            progress = True
            # Levenberg-Marquardt style damping update from step quality.
            if alpha >= 0.5:
                damping = max(damping / 3.0, 1e-10)
            else:
                damping = min(damping * 10.0, 1e8)
            stalls = stalls + 1 if alpha < 1e-3 else 0
        else:
            damping = min(damping * 10.0, 1e8)
            stalls += 1

        resid = float(np.max(np.abs(_projected_residual(model, q, grad))))
        if resid <= tol:
            return q
        if stalls >= 2 and not use_fd:
            use_fd = True
            stalls = 0
        elif stalls >= 8:
            break
    raise SolverError("equilibrium solver did not converge", resid)


@dataclass
class NoiseConfig:
    """Optional sensor noise; zero sigmas keep the plant bit-deterministic."""

    tension_sigma: float = 0.0  # N
    length_sigma: float = 0.0  # mm

    @property
    def enabled(self) -> bool:
        return self.tension_sigma > 0.0 or self.length_sigma > 0.0


@dataclass
class PlantState:
    q: np.ndarray
    time: float = 0.0
    # Seed for the next equilibrium solve; tracks the (slowly moving)
    # equilibrium rather than the lagging state, so warm solves stay cheap.
    q_eq_seed: np.ndarray | None = None

    def copy(self) -> "PlantState":
        return PlantState(
            self.q.copy(),
            self.time,
            None if self.q_eq_seed is None else self.q_eq_seed.copy(),
        )


def plant_step(
    model: ArmModel,
    state: PlantState,
    l_cmd,
    wrench: ExternalWrench = ZERO_WRENCH,
    dt: float = CONTROL_DT,
    tau: float = PLANT_TIME_CONSTANT,
    noise: NoiseConfig | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Advance the plant one control period toward the commanded equilibrium.

    Returns (sensed_l, sensed_f, q_true).  q_true is recorded for evaluation
    only; the controllers never read it.
    """
    l_cmd = np.asarray(l_cmd, dtype=float)
    seed = state.q_eq_seed if state.q_eq_seed is not None else state.q
    q_eq = solve_equilibrium(model, l_cmd, wrench, q_seed=seed)
    state.q_eq_seed = q_eq.copy()
    alpha = 1.0 - np.exp(-dt / tau)
    state.q = state.q + alpha * (q_eq - state.q)
    state.time += dt

    sensed_l = l_cmd.copy()
    sensed_f = elastic_tension(
        model, path_lengths(model, state.q, check_limits=False) - l_cmd
    )
    if noise is not None and noise.enabled:
        if rng is None:
            raise DomainError("noise enabled but no RNG supplied")
        if noise.length_sigma > 0.0:
            sensed_l = sensed_l + rng.normal(0.0, noise.length_sigma, model.n_muscles)
        if noise.tension_sigma > 0.0:
            sensed_f = np.maximum(
                sensed_f + rng.normal(0.0, noise.tension_sigma, model.n_muscles), 0.0
            )
    return sensed_l, sensed_f, state.q.copy()
