"""Scripted experiment scenarios: the standard sweep-plus-push comparison,
a plane-wipe analogue, and a square-to-circle drawing analogue.

Each scenario bundles the arm, target path, wrench schedule, controller
constants, and a seed, so experiments are reproducible end to end.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .arm import ArmModel, Kinematics, scenario_arm
from .compensation import StiffnessParams
from .errors import DomainError
from .plant import NoiseConfig
from .session import JointPath, LimiterConfig, Trajectory, WrenchProfile, end_effector_path

# Controller constants shared by the shipped scenarios; picked so teaching
# pushes deflect the arm visibly while every wire stays taut (see README).
SCENARIO_F_MIN = 35.0
SCENARIO_STIFFNESS = StiffnessParams(f_bias=30.0, k=25.0)

SWEEP_KEYS = [
    (0.0, np.array([0.426, 0.083, 0.133, 0.897, 0.04])),
    (4.0, np.array([0.429, 0.179, 0.1, 0.731, 0.04])),
    (8.0, np.array([0.552, 0.094, 0.138, 0.885, 0.11])),
    (11.0, np.array([0.371, 0.212, 0.211, 0.834, 0.331])),
    (14.0, np.array([0.426, 0.083, 0.133, 0.897, 0.04])),
]
SWEEP_PUSH_FORCE = np.array([-23.37, -14.70, 0.30])  # N
HOLD_POSE = np.array([0.5, 0.15, 0.1, 0.9, 0.2])


@dataclass
class Scenario:
    """A named, fully specified teaching experiment."""

    name: str
    path: JointPath
    wrench: WrenchProfile
    limiter: LimiterConfig
    stiffness: StiffnessParams = field(default_factory=lambda: replace(SCENARIO_STIFFNESS))
    f_min: float = SCENARIO_F_MIN
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    seed: int = 0

    def make_arm(self) -> ArmModel:
        return scenario_arm()


def sweep_push(limiter_on: bool = False, f_max: float = 100.0, seed: int = 0) -> Scenario:
    """The standard comparison scenario: slow arm sweep, lateral-push teaching."""
    f = SWEEP_PUSH_FORCE
    wrench = WrenchProfile(
        knots=[(1.5, np.zeros(3)), (3.0, f), (11.0, f), (12.5, np.zeros(3))]
    )
    return Scenario(
        name="sweep-push" + ("-limiter" if limiter_on else ""),
        path=JointPath([(t, q.copy()) for t, q in SWEEP_KEYS]),
        wrench=wrench,
        limiter=LimiterConfig(enabled=limiter_on, f_max=f_max),
        seed=seed,
    )


def hold_press(force: np.ndarray | None = None, duration: float = 24.0, seed: int = 0,
               limiter_on: bool = True, f_max: float = 100.0) -> Scenario:
    """Static hold with a sustained press; used for limiter behavior checks."""
    f = np.array([-18.0, -22.0, -8.0]) if force is None else np.asarray(force, dtype=float)
    wrench = WrenchProfile(
        knots=[(2.0, np.zeros(3)), (4.0, f), (12.0, f), (12.5, np.zeros(3))]
    )
    return Scenario(
        name="hold-press",
        path=JointPath.hold(HOLD_POSE, duration),
        wrench=wrench,
        limiter=LimiterConfig(enabled=limiter_on, f_max=f_max),
        seed=seed,
    )


def null_teaching(duration: float = 6.0, seed: int = 0) -> Scenario:
    """Zero-wrench teaching on a held pose; the fixed-point scenario."""
    return Scenario(
        name="null-teaching",
        path=JointPath.hold(HOLD_POSE, duration),
        wrench=WrenchProfile(knots=[(0.0, np.zeros(3))]),
        limiter=LimiterConfig(enabled=False),
        seed=seed,
    )


def ik_solve(arm: ArmModel, target_xyz: np.ndarray, seed_q: np.ndarray, iters: int = 100) -> np.ndarray:
    """Damped least-squares IK for the end-effector point, clamped to limits."""
    frame, xyz = arm.attachment_point("end_effector")
    q = arm.clamp(np.asarray(seed_q, dtype=float))
    target_xyz = np.asarray(target_xyz, dtype=float)
    for _ in range(iters):
        kin = Kinematics(arm, q)
        pos = kin.point(frame, xyz)
        err = target_xyz - pos
        if np.linalg.norm(err) < 1e-9:
            break
        jac = kin.point_jacobian(frame, pos)
        delta = jac.T @ np.linalg.solve(jac @ jac.T + 1e-6 * np.eye(3), err)
        q = arm.clamp(q + delta)
    return q


def _ee_keyframes(arm: ArmModel, points: list[np.ndarray], times: list[float], seed_q) -> JointPath:
    keys = []
    q = np.asarray(seed_q, dtype=float)
    for t, p in zip(times, points):
        q = ik_solve(arm, p, q)
        keys.append((t, q.copy()))
    return JointPath(keys)


def square_circle(seed: int = 0, limiter_on: bool = True, f_max: float = 200.0) -> Scenario:
    """Drawing analogue: a square end-effector loop taught toward a circle.

    The teaching wrench rotates in the drawing plane, pulling the corners in
    and the edges out, which morphs the square toward the inscribed circle.
    """
    arm = scenario_arm()
    center = np.array([0.24, 0.10, -0.32])
    half = 0.055
    corners = [
        center + np.array([0.0, -half, -half]),
        center + np.array([0.0, half, -half]),
        center + np.array([0.0, half, half]),
        center + np.array([0.0, -half, half]),
        center + np.array([0.0, -half, -half]),
    ]
    times = [0.0, 3.5, 7.0, 10.5, 14.0]
    path = _ee_keyframes(arm, corners, times, HOLD_POSE)

    # Rotating in-plane force sampled at 0.5 s knots: pushes toward the
    # inscribed circle (inward at corners, outward mid-edge).
    knots = []
    for t in np.arange(0.0, 14.001, 0.5):
        u = 2.0 * np.pi * t / 14.0
        knots.append((t, np.array([0.0, -18.0 * np.sin(u + np.pi / 4), 14.0 * np.cos(u + np.pi / 4)])))
    return Scenario(
        name="square-circle",
        path=path,
        wrench=WrenchProfile(knots=knots),
        limiter=LimiterConfig(enabled=limiter_on, f_max=f_max),
        seed=seed,
    )


def score_plane_wipe(arm: ArmModel, taught: Trajectory, reproduced: Trajectory,
                     press_threshold: float = 2.0) -> dict:
    """Wiping-task proxy score: reproduced contact stays near the taught plane.

    Fits a plane to the taught end-effector points over the pressed window
    (wrench magnitude >= press_threshold) and reports the reproduction's
    worst distance from it over the same window; success below 5 mm.
    """
    wrench_doc = taught.metadata.get("wrench", {})
    profile = WrenchProfile.from_dict(wrench_doc) if wrench_doc else WrenchProfile()
    times = taught.times
    pressed = np.array([np.linalg.norm(profile.force_at(t)) >= press_threshold for t in times])
    if pressed.sum() < 3:
        raise DomainError("teaching never pressed hard enough to define a plane")
    pts = end_effector_path(arm, taught)[pressed]
    centroid = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - centroid)
    normal = vt[-1]
    rep_pts = end_effector_path(arm, reproduced)[pressed]
    dist = np.abs((rep_pts - centroid) @ normal)
    return {
        "max_distance_mm": float(dist.max() * 1000.0),
        "mean_distance_mm": float(dist.mean() * 1000.0),
        "success": bool(dist.max() * 1000.0 <= 5.0),
    }


def hausdorff_mm(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two polylines' vertex sets, mm."""
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()) * 1000.0)


def score_square_circle(arm: ArmModel, taught: Trajectory, reproduced: Trajectory) -> dict:
    """Drawing-task proxy score: reproduced path close to the taught loop."""
    taught_ee = end_effector_path(arm, taught)
    rep_ee = end_effector_path(arm, reproduced)
    h = hausdorff_mm(taught_ee, rep_ee)
    return {"hausdorff_mm": h, "success": bool(h <= 10.0)}


BUILTIN_SCENARIOS = {
    "sweep-push": lambda: sweep_push(limiter_on=False),
    "sweep-push-limiter": lambda: sweep_push(limiter_on=True, f_max=100.0),
    "hold-press": hold_press,
    "null-teaching": null_teaching,
    "square-circle": square_circle,
}


def get_scenario(name: str) -> Scenario:
    if name not in BUILTIN_SCENARIOS:
        raise DomainError(
            f"unknown scenario {name!r}; valid: {', '.join(sorted(BUILTIN_SCENARIOS))}"
        )
    return BUILTIN_SCENARIOS[name]()
