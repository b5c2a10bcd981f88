"""Tendon-driven 5-DOF arm model: kinematics, muscle routing, elasticity, gravity.

Joint order is [S-p, S-r, S-y, E-p, E-y] (shoulder pitch/roll/yaw, elbow
pitch/yaw), angles in radians.  Muscle lengths are reported in mm on the
motor side, tensions in N.  The shoulder is a ball joint at the base origin;
the elbow composes yaw about the upper-arm axis, then pitch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

N_JOINTS = 5

# Link frames a routing point can be fixed in.
BASE, UPPER, FORE = "base", "upper", "fore"
_FRAMES = (BASE, UPPER, FORE)

JOINT_NAMES = ("S-p", "S-r", "S-y", "E-p", "E-y")

MODEL_SCHEMA_VERSION = 1


def rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass
class Muscle:
    """One wire: anchor -> via points -> insertion, with a series elastic element.

    Each routing point is (frame, xyz-in-frame-meters).  k1 [N/mm] and
    k2 [N/mm^2] parameterize the stiffening elastic law f = k1*s + k2*s^2.
    """

    name: str
    points: list[tuple[str, np.ndarray]]
    k1: float = 5.0
    k2: float = 0.5

    def __post_init__(self):
        if self.k1 <= 0.0 or self.k2 < 0.0:
            raise DomainError(f"muscle {self.name}: need k1 > 0, k2 >= 0")
        if len(self.points) < 2:
            raise DomainError(f"muscle {self.name}: needs at least two routing points")
        pts = []
        for frame, xyz in self.points:
            if frame not in _FRAMES:
                raise DomainError(f"muscle {self.name}: unknown frame {frame!r}")
            pts.append((frame, np.asarray(xyz, dtype=float)))
        self.points = pts


DEFAULT_JOINT_LIMITS = np.array(
    [
        [-1.57, 1.57],  # S-p
        [-1.57, 1.57],  # S-r
        [-1.57, 1.57],  # S-y
        [0.0, 2.3],     # E-p
        [-1.57, 1.57],  # E-y
    ]
)


@dataclass
class ArmModel:
    """Geometry, masses and muscle routing of the simulated arm."""

    upper_length: float = 0.25
    fore_length: float = 0.25
    upper_mass: float = 1.5
    fore_mass: float = 1.0
    upper_com: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -0.125]))
    fore_com: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -0.125]))
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))
    joint_limits: np.ndarray = field(default_factory=lambda: DEFAULT_JOINT_LIMITS.copy())
    base_position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    muscles: list[Muscle] = field(default_factory=list)

    def __post_init__(self):
        self.upper_com = np.asarray(self.upper_com, dtype=float)
        self.fore_com = np.asarray(self.fore_com, dtype=float)
        self.gravity = np.asarray(self.gravity, dtype=float)
        self.joint_limits = np.asarray(self.joint_limits, dtype=float)
        self.base_position = np.asarray(self.base_position, dtype=float)
        self._k1 = np.array([m.k1 for m in self.muscles])
        self._k2 = np.array([m.k2 for m in self.muscles])
        self._build_point_tables()
        self.neutral_lengths = (
            path_lengths(self, np.zeros(N_JOINTS), check_limits=False)
            if self.muscles
            else np.zeros(0)
        )

    def _build_point_tables(self):
        """Flatten routing points into arrays for vectorized kinematics."""
        frame_idx = {BASE: 0, UPPER: 1, FORE: 2}
        frames, xyzs, seg_a, seg_b, seg_muscle = [], [], [], [], []
        offset = 0
        for i, m in enumerate(self.muscles):
            n = len(m.points)
            for fr, xyz in m.points:
                frames.append(frame_idx[fr])
                xyzs.append(xyz)
            for k in range(n - 1):
                seg_a.append(offset + k)
                seg_b.append(offset + k + 1)
                seg_muscle.append(i)
            offset += n
        self._pt_frames = np.array(frames, dtype=int) if frames else np.zeros(0, dtype=int)
        self._pt_xyz = np.array(xyzs, dtype=float) if xyzs else np.zeros((0, 3))
        self._seg_a = np.array(seg_a, dtype=int)
        self._seg_b = np.array(seg_b, dtype=int)
        self._seg_muscle = np.array(seg_muscle, dtype=int)

    @property
    def n_muscles(self) -> int:
        return len(self.muscles)

    @property
    def k1(self) -> np.ndarray:
        return self._k1

    @property
    def k2(self) -> np.ndarray:
        return self._k2

    def attachment_point(self, name: str) -> tuple[str, np.ndarray]:
        points = {
            "end_effector": (FORE, np.array([0.0, 0.0, -self.fore_length])),
            "elbow": (UPPER, np.array([0.0, 0.0, -self.upper_length])),
        }
        if name not in points:
            raise DomainError(f"unknown attachment point {name!r}")
        return points[name]

    def check_limits(self, q: np.ndarray):
        q = np.asarray(q, dtype=float)
        if q.shape != (N_JOINTS,):
            raise DomainError(f"joint vector must have shape ({N_JOINTS},), got {q.shape}")
        lo, hi = self.joint_limits[:, 0], self.joint_limits[:, 1]
        eps = 1e-12
        if np.any(q < lo - eps) or np.any(q > hi + eps):
            bad = [JOINT_NAMES[i] for i in range(N_JOINTS) if not lo[i] - eps <= q[i] <= hi[i] + eps]
            raise DomainError(f"joint angles out of limits: {', '.join(bad)}")

    def clamp(self, q: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(q, dtype=float), self.joint_limits[:, 0], self.joint_limits[:, 1])


def _cross_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product of one 3-vector with each row of b; avoids np.cross overhead."""
    return np.column_stack(
        (
            a[1] * b[:, 2] - a[2] * b[:, 1],
            a[2] * b[:, 0] - a[0] * b[:, 2],
            a[0] * b[:, 1] - a[1] * b[:, 0],
        )
    )


class Kinematics:
    """Forward kinematics of one configuration, with point Jacobians."""

    def __init__(self, model: ArmModel, q: np.ndarray):
        q = np.asarray(q, dtype=float)
        self.q = q
        self.base = model.base_position
        r_y1 = rot_y(q[0])
        r_u = r_y1 @ rot_x(q[1]) @ rot_z(q[2])
        self.r_upper = r_u
        self.elbow = self.base + r_u @ np.array([0.0, 0.0, -model.upper_length])
        self.r_fore = r_u @ rot_z(q[4]) @ rot_y(q[3])
        # World-frame joint axes and centers, in joint order.
        self.axes = np.stack(
            [
                np.array([0.0, 1.0, 0.0]),
                r_y1 @ np.array([1.0, 0.0, 0.0]),
                r_y1 @ rot_x(q[1]) @ np.array([0.0, 0.0, 1.0]),
                r_u @ rot_z(q[4]) @ np.array([0.0, 1.0, 0.0]),
                r_u @ np.array([0.0, 0.0, 1.0]),
            ]
        )
        self.centers = np.stack([self.base] * 3 + [self.elbow] * 2)

    def point(self, frame: str, xyz: np.ndarray) -> np.ndarray:
        if frame == BASE:
            return self.base + xyz
        if frame == UPPER:
            return self.base + self.r_upper @ xyz
        return self.elbow + self.r_fore @ xyz

    def point_jacobian(self, frame: str, world_point: np.ndarray) -> np.ndarray:
        """3x5 Jacobian of a point fixed in `frame`, evaluated at its world position."""
        jac = np.zeros((3, N_JOINTS))
        if frame == BASE:
            return jac
        n_joints = 3 if frame == UPPER else 5
        rel = world_point[None, :] - self.centers[:n_joints]
        for j in range(n_joints):
            a = self.axes[j]
            r = rel[j]
            jac[:, j] = (
                a[1] * r[2] - a[2] * r[1],
                a[2] * r[0] - a[0] * r[2],
                a[0] * r[1] - a[1] * r[0],
            )
        return jac

    def batch_points(self, frames: np.ndarray, xyz: np.ndarray) -> np.ndarray:
        """World positions of points given per-point frame indices (0=base,1=upper,2=fore)."""
        world = np.empty_like(xyz)
        for fi, (rot, org) in enumerate(
            ((None, self.base), (self.r_upper, self.base), (self.r_fore, self.elbow))
        ):
            mask = frames == fi
            if not np.any(mask):
                continue
            world[mask] = xyz[mask] if rot is None else xyz[mask] @ rot.T
            world[mask] += org
        return world

    def batch_jacobians(self, frames: np.ndarray, world: np.ndarray) -> np.ndarray:
        """(P, 3, 5) point Jacobians for a batch of points."""
        jac = np.zeros((world.shape[0], 3, N_JOINTS))
        for j in range(N_JOINTS):
            moved = frames >= (1 if j < 3 else 2)
            if not np.any(moved):
                continue
            jac[moved, :, j] = _cross_rows(self.axes[j], world[moved] - self.centers[j])
        return jac


def muscle_geometry(
    model: ArmModel, kin: Kinematics, with_jacobian: bool = True
) -> tuple[np.ndarray, np.ndarray | None]:
    """Path lengths (mm) and their Jacobian (mm/rad) from one kinematics pass."""
    world = kin.batch_points(model._pt_frames, model._pt_xyz)
    segs = world[model._seg_b] - world[model._seg_a]
    norms = np.sqrt(np.sum(segs * segs, axis=1))
    lengths = np.bincount(model._seg_muscle, weights=norms, minlength=model.n_muscles)
    if not with_jacobian:
        return lengths * 1000.0, None
    point_jacs = kin.batch_jacobians(model._pt_frames, world)
    units = segs / norms[:, None]
    contrib = np.einsum(
        "sd,sdj->sj", units, point_jacs[model._seg_b] - point_jacs[model._seg_a]
    )
    jac = np.zeros((model.n_muscles, N_JOINTS))
    np.add.at(jac, model._seg_muscle, contrib)
    return lengths * 1000.0, jac * 1000.0


def path_lengths(model: ArmModel, q: np.ndarray, check_limits: bool = True) -> np.ndarray:
    """Polyline length of every muscle through its via points, in mm."""
    if check_limits:
        model.check_limits(q)
    return muscle_geometry(model, Kinematics(model, q), with_jacobian=False)[0]


def muscle_jacobian(model: ArmModel, q: np.ndarray, check_limits: bool = True) -> np.ndarray:
    """Analytic d(path_lengths)/dq, shape (M, 5), in mm/rad."""
    if check_limits:
        model.check_limits(q)
    return muscle_geometry(model, Kinematics(model, q))[1]


def elastic_tension(model: ArmModel, stretch_mm: np.ndarray) -> np.ndarray:
    """Series-element tension for given stretch: k1*s + k2*s^2 on s > 0, else 0."""
    s = np.asarray(stretch_mm, dtype=float)
    if not np.all(np.isfinite(s)):
        raise DomainError("stretch must be finite")
    sp = np.maximum(s, 0.0)
    return model.k1 * sp + model.k2 * sp * sp


def elastic_stiffness(model: ArmModel, stretch_mm: np.ndarray) -> np.ndarray:
    """df/ds of the elastic law, N/mm (0 on the slack side)."""
    s = np.asarray(stretch_mm, dtype=float)
    return np.where(s > 0.0, model.k1 + 2.0 * model.k2 * np.maximum(s, 0.0), 0.0)


def elastic_stretch_inverse(model: ArmModel, f: np.ndarray) -> np.ndarray:
    """Stretch (mm) realizing tension f; unique positive branch of the elastic law."""
    f = np.asarray(f, dtype=float)
    if np.any(f < 0.0):
        raise DomainError("tensions must be nonnegative")
    k1, k2 = model.k1, model.k2
    s = np.where(
        k2 > 0.0,
        (-k1 + np.sqrt(k1 * k1 + 4.0 * k2 * f)) / np.where(k2 > 0.0, 2.0 * k2, 1.0),
        f / k1,
    )
    return np.where(f == 0.0, 0.0, s)


def gravity_terms(model: ArmModel, kin: Kinematics) -> tuple[float, np.ndarray]:
    """Gravitational potential U (N*m) and generalized force -dU/dq."""
    u = 0.0
    tau = np.zeros(N_JOINTS)
    for mass, frame, com in (
        (model.upper_mass, UPPER, model.upper_com),
        (model.fore_mass, FORE, model.fore_com),
    ):
        p = kin.point(frame, com)
        u -= mass * float(model.gravity @ p)
        tau += mass * (model.gravity @ kin.point_jacobian(frame, p))
    return u, tau


def gravity_potential(model: ArmModel, q: np.ndarray) -> float:
    """Gravitational potential energy of both links, in N*m (J)."""
    return gravity_terms(model, Kinematics(model, q))[0]


def gravity_torque(model: ArmModel, q: np.ndarray, check_limits: bool = True) -> np.ndarray:
    """Generalized force of gravity, -dU/dq, in N*m (what the muscles must balance)."""
    if check_limits:
        model.check_limits(q)
    return gravity_terms(model, Kinematics(model, q))[1]


def _mirror_x(points):
    return [(frame, np.array([-x, y, z])) for frame, (x, y, z) in points]


def _mirror_y(points):
    return [(frame, np.array([x, -y, z])) for frame, (x, y, z) in points]


def default_arm(k1: float = 5.0, k2: float = 0.5) -> ArmModel:
    """Ten-muscle antagonistic layout: one mirror pair per DOF.

    Pairs are placed so moment-arm rows cancel pairwise at the neutral pose
    (pitch/roll pairs planar, yaw pairs with matched y:z anchor ratios), which
    keeps equal pretension torque-free there.  k1/k2 set every muscle's
    elastic element; softer values give a more teachable arm.
    """
    sp = [
        (BASE, np.array([0.07, 0.0, 0.06])),
        (BASE, np.array([0.055, 0.0, 0.01])),
        (UPPER, np.array([0.035, 0.0, -0.10])),
    ]
    sr = [
        (BASE, np.array([0.0, 0.07, 0.06])),
        (BASE, np.array([0.0, 0.055, 0.01])),
        (UPPER, np.array([0.0, 0.035, -0.10])),
    ]
    sy = [
        (BASE, np.array([0.07, 0.05, 0.05])),
        (BASE, np.array([0.05, 0.04, 0.04])),
        (UPPER, np.array([0.035, -0.045, -0.045])),
    ]
    ep = [
        (UPPER, np.array([0.05, 0.0, -0.13])),
        (UPPER, np.array([0.045, 0.0, -0.20])),
        (FORE, np.array([0.04, 0.0, -0.08])),
    ]
    ey = [
        (UPPER, np.array([0.05, 0.03, -0.12])),
        (UPPER, np.array([0.05, 0.05, -0.21])),
        (FORE, np.array([0.05, -0.05, -0.03])),
    ]
    muscles = [
        Muscle("S-p/flex", sp, k1, k2),
        Muscle("S-p/ext", _mirror_x(sp), k1, k2),
        Muscle("S-r/abd", sr, k1, k2),
        Muscle("S-r/add", _mirror_y(sr), k1, k2),
        Muscle("S-y/int", sy, k1, k2),
        Muscle("S-y/ext", _mirror_x(sy), k1, k2),
        Muscle("E-p/flex", ep, k1, k2),
        Muscle("E-p/ext", _mirror_x(ep), k1, k2),
        Muscle("E-y/int", ey, k1, k2),
        Muscle("E-y/ext", _mirror_x(ey), k1, k2),
    ]
    return ArmModel(muscles=muscles)


SCENARIO_JOINT_LIMITS = np.array(
    [
        [-0.2, 1.1],  # S-p
        [-0.6, 0.8],  # S-r
        [-0.7, 0.7],  # S-y
        [0.4, 1.7],   # E-p
        [-0.7, 0.7],  # E-y
    ]
)


def scenario_arm() -> ArmModel:
    """Arm tuned for the teaching experiments.

    Softer elastic elements than the default (fatter stretch margins keep
    wires taut under teaching pushes), yaw routings picked so both members of
    each yaw pair keep a usable moment arm across the whole working box, and
    joint limits restricted to that box: the elbow never straightens, which
    keeps the shoulder-yaw/elbow-yaw axes distinguishable and the sensed
    (l, f) -> joint-angle inverse unique.
    """
    sp = [
        (BASE, np.array([0.07, 0.0, 0.06])),
        (BASE, np.array([0.055, 0.0, 0.01])),
        (UPPER, np.array([0.035, 0.0, -0.10])),
    ]
    sr = [
        (BASE, np.array([0.0, 0.07, 0.06])),
        (BASE, np.array([0.0, 0.055, 0.01])),
        (UPPER, np.array([0.0, 0.035, -0.10])),
    ]
    sy = [
        (BASE, np.array([-0.039, 0.087, 0.0445])),
        (BASE, np.array([-0.03, 0.0669, 0.0145])),
        (UPPER, np.array([-0.0487, -0.0046, -0.0464])),
    ]
    ep = [
        (UPPER, np.array([0.06, 0.0, -0.13])),
        (UPPER, np.array([0.055, 0.0, -0.20])),
        (FORE, np.array([0.055, 0.0, -0.08])),
    ]
    ey = [
        (UPPER, np.array([0.0589, -0.0152, -0.1223])),
        (UPPER, np.array([0.0589, -0.0152, -0.1923])),
        (FORE, np.array([-0.0161, -0.0626, -0.0244])),
    ]
    k1, k2 = 1.2, 0.08
    muscles = [
        Muscle("S-p/flex", sp, k1, k2),
        Muscle("S-p/ext", _mirror_x(sp), k1, k2),
        Muscle("S-r/abd", sr, k1, k2),
        Muscle("S-r/add", _mirror_y(sr), k1, k2),
        Muscle("S-y/int", sy, k1, k2),
        Muscle("S-y/ext", _mirror_x(sy), k1, k2),
        Muscle("E-p/flex", ep, k1, k2),
        Muscle("E-p/ext", _mirror_x(ep), k1, k2),
        Muscle("E-y/int", ey, k1, k2),
        Muscle("E-y/ext", _mirror_x(ey), k1, k2),
    ]
    return ArmModel(muscles=muscles, joint_limits=SCENARIO_JOINT_LIMITS.copy())


def validate_arm(model: ArmModel) -> None:
    """Check the structural invariants: every muscle spans a joint, rank-5 moment arms."""
    g = muscle_jacobian(model, np.zeros(N_JOINTS), check_limits=False)
    spans = np.abs(g).max(axis=1)
    if np.any(spans < 1e-9):
        bad = [model.muscles[i].name for i in np.flatnonzero(spans < 1e-9)]
        raise DomainError(f"muscles spanning no joint: {', '.join(bad)}")
    if np.linalg.matrix_rank(g, tol=1e-6) < N_JOINTS:
        raise DomainError("moment-arm matrix is rank deficient at the neutral pose")


def save_arm(model: ArmModel, path: str) -> None:
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "upper_length": model.upper_length,
        "fore_length": model.fore_length,
        "upper_mass": model.upper_mass,
        "fore_mass": model.fore_mass,
        "upper_com": model.upper_com.tolist(),
        "fore_com": model.fore_com.tolist(),
        "gravity": model.gravity.tolist(),
        "joint_limits": model.joint_limits.tolist(),
        "base_position": model.base_position.tolist(),
        "muscles": [
            {
                "name": m.name,
                "k1": m.k1,
                "k2": m.k2,
                "points": [{"frame": fr, "xyz": xyz.tolist()} for fr, xyz in m.points],
            }
            for m in model.muscles
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)


def load_arm(path: str) -> ArmModel:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise DomainError(f"unsupported arm schema_version {doc.get('schema_version')!r}")
    muscles = [
        Muscle(
            m["name"],
            [(p["frame"], np.array(p["xyz"])) for p in m["points"]],
            k1=m["k1"],
            k2=m["k2"],
        )
        for m in doc["muscles"]
    ]
    return ArmModel(
        upper_length=doc["upper_length"],
        fore_length=doc["fore_length"],
        upper_mass=doc["upper_mass"],
        fore_mass=doc["fore_mass"],
        upper_com=np.array(doc["upper_com"]),
        fore_com=np.array(doc["fore_com"]),
        gravity=np.array(doc["gravity"]),
        joint_limits=np.array(doc["joint_limits"]),
        base_position=np.array(doc["base_position"]),
        muscles=muscles,
    )
