"""Three-phase teaching sessions: original motion, teaching under external
force, reproduction, plus trajectory recording and the evaluation metric.

The 8 ms control loop runs: interpolate the target pose, solve target
tensions, build the length command through the intersensory model, apply the
tension limiter, apply the muscle stiffness servo on measured tension, step
the plant.  Frames are recorded every 0.2 s (25 ticks) with sensors read
before the tick's plant step, so each frame's (l_data, f_data, theta_true)
triple is self-consistent.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .arm import ArmModel, Kinematics, N_JOINTS, elastic_tension, path_lengths
from .compensation import (
    LimiterParams,
    LimiterState,
    StiffnessParams,
    Variant,
    assemble_reproduction,
    limiter_step,
    target_muscle_length,
)
from .errors import DataError, DomainError
from .intersensory import solve_f_ref
from .plant import (
    CONTROL_DT,
    ExternalWrench,
    NoiseConfig,
    PLANT_TIME_CONSTANT,
    PlantState,
    ZERO_WRENCH,
    plant_step,
    solve_equilibrium,
)

FRAME_DT = 0.2  # s between recorded frames
TICKS_PER_FRAME = 25  # FRAME_DT / CONTROL_DT
TRAJECTORY_SCHEMA_VERSION = 1


def _smoothstep(u: float) -> float:
    return u * u * (3.0 - 2.0 * u)


@dataclass
class JointPath:
    """Keyframed target-pose path, C1-smooth between knots."""

    keys: list[tuple[float, np.ndarray]]

    def __post_init__(self):
        if not self.keys:
            raise DomainError("path needs at least one keyframe")
        self.keys = [(float(t), np.asarray(q, dtype=float)) for t, q in self.keys]
        times = [t for t, _ in self.keys]
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise DomainError("keyframe times must strictly increase")
        if times[0] != 0.0:
            raise DomainError("path must start at t = 0")

    @property
    def duration(self) -> float:
        return self.keys[-1][0]

    def at(self, t: float) -> np.ndarray:
        keys = self.keys
        if t <= keys[0][0]:
            return keys[0][1].copy()
        if t >= keys[-1][0]:
            return keys[-1][1].copy()
        for (t0, q0), (t1, q1) in zip(keys, keys[1:]):
            if t0 <= t <= t1:
                u = _smoothstep((t - t0) / (t1 - t0))
                return q0 + u * (q1 - q0)
        return keys[-1][1].copy()

    @classmethod
    def hold(cls, q, duration: float) -> "JointPath":
        return cls([(0.0, np.asarray(q, dtype=float)), (float(duration), np.asarray(q, dtype=float))])


@dataclass
class WrenchProfile:
    """Piecewise-linear force schedule applied at a named attachment point."""

    knots: list[tuple[float, np.ndarray]] = field(default_factory=list)
    attachment: str = "end_effector"

    def __post_init__(self):
        self.knots = [(float(t), np.asarray(fv, dtype=float)) for t, fv in self.knots]
        times = [t for t, _ in self.knots]
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise DomainError("wrench knot times must strictly increase")
        for _, fv in self.knots:
            ExternalWrench(fv, self.attachment)  # validates shape and cap

    @property
    def is_zero(self) -> bool:
        return all(not np.any(fv) for _, fv in self.knots)

    def force_at(self, t: float) -> np.ndarray:
        if not self.knots:
            return np.zeros(3)
        times = np.array([k for k, _ in self.knots])
        forces = np.stack([fv for _, fv in self.knots])
        out = np.empty(3)
        for c in range(3):
            out[c] = np.interp(t, times, forces[:, c])
        return out

    def wrench_at(self, t: float) -> ExternalWrench:
        f = self.force_at(t)
        if not np.any(f):
            return ZERO_WRENCH
        return ExternalWrench(f, self.attachment)

    def to_dict(self) -> dict:
        return {
            "attachment": self.attachment,
            "knots": [{"t": t, "force": fv.tolist()} for t, fv in self.knots],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "WrenchProfile":
        return cls(
            knots=[(k["t"], np.array(k["force"])) for k in doc.get("knots", [])],
            attachment=doc.get("attachment", "end_effector"),
        )


@dataclass
class LimiterConfig:
    enabled: bool = False
    f_max: float = 100.0


@dataclass
class TimedFrame:
    """One 0.2 s record; muscle fields share the model's muscle count."""

    t: int
    theta_ref: np.ndarray
    l_ref: np.ndarray
    f_ref: np.ndarray
    l_data: np.ndarray
    f_data: np.ndarray
    delta_le: np.ndarray
    theta_true: np.ndarray


@dataclass
class Trajectory:
    """Frame arrays (first axis = frame index) plus run metadata."""

    theta_ref: np.ndarray
    l_ref: np.ndarray
    f_ref: np.ndarray
    l_data: np.ndarray
    f_data: np.ndarray
    delta_le: np.ndarray
    theta_true: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def __len__(self) -> int:
        return self.theta_ref.shape[0]

    def validate(self):
        n = self.theta_ref.shape[0]
        if n < 2:
            raise DataError(f"trajectory needs at least 2 frames, got {n}")
        m = self.l_ref.shape[1]
        for name in ("l_ref", "f_ref", "l_data", "f_data", "delta_le"):
            arr = getattr(self, name)
            if arr.shape != (n, m):
                raise DataError(f"field {name} has shape {arr.shape}, want {(n, m)}")
        for name in ("theta_ref", "theta_true"):
            arr = getattr(self, name)
            if arr.shape != (n, N_JOINTS):
                raise DataError(f"field {name} has shape {arr.shape}, want {(n, N_JOINTS)}")

    @property
    def n_muscles(self) -> int:
        return self.l_ref.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) * FRAME_DT

    def frame(self, i: int) -> TimedFrame:
        return TimedFrame(
            t=i,
            theta_ref=self.theta_ref[i],
            l_ref=self.l_ref[i],
            f_ref=self.f_ref[i],
            l_data=self.l_data[i],
            f_data=self.f_data[i],
            delta_le=self.delta_le[i],
            theta_true=self.theta_true[i],
        )

    def save(self, path: str) -> None:
        """CSV rows plus a JSON metadata sidecar at path + '.meta.json'."""
        m = self.n_muscles
        header = (
            ["t"]
            + [f"theta_ref_{i}" for i in range(N_JOINTS)]
            + [f"l_ref_{i}" for i in range(m)]
            + [f"f_ref_{i}" for i in range(m)]
            + [f"l_data_{i}" for i in range(m)]
            + [f"f_data_{i}" for i in range(m)]
            + [f"delta_le_{i}" for i in range(m)]
            + [f"theta_true_{i}" for i in range(N_JOINTS)]
        )
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(len(self)):
                row = np.concatenate(
                    [
                        [i],
                        self.theta_ref[i],
                        self.l_ref[i],
                        self.f_ref[i],
                        self.l_data[i],
                        self.f_data[i],
                        self.delta_le[i],
                        self.theta_true[i],
                    ]
                )
                writer.writerow([repr(float(v)) for v in row])
        meta = dict(self.metadata)
        meta["schema_version"] = TRAJECTORY_SCHEMA_VERSION
        meta["frames"] = len(self)
        meta["n_muscles"] = m
        meta["frame_dt"] = FRAME_DT
        with open(path + ".meta.json", "w") as fh:
            json.dump(meta, fh, indent=2)

    @classmethod
    def load(cls, path: str) -> "Trajectory":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            data = np.array([[float(v) for v in row] for row in reader])
        try:
            with open(path + ".meta.json") as fh:
                meta = json.load(fh)
        except FileNotFoundError:
            meta = {}
        m = meta.get("n_muscles", (data.shape[1] - 1 - 2 * N_JOINTS) // 5)
        c = 1
        fields = {}
        fields["theta_ref"] = data[:, c : c + N_JOINTS]
        c += N_JOINTS
        for name in ("l_ref", "f_ref", "l_data", "f_data", "delta_le"):
            fields[name] = data[:, c : c + m]
            c += m
        fields["theta_true"] = data[:, c : c + N_JOINTS]
        return cls(metadata=meta, **fields)


class ControlLoop:
    """Owns one run: plant state, servo and limiter state, frame recorder."""

    def __init__(
        self,
        arm: ArmModel,
        model,
        stiffness: StiffnessParams,
        limiter: LimiterConfig,
        f_min: float = 20.0,
        noise: NoiseConfig | None = None,
        seed: int = 0,
        plant_tau: float = PLANT_TIME_CONSTANT,
    ):
        self.arm = arm
        self.model = model
        self.stiffness = stiffness
        self.limiter_cfg = limiter
        self.f_min = f_min
        self.noise = noise or NoiseConfig()
        self.rng = np.random.default_rng(seed)
        self.plant_tau = plant_tau
        self.limiter = LimiterState(
            LimiterParams(f_max=limiter.f_max), np.zeros(arm.n_muscles)
        )
        self.tick_index = 0
        self.state: PlantState | None = None
        self.sensed_l = np.zeros(arm.n_muscles)
        self.sensed_f = np.zeros(arm.n_muscles)

    @property
    def sim_time(self) -> float:
        return self.tick_index * CONTROL_DT

    def start_tracking(self, theta0) -> None:
        """Settle the plant at the equilibrium of the first command."""
        sol = solve_f_ref(self.model, self.arm, theta0, f_min=self.f_min)
        l_ref0 = target_muscle_length(self.model, theta0, sol.f, self.stiffness)
        servo0 = (sol.f - self.stiffness.f_bias) / self.stiffness.k
        self._start_from_command(l_ref0 + servo0, f_expected=sol.f, q_seed=theta0)
        self._f_warm = sol.f

    def _start_from_command(self, motor0, f_expected, q_seed) -> None:
        q0 = solve_equilibrium(self.arm, motor0, ZERO_WRENCH, q_seed=q_seed)
        self.state = PlantState(q=q0.copy(), q_eq_seed=q0.copy())
        self.sensed_l = np.asarray(motor0, dtype=float).copy()
        self.sensed_f = elastic_tension(
            self.arm, path_lengths(self.arm, q0, check_limits=False) - motor0
        )
        self.tick_index = 0

    def tracking_tick(self, path: JointPath, wrench: ExternalWrench) -> dict:
        """One 8 ms tick of the original/teaching pipeline; returns the record."""
        t = self.sim_time
        theta_r = self.arm.clamp(path.at(t))
        sol = solve_f_ref(
            self.model, self.arm, theta_r, f_min=self.f_min, f_warm=self._f_warm
        )
        self._f_warm = sol.f
        l_ref = target_muscle_length(self.model, theta_r, sol.f, self.stiffness)
        return self._actuate(l_ref, theta_r, sol.f, wrench)

    def _actuate(self, l_ref, theta_r, f_ref, wrench: ExternalWrench) -> dict:
        if self.limiter_cfg.enabled:
            self.limiter = limiter_step(self.limiter, self.sensed_f)
        servo = (self.sensed_f - self.stiffness.f_bias) / self.stiffness.k
        motor = l_ref + self.limiter.delta_le + servo
        record = {
            "theta_ref": theta_r.copy(),
            "l_ref": np.asarray(l_ref, dtype=float).copy(),
            "f_ref": np.asarray(f_ref, dtype=float).copy(),
            "l_data": self.sensed_l.copy(),
            "f_data": self.sensed_f.copy(),
            "delta_le": self.limiter.delta_le.copy(),
            "theta_true": self.state.q.copy(),
        }
        self.sensed_l, self.sensed_f, _ = plant_step(
            self.arm,
            self.state,
            motor,
            wrench,
            tau=self.plant_tau,
            noise=self.noise,
            rng=self.rng,
        )
        self.tick_index += 1
        return record


def _n_frames(duration: float) -> int:
    n = int(round(duration / FRAME_DT)) + 1
    if n < 2:
        raise DataError("path too short: need at least 2 frames (0.2 s)")
    return n


def _run_tracking(
    arm,
    model,
    path: JointPath,
    wrench_profile: WrenchProfile | None,
    stiffness: StiffnessParams,
    limiter: LimiterConfig,
    f_min: float,
    noise: NoiseConfig | None,
    seed: int,
    metadata: dict,
) -> Trajectory:
    n_frames = _n_frames(path.duration)
    loop = ControlLoop(arm, model, stiffness, limiter, f_min, noise, seed)
    loop.start_tracking(path.at(0.0))
    records = []
    total_ticks = (n_frames - 1) * TICKS_PER_FRAME + 1
    for k in range(total_ticks):
        wrench = (
            wrench_profile.wrench_at(loop.sim_time) if wrench_profile is not None else ZERO_WRENCH
        )
        rec = loop.tracking_tick(path, wrench)
        if k % TICKS_PER_FRAME == 0:
            records.append(rec)
    meta = dict(metadata)
    meta.update(
        limiter_enabled=limiter.enabled,
        f_max=limiter.f_max if limiter.enabled else None,
        f_min=f_min,
        stiffness_k=stiffness.k,
        f_bias=stiffness.f_bias,
        seed=seed,
        model_kind=model.kind,
        noise_tension_sigma=(noise.tension_sigma if noise else 0.0),
    )
    return Trajectory(
        theta_ref=np.stack([r["theta_ref"] for r in records]),
        l_ref=np.stack([r["l_ref"] for r in records]),
        f_ref=np.stack([r["f_ref"] for r in records]),
        l_data=np.stack([r["l_data"] for r in records]),
        f_data=np.stack([r["f_data"] for r in records]),
        delta_le=np.stack([r["delta_le"] for r in records]),
        theta_true=np.stack([r["theta_true"] for r in records]),
        metadata=meta,
    )


def run_original(
    arm,
    model,
    path: JointPath,
    stiffness: StiffnessParams | None = None,
    limiter: LimiterConfig | None = None,
    f_min: float = 20.0,
    noise: NoiseConfig | None = None,
    seed: int = 0,
) -> Trajectory:
    """Phase (a): track the target path with no external force."""
    return _run_tracking(
        arm,
        model,
        path,
        None,
        stiffness or StiffnessParams(),
        limiter or LimiterConfig(),
        f_min,
        noise,
        seed,
        {"phase": "original"},
    )


def run_teaching(
    arm,
    model,
    path: JointPath,
    wrench_profile: WrenchProfile,
    stiffness: StiffnessParams | None = None,
    limiter: LimiterConfig | None = None,
    f_min: float = 20.0,
    noise: NoiseConfig | None = None,
    seed: int = 0,
) -> Trajectory:
    """Phase (b): same command pipeline, external force applied to the plant."""
    return _run_tracking(
        arm,
        model,
        path,
        wrench_profile,
        stiffness or StiffnessParams(),
        limiter or LimiterConfig(),
        f_min,
        noise,
        seed,
        {"phase": "teaching", "wrench": wrench_profile.to_dict()},
    )


def run_reproduction(
    arm,
    model,
    taught: Trajectory,
    variant: Variant,
    stiffness: StiffnessParams | None = None,
    limiter: LimiterConfig | None = None,
    noise: NoiseConfig | None = None,
    seed: int = 0,
    muscle_mask: np.ndarray | None = None,
) -> Trajectory:
    """Phase (c): replay the variant-assembled commands with no external force.

    Commands are linearly interpolated between the 0.2 s frames; the
    stiffness servo and (if configured) the limiter run live.
    """
    variant = Variant(variant)
    stiffness = stiffness or StiffnessParams()
    limiter = limiter or LimiterConfig()
    commands = assemble_reproduction(taught, variant, model, stiffness, muscle_mask)
    n_frames = commands.shape[0]
    node_times = np.arange(n_frames) * FRAME_DT

    loop = ControlLoop(
        arm, model, stiffness, limiter, taught.metadata.get("f_min", 20.0), noise, seed
    )
    servo0 = (taught.f_ref[0] - stiffness.f_bias) / stiffness.k
    loop._start_from_command(
        commands[0] + servo0, f_expected=taught.f_ref[0], q_seed=taught.theta_ref[0]
    )

    records = []
    total_ticks = (n_frames - 1) * TICKS_PER_FRAME + 1
    tick_times = np.arange(total_ticks) * CONTROL_DT
    sent_all = np.empty((total_ticks, commands.shape[1]))
    for c in range(commands.shape[1]):
        sent_all[:, c] = np.interp(tick_times, node_times, commands[:, c])
    for k in range(total_ticks):
        idx = min(k // TICKS_PER_FRAME, n_frames - 1)
        rec = loop._actuate(
            sent_all[k], taught.theta_ref[idx], taught.f_ref[idx], ZERO_WRENCH
        )
        if k % TICKS_PER_FRAME == 0:
            records.append(rec)
    meta = {
        "phase": "reproduction",
        "variant": variant.value,
        "limiter_enabled": limiter.enabled,
        "f_max": limiter.f_max if limiter.enabled else None,
        "stiffness_k": stiffness.k,
        "f_bias": stiffness.f_bias,
        "seed": seed,
        "model_kind": model.kind,
        "taught_metadata": {k: v for k, v in taught.metadata.items() if k != "taught_metadata"},
    }
    return Trajectory(
        theta_ref=np.stack([r["theta_ref"] for r in records]),
        l_ref=np.stack([r["l_ref"] for r in records]),
        f_ref=np.stack([r["f_ref"] for r in records]),
        l_data=np.stack([r["l_data"] for r in records]),
        f_data=np.stack([r["f_data"] for r in records]),
        delta_le=np.stack([r["delta_le"] for r in records]),
        theta_true=np.stack([r["theta_true"] for r in records]),
        metadata=meta,
    )


@dataclass
class MetricResult:
    """Joint- and time-averaged absolute error plus its breakdown."""

    e_rad: float
    e_deg: float
    per_joint_rad: np.ndarray  # (5,) time-mean per joint
    per_frame_rad: np.ndarray  # (T, 5) |difference| per frame and joint

    def to_dict(self) -> dict:
        return {
            "E_rad": self.e_rad,
            "E_deg": self.e_deg,
            "per_joint_rad": self.per_joint_rad.tolist(),
        }


def metric_E(taught: Trajectory, reproduced: Trajectory) -> MetricResult:
    """Mean over frames and joints of |theta_true difference|."""
    if len(taught) != len(reproduced):
        raise DataError(
            f"frame counts differ: {len(taught)} vs {len(reproduced)}"
        )
    diff = np.abs(taught.theta_true - reproduced.theta_true)
    e = float(diff.mean())
    return MetricResult(
        e_rad=e,
        e_deg=float(np.degrees(e)),
        per_joint_rad=diff.mean(axis=0),
        per_frame_rad=diff,
    )


def comparison_experiment(
    arm,
    model,
    path: JointPath,
    wrench_profile: WrenchProfile,
    stiffness: StiffnessParams | None = None,
    limiter: LimiterConfig | None = None,
    f_min: float = 20.0,
    noise: NoiseConfig | None = None,
    seed: int = 0,
    variants: list[Variant] | None = None,
) -> dict:
    """Original -> teaching -> reproduction under every variant; E table.

    Per-variant failures are recorded in the report and do not stop the run.
    """
    stiffness = stiffness or StiffnessParams()
    limiter = limiter or LimiterConfig()
    variants = variants or list(Variant)
    original = run_original(arm, model, path, stiffness, limiter, f_min, noise, seed)
    taught = run_teaching(
        arm, model, path, wrench_profile, stiffness, limiter, f_min, noise, seed
    )
    report = {
        "limiter_enabled": limiter.enabled,
        "f_max": limiter.f_max if limiter.enabled else None,
        "f_min": f_min,
        "seed": seed,
        "model_kind": model.kind,
        "frames": len(taught),
        "variants": {},
        "errors": {},
    }
    curves = {}
    trajectories = {"original": original, "teaching": taught}
    for variant in variants:
        try:
            rep = run_reproduction(
                arm, model, taught, variant, stiffness, limiter, noise, seed
            )
            res = metric_E(taught, rep)
            report["variants"][variant.value] = res.to_dict()
            curves[variant.value] = res.per_frame_rad
            trajectories[variant.value] = rep
        except Exception as err:  # keep going per spec
            report["errors"][variant.value] = f"{type(err).__name__}: {err}"
    report["curves"] = {k: v.tolist() for k, v in curves.items()}
    return {"report": report, "trajectories": trajectories}


def end_effector_path(arm: ArmModel, traj: Trajectory) -> np.ndarray:
    """(T, 3) world positions of the end-effector along theta_true."""
    frame, xyz = arm.attachment_point("end_effector")
    out = np.empty((len(traj), 3))
    for i in range(len(traj)):
        out[i] = Kinematics(arm, traj.theta_true[i]).point(frame, xyz)
    return out
