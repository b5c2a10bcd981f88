"""Static intersensory maps between joint angles, tensions, and muscle lengths.

Two realizations of the pair l = h_l(theta, f), theta = h_theta(l, f):

* an exact oracle derived from the plant geometry and the elastic law,
* a supervised surrogate (two independent regressors) with accuracy set by
  the size of its training set.

Also: the gravity-balancing target-tension solver and training-set tooling.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .arm import (
    ArmModel,
    Kinematics,
    N_JOINTS,
    elastic_stretch_inverse,
    gravity_torque,
    muscle_geometry,
    muscle_jacobian,
    path_lengths,
)
from .errors import DataError, DomainError, EstimationError
from .nets import MLP, Normalizer
from .tension import TensionSolution, distribute_tensions

WEIGHTS_SCHEMA_VERSION = 1
SLACK_TENSION = 1e-6  # N, below this a sensed muscle is treated as slack


class OracleIntersensory:
    """Exact maps computed from the generating plant."""

    kind = "oracle"

    def __init__(self, arm: ArmModel):
        self.arm = arm
        self.n_muscles = arm.n_muscles

    def eval_hl(self, theta, f) -> np.ndarray:
        """Motor-side length holding `theta` at tension `f` (mm)."""
        theta = np.asarray(theta, dtype=float)
        f = np.asarray(f, dtype=float)
        self.arm.check_limits(theta)
        if np.any(f < 0.0):
            raise DomainError("tensions must be nonnegative")
        return path_lengths(self.arm, theta) - elastic_stretch_inverse(self.arm, f)

    def eval_h2(self, theta, f) -> np.ndarray:
        """Hardware-elongation compensation, eval_hl(theta, f) - eval_hl(theta, 0)."""
        return self.eval_hl(theta, f) - self.eval_hl(theta, np.zeros(self.n_muscles))

    def eval_htheta(self, l, f, seed=None) -> np.ndarray:
        """Joint angles consistent with sensed (l, f), by damped Gauss-Newton.

        Solves path_lengths(q) = l + stretch(f) for taut muscles; slack
        muscles (f ~ 0) only contribute when they would have to be taut
        (path longer than the commanded length).
        """
        l = np.asarray(l, dtype=float)
        f = np.asarray(f, dtype=float)
        if np.any(f < 0.0):
            raise DomainError("tensions must be nonnegative")
        taut = f > SLACK_TENSION
        target = l + elastic_stretch_inverse(self.arm, f)
        if seed is None:
            seed = self.arm.joint_limits.mean(axis=1)
        seed = self.arm.clamp(np.asarray(seed, dtype=float))

        last_err = None
        for q0 in self._est_seeds(seed):
            try:
                return self._estimate_from(q0, target, taut)
            except EstimationError as err:
                last_err = err
        raise last_err

    def _est_seeds(self, seed: np.ndarray):
        yield seed
        center = self.arm.joint_limits.mean(axis=1)
        yield center
        span = self.arm.joint_limits[:, 1] - self.arm.joint_limits[:, 0]
        for frac in (-0.25, 0.25):
            yield self.arm.clamp(center + frac * span)

    def _estimate_from(self, q_start, target, taut) -> np.ndarray:
        q = q_start.copy()

        def residual(q0):
            p, jac = muscle_geometry(self.arm, Kinematics(self.arm, q0))
            r = p - target
            active = taut | (r > 0.0)
            return r[active], jac[active]

        r, jac = residual(q)
        cost = float(r @ r)
        lam = 1e-3
        for _ in range(200):
            if not r.size or float(np.max(np.abs(r))) < 1e-9:
                return q
            stepped = False
            for _ in range(25):
                try:
                    delta = np.linalg.solve(
                        jac.T @ jac + lam * np.eye(N_JOINTS), -(jac.T @ r)
                    )
                except np.linalg.LinAlgError:
                    lam *= 10.0
                    continue
                q_try = self.arm.clamp(q + delta)
                r_try, jac_try = residual(q_try)
                cost_try = float(r_try @ r_try)
                if cost_try < cost:
                    q, r, jac, cost = q_try, r_try, jac_try, cost_try
                    lam = max(lam * 0.3, 1e-10)
                    stepped = True
                    break
                lam *= 10.0
                if lam > 1e12:
                    break
            if not stepped:
                break
        norm = float(np.max(np.abs(r))) if r.size else 0.0
        if norm < 1e-6:
            return q
        raise EstimationError("joint-angle estimation did not converge", norm)


class LearnedIntersensory:
    """Supervised surrogate: two regressors plus frozen normalizations."""

    kind = "learned"

    def __init__(
        self,
        net_l: MLP,
        net_theta: MLP,
        norm_theta: Normalizer,
        norm_f: Normalizer,
        norm_l: Normalizer,
        n_muscles: int,
        metadata: dict | None = None,
    ):
        self.net_l = net_l
        self.net_theta = net_theta
        self.norm_theta = norm_theta
        self.norm_f = norm_f
        self.norm_l = norm_l
        self.n_muscles = n_muscles
        self.metadata = metadata or {}

    def eval_hl(self, theta, f) -> np.ndarray:
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        f = np.atleast_2d(np.asarray(f, dtype=float))
        x = np.hstack([self.norm_theta.encode(theta), self.norm_f.encode(f)])
        out = self.norm_l.decode(self.net_l.forward(x))
        return out[0] if out.shape[0] == 1 else out

    def eval_h2(self, theta, f) -> np.ndarray:
        zero = np.zeros_like(np.atleast_2d(f))
        out = self.eval_hl(theta, f) - self.eval_hl(theta, zero[0] if zero.shape[0] == 1 else zero)
        return out

    def eval_htheta(self, l, f, seed=None) -> np.ndarray:
        l = np.atleast_2d(np.asarray(l, dtype=float))
        f = np.atleast_2d(np.asarray(f, dtype=float))
        x = np.hstack([self.norm_l.encode(l), self.norm_f.encode(f)])
        out = self.norm_theta.decode(self.net_theta.forward(x))
        return out[0] if out.shape[0] == 1 else out

    def save(self, path: str) -> None:
        doc = {
            "schema_version": WEIGHTS_SCHEMA_VERSION,
            "n_muscles": self.n_muscles,
            "net_l": self.net_l.to_dict(),
            "net_theta": self.net_theta.to_dict(),
            "norm_theta": self.norm_theta.to_dict(),
            "norm_f": self.norm_f.to_dict(),
            "norm_l": self.norm_l.to_dict(),
            "metadata": self.metadata,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)

    @classmethod
    def load(cls, path: str) -> "LearnedIntersensory":
        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("schema_version") != WEIGHTS_SCHEMA_VERSION:
            raise DataError(f"unsupported weights schema_version {doc.get('schema_version')!r}")
        return cls(
            MLP.from_dict(doc["net_l"]),
            MLP.from_dict(doc["net_theta"]),
            Normalizer.from_dict(doc["norm_theta"]),
            Normalizer.from_dict(doc["norm_f"]),
            Normalizer.from_dict(doc["norm_l"]),
            doc["n_muscles"],
            doc.get("metadata", {}),
        )


def solve_f_ref(
    model,
    arm: ArmModel,
    theta_ref,
    f_min: float = 10.0,
    lam: float = 1e-4,
    f_warm: np.ndarray | None = None,
    polish: bool = True,
) -> TensionSolution:
    """Target tensions balancing gravity at theta_ref, each >= f_min.

    Moment arms come from the arm geometry (sign convention: positive tension
    produces joint torque -G^T f, so balance means G^T f = gravity torque).
    The `model` argument fixes the muscle count contract; the maps themselves
    are not needed for torque balance.
    """
    theta_ref = np.asarray(theta_ref, dtype=float)
    arm.check_limits(theta_ref)
    if model is not None and getattr(model, "n_muscles", arm.n_muscles) != arm.n_muscles:
        raise DomainError("intersensory model and arm disagree on muscle count")
    g = muscle_jacobian(arm, theta_ref)
    tau = gravity_torque(arm, theta_ref)
    return distribute_tensions(g, tau, f_min=f_min, lam=lam, f_warm=f_warm, polish=polish)


@dataclass
class TrainingSet:
    """Static (theta, f, l) triples sampled from the plant relations."""

    theta: np.ndarray  # (n, 5) rad
    f: np.ndarray  # (n, M) N
    l: np.ndarray  # (n, M) mm
    seed: int
    f_min: float = 10.0

    def __len__(self) -> int:
        return self.theta.shape[0]

    def save_csv(self, path: str) -> None:
        m = self.f.shape[1]
        header = (
            [f"theta_{i}" for i in range(N_JOINTS)]
            + [f"f_{i}" for i in range(m)]
            + [f"l_{i}" for i in range(m)]
        )
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in np.hstack([self.theta, self.f, self.l]):
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def load_csv(cls, path: str, seed: int = -1) -> "TrainingSet":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            data = np.array([[float(v) for v in row] for row in reader])
        m = (len(header) - N_JOINTS) // 2
        return cls(
            theta=data[:, :N_JOINTS],
            f=data[:, N_JOINTS : N_JOINTS + m],
            l=data[:, N_JOINTS + m :],
            seed=seed,
        )


def sample_training_set(
    arm: ArmModel,
    n: int,
    seed: int,
    f_min: float = 10.0,
    tension_jitter: float = 30.0,
) -> TrainingSet:
    """n static triples: uniform poses, gravity tensions plus uniform offsets."""
    if n < 1:
        raise DomainError("need at least one sample")
    rng = np.random.default_rng(seed)
    lo, hi = arm.joint_limits[:, 0], arm.joint_limits[:, 1]
    thetas = rng.uniform(lo, hi, size=(n, N_JOINTS))
    fs = np.empty((n, arm.n_muscles))
    ls = np.empty((n, arm.n_muscles))
    for i in range(n):
        # Ridge solution only: exact-balance polishing is a control-loop
        # concern and can spike tensions near moment-arm degeneracies.
        sol = solve_f_ref(None, arm, thetas[i], f_min=f_min, polish=False)
        fs[i] = sol.f + rng.uniform(0.0, tension_jitter, arm.n_muscles)
        ls[i] = path_lengths(arm, thetas[i]) - elastic_stretch_inverse(arm, fs[i])
    return TrainingSet(theta=thetas, f=fs, l=ls, seed=seed, f_min=f_min)


def train_surrogate(
    data: TrainingSet,
    epochs: int = 400,
    seed: int = 0,
    hidden: tuple[int, ...] = (64, 64),
    holdout_fraction: float = 0.1,
) -> LearnedIntersensory:
    """Fit the two regressors by mini-batch Adam; report held-out errors.

    Deterministic for a fixed seed.  The held-out split is the tail of a
    seeded shuffle; errors land in the returned model's metadata.
    """
    if len(data) == 0:
        raise DataError("empty training set")
    rng = np.random.default_rng(seed)
    n = len(data)
    order = rng.permutation(n)
    n_hold = max(1, int(round(holdout_fraction * n))) if n > 1 else 0
    train_idx, hold_idx = order[: n - n_hold], order[n - n_hold :]

    norm_theta = Normalizer.fit(data.theta[train_idx])
    norm_f = Normalizer.fit(data.f[train_idx])
    norm_l = Normalizer.fit(data.l[train_idx])

    x_l = np.hstack([norm_theta.encode(data.theta), norm_f.encode(data.f)])
    y_l = norm_l.encode(data.l)
    x_t = np.hstack([norm_l.encode(data.l), norm_f.encode(data.f)])
    y_t = norm_theta.encode(data.theta)

    m = data.f.shape[1]
    net_l = MLP([N_JOINTS + m, *hidden, m], rng)
    net_theta = MLP([2 * m, *hidden, N_JOINTS], rng)
    if epochs > 0:
        net_l.train(x_l[train_idx], y_l[train_idx], epochs, rng)
        net_theta.train(x_t[train_idx], y_t[train_idx], epochs, rng)

    model = LearnedIntersensory(net_l, net_theta, norm_theta, norm_f, norm_l, m)
    metadata = {
        "samples": n,
        "epochs": epochs,
        "seed": seed,
        "hidden": list(hidden),
        "data_seed": data.seed,
    }
    if n_hold:
        pred_l = model.eval_hl(data.theta[hold_idx], data.f[hold_idx])
        err_l = np.abs(pred_l - data.l[hold_idx])
        pred_t = model.eval_htheta(data.l[hold_idx], data.f[hold_idx])
        err_t = np.abs(pred_t - data.theta[hold_idx])
        metadata.update(
            holdout_count=int(n_hold),
            holdout_l_max_mm=float(err_l.max()),
            holdout_l_rms_mm=float(np.sqrt(np.mean(err_l**2))),
            holdout_theta_max_rad=float(err_t.max()),
            holdout_theta_rms_rad=float(np.sqrt(np.mean(err_t**2))),
        )
    model.metadata = metadata
    return model
