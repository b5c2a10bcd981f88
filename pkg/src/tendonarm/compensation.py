"""Muscle-level compensation control: stiffness offset, tension limiter,
elongation terms, and assembly of the nine reproduction variants.

All lengths in mm, tensions in N.  The three elongation terms added to the
commanded muscle length at reproduction are:

* ``delta_le`` - relaxation accumulated by the tension limiter during
  teaching (recorded per frame, not recomputed),
* ``delta_h``  - hardware elongation of the series elastic element inferred
  from the intersensory model,
* ``delta_s``  - software elongation produced by the muscle stiffness servo.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DataError, DomainError


@dataclass
class StiffnessParams:
    """Muscle stiffness servo constants: offset -(f - f_bias) / k."""

    f_bias: float = 30.0  # N
    k: float = 10.0  # N/mm

    def __post_init__(self):
        if self.k <= 0.0:
            raise DomainError("stiffness coefficient must be positive")


def l_comp(f, params: StiffnessParams) -> np.ndarray:
    """Stiffness-control length offset, componentwise -(f - f_bias) / k."""
    f = np.asarray(f, dtype=float)
    if np.any(f < 0.0):
        raise DomainError("tensions must be nonnegative")
    return -(f - params.f_bias) / params.k


def target_muscle_length(model, theta_ref, f_ref, params: StiffnessParams) -> np.ndarray:
    """Commanded muscle length: model length target plus the stiffness offset."""
    return model.eval_hl(theta_ref, f_ref) + l_comp(f_ref, params)


@dataclass
class LimiterParams:
    f_max: float = 100.0  # N, relaxation threshold
    c_minus: float = 0.001  # mm/N per period, re-tension rate bound
    c_plus: float = 0.003  # mm/N per period, relaxation rate bound
    c_gain: float = 2.0  # mm/N, relaxation magnitude cap
    period: float = 0.008  # s

    def __post_init__(self):
        if self.f_max <= 0.0:
            raise DomainError("limiter threshold must be positive")


@dataclass
class LimiterState:
    """Per-muscle relaxation of the tension limiter; delta_le >= 0 always."""

    params: LimiterParams
    delta_le: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.delta_le = np.asarray(self.delta_le, dtype=float)


def limiter_step(state: LimiterState, f_t) -> LimiterState:
    """One period of the muscle tension limiter.

    Over the threshold the muscle relaxes toward the cap c_gain*d at rate
    c_plus*d; under it the relaxation decays toward 0 at rate c_minus*d,
    with d = |f - f_max|.
    """
    f_t = np.asarray(f_t, dtype=float)
    if np.any(f_t < 0.0):
        raise DomainError("tensions must be nonnegative")
    p = state.params
    d = np.abs(f_t - p.f_max)
    over = f_t > p.f_max
    prev = state.delta_le
    relaxed = prev + np.minimum(p.c_gain * d - prev, p.c_plus * d)
    tensed = prev + np.maximum(-prev, -p.c_minus * d)
    return LimiterState(params=p, delta_le=np.where(over, relaxed, tensed))


class Variant(str, Enum):
    """Reproduction methods compared in the experiments."""

    ALL = "ALL"
    W_HS = "W-HS"
    W_ES = "W-ES"
    W_HE = "W-HE"
    W_H = "W-H"
    W_E = "W-E"
    W_S = "W-S"
    NONE = "NONE"
    THETA = "THETA"

    @classmethod
    def from_name(cls, name: str) -> "Variant":
        for v in cls:
            if v.value == name or v.name == name:
                return v
        valid = ", ".join(v.value for v in cls)
        raise DomainError(f"unknown variant {name!r}; valid: {valid}")


# Which elongation terms each additive variant sums ('e', 'h', 's').
VARIANT_TERMS = {
    Variant.ALL: "ehs",
    Variant.W_HS: "hs",
    Variant.W_ES: "es",
    Variant.W_HE: "eh",
    Variant.W_H: "h",
    Variant.W_E: "e",
    Variant.W_S: "s",
    Variant.NONE: "",
}


def delta_h(model, frame, est_seed=None) -> np.ndarray:
    """Hardware-elongation term from one recorded frame.

    Estimates the taught pose from the sensed pair, then differences the
    model's length map at sensed versus commanded tension; the pure-pose
    part cancels, leaving the elastic-element elongation change, sign
    flipped so adding it re-creates the taught stretch.
    """
    theta_est = model.eval_htheta(frame.l_data, frame.f_data, seed=est_seed)
    return -(model.eval_hl(theta_est, frame.f_data) - model.eval_hl(theta_est, frame.f_ref))


def delta_s(frame, params: StiffnessParams) -> np.ndarray:
    """Software-elongation term: -(l_comp(f_data) - l_comp(f_ref))."""
    return -(l_comp(frame.f_data, params) - l_comp(frame.f_ref, params))


def assemble_reproduction(
    traj,
    variant: Variant,
    model,
    params: StiffnessParams,
    muscle_mask: np.ndarray | None = None,
) -> np.ndarray:
    """Per-frame commanded muscle lengths for one reproduction variant.

    Additive variants add the selected elongation terms to the recorded
    commands; THETA rebuilds the command from the estimated taught pose.
    muscle_mask (bool, per muscle) restricts compensation to a subset;
    disabled muscles replay the original command unchanged.
    """
    variant = Variant(variant)
    n = len(traj)
    if n == 0:
        raise DataError("empty trajectory")
    m = traj.l_ref.shape[1]
    for name in ("l_ref", "f_ref", "l_data", "f_data", "delta_le"):
        arr = getattr(traj, name)
        if arr is None or arr.shape != (n, m) or not np.all(np.isfinite(arr)):
            raise DataError(f"trajectory field {name} missing or malformed")
    if muscle_mask is None:
        muscle_mask = np.ones(m, dtype=bool)
    muscle_mask = np.asarray(muscle_mask, dtype=bool)

    terms = VARIANT_TERMS.get(variant, "")
    needs_est = variant is Variant.THETA or "h" in terms
    commands = np.empty((n, m))
    est_seed = None
    for i in range(n):
        frame = traj.frame(i)
        if needs_est:
            theta_est = model.eval_htheta(frame.l_data, frame.f_data, seed=est_seed)
            est_seed = theta_est
        if variant is Variant.THETA:
            full = target_muscle_length(model, theta_est, frame.f_ref, params)
            commands[i] = np.where(muscle_mask, full, frame.l_ref)
            continue
        delta = np.zeros(m)
        if "e" in terms:
            delta += frame.delta_le
        if "h" in terms:
            delta -= model.eval_hl(theta_est, frame.f_data) - model.eval_hl(
                theta_est, frame.f_ref
            )
        if "s" in terms:
            delta += delta_s(frame, params)
        commands[i] = frame.l_ref + np.where(muscle_mask, delta, 0.0)
    return commands
