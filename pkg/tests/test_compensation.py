import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tendonarm.arm import default_arm, path_lengths
from tendonarm.compensation import (
    LimiterParams,
    LimiterState,
    StiffnessParams,
    Variant,
    VARIANT_TERMS,
    assemble_reproduction,
    delta_h,
    delta_s,
    l_comp,
    limiter_step,
    target_muscle_length,
)
from tendonarm.errors import DataError, DomainError
from tendonarm.intersensory import OracleIntersensory, solve_f_ref
from tendonarm.session import TimedFrame, Trajectory


def make_frame(m=10, **over):
    base = dict(
        t=0,
        theta_ref=np.zeros(5),
        l_ref=np.full(m, 200.0),
        f_ref=np.full(m, 30.0),
        l_data=np.full(m, 200.0),
        f_data=np.full(m, 30.0),
        delta_le=np.zeros(m),
        theta_true=np.zeros(5),
    )
    base.update(over)
    return TimedFrame(**base)


def test_l_comp_worked_example():
    p = StiffnessParams(f_bias=30.0, k=10.0)
    out = l_comp(np.array([130.0, 30.0]), p)
    assert out[0] == pytest.approx(-10.0, abs=1e-12)
    assert out[1] == 0.0


def test_l_comp_linearity():
    p = StiffnessParams(f_bias=30.0, k=10.0)
    f = np.array([10.0, 50.0, 90.0])
    delta = np.array([5.0, -3.0, 12.0])
    assert np.allclose(l_comp(f + delta, p) - l_comp(f, p), -delta / p.k, atol=1e-12)


def test_stiffness_params_validated():
    with pytest.raises(DomainError):
        StiffnessParams(k=0.0)


def test_target_muscle_length_decomposition(sarm, oracle):
    p = StiffnessParams(f_bias=30.0, k=10.0)
    theta = np.array([0.5, 0.15, 0.1, 0.9, 0.2])
    f = solve_f_ref(oracle, sarm, theta, f_min=20.0).f
    out = target_muscle_length(oracle, theta, f, p)
    assert np.allclose(out - oracle.eval_hl(theta, f), l_comp(f, p), atol=1e-12)
    # At f = f_bias the compensation vanishes.
    fb = np.full(sarm.n_muscles, p.f_bias)
    assert np.allclose(
        target_muscle_length(oracle, theta, fb, p), oracle.eval_hl(theta, fb)
    )


def test_limiter_worked_examples():
    p = LimiterParams(f_max=100.0)
    state = LimiterState(p, np.zeros(1))
    out = limiter_step(state, np.array([150.0]))
    assert out.delta_le[0] == pytest.approx(0.15, abs=1e-12)

    state = LimiterState(p, np.array([0.5]))
    out = limiter_step(state, np.array([90.0]))
    assert out.delta_le[0] == pytest.approx(0.49, abs=1e-12)

    state = LimiterState(p, np.array([0.3]))
    out = limiter_step(state, np.array([100.0]))
    assert out.delta_le[0] == pytest.approx(0.3, abs=1e-15)


def test_limiter_converges_to_cap_without_overshoot():
    p = LimiterParams(f_max=100.0)
    state = LimiterState(p, np.zeros(1))
    f = np.array([120.0])  # d = 20, cap = 40 mm
    prev = 0.0
    for _ in range(20000):
        state = limiter_step(state, f)
        assert state.delta_le[0] >= prev - 1e-15
        assert state.delta_le[0] <= 40.0 + 1e-12
        prev = state.delta_le[0]
    assert state.delta_le[0] == pytest.approx(40.0, abs=1e-9)


def test_limiter_returns_to_zero_in_finite_steps():
    p = LimiterParams(f_max=100.0)
    state = LimiterState(p, np.array([2.0]))
    f = np.array([60.0])  # d = 40 -> decay 0.04 mm per step
    steps = 0
    while state.delta_le[0] > 0.0:
        state = limiter_step(state, f)
        steps += 1
        assert steps < 100
    assert state.delta_le[0] == 0.0


@settings(max_examples=50, deadline=None)
@given(
    fs=st.lists(st.floats(min_value=0.0, max_value=300.0), min_size=1, max_size=40),
    f_max=st.floats(min_value=10.0, max_value=200.0),
)
def test_limiter_invariants(fs, f_max):
    p = LimiterParams(f_max=f_max)
    state = LimiterState(p, np.zeros(1))
    for f in fs:
        before = state.delta_le[0]
        state = limiter_step(state, np.array([f]))
        after = state.delta_le[0]
        d = abs(f - f_max)
        assert after >= 0.0
        if f > f_max:
            assert after - before <= p.c_plus * d + 1e-12
        else:
            assert before - after <= p.c_minus * d + 1e-12


def test_delta_s_worked_example():
    p = StiffnessParams(f_bias=30.0, k=10.0)
    frame = make_frame(f_data=np.full(10, 80.0), f_ref=np.full(10, 30.0))
    assert np.allclose(delta_s(frame, p), 5.0, atol=1e-12)


def test_delta_s_antisymmetry():
    p = StiffnessParams(f_bias=30.0, k=10.0)
    a = make_frame(f_data=np.full(10, 91.0), f_ref=np.full(10, 37.0))
    b = make_frame(f_data=np.full(10, 37.0), f_ref=np.full(10, 91.0))
    assert np.allclose(delta_s(a, p), -delta_s(b, p), atol=1e-12)


def test_delta_h_oracle_closed_form():
    # With the exact maps the hardware term is the stretch difference and
    # does not depend on the pose content of the sensed lengths.
    arm = default_arm(k1=5.0, k2=0.5)
    oracle = OracleIntersensory(arm)
    theta = np.array([0.2, 0.1, -0.1, 0.8, 0.2])
    f_data = np.full(10, 100.0)
    f_ref = np.zeros(10)
    l_data = oracle.eval_hl(theta, f_data)
    frame = make_frame(l_data=l_data, f_data=f_data, f_ref=f_ref)
    out = delta_h(oracle, frame, est_seed=theta)
    assert np.allclose(out, 10.0, abs(1e-9))

    theta2 = np.array([0.6, -0.2, 0.3, 1.2, -0.4])
    frame2 = make_frame(l_data=oracle.eval_hl(theta2, f_data), f_data=f_data, f_ref=f_ref)
    out2 = delta_h(oracle, frame2, est_seed=theta2)
    assert np.allclose(out, out2, atol=1e-6)


def test_delta_h_zero_when_tension_matches(oracle, sarm):
    theta = np.array([0.5, 0.15, 0.1, 0.9, 0.2])
    f = solve_f_ref(oracle, sarm, theta, f_min=20.0).f
    frame = make_frame(l_data=oracle.eval_hl(theta, f), f_data=f, f_ref=f)
    assert np.allclose(delta_h(oracle, frame, est_seed=theta), 0.0, atol=1e-9)


def test_variant_parsing():
    assert Variant.from_name("W-HS") is Variant.W_HS
    assert Variant.from_name("W_HS") is Variant.W_HS
    with pytest.raises(DomainError):
        Variant.from_name("BOGUS")
    assert len(Variant) == 9
    assert VARIANT_TERMS[Variant.ALL] == "ehs"


def _mini_traj(oracle, sarm, n=3):
    theta = np.array([0.5, 0.15, 0.1, 0.9, 0.2])
    f_ref = solve_f_ref(oracle, sarm, theta, f_min=20.0).f
    f_data = f_ref + 12.0
    l_ref = oracle.eval_hl(theta, f_ref)
    l_data = oracle.eval_hl(theta, f_data)
    reps = lambda arr: np.tile(arr, (n, 1))
    return Trajectory(
        theta_ref=reps(theta),
        l_ref=reps(l_ref),
        f_ref=reps(f_ref),
        l_data=reps(l_data),
        f_data=reps(f_data),
        delta_le=reps(np.linspace(0.0, 0.9, sarm.n_muscles)),
        theta_true=reps(theta),
        metadata={},
    )


def test_assemble_none_is_identity(oracle, sarm):
    traj = _mini_traj(oracle, sarm)
    out = assemble_reproduction(traj, Variant.NONE, oracle, StiffnessParams())
    assert np.array_equal(out, traj.l_ref)


def test_assemble_additivity(oracle, sarm):
    traj = _mini_traj(oracle, sarm)
    p = StiffnessParams(f_bias=30.0, k=25.0)
    outs = {
        v: assemble_reproduction(traj, v, oracle, p)
        for v in (Variant.ALL, Variant.W_H, Variant.W_E, Variant.W_S)
    }
    lhs = outs[Variant.ALL] - traj.l_ref
    rhs = sum(outs[v] - traj.l_ref for v in (Variant.W_H, Variant.W_E, Variant.W_S))
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_assemble_mask_disables_muscles(oracle, sarm):
    traj = _mini_traj(oracle, sarm)
    p = StiffnessParams(f_bias=30.0, k=25.0)
    mask = np.ones(sarm.n_muscles, dtype=bool)
    mask[[6, 7]] = False
    out = assemble_reproduction(traj, Variant.ALL, oracle, p, muscle_mask=mask)
    assert np.array_equal(out[:, 6:8], traj.l_ref[:, 6:8])
    full = assemble_reproduction(traj, Variant.ALL, oracle, p)
    assert not np.allclose(out[:, :6], traj.l_ref[:, :6])
    assert np.allclose(out[:, :6], full[:, :6])


def test_assemble_rejects_malformed(oracle, sarm):
    traj = _mini_traj(oracle, sarm)
    traj.f_data = traj.f_data[:, :4]
    with pytest.raises(DataError):
        assemble_reproduction(traj, Variant.ALL, oracle, StiffnessParams())
